"""Hamiltonian dynamics of jet particles and passive-point advection.

The energy is the kernel quadratic form of the velocity-field coefficients
(a, b, c): with multi-index weights w_alpha in {a, b, c} and the sign
(-1)^|alpha| coming from the alternating pairing,

    H = 1/2 sum_{A,B} sum_{alpha,beta} (-1)^|alpha|
        w_alpha,A^i w_beta,B^i (d_{alpha+beta} K)(q_A - q_B).

Its gradient in the canonical variables reduces to contractions of each
particle's own data with the jet of the total velocity field at that
particle, so one batched jet evaluation per step drives everything:

    dq/dt     = v(q)
    dg/dt     = Dv(q) g
    ds/dt     = D2v(q)[g, g] + Dv(q) s
    dpi_q/dt  = -(a . Dv - b : D2v + c : D3v)(q)
    dpi_g/dt  = -(Dv^T-contraction with pi_g + 2 D2v : pi_s . g)
    dpi_s/dt  = -(Dv-contraction with pi_s)

Integration is fixed-step RK4; energy and the internal momenta are
recorded along the way as accuracy diagnostics rather than enforced.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backend import deriv_stack, velocity_jets
from .conservation import noether_gl_arrays, noether_s12_arrays
from .errors import DivergenceError, InvalidInputError
from .jet_algebra import sym_lower
from .phase import (
    SystemState,
    _bare_particle,
    _bare_system,
    _stack,
    spatial_momenta,
)

MAX_JET_ORDER = 3


@dataclass(frozen=True)
class Trajectory:
    """Fixed-step trajectory: snapshot states plus diagnostic time series."""

    times: np.ndarray
    states: tuple[SystemState, ...]
    series: dict[str, np.ndarray]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if len(times) != len(self.states) or len(times) == 0:
            raise InvalidInputError("times and states must be equal-length and non-empty")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise InvalidInputError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))


@dataclass(frozen=True)
class HamiltonianGradient:
    """Partial derivatives of the energy, block per phase-space variable."""

    dq: np.ndarray
    dpi_q: np.ndarray
    dg: np.ndarray | None = None
    dpi_g: np.ndarray | None = None
    ds: np.ndarray | None = None
    dpi_s: np.ndarray | None = None


# ---------------------------------------------------------------------------
# raw-array core (no dataclass overhead inside the integrator)

def _arrays_from_state(state: SystemState):
    return (
        _stack(state, "q"),
        _stack(state, "pi_q"),
        _stack(state, "g"),
        _stack(state, "pi_g"),
        _stack(state, "s"),
        _stack(state, "pi_s"),
    )


def _spatial_arrays(y, order):
    q, pi_q, g, pi_g, s, pi_s = y
    a = pi_q
    b = c = None
    if order >= 1:
        b = -np.einsum("nij,nlj->nil", pi_g, g)
    if order == 2:
        b = b - np.einsum("nijk,nljk->nil", pi_s, s)
        c = sym_lower(np.einsum("nijk,nlj,nmk->nilm", pi_s, g, g))
    return a, b, c


def _hamiltonian_arrays(q, a, b, c, sigma) -> float:
    R = q[:, None, :] - q[None, :, :]
    n_max = 4 if c is not None else (2 if b is not None else 0)
    D = deriv_stack(R, sigma, n_max)
    S = np.einsum("Ai,Bi,AB->", a, a, D[0])
    if b is not None:
        S += np.einsum("Ai,Bij,ABj->", a, b, D[1])
        S -= np.einsum("Aij,Bi,ABj->", b, a, D[1])
        S -= np.einsum("Aij,Bik,ABjk->", b, b, D[2])
    if c is not None:
        S += np.einsum("Ai,Bijk,ABjk->", a, c, D[2])
        S += np.einsum("Aijk,Bi,ABjk->", c, a, D[2])
        S -= np.einsum("Aij,Bikl,ABjkl->", b, c, D[3])
        S += np.einsum("Aijk,Bil,ABjkl->", c, b, D[3])
        S += np.einsum("Aijk,Bilm,ABjklm->", c, c, D[4])
    return 0.5 * float(S)


def _rhs(y, sigma, order):
    """Hamilton's equations; also returns the stage's (q, a, b, c)."""
    q, pi_q, g, pi_g, s, pi_s = y
    a, b, c = _spatial_arrays(y, order)
    jets = velocity_jets(q, q, a, b, c, sigma, order + 1)
    V0, V1 = jets[0], jets[1]
    dq = V0
    dpi_q = -np.einsum("ni,nip->np", a, V1)
    dg = dpi_g = ds = dpi_s = None
    if order >= 1:
        V2 = jets[2]
        dpi_q += np.einsum("nij,nipj->np", b, V2)
        dg = np.einsum("nil,nlj->nij", V1, g)
        dpi_g = -np.einsum("nil,nij->nlj", V1, pi_g)
    if order == 2:
        V3 = jets[3]
        dpi_q -= np.einsum("nijk,nipjk->np", c, V3)
        dpi_g -= 2.0 * np.einsum("nilm,nijk,nmk->nlj", V2, pi_s, g)
        ds = sym_lower(
            np.einsum("nilm,nlj,nmk->nijk", V2, g, g) + np.einsum("nil,nljk->nijk", V1, s)
        )
        dpi_s = -np.einsum("nil,nijk->nljk", V1, pi_s)
    return (dq, dpi_q, dg, dpi_g, ds, dpi_s), (q, a, b, c)


def _axpy(y, k, h):
    return tuple(yi if ki is None else yi + h * ki for yi, ki in zip(y, k))


def _rk4_combine(y, k1, k2, k3, k4, dt):
    out = []
    for yi, a1, a2, a3, a4 in zip(y, k1, k2, k3, k4):
        if a1 is None:
            out.append(yi)
        else:
            out.append(yi + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4))
    return tuple(out)


def _all_finite(y) -> bool:
    return all(yi is None or np.all(np.isfinite(yi)) for yi in y)


def _snapshot(kernel, order, y) -> SystemState:
    q, pi_q, g, pi_g, s, pi_s = y
    for arr in y:
        if arr is not None:
            arr.flags.writeable = False
    particles = []
    for A in range(q.shape[0]):
        particles.append(
            _bare_particle(
                order,
                q[A],
                pi_q[A],
                g[A] if g is not None else None,
                pi_g[A] if pi_g is not None else None,
                s[A] if s is not None else None,
                pi_s[A] if pi_s is not None else None,
            )
        )
    return _bare_system(kernel, particles)


def _record_series(rec, y, order, sigma):
    q, pi_q, g, pi_g, s, pi_s = y
    a, b, c = _spatial_arrays(y, order)
    rec.setdefault("H", []).append(_hamiltonian_arrays(q, a, b, c, sigma))
    rec.setdefault("linear_momentum", []).append(pi_q.sum(axis=0))
    if order >= 1:
        J = noether_gl_arrays(g, pi_g, s, pi_s)
        for A in range(q.shape[0]):
            rec.setdefault(f"J_gl_{A}", []).append(J[A])
    if order == 2:
        Js = noether_s12_arrays(g, pi_s)
        for A in range(q.shape[0]):
            rec.setdefault(f"J_s_{A}", []).append(Js[A])


def _check_integration_args(t_final, dt, scheme):
    if scheme != "rk4":
        raise InvalidInputError(f"unsupported integration scheme {scheme!r}")
    if not (np.isfinite(t_final) and t_final >= 0):
        raise InvalidInputError(f"t_final must be a finite non-negative real, got {t_final}")
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be a finite positive real, got {dt}")
    if t_final > 0 and dt > t_final:
        raise InvalidInputError(f"dt={dt} exceeds t_final={t_final}")


def _integrate_arrays(y0, sigma, order, t_final, dt, on_step=None, collect_stages=False):
    """RK4 driver on raw arrays. on_step(k, t, y) is called after every step;
    returns (y_final, times, stage_data) where stage_data[k] holds the four
    (q, a, b, c) stage tuples of step k when collect_stages is set."""
    n_steps = max(1, int(round(t_final / dt))) if t_final > 0 else 0
    dt_eff = t_final / n_steps if n_steps else 0.0
    stages = [] if collect_stages else None
    times = [0.0]
    y = y0
    for k in range(n_steps):
        # non-finite intermediates surface through the step check below
        with np.errstate(over="ignore", invalid="ignore"):
            k1, s1 = _rhs(y, sigma, order)
            y2 = _axpy(y, k1, 0.5 * dt_eff)
            k2, s2 = _rhs(y2, sigma, order)
            y3 = _axpy(y, k2, 0.5 * dt_eff)
            k3, s3 = _rhs(y3, sigma, order)
            y4 = _axpy(y, k3, dt_eff)
            k4, s4 = _rhs(y4, sigma, order)
            y = _rk4_combine(y, k1, k2, k3, k4, dt_eff)
        t = (k + 1) * dt_eff
        if not _all_finite(y):
            raise DivergenceError(step=k + 1, time=t)
        if collect_stages:
            stages.append((s1, s2, s3, s4))
        times.append(t)
        if on_step is not None:
            on_step(k + 1, t, y)
    return y, np.asarray(times), stages


# ---------------------------------------------------------------------------
# public surface

def velocity_jet_batch(state: SystemState, X, m: int = 0):
    """Field value and spatial derivatives at a batch of points.

    Returns (V0 .. Vm); Vk[p] is the rank-(1, k) tensor of k-th derivatives
    of the induced velocity field at X[p]. m may be at most 3.
    """
    if not 0 <= m <= MAX_JET_ORDER:
        raise InvalidInputError(f"jet order must be in 0..{MAX_JET_ORDER}, got {m}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.dim:
        raise InvalidInputError(f"points must have shape (M, {state.dim}), got {X.shape}")
    mom = spatial_momenta(state)
    q = state.positions()
    return velocity_jets(X, q, mom.a, mom.b, mom.c, state.kernel.sigma, m)


def velocity_jet(state: SystemState, x, m: int = 0):
    """Single-point version of velocity_jet_batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.dim,):
        raise InvalidInputError(f"point must have shape ({state.dim},), got {x.shape}")
    jets = velocity_jet_batch(state, x[None, :], m)
    return tuple(J[0] for J in jets)


def hamiltonian(state: SystemState) -> float:
    """Kernel energy of the state; non-negative, zero only at zero momenta."""
    mom = spatial_momenta(state)
    return _hamiltonian_arrays(state.positions(), mom.a, mom.b, mom.c, state.kernel.sigma)


def grad_hamiltonian(state: SystemState) -> HamiltonianGradient:
    """Exact gradient of the energy in every canonical block.

    The momentum blocks reproduce the jet velocities of the induced field:
    dpi_q is v(q), dpi_g is Dv(q) g, dpi_s is D2v(q)[g,g] + Dv(q) s.
    """
    y = _arrays_from_state(state)
    k, _ = _rhs(y, state.kernel.sigma, state.order)
    dq_dot, dpi_q_dot, dg_dot, dpi_g_dot, ds_dot, dpi_s_dot = k
    return HamiltonianGradient(
        dq=-dpi_q_dot,
        dpi_q=dq_dot,
        dg=None if dpi_g_dot is None else -dpi_g_dot,
        dpi_g=dg_dot,
        ds=None if dpi_s_dot is None else -dpi_s_dot,
        dpi_s=ds_dot,
    )


def integrate(state: SystemState, t_final: float, dt: float, scheme: str = "rk4") -> Trajectory:
    """Fixed-step RK4 solution of Hamilton's equations.

    Snapshots are stored at every step; dt is rounded to divide t_final into
    a whole number of steps. t_final = 0 yields the initial snapshot alone.
    The series record energy, total linear momentum and the per-particle
    internal momenta at every snapshot.
    """
    _check_integration_args(t_final, dt, scheme)
    sigma, order = state.kernel.sigma, state.order
    y0 = _arrays_from_state(state)
    rec: dict[str, list] = {}
    _record_series(rec, y0, order, sigma)
    snapshots = [state]

    def on_step(k, t, y):
        _record_series(rec, y, order, sigma)
        snapshots.append(_snapshot(state.kernel, order, y))

    _, times, _ = _integrate_arrays(y0, sigma, order, t_final, dt, on_step=on_step)
    series = {name: np.asarray(vals) for name, vals in rec.items()}
    return Trajectory(times=times, states=tuple(snapshots), series=series)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("JETFLOW_THREADS", "1")))
    except ValueError:
        return 1


def flow_points(state: SystemState, points, t_final: float, dt: float,
                threads: int | None = None) -> np.ndarray:
    """Advect passive points with the flow of the particle system.

    The particle system is integrated once; each point then follows
    dx/dt = v(x, t) through the same RK4 stages, which makes a point that
    starts on a particle track it to machine precision. Points are
    independent, so chunks may be advected in parallel (threads defaults
    to the JETFLOW_THREADS environment variable); the result does not
    depend on the thread count.
    """
    _check_integration_args(t_final, dt, scheme="rk4")
    X0 = np.asarray(points, dtype=np.float64)
    if X0.ndim != 2 or X0.shape[1] != state.dim:
        raise InvalidInputError(f"points must have shape (M, {state.dim}), got {X0.shape}")
    sigma, order = state.kernel.sigma, state.order
    y0 = _arrays_from_state(state)
    _, times, stages = _integrate_arrays(y0, sigma, order, t_final, dt, collect_stages=True)
    n_steps = len(times) - 1
    dt_eff = times[1] - times[0] if n_steps else 0.0

    def advect(chunk: np.ndarray) -> np.ndarray:
        path = np.empty((n_steps + 1,) + chunk.shape)
        x = chunk.copy()
        path[0] = x
        for k in range(n_steps):
            s1, s2, s3, s4 = stages[k]
            k1 = velocity_jets(x, *s1, sigma, 0)[0]
            k2 = velocity_jets(x + 0.5 * dt_eff * k1, *s2, sigma, 0)[0]
            k3 = velocity_jets(x + 0.5 * dt_eff * k2, *s3, sigma, 0)[0]
            k4 = velocity_jets(x + dt_eff * k3, *s4, sigma, 0)[0]
            x = x + (dt_eff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(step=k + 1, time=times[k + 1])
            path[k + 1] = x
        return path

    threads = _default_threads() if threads is None else max(1, int(threads))
    m = X0.shape[0]
    if threads == 1 or m == 0:
        return advect(X0)
    bounds = np.linspace(0, m, min(threads, m) + 1).astype(int)
    chunks = [X0[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(advect, chunks))
    return np.concatenate(parts, axis=1)
