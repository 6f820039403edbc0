"""Shooting registration: pick initial momenta so the flow hits a target.

The unknowns are the initial canonical momenta, packed into a flat vector
(pi_s contributes only its upper triangle since it is lower-symmetric).
The cost is the geodesic energy of the initial state plus a weighted
endpoint mismatch at time 1, minimized by gradient descent with central
finite-difference gradients and an Armijo backtracking line search.
Problem sizes here are tens of parameters, where finite differences are
cheap and robust; adjoint equations are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, _hamiltonian_arrays, _integrate_arrays, _spatial_arrays, integrate
from .errors import DivergenceError, InvalidInputError
from .phase import ParticleState, SystemState, _stack

ARMIJO_C1 = 1e-4
MIN_STEP = 1e-18


def _check_source(state: SystemState) -> None:
    for i, p in enumerate(state.particles):
        zero = np.max(np.abs(p.pi_q)) == 0.0
        if p.order >= 1:
            zero &= np.max(np.abs(p.pi_g)) == 0.0
            if not np.array_equal(p.g, np.eye(p.dim)):
                raise InvalidInputError(f"source particle {i} must start with g = identity")
        if p.order == 2:
            zero &= np.max(np.abs(p.pi_s)) == 0.0
            if np.max(np.abs(p.s)) != 0.0:
                raise InvalidInputError(f"source particle {i} must start with s = 0")
        if not zero:
            raise InvalidInputError(f"source particle {i} must carry zero momenta")


@dataclass(frozen=True)
class RegistrationProblem:
    """Shooting problem from a zero-momentum source to per-particle targets.

    targets_g / targets_s are optional jet targets; their mismatch enters
    with Frobenius weights w_g / w_s. The optimizer block is (max_iters,
    grad_tolerance, fd_step); dt is the RK4 step used for the unit-time
    shooting integrations.
    """

    source: SystemState
    targets_q: np.ndarray
    lam: float
    targets_g: np.ndarray | None = None
    targets_s: np.ndarray | None = None
    w_g: float = 1.0
    w_s: float = 1.0
    max_iters: int = 200
    grad_tolerance: float = 1e-6
    fd_step: float = 1e-6
    dt: float = 0.05

    def __post_init__(self):
        _check_source(self.source)
        n, d = self.source.n_particles, self.source.dim
        tq = np.asarray(self.targets_q, dtype=np.float64)
        if tq.shape != (n, d):
            raise InvalidInputError(f"targets_q must have shape ({n}, {d}), got {tq.shape}")
        object.__setattr__(self, "targets_q", tq)
        for name, shape in (("targets_g", (n, d, d)), ("targets_s", (n, d, d, d))):
            t = getattr(self, name)
            if t is not None:
                t = np.asarray(t, dtype=np.float64)
                if t.shape != shape:
                    raise InvalidInputError(f"{name} must have shape {shape}, got {t.shape}")
                min_order = 1 if name == "targets_g" else 2
                if self.source.order < min_order:
                    raise InvalidInputError(f"{name} requires source order >= {min_order}")
                object.__setattr__(self, name, t)
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError(f"lambda must be positive, got {self.lam}")
        if self.w_g < 0 or self.w_s < 0:
            raise InvalidInputError("jet mismatch weights must be non-negative")
        if self.max_iters < 0 or self.grad_tolerance <= 0 or self.fd_step <= 0:
            raise InvalidInputError("optimizer settings must be positive")

    @property
    def n_params(self) -> int:
        n, d, order = self.source.n_particles, self.source.dim, self.source.order
        per = d
        if order >= 1:
            per += d * d
        if order == 2:
            per += d * (d * (d + 1) // 2)
        return n * per


@dataclass(frozen=True)
class RegistrationResult:
    momenta: np.ndarray
    state: SystemState
    trajectory: Trajectory
    objective_history: np.ndarray
    position_error: np.ndarray
    g_error: np.ndarray | None
    s_error: np.ndarray | None
    converged: bool
    iterations: int


def _tri_pairs(d: int):
    return [(j, k) for j in range(d) for k in range(j, d)]


def unpack_momenta(prob: RegistrationProblem, pi: np.ndarray):
    """Flat parameter vector -> stacked (pi_q, pi_g, pi_s) arrays."""
    n, d, order = prob.source.n_particles, prob.source.dim, prob.source.order
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (prob.n_params,):
        raise InvalidInputError(f"momentum vector must have shape ({prob.n_params},), got {pi.shape}")
    pos = 0
    pi_q = np.zeros((n, d))
    pi_g = np.zeros((n, d, d)) if order >= 1 else None
    pi_s = np.zeros((n, d, d, d)) if order == 2 else None
    for A in range(n):
        pi_q[A] = pi[pos:pos + d]
        pos += d
        if order >= 1:
            pi_g[A] = pi[pos:pos + d * d].reshape(d, d)
            pos += d * d
        if order == 2:
            for i in range(d):
                for j, k in _tri_pairs(d):
                    pi_s[A, i, j, k] = pi_s[A, i, k, j] = pi[pos]
                    pos += 1
    return pi_q, pi_g, pi_s


def pack_momenta(prob: RegistrationProblem, pi_q, pi_g=None, pi_s=None) -> np.ndarray:
    """Stacked momentum arrays -> flat parameter vector."""
    n, d, order = prob.source.n_particles, prob.source.dim, prob.source.order
    out = np.zeros(prob.n_params)
    pos = 0
    for A in range(n):
        out[pos:pos + d] = pi_q[A]
        pos += d
        if order >= 1:
            out[pos:pos + d * d] = np.asarray(pi_g[A]).ravel()
            pos += d * d
        if order == 2:
            for i in range(d):
                for j, k in _tri_pairs(d):
                    out[pos] = pi_s[A, i, j, k]
                    pos += 1
    return out


def initial_state(prob: RegistrationProblem, pi: np.ndarray) -> SystemState:
    """Source configuration equipped with the packed momenta pi."""
    pi_q, pi_g, pi_s = unpack_momenta(prob, pi)
    particles = []
    for A, p in enumerate(prob.source.particles):
        particles.append(
            ParticleState(
                order=p.order, q=p.q, pi_q=pi_q[A],
                g=p.g, pi_g=None if pi_g is None else pi_g[A],
                s=p.s, pi_s=None if pi_s is None else pi_s[A],
            )
        )
    return SystemState(kernel=prob.source.kernel, particles=tuple(particles))


def _endpoint(prob: RegistrationProblem, pi: np.ndarray):
    """(initial energy, endpoint arrays) for the packed momenta pi.

    Shooting runs in source-centered coordinates: the energy only sees
    pairwise displacements, so this changes nothing mathematically, but it
    makes the whole optimization equivariant under common translations of
    source and target down to the last bits.
    """
    src = prob.source
    pi_q, pi_g, pi_s = unpack_momenta(prob, pi)
    q0 = _stack(src, "q")
    center = q0.mean(axis=0)
    y0 = (q0 - center, pi_q, _stack(src, "g"), pi_g, _stack(src, "s"), pi_s)
    a, b, c = _spatial_arrays(y0, src.order)
    H0 = _hamiltonian_arrays(y0[0], a, b, c, src.kernel.sigma)
    y1, _, _ = _integrate_arrays(y0, src.kernel.sigma, src.order, 1.0, prob.dt)
    return H0, y1, center


def _mismatches(prob: RegistrationProblem, y1, center):
    q1, _, g1, _, s1, _ = y1
    dq = np.sqrt(np.sum((q1 - (prob.targets_q - center)) ** 2, axis=-1))
    dg = ds = None
    if prob.targets_g is not None:
        dg = np.sqrt(np.sum((g1 - prob.targets_g) ** 2, axis=(-1, -2)))
    if prob.targets_s is not None:
        ds = np.sqrt(np.sum((s1 - prob.targets_s) ** 2, axis=(-1, -2, -3)))
    return dq, dg, ds


def objective(pi: np.ndarray, prob: RegistrationProblem) -> float:
    """E = H(z0) + lambda * sum of squared endpoint mismatches."""
    H0, y1, center = _endpoint(prob, pi)
    dq, dg, ds = _mismatches(prob, y1, center)
    E = H0 + prob.lam * float(np.sum(dq**2))
    if dg is not None:
        E += prob.lam * prob.w_g * float(np.sum(dg**2))
    if ds is not None:
        E += prob.lam * prob.w_s * float(np.sum(ds**2))
    return E


def fd_gradient(prob: RegistrationProblem, pi: np.ndarray) -> np.ndarray:
    """Central-difference gradient of the objective, entry by entry."""
    pi = np.asarray(pi, dtype=np.float64)
    h = prob.fd_step * (1.0 + float(np.max(np.abs(pi), initial=0.0)))
    grad = np.zeros_like(pi)
    for k in range(pi.size):
        probe = pi.copy()
        try:
            probe[k] = pi[k] + h
            e_plus = objective(probe, prob)
            probe[k] = pi[k] - h
            e_minus = objective(probe, prob)
        except DivergenceError as exc:
            raise DivergenceError(
                exc.step, exc.time, detail=f"while probing momentum entry {k}"
            ) from None
        grad[k] = (e_plus - e_minus) / (2.0 * h)
    return grad


def _try_objective(pi, prob) -> float:
    try:
        E = objective(pi, prob)
    except DivergenceError:
        return np.inf
    return E if np.isfinite(E) else np.inf


def solve(prob: RegistrationProblem) -> RegistrationResult:
    """Gradient descent with Armijo backtracking from zero momenta.

    Each iteration backtracks until the Armijo condition holds, then
    refines the step with a parabola through the three probed energies.
    The fit is exact for quadratic objectives, which is what stiff
    large-lambda problems look like near the optimum.
    """
    pi = np.zeros(prob.n_params)
    E = objective(pi, prob)
    if not np.isfinite(E):
        raise InvalidInputError("objective is not finite at the zero initial guess")
    history = [E]
    step = 1.0
    converged = False
    iterations = 0
    for it in range(prob.max_iters):
        grad = fd_gradient(prob, pi)
        if float(np.max(np.abs(grad), initial=0.0)) <= prob.grad_tolerance:
            converged = True
            break
        gnorm2 = float(np.dot(grad, grad))
        step = min(step * 2.0, 1e6)
        accepted = False
        while step > MIN_STEP:
            E_trial = _try_objective(pi - step * grad, prob)
            if E_trial <= E - ARMIJO_C1 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        best_step, best_E = step, E_trial
        E_half = _try_objective(pi - 0.5 * step * grad, prob)
        if E_half < best_E:
            best_step, best_E = 0.5 * step, E_half
        if np.isfinite(E_half):
            denom = E - 2.0 * E_half + E_trial
            if denom > 0.0:
                alpha = 0.25 * step * (3.0 * E - 4.0 * E_half + E_trial) / denom
                if 0.0 < alpha <= step:
                    E_alpha = _try_objective(pi - alpha * grad, prob)
                    if E_alpha < best_E:
                        best_step, best_E = alpha, E_alpha
        assert best_E <= E  # line search guarantees monotone decrease
        pi, E, step = pi - best_step * grad, best_E, best_step
        history.append(E)
        iterations = it + 1
    else:
        grad = fd_gradient(prob, pi)
        converged = float(np.max(np.abs(grad), initial=0.0)) <= prob.grad_tolerance

    state0 = initial_state(prob, pi)
    traj = integrate(state0, 1.0, prob.dt)
    _, y1, center = _endpoint(prob, pi)
    dq, dg, ds = _mismatches(prob, y1, center)
    return RegistrationResult(
        momenta=pi,
        state=state0,
        trajectory=traj,
        objective_history=np.asarray(history),
        position_error=dq,
        g_error=dg,
        s_error=ds,
        converged=converged,
        iterations=iterations,
    )
