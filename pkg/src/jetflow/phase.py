"""Phase-space model for jet particles.

A particle of order k carries a position q, jet configuration (g at order
>= 1, s at order 2) and canonical momenta (pi_q, pi_g, pi_s). The momenta
are dual to jet velocities through the canonical pairing

    <pi, (u, Du.g, D2u[g,g] + Du.s)> evaluated on test fields u,

and every state determines coefficient tensors (a, b, c) of the induced
velocity field, v(x) = sum_A a K + b . grad K + c : grad^2 K centered at
the particles. Those coefficients, not the canonical momenta, are the
gauge-invariant content of the state: the right action of the internal
jet group changes (g, s, pi_g, pi_s) but leaves (a, b, c) fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularJetError, UnsupportedOrderError
from .jet_algebra import DET_THRESHOLD, Jet1Element, Jet2Element, sym_lower
from .kernels import Kernel


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ParticleState:
    """One particle on the order-k phase space.

    Fields not used at the particle's order must be None; omitted momenta
    default to zero and an omitted g defaults to the identity. s and pi_s
    are stored symmetrized in their last two indices.
    """

    order: int
    q: np.ndarray
    pi_q: np.ndarray | None = None
    g: np.ndarray | None = None
    pi_g: np.ndarray | None = None
    s: np.ndarray | None = None
    pi_s: np.ndarray | None = None

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise InvalidInputError(f"particle order must be 0, 1 or 2, got {self.order}")
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 1 or q.size == 0:
            raise InvalidInputError(f"q must be a 1-d vector, got shape {q.shape}")
        d = q.shape[0]

        def want(name, value, shape, default):
            if value is None:
                value = default
            arr = np.asarray(value, dtype=np.float64)
            if arr.shape != shape:
                raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
            return arr

        def forbid(name, value):
            if value is not None:
                raise InvalidInputError(f"{name} is not a field of an order-{self.order} particle")

        pi_q = want("pi_q", self.pi_q, (d,), np.zeros(d))
        if self.order >= 1:
            g = want("g", self.g, (d, d), np.eye(d))
            if abs(np.linalg.det(g)) < DET_THRESHOLD:
                raise SingularJetError("particle jet matrix g is singular")
            pi_g = want("pi_g", self.pi_g, (d, d), np.zeros((d, d)))
        else:
            forbid("g", self.g)
            forbid("pi_g", self.pi_g)
            g = pi_g = None
        if self.order == 2:
            s = sym_lower(want("s", self.s, (d, d, d), np.zeros((d, d, d))))
            pi_s = sym_lower(want("pi_s", self.pi_s, (d, d, d), np.zeros((d, d, d))))
        else:
            forbid("s", self.s)
            forbid("pi_s", self.pi_s)
            s = pi_s = None

        object.__setattr__(self, "q", _freeze(q))
        object.__setattr__(self, "pi_q", _freeze(pi_q))
        for name, val in (("g", g), ("pi_g", pi_g), ("s", s), ("pi_s", pi_s)):
            object.__setattr__(self, name, _freeze(val) if val is not None else None)

    @property
    def dim(self) -> int:
        return self.q.shape[0]


def _bare_particle(order, q, pi_q, g, pi_g, s, pi_s) -> ParticleState:
    # Trusted fast path used by the integrator: no validation, no copies.
    p = object.__new__(ParticleState)
    object.__setattr__(p, "order", order)
    object.__setattr__(p, "q", q)
    object.__setattr__(p, "pi_q", pi_q)
    object.__setattr__(p, "g", g)
    object.__setattr__(p, "pi_g", pi_g)
    object.__setattr__(p, "s", s)
    object.__setattr__(p, "pi_s", pi_s)
    return p


@dataclass(frozen=True)
class SystemState:
    """Immutable snapshot of a full particle system plus its kernel."""

    kernel: Kernel
    particles: tuple[ParticleState, ...]

    def __post_init__(self):
        particles = tuple(self.particles)
        if not particles:
            raise InvalidInputError("a system needs at least one particle")
        order = particles[0].order
        for i, p in enumerate(particles):
            if not isinstance(p, ParticleState):
                raise InvalidInputError(f"particles[{i}] is not a ParticleState")
            if p.order != order:
                raise InvalidInputError("all particles must have the same order")
            if p.dim != self.kernel.dim:
                raise InvalidInputError(
                    f"particles[{i}] has dim {p.dim} but the kernel has dim {self.kernel.dim}"
                )
        for i in range(len(particles)):
            for j in range(i + 1, len(particles)):
                if np.array_equal(particles[i].q, particles[j].q):
                    raise InvalidInputError(f"particles {i} and {j} share the same position")
        object.__setattr__(self, "particles", particles)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def order(self) -> int:
        return self.particles[0].order

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    def positions(self) -> np.ndarray:
        return np.array([p.q for p in self.particles])


def _bare_system(kernel, particles) -> SystemState:
    st = object.__new__(SystemState)
    object.__setattr__(st, "kernel", kernel)
    object.__setattr__(st, "particles", tuple(particles))
    return st


def _stack(state: SystemState, name: str) -> np.ndarray | None:
    vals = [getattr(p, name) for p in state.particles]
    if vals[0] is None:
        return None
    return np.array(vals)


@dataclass(frozen=True)
class SpatialMomenta:
    """Coefficient tensors (a, b, c) of the induced velocity field.

    a is (N, d); b is (N, d, d) for order >= 1 else None; c is (N, d, d, d),
    lower-symmetric, for order 2 else None.
    """

    a: np.ndarray
    b: np.ndarray | None = None
    c: np.ndarray | None = None


def spatial_momenta(state: SystemState) -> SpatialMomenta:
    """Map canonical momenta to velocity-field coefficients.

    Defined by the requirement that for every test field u,
    <pi, (u, Du.g, D2u[g,g] + Du.s)> = a.u - b:Du + c:D2u at each particle.
    Closed form: a = pi_q, b^i_l = -(pi_g^i_j g^l_j + pi_s^i_jk s^l_jk),
    c^i_lm = sym_lm(pi_s^i_jk g^l_j g^m_k).
    """
    a = _stack(state, "pi_q")
    if state.order == 0:
        return SpatialMomenta(a=a)
    g = _stack(state, "g")
    pi_g = _stack(state, "pi_g")
    b = -np.einsum("nij,nlj->nil", pi_g, g)
    if state.order == 1:
        return SpatialMomenta(a=a, b=b)
    s = _stack(state, "s")
    pi_s = _stack(state, "pi_s")
    b = b - np.einsum("nijk,nljk->nil", pi_s, s)
    c = sym_lower(np.einsum("nijk,nlj,nmk->nilm", pi_s, g, g))
    return SpatialMomenta(a=a, b=b, c=c)


def pairing(state: SystemState, jets) -> float:
    """Pair the state's momentum distribution with per-particle test jets.

    jets is a sequence (U0, U1, U2) of stacked arrays: U0[A] the test field
    at particle A, U1[A] its Jacobian, U2[A] its Hessian; entries beyond the
    state's order may be omitted. Returns sum_A a.u - b:Du + c:D2u.
    """
    mom = spatial_momenta(state)
    n, d = len(state.particles), state.dim
    if len(jets) < state.order + 1:
        raise InvalidInputError(
            f"order-{state.order} pairing needs jets up to order {state.order}"
        )
    shapes = [(n, d), (n, d, d), (n, d, d, d)]
    js = []
    for k, u in enumerate(jets[: state.order + 1]):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != shapes[k]:
            raise InvalidInputError(f"test jet {k} must have shape {shapes[k]}, got {u.shape}")
        js.append(u)
    total = float(np.einsum("ni,ni->", mom.a, js[0]))
    if state.order >= 1:
        total -= float(np.einsum("nij,nij->", mom.b, js[1]))
    if state.order == 2:
        total += float(np.einsum("nijk,nijk->", mom.c, js[2]))
    return total


def _right_action_arrays(p: ParticleState, hg: np.ndarray, hs: np.ndarray | None):
    """Transform one particle by a right internal-group element (hg, hs)."""
    hg_inv = np.linalg.inv(hg)
    g_new = p.g @ hg
    pi_s_new = s_new = None
    if p.order == 2:
        hs = hs if hs is not None else np.zeros_like(p.s)
        s_new = np.einsum("ilm,lj,mk->ijk", p.s, hg, hg) + np.einsum("il,ljk->ijk", p.g, hs)
        pi_s_new = np.einsum("jl,ilm,km->ijk", hg_inv, p.pi_s, hg_inv)
        reduced = p.pi_g - np.einsum("ijk,ljk->il", pi_s_new, hs)
    else:
        reduced = p.pi_g
    pi_g_new = reduced @ hg_inv.T
    return g_new, pi_g_new, s_new, pi_s_new


def act_right_state(state: SystemState, elements) -> SystemState:
    """Apply the per-particle right action of the internal jet group.

    elements is one Jet1Element/Jet2Element per particle (Jet2 only at
    order 2). The configuration composes on the right; the momenta change
    by the unique linear map preserving the canonical pairing, so the
    spatial momenta, and hence the energy, are unchanged.
    """
    if state.order == 0:
        raise UnsupportedOrderError("order-0 particles have no internal group to act with")
    elements = list(elements)
    if len(elements) != state.n_particles:
        raise InvalidInputError(
            f"need one group element per particle ({state.n_particles}), got {len(elements)}"
        )
    new_particles = []
    for p, h in zip(state.particles, elements):
        if isinstance(h, Jet2Element):
            if state.order != 2:
                raise InvalidInputError("Jet2Element action requires an order-2 state")
            hg, hs = h.g, h.s
        elif isinstance(h, Jet1Element):
            hg, hs = h.g, None
        else:
            raise InvalidInputError("group elements must be Jet1Element or Jet2Element")
        if hg.shape != (p.dim, p.dim):
            raise InvalidInputError("group element dimension does not match the state")
        g_new, pi_g_new, s_new, pi_s_new = _right_action_arrays(p, hg, hs)
        new_particles.append(
            ParticleState(
                order=p.order, q=p.q, pi_q=p.pi_q,
                g=g_new, pi_g=pi_g_new, s=s_new, pi_s=pi_s_new,
            )
        )
    return SystemState(kernel=state.kernel, particles=tuple(new_particles))
