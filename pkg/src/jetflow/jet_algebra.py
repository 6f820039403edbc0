"""Finite-dimensional jet groups at a point.

A 1-jet of a deformation at a source point is an invertible d x d matrix;
a 2-jet additionally carries the second-derivative data, a rank-(1,2)
tensor symmetric in its two lower indices (the space S12 below). The
2-jets form a group under composition (the chain rule):

    (b, c) * (bt, ct) = (b bt, b.ct + c.bt)

with the left action (b.c)^i_jk = b^i_l c^l_jk and the right action
(c.b)^i_jk = c^i_lm b^l_j b^m_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularJetError, UnsupportedOrderError

DET_THRESHOLD = 1e-12


def sym_lower(c: np.ndarray) -> np.ndarray:
    """Symmetrize a tensor in its last two axes."""
    return 0.5 * (c + np.swapaxes(c, -1, -2))


def is_lower_symmetric(c: np.ndarray, tol: float = 0.0) -> bool:
    return bool(np.max(np.abs(c - np.swapaxes(c, -1, -2)), initial=0.0) <= tol)


def _as_matrix(g, name: str = "g") -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {g.shape}")
    return g


def _check_invertible(g: np.ndarray) -> None:
    if abs(np.linalg.det(g)) < DET_THRESHOLD:
        raise SingularJetError(f"jet matrix is singular (|det| < {DET_THRESHOLD})")


def _as_s12(c, dim: int, name: str = "s") -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (dim, dim, dim):
        raise InvalidInputError(f"{name} must have shape ({dim},)*3, got {c.shape}")
    return sym_lower(c)


@dataclass(frozen=True)
class Jet1Element:
    """First-order jet: an invertible matrix acting as a local linear map."""

    g: np.ndarray

    def __post_init__(self):
        g = _as_matrix(self.g)
        _check_invertible(g)
        g.flags.writeable = False
        object.__setattr__(self, "g", g)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Jet1Element":
        return cls(np.eye(dim))


@dataclass(frozen=True)
class Jet2Element:
    """Second-order jet (g, s) with g invertible and s lower-symmetric."""

    g: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        g = _as_matrix(self.g)
        _check_invertible(g)
        s = _as_s12(self.s, g.shape[0])
        g.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Jet2Element":
        return cls(np.eye(dim), np.zeros((dim, dim, dim)))


def act_left(b, c) -> np.ndarray:
    """(b.c)^i_jk = b^i_l c^l_jk for a matrix b and an S12 tensor c."""
    b = b.g if isinstance(b, (Jet1Element, Jet2Element)) else _as_matrix(b, "b")
    c = _as_s12(c, b.shape[0], "c")
    return np.einsum("il,ljk->ijk", b, c)


def act_right(c, b) -> np.ndarray:
    """(c.b)^i_jk = c^i_lm b^l_j b^m_k for an S12 tensor c and a matrix b."""
    b = b.g if isinstance(b, (Jet1Element, Jet2Element)) else _as_matrix(b, "b")
    c = _as_s12(c, b.shape[0], "c")
    return np.einsum("ilm,lj,mk->ijk", c, b, b)


def compose(lhs: Jet2Element, rhs: Jet2Element) -> Jet2Element:
    """Group law: the jet of the composition lhs o rhs."""
    if lhs.dim != rhs.dim:
        raise InvalidInputError("jet dimensions do not match")
    g = lhs.g @ rhs.g
    s = act_left(lhs.g, rhs.s) + act_right(lhs.s, rhs.g)
    return Jet2Element(g, s)


def invert(e: Jet2Element) -> Jet2Element:
    """Group inverse: (b, c)^-1 = (b^-1, -b^-1.(c.b^-1))."""
    try:
        g_inv = np.linalg.inv(e.g)
    except np.linalg.LinAlgError as exc:
        raise SingularJetError("jet matrix is not invertible") from exc
    s_inv = -act_left(g_inv, act_right(e.s, g_inv))
    return Jet2Element(g_inv, s_inv)


def jet_of_flow(traj, particle: int) -> Jet2Element:
    """Jet of the time-t flow map at a particle's initial position.

    Reads the (g, s) configuration of the particle in the final snapshot of
    the trajectory. Order-1 trajectories track only g; the s slot of the
    returned element is zero in that case.
    """
    final = traj.states[-1]
    n = len(final.particles)
    if not 0 <= particle < n:
        raise InvalidInputError(f"particle index {particle} out of range 0..{n - 1}")
    p = final.particles[particle]
    if p.order < 1:
        raise UnsupportedOrderError("order-0 trajectories carry no jet data")
    dim = p.q.shape[0]
    s = p.s if p.s is not None else np.zeros((dim, dim, dim))
    return Jet2Element(p.g, s)
