"""Conserved momenta of the internal jet-group and translation symmetries.

The energy is invariant under the right action of the internal jet group
on each particle's (g, s) fiber and under common translations of all
positions. The matching momentum maps are, per particle,

    J_gl^l_j  = g^i_l pi_g^i_j + 2 pi_s^i_jk s^i_lk   (order >= 1)
    J_s^l_jk  = g^i_l pi_s^i_jk                       (order 2)

plus the total linear momentum sum_A pi_q. All of them are constant along
exact solutions; their drift along a numerical trajectory measures
integrator error, which is what audit() reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UnsupportedOrderError
from .phase import ParticleState


def noether_gl_arrays(g, pi_g, s=None, pi_s=None) -> np.ndarray:
    """Batched J_gl over stacked particle arrays."""
    J = np.einsum("nil,nij->nlj", g, pi_g)
    if pi_s is not None:
        J = J + 2.0 * np.einsum("nijk,nilk->nlj", pi_s, s)
    return J


def noether_s12_arrays(g, pi_s) -> np.ndarray:
    """Batched J_s over stacked particle arrays."""
    return np.einsum("nil,nijk->nljk", g, pi_s)


def noether_gl(p: ParticleState) -> np.ndarray:
    """Internal linear-group momentum of one particle (order >= 1)."""
    if p.order < 1:
        raise UnsupportedOrderError("J_gl requires particle order >= 1")
    s = p.s[None] if p.s is not None else None
    pi_s = p.pi_s[None] if p.pi_s is not None else None
    return noether_gl_arrays(p.g[None], p.pi_g[None], s, pi_s)[0]


def noether_s12(p: ParticleState) -> np.ndarray:
    """Internal second-order momentum of one particle (order 2)."""
    if p.order < 2:
        raise UnsupportedOrderError("J_s requires particle order 2")
    return noether_s12_arrays(p.g[None], p.pi_s[None])[0]


@dataclass(frozen=True)
class InvariantEntry:
    initial: float | np.ndarray
    max_abs_drift: float
    max_rel_drift: float
    time_of_max_drift: float


@dataclass(frozen=True)
class InvariantReport:
    """Drift summary per named invariant along a trajectory."""

    entries: dict[str, InvariantEntry]

    def max_rel_drift(self) -> float:
        return max(e.max_rel_drift for e in self.entries.values())

    def __getitem__(self, name: str) -> InvariantEntry:
        return self.entries[name]


def _drift_entry(times: np.ndarray, values: np.ndarray) -> InvariantEntry:
    v0 = values[0]
    flat = values.reshape(len(values), -1)
    drift = np.max(np.abs(flat - flat[0]), axis=1)
    k = int(np.argmax(drift))
    scale = max(1.0, float(np.max(np.abs(flat[0]))))
    return InvariantEntry(
        initial=v0 if np.ndim(v0) else float(v0),
        max_abs_drift=float(drift[k]),
        max_rel_drift=float(drift[k]) / scale,
        time_of_max_drift=float(times[k]),
    )


def audit(traj) -> InvariantReport:
    """Measure invariant drift along a trajectory (needs >= 2 snapshots)."""
    if len(traj.states) < 2:
        raise InvalidInputError("invariant audit needs a trajectory with at least 2 snapshots")
    times = np.asarray(traj.times)
    order = traj.states[0].order
    n = traj.states[0].n_particles

    if "H" in traj.series:
        H = np.asarray(traj.series["H"], dtype=np.float64)
    else:
        from .dynamics import hamiltonian

        H = np.array([hamiltonian(st) for st in traj.states])
    entries = {"H": _drift_entry(times, H)}

    lin = np.array([np.sum([p.pi_q for p in st.particles], axis=0) for st in traj.states])
    entries["linear_momentum"] = _drift_entry(times, lin)

    if order >= 1:
        for A in range(n):
            J = np.array([noether_gl(st.particles[A]) for st in traj.states])
            entries[f"J_gl_{A}"] = _drift_entry(times, J)
    if order == 2:
        for A in range(n):
            J = np.array([noether_s12(st.particles[A]) for st in traj.states])
            entries[f"J_s_{A}"] = _drift_entry(times, J)
    return InvariantReport(entries=entries)
