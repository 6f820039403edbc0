"""Hot numerical kernels: gaussian derivative tensors and velocity jets.

Two interchangeable implementations live here. The default is a numba
@njit loop kernel (compiled lazily, cached on disk); a pure-numpy
vectorized path is selected by setting the environment variable
``JETFLOW_NUMBA=0`` before import, or used automatically when numba is
not importable.

Everything is built on one fact: partial derivatives of the isotropic
gaussian factorize into 1-D Hermite polynomials,

    d^m K / dr_{j1} .. dr_{jm} = (-1/sigma)^m * prod_i He_{n_i}(u_i) * K(r)

with u = r/sigma and n_i the number of times axis i appears among the
derivative indices. Evaluating entries through their index counts makes
every returned tensor bitwise symmetric under index permutation and
bitwise odd/even under r -> -r.
"""

from __future__ import annotations

import os
from functools import lru_cache
from itertools import product

import numpy as np

MAX_DERIV_ORDER = 5


def _env_wants_numba() -> bool:
    return os.environ.get("JETFLOW_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


if _env_wants_numba():
    try:
        from . import _jet_numba as _nb
    except ImportError:  # pragma: no cover - numba genuinely missing
        _nb = None
else:
    _nb = None

USE_NUMBA = _nb is not None
ACTIVE_BACKEND = "numba" if USE_NUMBA else "numpy"


@lru_cache(maxsize=None)
def _count_tables(dim: int):
    """Index bookkeeping for one spatial dimension.

    Returns (counts, maps): counts is an (NC, dim) int array listing every
    axis-count vector with total degree <= MAX_DERIV_ORDER; maps[n] sends the
    flat (row-major) multi-index of a rank-n tensor entry to its row in
    counts.
    """
    counts: list[tuple[int, ...]] = []
    slot: dict[tuple[int, ...], int] = {}
    for total in range(MAX_DERIV_ORDER + 1):
        for cnt in product(range(MAX_DERIV_ORDER + 1), repeat=dim):
            if sum(cnt) == total:
                slot[cnt] = len(counts)
                counts.append(cnt)
    maps = []
    for n in range(MAX_DERIV_ORDER + 1):
        m = np.empty(dim**n, dtype=np.intp)
        for lin, idx in enumerate(product(range(dim), repeat=n)):
            c = [0] * dim
            for j in idx:
                c[j] += 1
            m[lin] = slot[tuple(c)]
        maps.append(m)
    return np.asarray(counts, dtype=np.intp), tuple(maps)


def _hermite_table(U: np.ndarray) -> np.ndarray:
    """He_n(U) for n = 0..5 via the recursion He_{n+1} = u He_n - n He_{n-1}."""
    He = np.empty(U.shape + (MAX_DERIV_ORDER + 1,))
    He[..., 0] = 1.0
    He[..., 1] = U
    for n in range(1, MAX_DERIV_ORDER):
        He[..., n + 1] = U * He[..., n] - n * He[..., n - 1]
    return He


def deriv_stack(R: np.ndarray, sigma: float, n_max: int) -> list[np.ndarray]:
    """Gaussian kernel derivative tensors D_0 .. D_{n_max} at displacements R.

    R has shape batch + (dim,). D[n] has shape batch + (dim,)*n and entry
    (j1..jn) equal to the mixed partial of K at R along those axes.
    """
    if not 0 <= n_max <= MAX_DERIV_ORDER:
        raise ValueError(f"derivative order {n_max} outside 0..{MAX_DERIV_ORDER}")
    R = np.asarray(R, dtype=np.float64)
    dim = R.shape[-1]
    batch = R.shape[:-1]
    U = R / sigma
    He = _hermite_table(U)
    counts, maps = _count_tables(dim)
    CP = He[..., 0, counts[:, 0]]
    for i in range(1, dim):
        CP = CP * He[..., i, counts[:, i]]
    G = np.exp(-0.5 * np.sum(U * U, axis=-1))
    out = []
    fac = 1.0
    for n in range(n_max + 1):
        Dn = CP[..., maps[n]] * (fac * G)[..., None]
        out.append(np.ascontiguousarray(Dn.reshape(batch + (dim,) * n)))
        fac *= -1.0 / sigma
    return out


def _jet_offsets(dim: int, m: int) -> np.ndarray:
    offs = np.zeros(m + 2, dtype=np.int64)
    for k in range(m + 1):
        offs[k + 1] = offs[k] + dim**k
    return offs


def velocity_jets_numpy(X, q, a, b, c, sigma, m):
    """Vectorized evaluation of the induced field and its derivatives.

    X: (M, d) evaluation points; q: (N, d) particle positions; a/b/c the
    per-particle coefficient tensors (b, c may be None for low orders).
    Returns (V0 .. Vm) where Vk[p, i, j1..jk] is the k-th spatial derivative
    of component i of the field at X[p].
    """
    X = np.asarray(X, dtype=np.float64)
    depth = 2 if c is not None else (1 if b is not None else 0)
    R = X[:, None, :] - q[None, :, :]
    D = deriv_stack(R, sigma, m + depth)
    out = []
    for k in range(m + 1):
        Vk = np.einsum("ni,mn...->mi...", a, D[k])
        if b is not None:
            Vk = Vk + np.einsum("nij,mn...j->mi...", b, D[k + 1])
        if c is not None:
            Vk = Vk + np.einsum("nijk,mn...jk->mi...", c, D[k + 2])
        out.append(Vk)
    return tuple(out)


def velocity_jets_numba(X, q, a, b, c, sigma, m):
    """Numba twin of velocity_jets_numpy (requires numba to be importable)."""
    if _nb is None:
        raise RuntimeError("numba backend is not available")
    X = np.ascontiguousarray(X, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    M, d = X.shape
    N = q.shape[0]
    order = 2 if c is not None else (1 if b is not None else 0)
    bb = np.ascontiguousarray(b) if b is not None else np.zeros((N, d, d))
    cc = np.ascontiguousarray(c) if c is not None else np.zeros((N, d, d, d))
    offs = _jet_offsets(d, m)
    VF = np.zeros((M, d, offs[m + 1]))
    _nb.vjets(X, q, np.ascontiguousarray(a), bb, cc, float(sigma), m, order, VF)
    return tuple(
        np.ascontiguousarray(VF[:, :, offs[k]:offs[k + 1]]).reshape((M, d) + (d,) * k)
        for k in range(m + 1)
    )


if USE_NUMBA:
    velocity_jets = velocity_jets_numba
else:
    velocity_jets = velocity_jets_numpy
