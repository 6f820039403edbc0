"""Compiled loop kernel behind backend.velocity_jets (numba required)."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _heprod(He, cnt, d):
    p = 1.0
    for i in range(d):
        p *= He[i, cnt[i]]
    return p


@njit(cache=True, nogil=True)
def vjets(X, q, a, b, c, sigma, m, order, VF):
    # VF: (M, d, 1 + d + ... + d**m) flat jet accumulator, zero on entry.
    M, d = X.shape
    N = q.shape[0]
    He = np.empty((d, 6))
    cnt = np.empty(d, np.int64)
    valb = np.empty(d)
    valc = np.empty((d, d))
    fac = np.empty(6)
    fac[0] = 1.0
    for n in range(1, 6):
        fac[n] = -fac[n - 1] / sigma
    for p in range(M):
        for A in range(N):
            s2 = 0.0
            for i in range(d):
                t = (X[p, i] - q[A, i]) / sigma
                He[i, 0] = 1.0
                He[i, 1] = t
                for n in range(1, 5):
                    He[i, n + 1] = t * He[i, n] - n * He[i, n - 1]
                s2 += t * t
            G = np.exp(-0.5 * s2)
            base = 0
            dk = 1
            for k in range(m + 1):
                for lin in range(dk):
                    for i in range(d):
                        cnt[i] = 0
                    r = lin
                    for _ in range(k):
                        cnt[r % d] += 1
                        r //= d
                    val0 = fac[k] * G * _heprod(He, cnt, d)
                    if order >= 1:
                        for j in range(d):
                            cnt[j] += 1
                            valb[j] = fac[k + 1] * G * _heprod(He, cnt, d)
                            cnt[j] -= 1
                    if order >= 2:
                        for j in range(d):
                            cnt[j] += 1
                            for k2 in range(d):
                                cnt[k2] += 1
                                valc[j, k2] = fac[k + 2] * G * _heprod(He, cnt, d)
                                cnt[k2] -= 1
                            cnt[j] -= 1
                    for i in range(d):
                        acc = a[A, i] * val0
                        if order >= 1:
                            for j in range(d):
                                acc += b[A, i, j] * valb[j]
                        if order >= 2:
                            for j in range(d):
                                for k2 in range(d):
                                    acc += c[A, i, j, k2] * valc[j, k2]
                        VF[p, i, base + lin] += acc
                base += dk
                dk *= d
