"""Greedy sparse-recovery pass: the numeric hot path of counter ranking.

One source function, two execution modes.  By default the pass is compiled
with numba (``@njit(cache=True)``, so the compile cost is paid once per
environment); setting ``OPAL_NUMBA=0`` selects the plain numpy fallback,
which runs the identical code interpreted.  Both modes call the same BLAS
dot products, so selections and coefficients agree bit-for-bit.

``benchmarks/bench_omp.py`` compares the two modes on larger instances.
"""

from __future__ import annotations

import os

import numpy as np

# Linear dependence threshold: a candidate column whose component orthogonal
# to the current support is below this fraction of its norm is degenerate.
DEGENERATE_RTOL = 1e-10


def _greedy_pass(dt, t, kappa, tau, rel_tol, uniforms):  # pragma: no cover - exercised via wrappers
    """One randomized greedy pass over standardized data.

    dt       : C x N contiguous transpose of the run-by-counter matrix
    t        : length-N target (centered)
    kappa    : sparsity budget
    tau      : candidate pool size per step (1 = deterministic argmax)
    rel_tol  : stop when ||residual|| <= rel_tol * ||t||
    uniforms : length-C pre-drawn U[0,1) draws, one consumed per step

    Returns (support, coef, n_selected, dropped, n_dropped, residual_norm).
    Rank-deficient candidates are deactivated and reported in ``dropped``;
    ties in correlation break toward the lowest column index.
    """
    c, n = dt.shape
    support = np.full(kappa, -1, dtype=np.int64)
    coef = np.zeros(kappa)
    dropped = np.full(c, -1, dtype=np.int64)
    active = np.ones(c, dtype=np.bool_)
    q = np.zeros((kappa, n))  # orthonormal basis rows for the support span
    r = np.zeros((kappa, kappa))
    qt_t = np.zeros(kappa)
    rcol = np.zeros(kappa)
    resid = t.copy()
    tol = rel_tol * np.sqrt(np.dot(t, t))
    n_sel = 0
    n_drop = 0
    step = 0
    while n_sel < kappa and step < c:
        if np.sqrt(np.dot(resid, resid)) <= tol:
            break
        corr = np.abs(np.dot(dt, resid))

        # top-tau active candidates by |correlation|, ties -> lowest index
        cand = np.full(tau, -1, dtype=np.int64)
        taken = np.zeros(c, dtype=np.bool_)
        m = 0
        for _ in range(tau):
            best = 0.0
            best_j = -1
            for j in range(c):
                if active[j] and not taken[j] and corr[j] > best:
                    best = corr[j]
                    best_j = j
            if best_j < 0:
                break
            cand[m] = best_j
            taken[best_j] = True
            m += 1
        if m == 0:
            break

        total = 0.0
        for idx in range(m):
            total += corr[cand[idx]]
        u = uniforms[step] * total
        chosen = cand[m - 1]
        acc = 0.0
        for idx in range(m):
            acc += corr[cand[idx]]
            if u < acc:
                chosen = cand[idx]
                break
        step += 1

        # orthogonalize the chosen column against the current basis
        # (modified Gram-Schmidt with one reorthogonalization sweep)
        v = dt[chosen].copy()
        col_norm = np.sqrt(np.dot(v, v))
        for kk in range(n_sel):
            rcol[kk] = 0.0
        for _ in range(2):
            for kk in range(n_sel):
                s = np.dot(q[kk], v)
                rcol[kk] += s
                v = v - s * q[kk]
        v_norm = np.sqrt(np.dot(v, v))
        if v_norm <= DEGENERATE_RTOL * col_norm or col_norm == 0.0:
            active[chosen] = False
            dropped[n_drop] = chosen
            n_drop += 1
            continue

        for kk in range(n_sel):
            r[kk, n_sel] = rcol[kk]
        r[n_sel, n_sel] = v_norm
        q[n_sel] = v / v_norm
        qt_t[n_sel] = np.dot(q[n_sel], t)
        support[n_sel] = chosen
        active[chosen] = False
        n_sel += 1

        resid = t.copy()
        for kk in range(n_sel):
            resid = resid - qt_t[kk] * q[kk]

    # back-substitute R coef = Q^T t for the least-squares coefficients
    for kk in range(n_sel - 1, -1, -1):
        s = qt_t[kk]
        for jj in range(kk + 1, n_sel):
            s -= r[kk, jj] * coef[jj]
        coef[kk] = s / r[kk, kk]

    residual_norm = np.sqrt(np.dot(resid, resid))
    return support, coef, n_sel, dropped, n_drop, residual_norm


def _numba_enabled() -> bool:
    flag = os.environ.get("OPAL_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


if _numba_enabled():
    from numba import njit

    BACKEND = "numba"
    greedy_pass = njit(cache=True)(_greedy_pass)
else:
    BACKEND = "numpy"
    greedy_pass = _greedy_pass
