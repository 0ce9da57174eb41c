"""Simplex pivoting kernels on a dense bounded-variable tableau.

Two interchangeable implementations live here: explicit loops compiled with
numba, and vectorised numpy.  Both apply the same pricing, ratio-test and
tie-breaking rules, so they visit the same bases.  Which one
:func:`primal_loop` / :func:`dual_loop` point at is decided by
``SMIPDECOMP_NUMBA`` (see :mod:`smipdecomp._accel`).

Shared argument conventions:

T      (m, N) tableau B^-1 A, updated in place
d      (N,) reduced costs, updated in place
x      (N,) current values of every column
basis  (m,) column index basic in each row
state  (N,) int8 column status, see the constants below
"""
import numpy as np

from .._accel import USE_NUMBA, HAVE_NUMBA, njit

AT_LB = 0
AT_UB = 1
FREE = 2
BASIC = 3
FIXED = 4

OPTIMAL = 0
UNBOUNDED = 1
INFEASIBLE = 1
ITER_CAP = 2

TIE_TOL = 1e-12


# --- loop implementation (compiled by numba) ------------------------------


def _pivot_loop(T, d, basis, state, lb, ub, r, q, leave_state):
    m, n = T.shape
    leaving = basis[r]
    piv = T[r, q]
    for j in range(n):
        T[r, j] /= piv
    for i in range(m):
        if i == r:
            continue
        f = T[i, q]
        if f != 0.0:
            for j in range(n):
                T[i, j] -= f * T[r, j]
        T[i, q] = 0.0
    T[r, q] = 1.0
    dq = d[q]
    if dq != 0.0:
        for j in range(n):
            d[j] -= dq * T[r, j]
    d[q] = 0.0
    basis[r] = q
    state[q] = BASIC
    if lb[leaving] == ub[leaving]:
        state[leaving] = FIXED
    else:
        state[leaving] = leave_state


def _primal_loop(T, d, x, basis, state, lb, ub, max_iter, tol_d, tol_piv, bland_after):
    m, n = T.shape
    degenerate = 0
    bland = False
    for it in range(max_iter):
        q = -1
        qdir = 0
        best = 0.0
        for j in range(n):
            s = state[j]
            if s == BASIC or s == FIXED:
                continue
            dj = d[j]
            if s == AT_LB:
                score = -dj
                dr = 1
            elif s == AT_UB:
                score = dj
                dr = -1
            else:
                score = abs(dj)
                dr = 1 if dj < 0.0 else -1
            if score <= tol_d:
                continue
            if bland:
                q = j
                qdir = dr
                break
            if score > best:
                best = score
                q = j
                qdir = dr
        if q < 0:
            return OPTIMAL, it

        tflip = np.inf
        if lb[q] > -np.inf and ub[q] < np.inf:
            tflip = ub[q] - lb[q]
        tmin = np.inf
        for i in range(m):
            a = qdir * T[i, q]
            jb = basis[i]
            if a > tol_piv:
                if lb[jb] == -np.inf:
                    continue
                t = (x[jb] - lb[jb]) / a
            elif a < -tol_piv:
                if ub[jb] == np.inf:
                    continue
                t = (ub[jb] - x[jb]) / (-a)
            else:
                continue
            if t < 0.0:
                t = 0.0
            if t < tmin:
                tmin = t
        if tmin == np.inf and tflip == np.inf:
            return UNBOUNDED, it

        if tflip <= tmin:
            step = qdir * tflip
            for i in range(m):
                x[basis[i]] -= step * T[i, q]
            if qdir > 0:
                x[q] = ub[q]
                state[q] = AT_UB
            else:
                x[q] = lb[q]
                state[q] = AT_LB
            t = tflip
        else:
            # among rows attaining tmin: Bland -> lowest basic column,
            # otherwise largest pivot magnitude, then lowest row
            r = -1
            rkey = 0.0
            rto_ub = False
            for i in range(m):
                a = qdir * T[i, q]
                jb = basis[i]
                if a > tol_piv:
                    if lb[jb] == -np.inf:
                        continue
                    t = (x[jb] - lb[jb]) / a
                    to_ub = False
                elif a < -tol_piv:
                    if ub[jb] == np.inf:
                        continue
                    t = (ub[jb] - x[jb]) / (-a)
                    to_ub = True
                else:
                    continue
                if t < 0.0:
                    t = 0.0
                if t > tmin + TIE_TOL:
                    continue
                if bland:
                    key = -float(jb)
                else:
                    key = abs(a)
                if r < 0 or key > rkey:
                    r = i
                    rkey = key
                    rto_ub = to_ub
            t = tmin
            step = qdir * t
            for i in range(m):
                x[basis[i]] -= step * T[i, q]
            x[q] += step
            leaving = basis[r]
            if rto_ub:
                x[leaving] = ub[leaving]
                _pivot_loop(T, d, basis, state, lb, ub, r, q, AT_UB)
            else:
                x[leaving] = lb[leaving]
                _pivot_loop(T, d, basis, state, lb, ub, r, q, AT_LB)

        if t <= TIE_TOL:
            degenerate += 1
            if degenerate > bland_after:
                bland = True
        elif not bland:
            degenerate = 0
    return ITER_CAP, max_iter


def _dual_loop(T, d, x, basis, state, lb, ub, max_iter, tol_p, tol_piv):
    m, n = T.shape
    for it in range(max_iter):
        r = -1
        worst = tol_p
        for i in range(m):
            jb = basis[i]
            v = x[jb]
            if v < lb[jb] - tol_p:
                viol = lb[jb] - v
            elif v > ub[jb] + tol_p:
                viol = v - ub[jb]
            else:
                continue
            if viol > worst:
                worst = viol
                r = i
        if r < 0:
            return OPTIMAL, it
        jb = basis[r]
        decrease = x[jb] > ub[jb]
        q = -1
        best = np.inf
        bestpiv = 0.0
        for j in range(n):
            s = state[j]
            if s == BASIC or s == FIXED:
                continue
            a = T[r, j]
            if abs(a) <= tol_piv:
                continue
            # x_jb moves by -a * dx_j; pick the sign of dx_j that helps
            if decrease:
                up = a > 0.0
            else:
                up = a < 0.0
            if s == AT_LB and not up:
                continue
            if s == AT_UB and up:
                continue
            ratio = abs(d[j]) / abs(a)
            if ratio < best - TIE_TOL or (ratio <= best + TIE_TOL and abs(a) > bestpiv):
                best = ratio
                bestpiv = abs(a)
                q = j
        if q < 0:
            return INFEASIBLE, it
        target = ub[jb] if decrease else lb[jb]
        dx = (x[jb] - target) / T[r, q]
        for i in range(m):
            x[basis[i]] -= T[i, q] * dx
        x[q] += dx
        x[jb] = target
        if decrease:
            _pivot_loop(T, d, basis, state, lb, ub, r, q, AT_UB)
        else:
            _pivot_loop(T, d, basis, state, lb, ub, r, q, AT_LB)
    return ITER_CAP, max_iter


# --- vectorised numpy implementation --------------------------------------


def _pivot_np(T, d, basis, state, lb, ub, r, q, leave_state):
    leaving = basis[r]
    T[r, :] /= T[r, q]
    col = T[:, q].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r, :])
    T[:, q] = 0.0
    T[r, q] = 1.0
    dq = d[q]
    if dq != 0.0:
        d -= dq * T[r, :]
    d[q] = 0.0
    basis[r] = q
    state[q] = BASIC
    state[leaving] = FIXED if lb[leaving] == ub[leaving] else leave_state


def _ratio_np(T, x, basis, lb, ub, q, qdir, tol_piv):
    a = qdir * T[:, q]
    xb = x[basis]
    lbb = lb[basis]
    ubb = ub[basis]
    t = np.full(a.shape[0], np.inf)
    to_ub = a < -tol_piv
    dec = (a > tol_piv) & (lbb > -np.inf)
    inc = to_ub & (ubb < np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        t[dec] = (xb[dec] - lbb[dec]) / a[dec]
        t[inc] = (ubb[inc] - xb[inc]) / (-a[inc])
    np.maximum(t, 0.0, out=t)
    return a, t, to_ub


def primal_loop_np(T, d, x, basis, state, lb, ub, max_iter, tol_d, tol_piv, bland_after):
    degenerate = 0
    bland = False
    for it in range(max_iter):
        score = np.where(state == AT_LB, -d, np.where(state == AT_UB, d, np.abs(d)))
        eligible = ((state == AT_LB) | (state == AT_UB) | (state == FREE)) & (score > tol_d)
        if not eligible.any():
            return OPTIMAL, it
        if bland:
            q = int(np.argmax(eligible))
        else:
            q = int(np.argmax(np.where(eligible, score, -1.0)))
        s = state[q]
        if s == AT_LB:
            qdir = 1
        elif s == AT_UB:
            qdir = -1
        else:
            qdir = 1 if d[q] < 0.0 else -1

        tflip = ub[q] - lb[q] if (lb[q] > -np.inf and ub[q] < np.inf) else np.inf
        a, t, to_ub = _ratio_np(T, x, basis, lb, ub, q, qdir, tol_piv)
        tmin = t.min() if t.size else np.inf
        if tmin == np.inf and tflip == np.inf:
            return UNBOUNDED, it

        if tflip <= tmin:
            x[basis] -= (qdir * tflip) * T[:, q]
            if qdir > 0:
                x[q] = ub[q]
                state[q] = AT_UB
            else:
                x[q] = lb[q]
                state[q] = AT_LB
            step_len = tflip
        else:
            cand = np.flatnonzero(t <= tmin + TIE_TOL)
            if bland:
                r = int(cand[np.argmin(basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(a[cand]))])
            step = qdir * tmin
            x[basis] -= step * T[:, q]
            x[q] += step
            leaving = basis[r]
            if to_ub[r]:
                x[leaving] = ub[leaving]
                _pivot_np(T, d, basis, state, lb, ub, r, q, AT_UB)
            else:
                x[leaving] = lb[leaving]
                _pivot_np(T, d, basis, state, lb, ub, r, q, AT_LB)
            step_len = tmin

        if step_len <= TIE_TOL:
            degenerate += 1
            if degenerate > bland_after:
                bland = True
        elif not bland:
            degenerate = 0
    return ITER_CAP, max_iter


def dual_loop_np(T, d, x, basis, state, lb, ub, max_iter, tol_p, tol_piv):
    if basis.size == 0:
        return OPTIMAL, 0
    for it in range(max_iter):
        xb = x[basis]
        viol = np.maximum(lb[basis] - xb, xb - ub[basis])
        r = int(np.argmax(viol))
        if not viol[r] > tol_p:
            return OPTIMAL, it
        jb = basis[r]
        decrease = x[jb] > ub[jb]
        a = T[r, :]
        up = a > 0.0 if decrease else a < 0.0
        ok = (np.abs(a) > tol_piv) & (state != BASIC) & (state != FIXED)
        ok &= ~((state == AT_LB) & ~up)
        ok &= ~((state == AT_UB) & up)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            return INFEASIBLE, it
        absa = np.abs(a[cand])
        ratio = np.abs(d[cand]) / absa
        # sequential scan, matching the loop kernel's running-minimum rule
        q = -1
        best = np.inf
        bestpiv = 0.0
        for k in range(cand.size):
            rk = ratio[k]
            if rk < best - TIE_TOL or (rk <= best + TIE_TOL and absa[k] > bestpiv):
                best = rk
                bestpiv = absa[k]
                q = int(cand[k])
        target = ub[jb] if decrease else lb[jb]
        dx = (x[jb] - target) / T[r, q]
        x[basis] -= T[:, q] * dx
        x[q] += dx
        x[jb] = target
        _pivot_np(T, d, basis, state, lb, ub, r, q, AT_UB if decrease else AT_LB)
    return ITER_CAP, max_iter


if HAVE_NUMBA:
    # the loop kernels call _pivot_loop by global name; numba resolves it
    # at first compile, so rebind it to the compiled version
    _pivot_loop = njit(cache=True, nogil=True)(_pivot_loop)
    primal_loop_nb = njit(cache=True, nogil=True)(_primal_loop)
    dual_loop_nb = njit(cache=True, nogil=True)(_dual_loop)
else:  # pragma: no cover
    primal_loop_nb = None
    dual_loop_nb = None

if USE_NUMBA:
    primal_loop = primal_loop_nb
    dual_loop = dual_loop_nb
    BACKEND = "numba"
else:
    primal_loop = primal_loop_np
    dual_loop = dual_loop_np
    BACKEND = "numpy"


def kernels(backend=None):
    """Return ``(primal_loop, dual_loop)`` for ``backend`` ('numba'/'numpy')."""
    if backend is None:
        return primal_loop, dual_loop
    if backend == "numpy":
        return primal_loop_np, dual_loop_np
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        return primal_loop_nb, dual_loop_nb
    raise ValueError(f"unknown kernel backend {backend!r}")
