"""Compiled core of the nested equilibrium solve.

Every function here works on a packed game: ``imp`` and ``cst`` are
``(n, 5)`` arrays with rows ``(a, r, kinked, threshold, outer_slope)``
describing ``a * x**r`` optionally continued linearly past the threshold.
Four nested levels, innermost first:

1. per agent, ``(p, mu)`` given ``(Y, VDelta, VL)``
2. aggregate output ``Y`` given ``(VDelta, VL)`` so that ``sum p == 1``
3. vote price ``VDelta`` given ``VL`` so that ``sum mu == k - 1``
4. residual surplus ``VL`` closing the budget identity
"""

import math

import numpy as np
from numba import njit

Y_FLOOR = 1e-30
Y_CAP = 1e30

# status codes returned alongside results
OK = 0
NO_CROSSING = 1
DIVERGED = 2

MAXITER = 200
#: roots of the first-order condition below this are refined in log space
TINY_P = 1e-6
#: smallest recognition probability the log-space refinement considers
P_FLOOR = 1e-300


@njit(cache=True)
def _brent_iter(st):
    # one pass of Brent's method (the iteration used by scipy's brentq);
    # state: xpre xcur xblk fpre fcur fblk spre scur xtol rtol
    xpre, xcur, xblk = st[0], st[1], st[2]
    fpre, fcur, fblk = st[3], st[4], st[5]
    spre, scur = st[6], st[7]
    if fpre != 0.0 and fcur != 0.0 and ((fpre < 0.0) != (fcur < 0.0)):
        xblk = xpre
        fblk = fpre
        spre = xcur - xpre
        scur = spre
    if abs(fblk) < abs(fcur):
        xpre = xcur
        xcur = xblk
        xblk = xpre
        fpre = fcur
        fcur = fblk
        fblk = fpre
    tol = (st[8] + st[9] * abs(xcur)) / 2.0
    sbis = (xblk - xcur) / 2.0
    done = fcur == 0.0 or abs(sbis) < tol
    if not done:
        if abs(spre) > tol and abs(fcur) < abs(fpre):
            if xpre == xblk:
                stry = -fcur * (xcur - xpre) / (fcur - fpre)
            else:
                dpre = (fpre - fcur) / (xpre - xcur)
                dblk = (fblk - fcur) / (xblk - xcur)
                stry = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            if 2.0 * abs(stry) < min(abs(spre), 3.0 * abs(sbis) - tol):
                spre = scur
                scur = stry
            else:
                spre = sbis
                scur = sbis
        else:
            spre = sbis
            scur = sbis
        xpre = xcur
        fpre = fcur
        if abs(scur) > tol:
            xcur += scur
        elif sbis > 0:
            xcur += tol
        else:
            xcur -= tol
    st[0], st[1], st[2] = xpre, xcur, xblk
    st[3], st[4], st[5] = fpre, fcur, fblk
    st[6], st[7] = spre, scur
    return xcur, done


@njit(cache=True)
def brent_start(st, xa, xb, fa, fb, xtol, rtol):
    """Begin a bracketed Brent search; returns ``(x, done)``.

    Reverse communication: while not done, evaluate ``f(x)`` and pass it to
    :func:`brent_next`.  This keeps every caller free of function arguments
    (which would stop numba from caching the compiled code).
    """
    st[0] = xa
    st[1] = xb
    st[2] = 0.0
    st[3] = fa
    st[4] = fb
    st[5] = 0.0
    st[6] = 0.0
    st[7] = 0.0
    st[8] = xtol
    st[9] = rtol
    if fa == 0.0:
        return xa, True
    if fb == 0.0:
        return xb, True
    return _brent_iter(st)


@njit(cache=True)
def brent_next(st, fx):
    st[4] = fx
    return _brent_iter(st)


# ---------------------------------------------------------------------------
# function families
# ---------------------------------------------------------------------------


@njit(cache=True)
def fval(row, x):
    a = row[0]
    r = row[1]
    if row[2] > 0.0 and x > row[3]:
        return a * row[3] ** r + row[4] * (x - row[3])
    return a * x**r


@njit(cache=True)
def fder(row, x):
    a = row[0]
    r = row[1]
    if row[2] > 0.0 and x >= row[3]:
        return row[4]
    if x == 0.0:
        if r < 1.0:
            return np.inf
        if r == 1.0:
            return a
        return 0.0
    return a * r * x ** (r - 1.0)


@njit(cache=True)
def finv(row, y):
    a = row[0]
    r = row[1]
    if y <= 0.0:
        return 0.0
    if row[2] > 0.0:
        level = a * row[3] ** r
        if y > level:
            return row[3] + (y - level) / row[4]
    return (y / a) ** (1.0 / r)


@njit(cache=True)
def _med(a, b, c):
    return max(min(a, b), min(max(a, b), c))


# ---------------------------------------------------------------------------
# level 1: recognition and inclusion probabilities of one agent
# ---------------------------------------------------------------------------


@njit(cache=True)
def effort_at(imp, alpha, beta, i, Y, p):
    if alpha[i] == 0.0:
        return 0.0
    return finv(imp[i], (Y * p - beta[i]) / alpha[i])


@njit(cache=True)
def _phi(p, args):
    imp, cst, alpha, beta, delta, i, Y, VD, VL = args
    x = effort_at(imp, alpha, beta, i, Y, p)
    fd = alpha[i] * fder(imp[i], x)
    cd = fder(cst[i], x)
    if fd == np.inf:
        lhs = 0.0
    else:
        lhs = Y * cd / fd
    s = VL + VD
    return lhs - _med((1.0 - p) * s, (1.0 - p) * VL, s - VD / delta[i] - fval(cst[i], x))


@njit(cache=True)
def inclusion(cost, p, delta_i, VD, VL):
    if VD <= 0.0:
        return 0.0
    return _med(0.0, VD * (1.0 - p), VD / delta_i - p * (VL + VD) + cost) / VD


@njit(cache=True)
def _refine_small_p(args, p0, p):
    """Re-solve a root just above ``p0`` in ``log(p - p0)``.

    An absolute tolerance cannot resolve a gap ``p - p0`` far below it, yet
    the effort behind that gap (and hence the first-order condition)
    depends on its relative value.  ``p0`` is the recognition the headstart
    alone secures.
    """
    lo = P_FLOOR
    flo = _phi(p0 + lo, args)
    if flo >= 0.0:
        # the gap is below anything representable: treat as a corner
        return p0
    hi = 2.0 * TINY_P
    fhi = _phi(p0 + hi, args)
    if fhi < 0.0:
        return p
    st = np.empty(10)
    t, done = brent_start(st, math.log(lo), math.log(hi), flo, fhi, 1e-13, 4e-16)
    it = 0
    while not done and it < MAXITER:
        t, done = brent_next(st, _phi(p0 + math.exp(t), args))
        it += 1
    return p0 + math.exp(t)


@njit(cache=True)
def step1(imp, cst, alpha, beta, delta, i, Y, VD, VL, ptol):
    """Returns ``(p, mu, x, cost, capped)``; ``capped`` flags ``phi(1) < 0``."""
    p0 = beta[i] / Y
    capped = False
    if alpha[i] == 0.0:
        p = p0
    else:
        args = (imp, cst, alpha, beta, delta, i, Y, VD, VL)
        f0 = _phi(p0, args)
        if f0 >= 0.0:
            p = p0
        else:
            f1 = _phi(1.0, args)
            if f1 < 0.0:
                p = 1.0
                capped = True
            else:
                st = np.empty(10)
                p, done = brent_start(st, p0, 1.0, f0, f1, ptol, 4e-16)
                it = 0
                while not done and it < MAXITER:
                    p, done = brent_next(st, _phi(p, args))
                    it += 1
                if p - p0 < TINY_P and p0 + 2.0 * TINY_P < 1.0:
                    p = _refine_small_p(args, p0, p)
    x = effort_at(imp, alpha, beta, i, Y, p)
    c = fval(cst[i], x)
    mu = inclusion(c, p, delta[i], VD, VL)
    return p, mu, x, c, capped


@njit(cache=True)
def profile(imp, cst, alpha, beta, delta, Y, VD, VL, ptol):
    n = imp.shape[0]
    p = np.empty(n)
    mu = np.empty(n)
    x = np.empty(n)
    c = np.empty(n)
    capped = False
    for i in range(n):
        pi, mi, xi, ci, cap = step1(imp, cst, alpha, beta, delta, i, Y, VD, VL, ptol)
        p[i] = pi
        mu[i] = mi
        x[i] = xi
        c[i] = ci
        capped = capped or cap
    return p, mu, x, c, capped


# ---------------------------------------------------------------------------
# level 2: aggregate output
# ---------------------------------------------------------------------------


@njit(cache=True)
def sum_p(imp, cst, alpha, beta, delta, Y, VD, VL, ptol):
    s = 0.0
    for i in range(imp.shape[0]):
        s += step1(imp, cst, alpha, beta, delta, i, Y, VD, VL, ptol)[0]
    return s


@njit(cache=True)
def _excess_p(t, args):
    imp, cst, alpha, beta, delta, VD, VL, ptol = args
    return sum_p(imp, cst, alpha, beta, delta, math.exp(t), VD, VL, ptol) - 1.0


@njit(cache=True)
def step2(imp, cst, alpha, beta, delta, VD, VL, growth, ytol, ptol, y_guess):
    """Aggregate output with ``sum p == 1``; returns ``(Y, status)``.

    Each ``p_i`` falls strictly in ``Y`` wherever it is interior, so the
    crossing is unique and a growing bracket plus Brent suffices.  The
    bracket starts one percent wide around ``y_guess`` (callers pass the
    previous solution) and widens geometrically up to ``growth`` per step.
    """
    ylo_bound = max(np.sum(beta), Y_FLOOR)
    tmin = math.log(ylo_bound)
    tcap = math.log(Y_CAP)
    args = (imp, cst, alpha, beta, delta, VD, VL, ptol)
    t0 = math.log(max(y_guess, ylo_bound))
    g0 = _excess_p(t0, args)
    if g0 == 0.0:
        return math.exp(t0), OK
    lg = math.log(growth)
    step = min(0.01, lg)
    # excess falls in Y: positive means Y is too small
    direction = 1.0 if g0 > 0.0 else -1.0
    ta = t0
    ga = g0
    while True:
        tb = ta + direction * step
        if tb >= tcap:
            return math.exp(tb), DIVERGED
        if tb <= tmin:
            tb = tmin
            gb = _excess_p(tb, args)
            if gb < 0.0:
                return ylo_bound, NO_CROSSING
        else:
            gb = _excess_p(tb, args)
        if gb == 0.0:
            return math.exp(tb), OK
        if (gb > 0.0) != (ga > 0.0):
            break
        if tb == tmin:
            return ylo_bound, NO_CROSSING
        ta = tb
        ga = gb
        step = min(2.0 * step, lg)
    st = np.empty(10)
    t, done = brent_start(st, ta, tb, ga, gb, ytol, 4e-16)
    it = 0
    while not done and it < MAXITER:
        t, done = brent_next(st, _excess_p(t, args))
        it += 1
    return math.exp(t), OK


# ---------------------------------------------------------------------------
# level 3: vote price
# ---------------------------------------------------------------------------


@njit(cache=True)
def vdelta_cap(delta, VL):
    # past this price every agent is bought in every coalition (mu_i = 1 - p_i)
    m = 0.0
    for d in delta:
        m = max(m, d / (1.0 - d))
    return VL * m * (1.0 + 1e-9) + 1e-300


@njit(cache=True)
def inclusion_excess(p, mu, c, delta, k, VD, VL):
    """Signed distance from the inclusion target; positive above the root.

    For interior ``k`` this is ``sum mu - (k - 1)``.  For ``k = 1`` and
    ``k = n`` the sum is flat on one side of the root, so the excess is
    replaced by the smooth quantity that leaves zero with it: the largest
    unclipped inclusion ratio (``k = 1``) or the smallest margin below full
    inclusion (``k = n``).
    """
    n = p.shape[0]
    if k == 1 or k == n:
        best = -np.inf if k == 1 else np.inf
        for i in range(n):
            t = (VD / delta[i] - p[i] * (VL + VD) + c[i]) / VD
            if k == 1:
                best = max(best, t)
            else:
                best = min(best, t - (1.0 - p[i]))
        return best
    return np.sum(mu) - (k - 1)


@njit(cache=True)
def _excess_mu(VD, args):
    imp, cst, alpha, beta, delta, VL, k, growth, ytol, ptol, ybuf = args
    Y, status = step2(imp, cst, alpha, beta, delta, VD, VL, growth, ytol, ptol, ybuf[0])
    if status == OK:
        ybuf[0] = Y
    p, mu, x, c, capped = profile(imp, cst, alpha, beta, delta, Y, VD, VL, ptol)
    return inclusion_excess(p, mu, c, delta, k, VD, VL)


@njit(cache=True)
def step3(imp, cst, alpha, beta, delta, k, VL, growth, ytol, ptol, vtol, scan, decades, ybuf):
    """Largest vote price ``VDelta`` with ``sum mu == k - 1``.

    Scans a geometric grid downward from a price at which every agent is
    already bought (so the excess is positive) and refines the first sign
    change.  Returns ``(VDelta, status)``.
    """
    if VL <= 0.0:
        return 0.0, OK
    args = (imp, cst, alpha, beta, delta, VL, k, growth, ytol, ptol, ybuf)
    top = vdelta_cap(delta, VL)
    ratio = 10.0 ** (-decades / scan)
    hi = top
    ghi = _excess_mu(hi, args)
    if ghi <= 0.0:
        return hi, NO_CROSSING
    first = 1
    if ybuf.shape[0] > 1 and ybuf[1] != 0.0:
        # warm start from a neighbouring price: skip the part of the scan
        # above twice that price if the excess is still positive there; a
        # negative hint means the neighbour ended at a zero price, so probe
        # the lowest node first
        if ybuf[1] > 0.0:
            j0 = int(math.floor(math.log(top / (2.0 * ybuf[1])) / -math.log(ratio)))
        else:
            j0 = scan - 1
        if 2 <= j0 < scan:
            node = top * ratio**j0
            g = _excess_mu(node, args)
            if g > 0.0:
                hi = node
                ghi = g
                first = j0 + 1
    for j in range(first, scan + 1):
        lo = top * ratio**j if j < scan else 0.0
        # at a zero price nobody is bought
        glo = _excess_mu(lo, args) if lo > 0.0 else -1.0
        if glo <= 0.0:
            xtol = vtol * top
            vd = lo
            if glo < 0.0:
                st = np.empty(10)
                vd, done = brent_start(st, lo, hi, glo, ghi, xtol, 4e-16)
                it = 0
                while not done and it < MAXITER:
                    vd, done = brent_next(st, _excess_mu(vd, args))
                    it += 1
            # the excess can sit at exactly zero on an interval (agents with
            # zero recognition fill the seats); move to the top of it
            up = vd * (1.0 + 1e-9) + xtol
            if up < hi and _excess_mu(up, args) <= 0.0:
                a, b = up, hi
                it = 0
                while b - a > xtol and it < MAXITER:
                    m = 0.5 * (a + b)
                    if _excess_mu(m, args) <= 0.0:
                        a = m
                    else:
                        b = m
                    it += 1
                vd = a
            return vd, OK
        hi = lo
        ghi = glo
    return 0.0, NO_CROSSING


# ---------------------------------------------------------------------------
# level 4: residual surplus
# ---------------------------------------------------------------------------


@njit(cache=True)
def budget_residual(p, c, delta, k, VD, VL):
    # agents below the vote price contribute their own discounted value;
    # the min() makes the identity continuous across the N1/N2 boundary
    s = VL + k * VD
    for i in range(p.shape[0]):
        d = delta[i]
        s += min(0.0, d / (1.0 - d) * (p[i] * VL - c[i]) - VD)
    return s - 1.0


@njit(cache=True)
def inner_state(imp, cst, alpha, beta, delta, k, VL, growth, ytol, ptol, vtol, scan, decades, ybuf):
    """Everything beneath a given ``VL``: ``(VD, Y, p, mu, x, c, R, status)``."""
    VD, s3 = step3(imp, cst, alpha, beta, delta, k, VL, growth, ytol, ptol, vtol, scan, decades, ybuf)
    Y, s2 = step2(imp, cst, alpha, beta, delta, VD, VL, growth, ytol, ptol, ybuf[0])
    if s2 == OK:
        ybuf[0] = Y
    p, mu, x, c, capped = profile(imp, cst, alpha, beta, delta, Y, VD, VL, ptol)
    R = budget_residual(p, c, delta, k, VD, VL)
    status = s3 if s3 != OK else s2
    return VD, Y, p, mu, x, c, R, status


@njit(cache=True)
def _residual_vl(VL, args):
    imp, cst, alpha, beta, delta, k, growth, ytol, ptol, vtol, scan, decades, ybuf = args
    return inner_state(imp, cst, alpha, beta, delta, k, VL, growth, ytol, ptol, vtol, scan, decades, ybuf)[6]


@njit(cache=True)
def residual_grid(imp, cst, alpha, beta, delta, k, grid, growth, ytol, ptol, vtol, scan, decades):
    """Budget residual on a grid of ``VL`` values (ascending).

    Consecutive nodes share warm starts: the last ``Y`` and the last vote
    price, which lets the vote-price scan skip its upper part.
    """
    ybuf = np.ones(2)
    ybuf[1] = 0.0
    out = np.empty(grid.shape[0])
    for j in range(grid.shape[0]):
        VL = grid[j]
        if VL <= 0.0:
            out[j] = -1.0
            continue
        st = inner_state(imp, cst, alpha, beta, delta, k, VL, growth, ytol, ptol, vtol, scan, decades, ybuf)
        out[j] = st[6]
        if st[7] != OK:
            ybuf[1] = 0.0
        else:
            ybuf[1] = st[0] if st[0] > 0.0 else -1.0
    return out


@njit(cache=True)
def refine_vl(imp, cst, alpha, beta, delta, k, lo, hi, rlo, rhi, growth, ytol, ptol, vtol, scan, decades, ltol):
    ybuf = np.ones(1)
    args = (imp, cst, alpha, beta, delta, k, growth, ytol, ptol, vtol, scan, decades, ybuf)
    st = np.empty(10)
    vl, done = brent_start(st, lo, hi, rlo, rhi, ltol, 4e-16)
    it = 0
    while not done and it < MAXITER:
        vl, done = brent_next(st, _residual_vl(vl, args))
        it += 1
    return vl
