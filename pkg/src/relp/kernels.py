"""Hot numeric kernels.

Everything here is plain numpy so the identical code runs either jitted
(``RELP_BACKEND=numba``, the default) or as pure Python/numpy
(``RELP_BACKEND=numpy``). Kernels hold no global state and are safe to run
concurrently; the batch entry points parallelize over experts.

The conic solve targets one problem family::

    minimize    -x~'b + lam*1'(u+v) + kappa*s
    subject to  1'b + gamma*1'(u+v) <= 1
                u >= bh - b,  v >= b - bh,  b, u, v >= 0
                ||U b||_2 <= s                      (second-order cone)

The (u, v) block is dropped when ``lam == gamma == 0`` and the cone block is
dropped when ``kappa == 0`` or no shape factor is supplied; in both cases the
omitted variables would not affect the optimum but would destroy strict dual
feasibility. The algorithm is primal-dual path following with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step. Each direction solve reduces
the KKT system to an (m+1)-dimensional core: the (u, v) block is
diagonal-plus-rank-one and is eliminated in closed form, and the cone block
of the scaling enters as Sigma plus a rank-one update.

Variable layout   x = [b(m) | u(m), v(m) if use_uv | s if use_soc]
linear row layout z = [budget | u-bound(m), v-bound(m) if use_uv |
                       b>=0(m) | u>=0(m), v>=0(m) if use_uv]
cone rows         (s, U b) appended after the linear block.
"""

import numpy as np

from .backend import jit, prange

# solver status codes
STATUS_OPTIMAL = 0      # tight tolerances met
STATUS_LOOSE = 1        # only the loose (1e-5) tolerances met
STATUS_FAILED = 2
STATUS_SKIPPED = -1     # batch row not solved

LOOSE_TOL = 1e-5


@jit
def net_proportion_w(b_hat, b_new, gamma):
    """Root w of  w + gamma*||b_hat - w*b_new||_1 = 1  by bisection on [0, 1].

    The map is strictly increasing (slope >= 1 - gamma > 0) so the root is
    unique; 48 halvings bound the bracket below 1e-12.
    """
    m = b_hat.shape[0]
    diff = 0.0
    for i in range(m):
        diff += abs(b_hat[i] - b_new[i])
    if diff == 0.0:
        return 1.0
    lo = 0.0
    hi = 1.0
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        f = mid - 1.0
        for i in range(m):
            f += gamma * abs(b_hat[i] - mid * b_new[i])
        if f < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# structured products with the constraint matrix G (never formed densely)
# ---------------------------------------------------------------------------


@jit
def _gx(x, m, use_uv, use_soc, gamma, U, out):
    """out <- G @ x."""
    r_bp = 1 + 2 * m if use_uv else 1
    acc = 0.0
    for i in range(m):
        acc += x[i]
    if use_uv:
        su = 0.0
        sv = 0.0
        for i in range(m):
            su += x[m + i]
            sv += x[2 * m + i]
        acc += gamma * (su + sv)
    out[0] = acc
    if use_uv:
        for i in range(m):
            out[1 + i] = -x[i] - x[m + i]
            out[1 + m + i] = x[i] - x[2 * m + i]
    for i in range(m):
        out[r_bp + i] = -x[i]
    if use_uv:
        for i in range(m):
            out[r_bp + m + i] = -x[m + i]
            out[r_bp + 2 * m + i] = -x[2 * m + i]
    if use_soc:
        nl = 1 + m + (4 * m if use_uv else 0)
        n = m + (2 * m if use_uv else 0) + 1
        out[nl] = -x[n - 1]
        Ub = np.dot(U, x[:m])
        for i in range(m):
            out[nl + 1 + i] = -Ub[i]


@jit
def _gtz(z, m, use_uv, use_soc, gamma, Ut, out):
    """out <- G' @ z."""
    r_bp = 1 + 2 * m if use_uv else 1
    z0 = z[0]
    for i in range(m):
        out[i] = z0
    if use_uv:
        for i in range(m):
            out[i] += -z[1 + i] + z[1 + m + i]
            out[m + i] = gamma * z0 - z[1 + i] - z[r_bp + m + i]
            out[2 * m + i] = gamma * z0 - z[1 + m + i] - z[r_bp + 2 * m + i]
    for i in range(m):
        out[i] -= z[r_bp + i]
    if use_soc:
        nl = 1 + m + (4 * m if use_uv else 0)
        n = m + (2 * m if use_uv else 0) + 1
        zq1 = np.ascontiguousarray(z[nl + 1:nl + 1 + m])
        Utz = np.dot(Ut, zq1)
        for i in range(m):
            out[i] -= Utz[i]
        out[n - 1] = -z[nl]


# ---------------------------------------------------------------------------
# second-order cone algebra; one block, parameterized by (beta, v) with
# v the unit-hyperbolic Jordan square root of the NT scaling point, so that
# W = beta*(2 v v' - J) and inv(W) = (1/beta)*(2 (Jv)(Jv)' - J), J = diag(1,-I)
# ---------------------------------------------------------------------------


@jit
def _soc_nt_params(sq, zq, v):
    """Fill v and return beta for the NT scaling of one cone block."""
    qd = sq.shape[0]
    s1 = 0.0
    z1 = 0.0
    dot = 0.0
    for i in range(qd):
        if i > 0:
            s1 += sq[i] * sq[i]
            z1 += zq[i] * zq[i]
        dot += sq[i] * zq[i]
    a = np.sqrt(sq[0] * sq[0] - s1)
    b = np.sqrt(zq[0] * zq[0] - z1)
    gam = np.sqrt((1.0 + dot / (a * b)) / 2.0)
    beta = np.sqrt(a / b)
    inv2g = 1.0 / (2.0 * gam)
    # scaling point wbar = (sbar + J zbar) / (2 gam), then its Jordan root
    v[0] = (sq[0] / a + zq[0] / b) * inv2g
    for i in range(1, qd):
        v[i] = (sq[i] / a - zq[i] / b) * inv2g
    root = np.sqrt(2.0 * (v[0] + 1.0))
    v[0] = (v[0] + 1.0) / root
    for i in range(1, qd):
        v[i] = v[i] / root
    return beta


@jit
def _soc_apply_w(beta, v, y, out):
    """out <- W y = beta * (2 v (v'y) - J y)."""
    qd = y.shape[0]
    vy = 0.0
    for i in range(qd):
        vy += v[i] * y[i]
    out[0] = beta * (2.0 * v[0] * vy - y[0])
    for i in range(1, qd):
        out[i] = beta * (2.0 * v[i] * vy + y[i])


@jit
def _soc_apply_winv(beta, v, y, out):
    """out <- inv(W) y = (1/beta) * (2 (Jv) ((Jv)'y) - J y)."""
    qd = y.shape[0]
    ay = v[0] * y[0]
    for i in range(1, qd):
        ay -= v[i] * y[i]
    out[0] = (2.0 * v[0] * ay - y[0]) / beta
    for i in range(1, qd):
        out[i] = (-2.0 * v[i] * ay + y[i]) / beta


@jit
def _arrow_solve(lam, d, out):
    """Solve lam o u = d in the cone's Jordan algebra."""
    qd = lam.shape[0]
    l1 = 0.0
    ld = 0.0
    for i in range(1, qd):
        l1 += lam[i] * lam[i]
        ld += lam[i] * d[i]
    u0 = (lam[0] * d[0] - ld) / (lam[0] * lam[0] - l1)
    out[0] = u0
    for i in range(1, qd):
        out[i] = (d[i] - u0 * lam[i]) / lam[0]


@jit
def _max_step_orthant(v, d, lo, hi):
    """Largest alpha with v + alpha*d >= 0 on v[lo:hi] (np.inf if unbounded)."""
    amax = np.inf
    for i in range(lo, hi):
        if d[i] < 0.0:
            a = -v[i] / d[i]
            if a < amax:
                amax = a
    return amax


@jit
def _max_step_soc(v, d, lo):
    """Largest alpha keeping v[lo:] + alpha*d[lo:] inside the cone."""
    n = v.shape[0]
    aa = d[lo] * d[lo]
    bb = v[lo] * d[lo]
    cc = v[lo] * v[lo]
    for i in range(lo + 1, n):
        aa -= d[i] * d[i]
        bb -= v[i] * d[i]
        cc -= v[i] * v[i]
    bb *= 2.0
    if abs(aa) < 1e-300:
        if bb < 0.0:
            return -cc / bb
        return np.inf
    disc = bb * bb - 4.0 * aa * cc
    if disc < 0.0:
        return np.inf
    # cancellation-safe roots: r1 = qq/aa, r2 = cc/qq
    sq = np.sqrt(disc)
    qq = -0.5 * (bb + sq) if bb >= 0.0 else -0.5 * (bb - sq)
    amax = np.inf
    r1 = qq / aa
    if r1 > 0.0 and r1 < amax:
        amax = r1
    if qq != 0.0:
        r2 = cc / qq
        if r2 > 0.0 and r2 < amax:
            amax = r2
    return amax


@jit
def _max_step_all(s, ds, z, dz, nl, q):
    amax = _max_step_orthant(s, ds, 0, nl)
    a2 = _max_step_orthant(z, dz, 0, nl)
    if a2 < amax:
        amax = a2
    if q > 0:
        a3 = _max_step_soc(s, ds, nl)
        if a3 < amax:
            amax = a3
        a4 = _max_step_soc(z, dz, nl)
        if a4 < amax:
            amax = a4
    return amax


@jit
def _interior_margin(w, nl, q):
    """Distance by which w sits inside the cone (negative outside)."""
    marg = np.inf
    for i in range(nl):
        if w[i] < marg:
            marg = w[i]
    if q > 0:
        nrm = 0.0
        for i in range(nl + 1, nl + q):
            nrm += w[i] * w[i]
        sm = w[nl] - np.sqrt(nrm)
        if sm < marg:
            marg = sm
    return marg


@jit
def _into_interior(w, nl, q):
    """Shift w by (1 + violation)*e when not strictly inside the cone."""
    viol = -_interior_margin(w, nl, q)
    if viol >= -1e-12:
        shift = 1.0 + viol
        for i in range(nl):
            w[i] += shift
        if q > 0:
            w[nl] += shift


@jit
def _apply_inv_scaling2(w, d, beta, v, nl, q):
    """w <- blockdiag(diag(d), inv(W)^2) @ w, the inverse squared scaling."""
    for i in range(nl):
        w[i] *= d[i]
    if q > 0:
        tmp = np.empty(q)
        _soc_apply_winv(beta, v, w[nl:], tmp)
        _soc_apply_winv(beta, v, tmp, w[nl:])


# ---------------------------------------------------------------------------
# reduced KKT system
#
# The Newton system G' inv(W'W) G dx = r is solved by eliminating the (u, v)
# block, whose matrix is diag(Dy) + rho*ee' (Sherman-Morrison), leaving an
# (m [+1]) core S over (b [, s]). The cone contribution to the b-block is
# (Sigma + 8 v0^2 p p') / beta^2 with p = U'v1, since the inner block of
# inv(W)^2 equals (I + 8 v0^2 v1 v1') / beta^2.
# ---------------------------------------------------------------------------


@jit
def _build_reduced(m, use_uv, use_soc, gamma, d, beta, v, Ut, Sig, S, p, Dinv, Ag, ww):
    """Fill S and the elimination aux arrays; returns (tau, c1)."""
    ns = S.shape[0]
    r_bp = 1 + 2 * m if use_uv else 1
    d0 = d[0]
    for i in range(ns):
        for j in range(ns):
            S[i, j] = 0.0
    for i in range(m):
        for j in range(m):
            S[i, j] = d0
        S[i, i] += d[r_bp + i]
        if use_uv:
            S[i, i] += d[1 + i] + d[1 + m + i]
    if use_soc:
        ib2 = 1.0 / (beta * beta)
        v1 = np.ascontiguousarray(v[1:])
        pv = np.dot(Ut, v1)
        for i in range(m):
            p[i] = pv[i]
        cpp = 8.0 * v[0] * v[0] * ib2
        for i in range(m):
            for j in range(m):
                S[i, j] += ib2 * Sig[i, j] + cpp * p[i] * p[j]
        ata = 2.0 * v[0] * v[0] - 1.0
        cw = -4.0 * ata * v[0] * ib2
        for i in range(m):
            S[i, ns - 1] = cw * p[i]
            S[ns - 1, i] = cw * p[i]
        S[ns - 1, ns - 1] = ib2 * (4.0 * ata * v[0] * v[0] - 4.0 * v[0] * v[0] + 1.0)
    tau = 0.0
    c1 = 0.0
    if use_uv:
        rho = d0 * gamma * gamma
        c1 = d0 * gamma
        sumg = 0.0
        for i in range(m):
            Dinv[i] = 1.0 / (d[1 + i] + d[r_bp + m + i])
            Dinv[m + i] = 1.0 / (d[1 + m + i] + d[r_bp + 2 * m + i])
            sumg += Dinv[i] + Dinv[m + i]
        tau = rho / (1.0 + rho * sumg)
        for i in range(m):
            du = d[1 + i]
            dv = d[1 + m + i]
            Ag[i] = du * Dinv[i] - dv * Dinv[m + i]
            ww[i] = Ag[i] + c1 * sumg
            S[i, i] -= du * du * Dinv[i] + dv * dv * Dinv[m + i]
        for i in range(m):
            for j in range(m):
                S[i, j] += -c1 * (Ag[i] + Ag[j]) - c1 * c1 * sumg + tau * ww[i] * ww[j]
    tr = 0.0
    for i in range(ns):
        tr += S[i, i]
    reg = 1e-14 * (1.0 + tr / ns)
    for i in range(ns):
        S[i, i] += reg
    return tau, c1


@jit
def _solve_reduced(rhs, m, use_uv, use_soc, d, S, Dinv, tau, c1, dx):
    """Solve G' inv(W'W) G dx = rhs through the reduced core S.

    Returns False (dx untouched) when S is not finite, so degenerate
    instances degrade to the best iterate instead of raising.
    """
    ns = S.shape[0]
    n = rhs.shape[0]
    for i in range(ns):
        for j in range(ns):
            if not np.isfinite(S[i, j]):
                return False
    rt = np.empty(ns)
    for i in range(m):
        rt[i] = rhs[i]
    if use_soc:
        rt[ns - 1] = rhs[n - 1]
    yhat = np.empty(2 * m)
    if use_uv:
        s1 = 0.0
        for i in range(2 * m):
            s1 += Dinv[i] * rhs[m + i]
        sy = 0.0
        for i in range(2 * m):
            yhat[i] = Dinv[i] * (rhs[m + i] - tau * s1)
            sy += yhat[i]
        for i in range(m):
            du = d[1 + i]
            dv = d[1 + m + i]
            rt[i] -= du * yhat[i] - dv * yhat[m + i] + c1 * sy
    sol = np.linalg.solve(S, rt)
    for i in range(m):
        dx[i] = sol[i]
    if use_soc:
        dx[n - 1] = sol[ns - 1]
    if use_uv:
        sb = 0.0
        for i in range(m):
            sb += sol[i]
        s1 = 0.0
        for i in range(m):
            du = d[1 + i]
            dv = d[1 + m + i]
            tu = rhs[m + i] - du * sol[i] - c1 * sb
            tv = rhs[2 * m + i] + dv * sol[i] - c1 * sb
            yhat[i] = tu
            yhat[m + i] = tv
            s1 += Dinv[i] * tu + Dinv[m + i] * tv
        for i in range(2 * m):
            dx[m + i] = Dinv[i] * (yhat[i] - tau * s1)
    return True


# ---------------------------------------------------------------------------
# main interior-point solve
# ---------------------------------------------------------------------------


@jit
def ipm_relp(xt, bh, lam, kappa, gamma, U, use_soc, feastol, abstol, maxiter):
    """Solve one instance; returns (b, status, pres, dres, gap, iters).

    ``b`` is the transaction-cost-adjusted portfolio block of the best
    iterate. Tolerances: primal/dual feasibility ``feastol``, duality gap
    (absolute or relative) ``abstol``; if never met, the loose 1e-5
    thresholds decide between STATUS_LOOSE and STATUS_FAILED.
    """
    m = xt.shape[0]
    use_uv = (lam > 0.0) or (gamma > 0.0)
    n = m + (2 * m if use_uv else 0) + (1 if use_soc else 0)
    nl = 1 + m + (4 * m if use_uv else 0)
    q = m + 1 if use_soc else 0
    N = nl + q
    ns = m + (1 if use_soc else 0)
    nu = float(nl + (1 if use_soc else 0))

    Ut = np.ascontiguousarray(U.T)
    Sig = np.dot(Ut, U)

    c = np.zeros(n)
    for i in range(m):
        c[i] = -xt[i]
    if use_uv:
        for i in range(m):
            c[m + i] = lam
            c[2 * m + i] = lam
    if use_soc:
        c[n - 1] = kappa

    h = np.zeros(N)
    h[0] = 1.0
    if use_uv:
        for i in range(m):
            h[1 + i] = -bh[i]
            h[1 + m + i] = bh[i]

    norm_c = max(1.0, np.sqrt(np.dot(c, c)))
    norm_h = max(1.0, np.sqrt(np.dot(h, h)))

    S = np.empty((ns, ns))
    d = np.ones(nl)
    v = np.zeros(q)
    if use_soc:
        v[0] = 1.0
    beta = 1.0
    p = np.empty(m)
    Dinv = np.empty(2 * m)
    Ag = np.empty(m)
    ww = np.empty(m)

    # initial point: x from min ||Gx - h||, z from the dual least squares,
    # both shifted into the cone interior (identity scaling)
    tau, c1 = _build_reduced(m, use_uv, use_soc, gamma, d, beta, v, Ut, Sig,
                             S, p, Dinv, Ag, ww)
    rhs = np.empty(n)
    _gtz(h, m, use_uv, use_soc, gamma, Ut, rhs)
    x = np.empty(n)
    ok = _solve_reduced(rhs, m, use_uv, use_soc, d, S, Dinv, tau, c1, x)
    if not ok:
        bfail = np.zeros(m)
        return bfail, STATUS_FAILED, np.inf, np.inf, np.inf, 0
    s = np.empty(N)
    _gx(x, m, use_uv, use_soc, gamma, U, s)
    for i in range(N):
        s[i] = h[i] - s[i]
    _into_interior(s, nl, q)

    xd = np.empty(n)
    _solve_reduced(-c, m, use_uv, use_soc, d, S, Dinv, tau, c1, xd)
    z = np.empty(N)
    _gx(xd, m, use_uv, use_soc, gamma, U, z)
    _into_interior(z, nl, q)

    rd = np.empty(n)
    rp = np.empty(N)
    lam_f = np.empty(N)
    xi = np.empty(N)
    row = np.empty(N)
    gdx = np.empty(N)
    dx = np.empty(n)
    ds_a = np.empty(N)
    dz_a = np.empty(N)
    ds_c = np.empty(N)
    dz_c = np.empty(N)
    dq = np.empty(q)
    ldivq = np.empty(q)
    wsq = np.empty(q)
    wzq = np.empty(q)

    best_phi = np.inf
    best_b = np.empty(m)
    for i in range(m):
        best_b[i] = x[i]
    best_pres = np.inf
    best_dres = np.inf
    best_gap = np.inf
    stall = 0
    no_improve = 0
    status = STATUS_FAILED
    iters = 0

    for _ in range(maxiter):
        iters += 1
        _gtz(z, m, use_uv, use_soc, gamma, Ut, rd)
        for i in range(n):
            rd[i] += c[i]
        _gx(x, m, use_uv, use_soc, gamma, U, rp)
        for i in range(N):
            rp[i] += s[i] - h[i]

        pres = np.sqrt(np.dot(rp, rp)) / norm_h
        dres = np.sqrt(np.dot(rd, rd)) / norm_c
        gap = np.dot(s, z)
        pobj = np.dot(c, x)
        relgap = gap / max(1.0, abs(pobj))
        gapm = min(gap, relgap)
        if np.isnan(pres) or np.isnan(dres) or np.isnan(gap):
            break

        if max(pres, dres, gapm) < 0.999 * best_phi:
            no_improve = 0
        else:
            no_improve += 1
        if max(pres, dres, gapm) < best_phi:
            best_phi = max(pres, dres, gapm)
            for i in range(m):
                best_b[i] = x[i]
            best_pres = pres
            best_dres = dres
            best_gap = gapm
        if pres <= feastol and dres <= feastol and gapm <= abstol:
            status = STATUS_OPTIMAL
            break
        if stall >= 3 or no_improve >= 10:
            break

        # Nesterov-Todd scaling; lam_f is the scaled point W z = inv(W') s
        for i in range(nl):
            d[i] = z[i] / s[i]
            lam_f[i] = np.sqrt(s[i] * z[i])
        if use_soc:
            beta = _soc_nt_params(s[nl:], z[nl:], v)
            if not np.isfinite(beta) or beta <= 0.0:
                break
            _soc_apply_w(beta, v, z[nl:], lam_f[nl:])
        tau, c1 = _build_reduced(m, use_uv, use_soc, gamma, d, beta, v, Ut,
                                 Sig, S, p, Dinv, Ag, ww)

        mu = gap / nu

        # affine direction; xi = W'(lam \ lam o lam) = s exactly
        for i in range(N):
            xi[i] = s[i]
            row[i] = rp[i] - xi[i]
        _apply_inv_scaling2(row, d, beta, v, nl, q)
        _gtz(row, m, use_uv, use_soc, gamma, Ut, rhs)
        for i in range(n):
            rhs[i] = -rd[i] - rhs[i]
        ok = _solve_reduced(rhs, m, use_uv, use_soc, d, S, Dinv, tau, c1, dx)
        if not ok:
            break
        _gx(dx, m, use_uv, use_soc, gamma, U, gdx)
        for i in range(N):
            ds_a[i] = -gdx[i] - rp[i]
            dz_a[i] = gdx[i] + rp[i] - xi[i]
        _apply_inv_scaling2(dz_a, d, beta, v, nl, q)

        alpha_aff = _max_step_all(s, ds_a, z, dz_a, nl, q)
        if alpha_aff > 1.0:
            alpha_aff = 1.0
        gap_aff = 0.0
        for i in range(N):
            gap_aff += (s[i] + alpha_aff * ds_a[i]) * (z[i] + alpha_aff * dz_a[i])
        sigma = (gap_aff / gap) ** 3
        if sigma < 0.0:
            sigma = 0.0
        elif sigma > 1.0:
            sigma = 1.0

        # combined direction with Mehrotra correction:
        # d_s = lam o lam + (inv(W') ds_aff) o (W dz_aff) - sigma*mu*e
        for i in range(nl):
            wl = np.sqrt(s[i] / z[i])
            corr = (ds_a[i] / wl) * (wl * dz_a[i])
            ldiv = (lam_f[i] * lam_f[i] + corr - sigma * mu) / lam_f[i]
            xi[i] = wl * ldiv
        if use_soc:
            _soc_apply_winv(beta, v, ds_a[nl:], wsq)
            _soc_apply_w(beta, v, dz_a[nl:], wzq)
            dotq = 0.0
            lql = 0.0
            for i in range(q):
                dotq += wsq[i] * wzq[i]
                lql += lam_f[nl + i] * lam_f[nl + i]
            dq[0] = lql + dotq - sigma * mu
            for i in range(1, q):
                dq[i] = (2.0 * lam_f[nl] * lam_f[nl + i]
                         + wsq[0] * wzq[i] + wzq[0] * wsq[i])
            _arrow_solve(lam_f[nl:], dq, ldivq)
            _soc_apply_w(beta, v, ldivq, xi[nl:])

        for i in range(N):
            row[i] = rp[i] - xi[i]
        _apply_inv_scaling2(row, d, beta, v, nl, q)
        _gtz(row, m, use_uv, use_soc, gamma, Ut, rhs)
        for i in range(n):
            rhs[i] = -rd[i] - rhs[i]
        ok = _solve_reduced(rhs, m, use_uv, use_soc, d, S, Dinv, tau, c1, dx)
        if not ok:
            break
        _gx(dx, m, use_uv, use_soc, gamma, U, gdx)
        for i in range(N):
            ds_c[i] = -gdx[i] - rp[i]
            dz_c[i] = gdx[i] + rp[i] - xi[i]
        _apply_inv_scaling2(dz_c, d, beta, v, nl, q)

        amax = _max_step_all(s, ds_c, z, dz_c, nl, q)
        alpha = 0.99 * amax
        if alpha > 1.0:
            alpha = 1.0
        # roundoff near the cone boundary can defeat the analytic max step;
        # back off until both iterates are strictly interior
        for _ in range(40):
            ok = True
            for i in range(N):
                row[i] = s[i] + alpha * ds_c[i]
            if _interior_margin(row, nl, q) <= 0.0:
                ok = False
            if ok:
                for i in range(N):
                    row[i] = z[i] + alpha * dz_c[i]
                if _interior_margin(row, nl, q) <= 0.0:
                    ok = False
            if ok:
                break
            alpha *= 0.5
        if alpha < 1e-7:
            stall += 1
        else:
            stall = 0
        for i in range(n):
            x[i] += alpha * dx[i]
        for i in range(N):
            s[i] += alpha * ds_c[i]
            z[i] += alpha * dz_c[i]

    if status != STATUS_OPTIMAL:
        if best_pres <= LOOSE_TOL and best_dres <= LOOSE_TOL and best_gap <= LOOSE_TOL:
            status = STATUS_LOOSE
    return best_b, status, best_pres, best_dres, best_gap, iters


@jit(parallel=True)
def ipm_relp_batch(xt, U, bh, lams, kappas, gamma, mask, feastol, abstol, maxiter):
    """Solve one instance per expert row where ``mask`` is set.

    Rows with ``mask[e] == False`` are skipped (STATUS_SKIPPED, zero output
    row). Rows are independent, so results do not depend on thread schedule.
    """
    E, m = bh.shape
    B = np.zeros((E, m))
    st = np.empty(E, dtype=np.int64)
    for e in prange(E):
        if mask[e]:
            b, code, _, _, _, _ = ipm_relp(
                xt, bh[e], lams[e], kappas[e], gamma, U,
                kappas[e] > 0.0, feastol, abstol, maxiter)
            for i in range(m):
                B[e, i] = b[i]
            st[e] = code
        else:
            st[e] = STATUS_SKIPPED
    return B, st


@jit(parallel=True)
def net_proportion_batch(bhat, bnew, gamma):
    """Net-proportion solve for one (b_hat, b_new) pair per row."""
    E = bhat.shape[0]
    w = np.empty(E)
    for e in prange(E):
        w[e] = net_proportion_w(bhat[e], bnew[e], gamma)
    return w
