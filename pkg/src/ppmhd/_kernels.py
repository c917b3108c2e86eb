"""Optional fused numba kernels for the gamma-law flux hot paths.

These mirror the numpy reference implementations in flux.py to rounding
(the per-component operation order matches); the package works without
numba, just slower.  Kernels act on flattened (n, 8) C-contiguous blocks.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


@njit(cache=True, inline="always")
def _flux_point(u, i, gamma, axis):
    rho = u[i, 0]
    ir = 1.0 / rho
    m1, m2, m3 = u[i, 1], u[i, 2], u[i, 3]
    b1, b2, b3 = u[i, 4], u[i, 5], u[i, 6]
    en_tot = u[i, 7]
    kin = (m1 * m1 + m2 * m2 + m3 * m3) * ir
    b2n = b1 * b1 + b2 * b2 + b3 * b3
    en = en_tot - 0.5 * kin - 0.5 * b2n
    ptot = (gamma - 1.0) * en + 0.5 * b2n
    vi = u[i, axis] * ir
    bi = u[i, 3 + axis]
    vdotb = (m1 * b1 + m2 * b2 + m3 * b3) * ir
    f0 = rho * vi
    f1 = vi * m1 - bi * b1
    f2 = vi * m2 - bi * b2
    f3 = vi * m3 - bi * b3
    f4 = vi * b1 - bi * (m1 * ir)
    f5 = vi * b2 - bi * (m2 * ir)
    f6 = vi * b3 - bi * (m3 * ir)
    if axis == 1:
        f1 += ptot
    elif axis == 2:
        f2 += ptot
    else:
        f3 += ptot
    f7 = vi * (en_tot + ptot) - bi * vdotb
    return f0, f1, f2, f3, f4, f5, f6, f7


@njit(cache=True, parallel=True, fastmath=False)
def _flux_kernel(u, gamma, axis, out):
    for i in prange(u.shape[0]):
        f = _flux_point(u, i, gamma, axis)
        for c in range(8):
            out[i, c] = f[c]


@njit(cache=True, parallel=True, fastmath=False)
def _lf_kernel(ul, ur, gamma, axis, alpha, out):
    for i in prange(ul.shape[0]):
        fl = _flux_point(ul, i, gamma, axis)
        fr = _flux_point(ur, i, gamma, axis)
        for c in range(8):
            out[i, c] = 0.5 * (fl[c] + fr[c] - alpha * (ur[i, c] - ul[i, c]))


@njit(cache=True, fastmath=False)
def _pp_kernel(coef, phi_rho, phi_en, eps_rho, eps_e, bad):
    """Two-stage positivity scaling on (n, 8, nc) blocks, in place.

    bad[i] is set when the cell average itself is inadmissible (the
    limiter's precondition); such cells are left untouched.
    """
    n, _, nc = coef.shape
    nrho = phi_rho.shape[1]
    nen = phi_en.shape[1]
    for i in range(n):
        rho_avg = coef[i, 0, 0]
        m2 = (coef[i, 1, 0] ** 2 + coef[i, 2, 0] ** 2 + coef[i, 3, 0] ** 2)
        b2 = (coef[i, 4, 0] ** 2 + coef[i, 5, 0] ** 2 + coef[i, 6, 0] ** 2)
        en_avg = coef[i, 7, 0] - 0.5 * m2 / rho_avg - 0.5 * b2
        if not (rho_avg > eps_rho and en_avg > eps_e):
            bad[i] = 1
            continue
        if nc == 1:
            continue
        # Stage 1: density floor via deviation scaling.
        rho_min = np.inf
        for k in range(nrho):
            val = 0.0
            for m in range(nc):
                val += coef[i, 0, m] * phi_rho[m, k]
            if val < rho_min:
                rho_min = val
        if rho_min < eps_rho and rho_avg > rho_min:
            theta1 = (rho_avg - eps_rho) / (rho_avg - rho_min)
            if theta1 < 0.0:
                theta1 = 0.0
            elif theta1 > 1.0:
                theta1 = 1.0
            for m in range(1, nc):
                coef[i, 0, m] *= theta1
        # Stage 2: internal-energy floor via full-vector scaling.
        theta2 = 1.0
        for k in range(nen):
            v0 = 0.0
            v1 = 0.0
            v2 = 0.0
            v3 = 0.0
            v4 = 0.0
            v5 = 0.0
            v6 = 0.0
            v7 = 0.0
            for m in range(nc):
                p = phi_en[m, k]
                v0 += coef[i, 0, m] * p
                v1 += coef[i, 1, m] * p
                v2 += coef[i, 2, m] * p
                v3 += coef[i, 3, m] * p
                v4 += coef[i, 4, m] * p
                v5 += coef[i, 5, m] * p
                v6 += coef[i, 6, m] * p
                v7 += coef[i, 7, m] * p
            en = v7 - 0.5 * (v1 * v1 + v2 * v2 + v3 * v3) / v0 \
                - 0.5 * (v4 * v4 + v5 * v5 + v6 * v6)
            if en < eps_e:
                ratio = (en_avg - eps_e) / (en_avg - en)
                if ratio < theta2:
                    theta2 = ratio
        if theta2 < 1.0:
            if theta2 < 0.0:
                theta2 = 0.0
            for c in range(8):
                for m in range(1, nc):
                    coef[i, c, m] *= theta2


def fused_pp_limit(coef, phi_rho, phi_energy, eps_rho, eps_e):
    """Numba path of the positivity limiter; returns index of the first
    inadmissible cell average or None.  Modifies coef in place.  The
    density stage runs on phi_rho nodes (extended set for flux-evaluation
    safety); the energy stage on phi_energy (the provable decomposition
    set)."""
    lead = coef.shape[:-2]
    flat = np.ascontiguousarray(coef).reshape(-1, coef.shape[-2],
                                              coef.shape[-1])
    bad = np.zeros(flat.shape[0], dtype=np.int8)
    _pp_kernel(flat, np.ascontiguousarray(phi_rho),
               np.ascontiguousarray(phi_energy), eps_rho, eps_e, bad)
    coef[...] = flat.reshape(coef.shape)
    if bad.any():
        return np.unravel_index(int(np.argmax(bad)), lead)
    return None


@njit(cache=True)
def _dg2d_face_traces(coef, xm, xp, ym, yp):
    """Node-major face trace values of a (npx, npy, 8, nc) modal field:
    four (npx, npy, Q, 8) arrays plus the first cell index with a
    non-positive node density (or (-1, -1))."""
    npx, npy, _, nc = coef.shape
    q = xm.shape[1]
    txm = np.empty((npx, npy, q, 8))
    txp = np.empty((npx, npy, q, 8))
    tym = np.empty((npx, npy, q, 8))
    typ = np.empty((npx, npy, q, 8))
    bad_i = -1
    bad_j = -1
    for i in range(npx):
        for j in range(npy):
            ok = True
            for k in range(q):
                for c in range(8):
                    a = 0.0
                    b = 0.0
                    cc = 0.0
                    d = 0.0
                    for m in range(nc):
                        cf = coef[i, j, c, m]
                        a += cf * xm[m, k]
                        b += cf * xp[m, k]
                        cc += cf * ym[m, k]
                        d += cf * yp[m, k]
                    txm[i, j, k, c] = a
                    txp[i, j, k, c] = b
                    tym[i, j, k, c] = cc
                    typ[i, j, k, c] = d
                if (txm[i, j, k, 0] <= 0.0 or txp[i, j, k, 0] <= 0.0
                        or tym[i, j, k, 0] <= 0.0 or typ[i, j, k, 0] <= 0.0):
                    ok = False
            if not ok and bad_i < 0:
                bad_i = i
                bad_j = j
    return txm, txp, tym, typ, bad_i, bad_j


@njit(cache=True, inline="always")
def _eval_point(coef, i, j, phi, k, out):
    """Evaluate one cell's 8 components at node k of matrix phi (nc, N)."""
    nc = coef.shape[3]
    for c in range(8):
        a = 0.0
        for m in range(nc):
            a += coef[i, j, c, m] * phi[m, k]
        out[c] = a


@njit(cache=True, inline="always")
def _flux_row(u, gamma, axis):
    """Flux of one 8-component state row (same math as _flux_point)."""
    rho = u[0]
    ir = 1.0 / rho
    kin = (u[1] * u[1] + u[2] * u[2] + u[3] * u[3]) * ir
    b2n = u[4] * u[4] + u[5] * u[5] + u[6] * u[6]
    en = u[7] - 0.5 * kin - 0.5 * b2n
    ptot = (gamma - 1.0) * en + 0.5 * b2n
    vi = u[axis] * ir
    bi = u[3 + axis]
    vdotb = (u[1] * u[4] + u[2] * u[5] + u[3] * u[6]) * ir
    f0 = rho * vi
    f1 = vi * u[1] - bi * u[4]
    f2 = vi * u[2] - bi * u[5]
    f3 = vi * u[3] - bi * u[6]
    f4 = vi * u[4] - bi * (u[1] * ir)
    f5 = vi * u[5] - bi * (u[2] * ir)
    f6 = vi * u[6] - bi * (u[3] * ir)
    if axis == 1:
        f1 += ptot
    elif axis == 2:
        f2 += ptot
    else:
        f3 += ptot
    f7 = vi * (u[7] + ptot) - bi * vdotb
    return f0, f1, f2, f3, f4, f5, f6, f7


@njit(cache=True)
def _dg2d_step_kernel(coef, xm, xp, ym, yp, pv, wxm, wxp, wym, wyp,
                      wdxi, wdeta, mass, gamma, a1, a2, dx, dy, g, dt, out):
    """One fused forward-Euler step: traces evaluated inline at faces and
    volume nodes, fluxes accumulated straight into the new coefficients.
    Returns (1, i, j) for the first cell with a non-positive node
    density, else (0, 0, 0)."""
    npx, npy, _, nc = coef.shape
    nx = npx - 2 * g
    ny = npy - 2 * g
    q = xm.shape[1]
    nv = pv.shape[1]
    inv_dx = 1.0 / dx
    inv_dy = 1.0 / dy
    ul = np.empty(8)
    ur = np.empty(8)
    for i in range(nx):
        for j in range(ny):
            for c in range(8):
                for m in range(nc):
                    out[i, j, c, m] = 0.0
    # x faces
    for i in range(npx - 1):
        for j in range(g, g + ny):
            for k in range(q):
                _eval_point(coef, i, j, xp, k, ul)
                _eval_point(coef, i + 1, j, xm, k, ur)
                if ul[0] <= 0.0 or ur[0] <= 0.0:
                    return 1, (i - g if ul[0] <= 0.0 else i + 1 - g), j - g
                fl = _flux_row(ul, gamma, 1)
                fr = _flux_row(ur, gamma, 1)
                for c in range(8):
                    fh = 0.5 * (fl[c] + fr[c] - a1 * (ur[c] - ul[c]))
                    t = fh * inv_dx
                    if g <= i < g + nx:
                        for m in range(nc):
                            out[i - g, j - g, c, m] -= t * wxp[k, m]
                    if g <= i + 1 < g + nx:
                        for m in range(nc):
                            out[i + 1 - g, j - g, c, m] += t * wxm[k, m]
    # y faces
    for i in range(g, g + nx):
        for j in range(npy - 1):
            for k in range(q):
                _eval_point(coef, i, j, yp, k, ul)
                _eval_point(coef, i, j + 1, ym, k, ur)
                if ul[0] <= 0.0 or ur[0] <= 0.0:
                    return 1, i - g, (j - g if ul[0] <= 0.0 else j + 1 - g)
                fl = _flux_row(ul, gamma, 2)
                fr = _flux_row(ur, gamma, 2)
                for c in range(8):
                    fh = 0.5 * (fl[c] + fr[c] - a2 * (ur[c] - ul[c]))
                    t = fh * inv_dy
                    if g <= j < g + ny:
                        for m in range(nc):
                            out[i - g, j - g, c, m] -= t * wyp[k, m]
                    if g <= j + 1 < g + ny:
                        for m in range(nc):
                            out[i - g, j + 1 - g, c, m] += t * wym[k, m]
    # volume
    if nc > 1:
        for i in range(g, g + nx):
            for j in range(g, g + ny):
                for k in range(nv):
                    _eval_point(coef, i, j, pv, k, ul)
                    if ul[0] <= 0.0:
                        return 1, i - g, j - g
                    f1 = _flux_row(ul, gamma, 1)
                    f2 = _flux_row(ul, gamma, 2)
                    for c in range(8):
                        t1 = f1[c] * inv_dx
                        t2 = f2[c] * inv_dy
                        for m in range(nc):
                            out[i - g, j - g, c, m] += (t1 * wdxi[k, m]
                                                        + t2 * wdeta[k, m])
    # rhs -> new coefficients
    for i in range(nx):
        for j in range(ny):
            for c in range(8):
                for m in range(nc):
                    out[i, j, c, m] = coef[i + g, j + g, c, m] \
                        + dt * out[i, j, c, m] / mass[m]
    return 0, 0, 0


@njit(cache=True, inline="always")
def _speeds_point(u, i, gamma, axis):
    """(sqrt(rho), v_axis, reduced fast, full fast) of one state row."""
    rho = u[i, 0]
    ir = 1.0 / rho
    kin = (u[i, 1] ** 2 + u[i, 2] ** 2 + u[i, 3] ** 2) * ir
    b2 = u[i, 4] ** 2 + u[i, 5] ** 2 + u[i, 6] ** 2
    en = u[i, 7] - 0.5 * kin - 0.5 * b2
    p = (gamma - 1.0) * en
    if p < 0.0:
        p = 0.0
    cs2_red = 0.5 * (gamma - 1.0) * p * ir
    cs2_full = gamma * p * ir
    b2r = b2 * ir
    bi2r = u[i, 3 + axis] ** 2 * ir
    s = cs2_red + b2r
    d = s * s - 4.0 * cs2_red * bi2r
    if d < 0.0:
        d = 0.0
    cred = np.sqrt(0.5 * (s + np.sqrt(d)))
    s = cs2_full + b2r
    d = s * s - 4.0 * cs2_full * bi2r
    if d < 0.0:
        d = 0.0
    cfull = np.sqrt(0.5 * (s + np.sqrt(d)))
    return np.sqrt(rho), u[i, axis] * ir, cred, cfull


@njit(cache=True)
def _controls_pairs(fam, axis, spatial, gamma):
    """(sqrt-bound max, spectral max) pairing adjacent cells of one trace
    family (npx, npy, Q, 8) along spatial axis 0 or 1."""
    npx, npy, q, _ = fam.shape
    bound = 0.0
    spect = 0.0
    for i in range(npx):
        for j in range(npy):
            for k in range(q):
                sr, vi, cred, cfull = _speeds_point(fam[i, j], k, gamma, axis)
                a = abs(vi) + cfull
                if a > spect:
                    spect = a
                ii = i - 1 if spatial == 0 else i
                jj = j if spatial == 0 else j - 1
                if ii < 0 or jj < 0:
                    continue
                sr2, vi2, cred2, _ = _speeds_point(fam[ii, jj], k, gamma, axis)
                cmax = cred if cred > cred2 else cred2
                mixed = abs(sr * vi + sr2 * vi2) / (sr + sr2) + cmax
                head = abs(vi) + cred
                h2 = abs(vi2) + cred2
                if h2 > head:
                    head = h2
                if mixed > head:
                    head = mixed
                db1 = fam[i, j, k, 4] - fam[ii, jj, k, 4]
                db2 = fam[i, j, k, 5] - fam[ii, jj, k, 5]
                db3 = fam[i, j, k, 6] - fam[ii, jj, k, 6]
                val = head + np.sqrt(db1 * db1 + db2 * db2 + db3 * db3) \
                    / (sr + sr2)
                if val > bound:
                    bound = val
    return bound, spect


def _face_trace_mats(basis):
    return (np.ascontiguousarray(basis.phi_face_x[0]),
            np.ascontiguousarray(basis.phi_face_x[1]),
            np.ascontiguousarray(basis.phi_face_y[0]),
            np.ascontiguousarray(basis.phi_face_y[1]))


def fused_dg2d_controls(coef, basis, gamma):
    """((bound1, bound2), (spect1, spect2)[, face traces]) or None when a
    node density is non-positive (caller falls back to the clamped path)."""
    coef = np.ascontiguousarray(coef)
    txm, txp, tym, typ, bi, _ = _dg2d_face_traces(coef, *_face_trace_mats(basis))
    if bi >= 0:
        return None
    b1a, r1a = _controls_pairs(txp, 1, 0, gamma)
    b1b, r1b = _controls_pairs(txm, 1, 0, gamma)
    b2a, r2a = _controls_pairs(typ, 2, 1, gamma)
    b2b, r2b = _controls_pairs(tym, 2, 1, gamma)
    return ((max(b1a, b1b), max(b2a, b2b)),
            (max(r1a, r1b), max(r2a, r2b)))


def fused_dg2d_euler(coef, basis, gamma, dt, a1, a2, dx, dy, g):
    """(new interior coefficients, bad cell or None) for one Euler step;
    traces are evaluated inline at faces and volume nodes."""
    coef = np.ascontiguousarray(coef)
    nx = coef.shape[0] - 2 * g
    ny = coef.shape[1] - 2 * g
    out = np.empty((nx, ny) + coef.shape[2:])
    wdxi, wdeta = basis.wdphi_volume
    wxm, wxp = basis.wphi_face_x
    wym, wyp = basis.wphi_face_y
    found, bi, bj = _dg2d_step_kernel(
        coef, *_face_trace_mats(basis),
        np.ascontiguousarray(basis.phi_volume), wxm, wxp, wym, wyp,
        wdxi, wdeta, basis.mass, gamma, a1, a2, dx, dy, g, dt, out)
    if found:
        return None, (bi, bj)
    return out, None


def fused_physical_flux(u, gamma, axis):
    """Numba path for gamma-law flux on an arbitrary-shape state array."""
    shape = u.shape
    flat = np.ascontiguousarray(u, dtype=np.float64).reshape(-1, 8)
    out = np.empty_like(flat)
    _flux_kernel(flat, gamma, axis, out)
    return out.reshape(shape)


def fused_lf_flux(ul, ur, gamma, axis, alpha):
    """Numba path for the LF numerical flux with a scalar viscosity."""
    shape = np.broadcast_shapes(ul.shape, ur.shape)
    fl = np.ascontiguousarray(np.broadcast_to(ul, shape),
                              dtype=np.float64).reshape(-1, 8)
    fr = np.ascontiguousarray(np.broadcast_to(ur, shape),
                              dtype=np.float64).reshape(-1, 8)
    out = np.empty_like(fl)
    _lf_kernel(fl, fr, gamma, axis, alpha, out)
    return out.reshape(shape)
