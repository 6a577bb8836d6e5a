"""Hot loops: MUSCL/minmod face reconstruction + Roe flux, Shapiro line filters.

Every kernel has a numba implementation (``*_nb``) and a numpy one
(``*_np``).  The public names (:func:`face_fluxes`, :func:`face_jacobians`,
:func:`scatter_blocks`, :func:`shapiro_lines`)
point at whichever backend :mod:`arom._accel` selected.  Both backends use the
same scalar operation order, so they agree to rounding (in practice bitwise).

Conventions
-----------
``U`` is a 2-D array ``(n_padded_cells, c)`` of conservative variables
``(rho, rho*u_1, ..., rho*u_d, rho*E)``.  A face is described by four padded
cell indices ``a, b, c, d`` = cells ``i-2, i-1, i, i+1`` around the face
between ``i-1`` and ``i``.  ``normal`` is the column of the normal momentum.
Kernels return ``(flux, bad)`` where ``bad`` is the first face whose
reconstructed states (or Roe average) are not admissible, else ``-1``.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

LIMITER_NONE = 0
LIMITER_CONSERVATIVE = 1
LIMITER_PRIMITIVE = 2

LIMITERS = {"none": LIMITER_NONE, "conservative": LIMITER_CONSERVATIVE, "primitive": LIMITER_PRIMITIVE}


# ---------------------------------------------------------------------------
# numba backend


@njit
def _minmod_nb(a, b):
    if a * b <= 0.0:
        return 0.0
    if abs(a) < abs(b):
        return a
    return b


# Scratch rows used by the scalar kernels below.  Helpers take (array, row)
# pairs instead of row views: numba views are reference counted, which
# dominates the cost of a single face evaluation.
_QL, _QR, _WA, _WB, _WC, _WD = 0, 1, 2, 3, 4, 5


@njit
def _to_prim_nb(u, i, w, j, gamma):
    c = u.shape[1]
    rho = u[i, 0]
    ke = 0.0
    for r in range(1, c - 1):
        vel = u[i, r] / rho
        w[j, r] = vel
        ke += vel * vel
    w[j, 0] = rho
    w[j, c - 1] = (gamma - 1.0) * (u[i, c - 1] - 0.5 * rho * ke)


@njit
def _to_cons_nb(w, i, u, j, gamma):
    c = w.shape[1]
    rho = w[i, 0]
    ke = 0.0
    for r in range(1, c - 1):
        u[j, r] = rho * w[i, r]
        ke += w[i, r] * w[i, r]
    u[j, 0] = rho
    u[j, c - 1] = w[i, c - 1] / (gamma - 1.0) + 0.5 * rho * ke


@njit
def _roe_nb(rL, mnL, mtL, EL, rR, mnR, mtR, ER, normal, two_d, gamma, efix, out, f):
    """Roe flux between two conservative states (split into scalars) into ``out[f]``.

    ``mn``/``mt`` are the normal and tangential momenta (``mt`` unused in 1-D).
    Returns False when a state or the Roe average is not admissible.
    """
    c = out.shape[1]
    gm1 = gamma - 1.0
    tang = 3 - normal
    if not (rL > 0.0 and rR > 0.0):
        return False
    unL = mnL / rL
    unR = mnR / rR
    utL = 0.0
    utR = 0.0
    if two_d:
        utL = mtL / rL
        utR = mtR / rR
    pL = gm1 * (EL - 0.5 * rL * (unL * unL + utL * utL))
    pR = gm1 * (ER - 0.5 * rR * (unR * unR + utR * utR))
    if not (pL > 0.0 and pR > 0.0):
        return False
    HL = (EL + pL) / rL
    HR = (ER + pR) / rR

    sL = np.sqrt(rL)
    sR = np.sqrt(rR)
    inv = 1.0 / (sL + sR)
    un = (sL * unL + sR * unR) * inv
    ut = (sL * utL + sR * utR) * inv
    H = (sL * HL + sR * HR) * inv
    q2 = un * un + ut * ut
    a2 = gm1 * (H - 0.5 * q2)
    if not (a2 > 0.0):
        return False
    a = np.sqrt(a2)
    rho = sL * sR

    dr = rR - rL
    dun = unR - unL
    dut = utR - utL
    dp = pR - pL
    w1 = (dp - rho * a * dun) / (2.0 * a2)
    w2 = dr - dp / a2
    w3 = rho * dut
    w4 = (dp + rho * a * dun) / (2.0 * a2)

    l1 = abs(un - a)
    l2 = abs(un)
    l4 = abs(un + a)
    if efix > 0.0:
        delta = efix * a
        if l1 < delta:
            l1 = (l1 * l1 + delta * delta) / (2.0 * delta)
        if l4 < delta:
            l4 = (l4 * l4 + delta * delta) / (2.0 * delta)

    d_mass = l1 * w1 + l2 * w2 + l4 * w4
    d_norm = l1 * w1 * (un - a) + l2 * w2 * un + l4 * w4 * (un + a)
    d_ener = l1 * w1 * (H - un * a) + l2 * w2 * (0.5 * q2) + l2 * w3 * ut + l4 * w4 * (H + un * a)

    mL = rL * unL
    mR = rR * unR
    out[f, 0] = 0.5 * (mL + mR) - 0.5 * d_mass
    out[f, normal] = 0.5 * ((mL * unL + pL) + (mR * unR + pR)) - 0.5 * d_norm
    if two_d:
        d_tang = (l1 * w1 + l2 * w2 + l4 * w4) * ut + l2 * w3
        out[f, tang] = 0.5 * (mL * utL + mR * utR) - 0.5 * d_tang
    out[f, c - 1] = 0.5 * ((EL + pL) * unL + (ER + pR) * unR) - 0.5 * d_ener
    return True


@njit
def _left_nb(U, a, b, cc, r, limiter):
    ub = U[b, r]
    if limiter == 0:
        return ub
    uc = U[cc, r]
    return ub + 0.5 * _minmod_nb(ub - U[a, r], uc - ub)


@njit
def _right_nb(U, b, cc, d, r, limiter):
    uc = U[cc, r]
    if limiter == 0:
        return uc
    ub = U[b, r]
    return uc - 0.5 * _minmod_nb(uc - ub, U[d, r] - uc)


@njit
def _face_nb(U, a, b, cc, d, normal, gamma, limiter, efix, W, out, f):
    """Flux of the face with cells ``a, b | cc, d`` (rows of ``U``) into ``out[f]``."""
    c = U.shape[1]
    two_d = c == 4
    tang = 3 - normal
    if limiter == 2:
        _to_prim_nb(U, a, W, _WA, gamma)
        _to_prim_nb(U, b, W, _WB, gamma)
        _to_prim_nb(U, cc, W, _WC, gamma)
        _to_prim_nb(U, d, W, _WD, gamma)
        for r in range(c):
            wb = W[_WB, r]
            wc = W[_WC, r]
            sl = _minmod_nb(wb - W[_WA, r], wc - wb)
            sr = _minmod_nb(wc - wb, W[_WD, r] - wc)
            W[_WA, r] = wb + 0.5 * sl
            W[_WD, r] = wc - 0.5 * sr
        if not (W[_WA, 0] > 0.0 and W[_WD, 0] > 0.0 and W[_WA, c - 1] > 0.0 and W[_WD, c - 1] > 0.0):
            return False
        _to_cons_nb(W, _WA, W, _QL, gamma)
        _to_cons_nb(W, _WD, W, _QR, gamma)
        mtL = W[_QL, tang] if two_d else 0.0
        mtR = W[_QR, tang] if two_d else 0.0
        return _roe_nb(W[_QL, 0], W[_QL, normal], mtL, W[_QL, c - 1],
                       W[_QR, 0], W[_QR, normal], mtR, W[_QR, c - 1],
                       normal, two_d, gamma, efix, out, f)
    rL = _left_nb(U, a, b, cc, 0, limiter)
    rR = _right_nb(U, b, cc, d, 0, limiter)
    mnL = _left_nb(U, a, b, cc, normal, limiter)
    mnR = _right_nb(U, b, cc, d, normal, limiter)
    mtL = 0.0
    mtR = 0.0
    if two_d:
        mtL = _left_nb(U, a, b, cc, tang, limiter)
        mtR = _right_nb(U, b, cc, d, tang, limiter)
    EL = _left_nb(U, a, b, cc, c - 1, limiter)
    ER = _right_nb(U, b, cc, d, c - 1, limiter)
    return _roe_nb(rL, mnL, mtL, EL, rR, mnR, mtR, ER, normal, two_d, gamma, efix, out, f)


@njit
def face_fluxes_nb(U, ia, ib, ic, id_, normal, gamma, limiter, efix):
    nf = ia.shape[0]
    c = U.shape[1]
    flux = np.empty((nf, c))
    W = np.empty((6, c))
    for f in range(nf):
        if not _face_nb(U, ia[f], ib[f], ic[f], id_[f], normal, gamma, limiter, efix, W, flux, f):
            return flux, f
    return flux, -1


@njit
def face_jacobians_nb(U, ia, ib, ic, id_, src, sgn, signs, normal, gamma, limiter, efix, eps):
    """Forward-difference derivatives ``D[f, pos, r, v] = dF_r / du_v`` of every
    face flux with respect to the interior cell ``u = src[corner pos]``.

    ``src``/``sgn`` map padded cells to the interior cell they copy and the
    sign row (of ``signs``) applied to it; ``src < 0`` marks frozen data.
    All corners of a face copying the same cell are perturbed together and
    the derivative is stored on the first of them (later ones get zeros).
    The step is ``eps * (1 + |u|)``; it flips sign when the forward state is
    not admissible.  Returns ``(D, bad)`` like :func:`face_fluxes_nb`.
    """
    nf = ia.shape[0]
    c = U.shape[1]
    D = np.zeros((nf, 4, c, c))
    Q = np.empty((4, c))
    base = np.empty((4, c))
    W = np.empty((6, c))
    F = np.empty((2, c))
    corner = np.empty(4, dtype=np.int64)
    cs = np.empty(4, dtype=np.int64)
    cg = np.empty(4, dtype=np.int64)
    for f in range(nf):
        corner[0] = ia[f]
        corner[1] = ib[f]
        corner[2] = ic[f]
        corner[3] = id_[f]
        for p in range(4):
            cs[p] = src[corner[p]]
            cg[p] = sgn[corner[p]]
            for r in range(c):
                Q[p, r] = U[corner[p], r]
                base[p, r] = Q[p, r]
        if not _face_nb(Q, 0, 1, 2, 3, normal, gamma, limiter, efix, W, F, 0):
            return D, f
        for pos in range(4):
            j = cs[pos]
            if j < 0:
                continue
            first = True
            for p in range(pos):
                if cs[p] == j:
                    first = False
            if not first:
                continue
            for v in range(c):
                h = eps * (1.0 + abs(base[pos, v]))
                ok = False
                for attempt in range(2):
                    for p in range(pos, 4):
                        if cs[p] == j:
                            Q[p, v] = base[p, v] + h * signs[cg[p], v]
                    ok = _face_nb(Q, 0, 1, 2, 3, normal, gamma, limiter, efix, W, F, 1)
                    if ok:
                        break
                    h = -h
                for p in range(pos, 4):
                    Q[p, v] = base[p, v]
                if not ok:
                    return D, f
                inv = 1.0 / h
                for r in range(c):
                    D[f, pos, r, v] = (F[1, r] - F[0, r]) * inv
    return D, -1


@njit
def scatter_blocks_nb(D, face, pos, pair, coef, n_pairs):
    """``out[pair] += coef * D[face, pos]``."""
    c = D.shape[2]
    out = np.zeros((n_pairs, c, c))
    for k in range(face.shape[0]):
        f = face[k]
        p = pos[k]
        q = pair[k]
        a = coef[k]
        for r in range(c):
            for v in range(c):
                out[q, r, v] += a * D[f, p, r, v]
    return out


@njit
def flux_divergence_nb(flux, right, left, inv_h, out, accumulate):
    """``out (+)= -(flux[right] - flux[left]) * inv_h`` row by row."""
    n, c = out.shape
    for i in range(n):
        r = right[i]
        l = left[i]
        for v in range(c):
            d = -(flux[r, v] - flux[l, v]) * inv_h
            if accumulate:
                out[i, v] += d
            else:
                out[i, v] = d
    return out


@njit
def residual_max_nb(values, hist, rows, f, dtb):
    """Per-row ``max |values[rows] - dtb * f + hist[rows]|`` (NaN propagates)."""
    n, c = f.shape
    out = np.empty(n)
    for i in range(n):
        r = rows[i]
        m = 0.0
        for v in range(c):
            a = abs(values[r, v] - dtb * f[i, v] + hist[r, v])
            if not a <= m:
                m = a
        out[i] = m
    return out


@njit
def admissible_nb(values, gamma):
    """Per-row ``rho > 0 and p > 0``."""
    n, c = values.shape
    out = np.empty(n, dtype=np.bool_)
    for i in range(n):
        rho = values[i, 0]
        s = 0.0
        for v in range(1, c - 1):
            s += values[i, v] * values[i, v]
        p = (gamma - 1.0) * (values[i, c - 1] - 0.5 * s / rho) if rho != 0.0 else np.nan
        out[i] = rho > 0.0 and p > 0.0
    return out


@njit
def pad_values_nb(U, src, sgn, frozen):
    """Padded values: ``U[src]`` (momentum ``sgn`` negated) or ``frozen`` where ``src < 0``."""
    n, c = frozen.shape
    P = np.empty((n, c))
    for p in range(n):
        s = src[p]
        if s < 0:
            for v in range(c):
                P[p, v] = frozen[p, v]
        else:
            g = sgn[p]
            for v in range(c):
                x = U[s, v]
                P[p, v] = -x if (g > 0 and v == g) else x
    return P


@njit
def dilate_mask_nb(mask, nx, ny, r, two_d):
    """Grow a flat ``(nx, ny)`` cell mask by ``r`` cells along each axis."""
    out = np.zeros(nx * ny, dtype=np.bool_)
    for i in range(nx):
        for j in range(ny):
            if mask[i * ny + j]:
                for ii in range(max(i - r, 0), min(i + r + 1, nx)):
                    out[ii * ny + j] = True
                if two_d:
                    for jj in range(max(j - r, 0), min(j + r + 1, ny)):
                        out[i * ny + jj] = True
    return out


@njit
def shapiro_grid_nb(V, weights, axis):
    """``shapiro_lines`` along ``axis`` (0 or 1) of a ``(nx, ny, c)`` array."""
    nx, ny, c = V.shape
    h = (weights.shape[0] - 1) // 2
    out = np.empty_like(V)
    n = nx if axis == 0 else ny
    for i in range(nx):
        for j in range(ny):
            pos = i if axis == 0 else j
            for v in range(c):
                x = V[i, j, v]
                acc = 0.0
                for k in range(1, h + 1):
                    jp = min(pos + k, n - 1)
                    jm = max(pos - k, 0)
                    if axis == 0:
                        acc += weights[h + k] * ((V[jp, j, v] - x) + (V[jm, j, v] - x))
                    else:
                        acc += weights[h + k] * ((V[i, jp, v] - x) + (V[i, jm, v] - x))
                out[i, j, v] = x + acc
    return out


@njit
def shapiro_lines_nb(lines, weights):
    """Filter every row of ``lines`` (n_lines, n) with symmetric ``weights``,
    closing the ends by zeroth-order extrapolation.

    Written as ``v_i + sum_k w_k ((v_{i+k} - v_i) + (v_{i-k} - v_i))`` so a
    constant line is returned bit for bit.
    """
    nl, n = lines.shape
    h = (weights.shape[0] - 1) // 2
    out = np.empty_like(lines)
    for l in range(nl):
        for i in range(n):
            v = lines[l, i]
            acc = 0.0
            for k in range(1, h + 1):
                jp = min(i + k, n - 1)
                jm = max(i - k, 0)
                acc += weights[h + k] * ((lines[l, jp] - v) + (lines[l, jm] - v))
            out[l, i] = v + acc
    return out


# ---------------------------------------------------------------------------
# numpy backend


def _minmod_np(a, b):
    return np.where(a * b <= 0.0, 0.0, np.where(np.abs(a) < np.abs(b), a, b))


def _to_prim_np(u, gamma):
    w = np.empty_like(u)
    rho = u[:, 0]
    vel = u[:, 1:-1] / rho[:, None]
    w[:, 0] = rho
    w[:, 1:-1] = vel
    ke = np.zeros_like(rho)
    for r in range(vel.shape[1]):
        ke = ke + vel[:, r] * vel[:, r]
    w[:, -1] = (gamma - 1.0) * (u[:, -1] - 0.5 * rho * ke)
    return w


def _to_cons_np(w, gamma):
    u = np.empty_like(w)
    rho = w[:, 0]
    ke = np.zeros_like(rho)
    for r in range(1, w.shape[1] - 1):
        u[:, r] = rho * w[:, r]
        ke = ke + w[:, r] * w[:, r]
    u[:, 0] = rho
    u[:, -1] = w[:, -1] / (gamma - 1.0) + 0.5 * rho * ke
    return u


def _roe_np(qL, qR, normal, gamma, efix):
    c = qL.shape[1]
    gm1 = gamma - 1.0
    two_d = c == 4
    tang = 3 - normal
    flux = np.empty_like(qL)

    rL = qL[:, 0]
    rR = qR[:, 0]
    bad = ~((rL > 0.0) & (rR > 0.0))
    with np.errstate(all="ignore"):
        unL = qL[:, normal] / rL
        unR = qR[:, normal] / rR
        if two_d:
            utL = qL[:, tang] / rL
            utR = qR[:, tang] / rR
        else:
            utL = np.zeros_like(rL)
            utR = np.zeros_like(rR)
        pL = gm1 * (qL[:, -1] - 0.5 * rL * (unL * unL + utL * utL))
        pR = gm1 * (qR[:, -1] - 0.5 * rR * (unR * unR + utR * utR))
        bad |= ~((pL > 0.0) & (pR > 0.0))
        HL = (qL[:, -1] + pL) / rL
        HR = (qR[:, -1] + pR) / rR

        sL = np.sqrt(rL)
        sR = np.sqrt(rR)
        inv = 1.0 / (sL + sR)
        un = (sL * unL + sR * unR) * inv
        ut = (sL * utL + sR * utR) * inv
        H = (sL * HL + sR * HR) * inv
        q2 = un * un + ut * ut
        a2 = gm1 * (H - 0.5 * q2)
        bad |= ~(a2 > 0.0)
        a = np.sqrt(a2)
        rho = sL * sR

        dr = rR - rL
        dun = unR - unL
        dut = utR - utL
        dp = pR - pL
        w1 = (dp - rho * a * dun) / (2.0 * a2)
        w2 = dr - dp / a2
        w3 = rho * dut
        w4 = (dp + rho * a * dun) / (2.0 * a2)

        l1 = np.abs(un - a)
        l2 = np.abs(un)
        l4 = np.abs(un + a)
        if efix > 0.0:
            delta = efix * a
            l1 = np.where(l1 < delta, (l1 * l1 + delta * delta) / (2.0 * delta), l1)
            l4 = np.where(l4 < delta, (l4 * l4 + delta * delta) / (2.0 * delta), l4)

        d_mass = l1 * w1 + l2 * w2 + l4 * w4
        d_norm = l1 * w1 * (un - a) + l2 * w2 * un + l4 * w4 * (un + a)
        d_ener = l1 * w1 * (H - un * a) + l2 * w2 * (0.5 * q2) + l2 * w3 * ut + l4 * w4 * (H + un * a)

        mL = rL * unL
        mR = rR * unR
        flux[:, 0] = 0.5 * (mL + mR) - 0.5 * d_mass
        flux[:, normal] = 0.5 * ((mL * unL + pL) + (mR * unR + pR)) - 0.5 * d_norm
        if two_d:
            d_tang = (l1 * w1 + l2 * w2 + l4 * w4) * ut + l2 * w3
            flux[:, tang] = 0.5 * (mL * utL + mR * utR) - 0.5 * d_tang
        flux[:, -1] = 0.5 * ((qL[:, -1] + pL) * unL + (qR[:, -1] + pR) * unR) - 0.5 * d_ener
    return flux, bad


def _face_np(Ua, Ub, Uc, Ud, normal, gamma, limiter, efix):
    if limiter == LIMITER_PRIMITIVE:
        with np.errstate(all="ignore"):
            wa = _to_prim_np(Ua, gamma)
            wb = _to_prim_np(Ub, gamma)
            wc = _to_prim_np(Uc, gamma)
            wd = _to_prim_np(Ud, gamma)
            wl = wb + 0.5 * _minmod_np(wb - wa, wc - wb)
            wr = wc - 0.5 * _minmod_np(wc - wb, wd - wc)
            pre_bad = ~((wl[:, 0] > 0.0) & (wr[:, 0] > 0.0) & (wl[:, -1] > 0.0) & (wr[:, -1] > 0.0))
            qL = _to_cons_np(wl, gamma)
            qR = _to_cons_np(wr, gamma)
    elif limiter == LIMITER_CONSERVATIVE:
        qL = Ub + 0.5 * _minmod_np(Ub - Ua, Uc - Ub)
        qR = Uc - 0.5 * _minmod_np(Uc - Ub, Ud - Uc)
        pre_bad = None
    else:
        qL = Ub
        qR = Uc
        pre_bad = None
    flux, bad = _roe_np(qL, qR, normal, gamma, efix)
    if pre_bad is not None:
        bad |= pre_bad
    return flux, bad


def face_fluxes_np(U, ia, ib, ic, id_, normal, gamma, limiter, efix):
    flux, bad = _face_np(U[ia], U[ib], U[ic], U[id_], normal, gamma, limiter, efix)
    if bad.any():
        return flux, int(np.argmax(bad))
    return flux, -1


def face_jacobians_np(U, ia, ib, ic, id_, src, sgn, signs, normal, gamma, limiter, efix, eps):
    corners = (ia, ib, ic, id_)
    Q = [U[k] for k in corners]
    base = [q.copy() for q in Q]
    cs = np.stack([src[k] for k in corners], axis=1)
    cg = np.stack([sgn[k] for k in corners], axis=1)
    nf, c = Q[0].shape
    D = np.zeros((nf, 4, c, c))
    F0, bad = _face_np(*Q, normal, gamma, limiter, efix)
    if bad.any():
        return D, int(np.argmax(bad))
    for pos in range(4):
        j = cs[:, pos]
        active = j >= 0
        for p in range(pos):
            active &= cs[:, p] != j
        if not active.any():
            continue
        group = [active & (cs[:, p] == j) if p >= pos else None for p in range(4)]
        for v in range(c):
            h = eps * (1.0 + np.abs(base[pos][:, v]))
            for attempt in range(2):
                for p in range(pos, 4):
                    Q[p][:, v] = np.where(group[p], base[p][:, v] + h * signs[cg[:, p], v], base[p][:, v])
                F1, bad = _face_np(*Q, normal, gamma, limiter, efix)
                bad &= active
                if not bad.any():
                    break
                h = np.where(bad, -h, h)
            for p in range(pos, 4):
                Q[p][:, v] = base[p][:, v]
            if bad.any():
                return D, int(np.argmax(bad))
            D[:, pos, :, v] = np.where(active[:, None], (F1 - F0) / h[:, None], 0.0)
    return D, -1


def scatter_blocks_np(D, face, pos, pair, coef, n_pairs):
    c = D.shape[2]
    out = np.zeros((n_pairs, c, c))
    np.add.at(out, pair, coef[:, None, None] * D[face, pos])
    return out


def flux_divergence_np(flux, right, left, inv_h, out, accumulate):
    d = -(flux[right] - flux[left]) * inv_h
    if accumulate:
        out += d
    else:
        out[...] = d
    return out


def residual_max_np(values, hist, rows, f, dtb):
    return np.max(np.abs(values[rows] - dtb * f + hist[rows]), axis=1)


def admissible_np(values, gamma):
    rho = values[:, 0]
    with np.errstate(all="ignore"):
        ke = 0.5 * np.sum(values[:, 1:-1] * values[:, 1:-1], axis=1) / rho
        p = (gamma - 1.0) * (values[:, -1] - ke)
    return (rho > 0.0) & (p > 0.0)


def pad_values_np(U, src, sgn, frozen):
    c = frozen.shape[1]
    P = frozen.copy()
    ok = src >= 0
    flip = np.ones((3, c))
    flip[1, 1] = flip[2, 2] = -1.0
    P[ok] = U[src[ok]] * flip[sgn[ok]]
    return P


def dilate_mask_np(mask, nx, ny, r, two_d):
    grid = mask.reshape(nx, ny)
    out = grid.copy()
    for o in range(1, r + 1):
        out[o:] |= grid[:-o]
        out[:-o] |= grid[o:]
        if two_d:
            out[:, o:] |= grid[:, :-o]
            out[:, :-o] |= grid[:, o:]
    return out.reshape(-1)


def shapiro_grid_np(V, weights, axis):
    W = np.moveaxis(V, axis, -1)
    lines = np.ascontiguousarray(W).reshape(-1, W.shape[-1])
    return np.moveaxis(shapiro_lines_np(lines, weights).reshape(W.shape), -1, axis)


def shapiro_lines_np(lines, weights):
    h = (weights.shape[0] - 1) // 2
    n = lines.shape[1]
    padded = np.pad(lines, ((0, 0), (h, h)), mode="edge")
    acc = np.zeros_like(lines)
    for k in range(1, h + 1):
        acc += weights[h + k] * ((padded[:, h + k : h + k + n] - lines) + (padded[:, h - k : h - k + n] - lines))
    return lines + acc


if USE_NUMBA:
    face_fluxes = face_fluxes_nb
    face_jacobians = face_jacobians_nb
    scatter_blocks = scatter_blocks_nb
    shapiro_lines = shapiro_lines_nb
    flux_divergence = flux_divergence_nb
    residual_max = residual_max_nb
    admissible = admissible_nb
    pad_values = pad_values_nb
    dilate_mask = dilate_mask_nb
    shapiro_grid = shapiro_grid_nb
else:
    face_fluxes = face_fluxes_np
    face_jacobians = face_jacobians_np
    scatter_blocks = scatter_blocks_np
    shapiro_lines = shapiro_lines_np
    flux_divergence = flux_divergence_np
    residual_max = residual_max_np
    admissible = admissible_np
    pad_values = pad_values_np
    dilate_mask = dilate_mask_np
    shapiro_grid = shapiro_grid_np
