"""Compiled inner loops for ensembles of Galerkin fields.

All kernels take ``X`` of shape ``(2h, paths)`` in the internal layout of
:class:`transport_noise.basis.Layout` and loop over paths innermost so the
compiler can vectorise across the ensemble.  Paths are processed in chunks
that fit in cache; chunks run in parallel when numba has threads.
"""

import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the default search warns about an old TBB on some systems
    numba.config.THREADING_LAYER = "workqueue"

CHUNK = 128


@njit(parallel=True, cache=True)
def triad_drift(X, tp, tk, sk, tl, sl, tw, out):
    """``out = <ω ⊗ ω, H_{e_j}>`` for every mode ``j`` (the sign-flipped advection).

    Triad ``t`` couples the unordered pair ``(k, l)`` with ``k + l = p``; the
    raw complex amplitude of ``k`` is ``X[tk] + i sk X[tk + h]``.  Triads
    must be sorted by ``p``; each output row is accumulated locally.
    """
    d, P = X.shape
    h = d // 2
    nt = tp.shape[0]
    nchunk = (P + CHUNK - 1) // CHUNK
    for c in prange(nchunk):
        a = c * CHUNK
        b = min(P, a + CHUNK)
        w = b - a
        accr = np.zeros(w)
        acci = np.zeros(w)
        for i in range(d):
            for q in range(a, b):
                out[i, q] = 0.0
        if nt == 0:
            continue
        cur = tp[0]
        for t in range(nt):
            p = tp[t]
            if p != cur:
                for q in range(w):
                    out[cur, a + q] = accr[q]
                    out[cur + h, a + q] = acci[q]
                    accr[q] = 0.0
                    acci[q] = 0.0
                cur = p
            ww = tw[t]
            s1 = sk[t]
            s2 = sl[t]
            xr = X[tk[t], a:b]
            xi = X[tk[t] + h, a:b]
            yr = X[tl[t], a:b]
            yi = X[tl[t] + h, a:b]
            for q in range(w):
                ar = xr[q]
                ai = s1 * xi[q]
                br = yr[q]
                bi = s2 * yi[q]
                accr[q] += ww * (ar * br - ai * bi)
                acci[q] += ww * (ar * bi + ai * br)
        for q in range(w):
            out[cur, a + q] = accr[q]
            out[cur + h, a + q] = acci[q]


@njit(cache=True)
def _max_line(line_ptr):
    m = 0
    for t in range(line_ptr.shape[0] - 1):
        m = max(m, line_ptr[t + 1] - line_ptr[t])
    return m


@njit(parallel=True, cache=True)
def lines_cayley(X, mode_ptr, line_ptr, alpha_re, alpha_im, slot, sign, write, j, theta):
    """In place: ``X <- (I - θT/2)^{-1} (I + θT/2) X`` for noise mode ``j``.

    ``theta`` holds one increment per path.  On each line the system is
    tridiagonal with constant off-diagonals; the elimination pivots
    ``m_n = 1 + κ / m_{n-1}`` are real and >= 1, so no pivoting is needed.
    """
    d, P = X.shape
    h = d // 2
    L = _max_line(line_ptr)
    nchunk = (P + CHUNK - 1) // CHUNK
    for c in prange(nchunk):
        a = c * CHUNK
        b = min(P, a + CHUNK)
        w = b - a
        zr = np.empty((L, w))
        zi = np.empty((L, w))
        dr = np.empty((L, w))
        di = np.empty((L, w))
        mm = np.empty((L, w))
        for t in range(mode_ptr[j], mode_ptr[j + 1]):
            s0 = line_ptr[t]
            n_pts = line_ptr[t + 1] - s0
            ar = alpha_re[t]
            ai = alpha_im[t]
            a2 = ar * ar + ai * ai
            for n in range(n_pts):
                i = slot[s0 + n]
                s = sign[s0 + n]
                for q in range(w):
                    zr[n, q] = X[i, a + q]
                    zi[n, q] = s * X[i + h, a + q]
            # right-hand side (I + gT) z and forward sweep, g = θ/2.
            # T z_n = α z_{n-1} + β z_{n+1} with β = -conj(α) = (-ar, ai).
            for n in range(n_pts):
                for q in range(w):
                    g = 0.5 * theta[a + q]
                    rr = zr[n, q]
                    ri = zi[n, q]
                    if n > 0:
                        rr += g * (ar * zr[n - 1, q] - ai * zi[n - 1, q])
                        ri += g * (ar * zi[n - 1, q] + ai * zr[n - 1, q])
                    if n + 1 < n_pts:
                        rr += g * (-ar * zr[n + 1, q] - ai * zi[n + 1, q])
                        ri += g * (-ar * zi[n + 1, q] + ai * zr[n + 1, q])
                    if n == 0:
                        m = 1.0
                    else:
                        m = 1.0 + g * g * a2 / mm[n - 1, q]
                        # subtract sub * d'_{n-1}, sub = -g α
                        rr += g * (ar * dr[n - 1, q] - ai * di[n - 1, q])
                        ri += g * (ar * di[n - 1, q] + ai * dr[n - 1, q])
                    mm[n, q] = m
                    dr[n, q] = rr / m
                    di[n, q] = ri / m
            # back substitution: z_n = d_n - (sup / m_n) z_{n+1}, sup = g conj(α)
            for n in range(n_pts - 1, -1, -1):
                for q in range(w):
                    if n == n_pts - 1:
                        zr[n, q] = dr[n, q]
                        zi[n, q] = di[n, q]
                    else:
                        g = 0.5 * theta[a + q]
                        ur = zr[n + 1, q]
                        ui = zi[n + 1, q]
                        # conj(α) * u = (ar u_r + ai u_i) + i (ar u_i - ai u_r)
                        zr[n, q] = dr[n, q] - g * (ar * ur + ai * ui) / mm[n, q]
                        zi[n, q] = di[n, q] - g * (ar * ui - ai * ur) / mm[n, q]
            for n in range(n_pts):
                if write[s0 + n]:
                    i = slot[s0 + n]
                    s = sign[s0 + n]
                    for q in range(w):
                        X[i, a + q] = zr[n, q]
                        X[i + h, a + q] = s * zi[n, q]


@njit(parallel=True, cache=True)
def lines_matvec(X, mode_ptr, line_ptr, alpha_re, alpha_im, slot, sign, write, j, out):
    """``out = A_k X`` for noise mode ``j`` (rows off every line are zeroed)."""
    d, P = X.shape
    h = d // 2
    nchunk = (P + CHUNK - 1) // CHUNK
    for c in prange(nchunk):
        a = c * CHUNK
        b = min(P, a + CHUNK)
        for i in range(d):
            for q in range(a, b):
                out[i, q] = 0.0
        for t in range(mode_ptr[j], mode_ptr[j + 1]):
            s0 = line_ptr[t]
            n_pts = line_ptr[t + 1] - s0
            ar = alpha_re[t]
            ai = alpha_im[t]
            for n in range(n_pts):
                if not write[s0 + n]:
                    continue
                i = slot[s0 + n]
                s = sign[s0 + n]
                for q in range(a, b):
                    rr = 0.0
                    ri = 0.0
                    if n > 0:
                        i0 = slot[s0 + n - 1]
                        s_ = sign[s0 + n - 1]
                        ur = X[i0, q]
                        ui = s_ * X[i0 + h, q]
                        rr += ar * ur - ai * ui
                        ri += ar * ui + ai * ur
                    if n + 1 < n_pts:
                        i1 = slot[s0 + n + 1]
                        s_ = sign[s0 + n + 1]
                        ur = X[i1, q]
                        ui = s_ * X[i1 + h, q]
                        rr += -ar * ur - ai * ui
                        ri += -ar * ui + ai * ur
                    out[i, q] = rr
                    out[i + h, q] = s * ri


@njit(parallel=True, cache=True)
def reduced_sq_sums(js, radii, out):
    """``2 sum_{0 < |k| <= R_i, k != j_i} |h(j_i, k, j_i - k)|^2`` for each row ``i``.

    Rows of the disc are summed with Neumaier compensation, then combined
    the same way, so the result is accurate to a few ulp.
    """
    c = 2.0 * np.pi ** 4
    for i in prange(js.shape[0]):
        R = radii[i]
        r2 = R * R
        j1 = js[i, 0]
        j2 = js[i, 1]
        s = 0.0
        comp = 0.0
        for a in range(-R, R + 1):
            rs = 0.0
            rc = 0.0
            for b in range(-R, R + 1):
                n2 = a * a + b * b
                if n2 == 0 or n2 > r2 or (a == j1 and b == j2):
                    continue
                l1 = j1 - a
                l2 = j2 - b
                jk = float(j1 * b - j2 * a)
                d = 1.0 / (l1 * l1 + l2 * l2) - 1.0 / n2
                v = c * jk * jk * d * d
                t = rs + v
                if abs(rs) >= abs(v):
                    rc += (rs - t) + v
                else:
                    rc += (v - t) + rs
                rs = t
            rs += rc
            t = s + rs
            if abs(s) >= abs(rs):
                comp += (s - t) + rs
            else:
                comp += (rs - t) + s
            s = t
        out[i] = 2.0 * (s + comp)
