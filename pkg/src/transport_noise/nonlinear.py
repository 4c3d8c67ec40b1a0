"""The Euler nonlinearity on the torus and its Galerkin truncation.

For a test function φ the nonlinearity enters through the symmetric kernel
``H_φ(x, y) = (1/2) K(x - y) . (∇φ(x) - ∇φ(y))`` with the Biot-Savart kernel
``K(x) = 2 pi i sum_k (k_perp / |k|^2) ẽ_k(x)``.  The advection term
satisfies ``<u . ∇ω, φ> = -<ω ⊗ ω, H_φ>``, and
``<ω ⊗ ω, H_{e_j}> = sum_{k,l} h(j, k, l) ω̂_k ω̂_l``, where the bilinear
coefficient ``h(j, k, l) = <H_{e_j}, ẽ_k ⊗ ẽ_l>`` has a closed form.

Throughout, ``b_N(ω) = Π_N (u_N . ∇ ω_N)`` is the Galerkin advection
term; the Galerkin Euler flow is ``dω/dt = -b_N(ω)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from . import _kernels
from .basis import (
    SQRT2,
    TWO_PI,
    ComplexSpectralField,
    RealSpectralField,
    _as_points,
    biot_savart,
    eval_basis,
    layout,
    product_coefficients,
    real_to_complex,
)
from .lattice import FULL, THIRD, _check_cutoff, eps, is_positive, mode_set

PI2 = math.pi ** 2
H_SCALE = SQRT2 * PI2  # sqrt(2) pi^2


# -- pointwise kernel -----------------------------------------------------------

def kernel_eval(z, M: int) -> np.ndarray:
    """Truncated Biot-Savart kernel ``K_M(z) = -2 pi sum_{k in Λ_M} (k_perp/|k|^2) sin(2 pi k.z)``.

    ``K_M(0) = 0``.  Returns shape ``(..., 2)``.
    """
    z = _as_points(z)
    ks = mode_set(M).members
    pos = ks[(ks[:, 0] > 0) | ((ks[:, 0] == 0) & (ks[:, 1] > 0))]
    n2 = (pos ** 2).sum(axis=1)
    # each +/- pair contributes twice the positive-half term
    s = np.sin(TWO_PI * (z[..., None, 0] * pos[:, 0] + z[..., None, 1] * pos[:, 1])) / n2
    out = np.empty(z.shape[:-1] + (2,))
    out[..., 0] = -2 * TWO_PI * (s * pos[:, 1]).sum(-1)
    out[..., 1] = 2 * TWO_PI * (s * pos[:, 0]).sum(-1)
    return out


def grad_basis(j, x) -> np.ndarray:
    """``∇ e_j = 2 pi j e_{-j}``; shape ``(..., 2)``."""
    e = TWO_PI * eval_basis((-j[0], -j[1]), x)
    return np.stack([j[0] * e, j[1] * e], axis=-1)


def h_phi_eval(j, x, y, M: int) -> np.ndarray:
    """``H_{e_j}(x, y)`` with the kernel truncated to ``Λ_M``; zero on the diagonal."""
    x = _as_points(x)
    y = _as_points(y)
    k = kernel_eval(x - y, M)
    return 0.5 * (k * (grad_basis(j, x) - grad_basis(j, y))).sum(-1)


# -- closed-form coefficients ---------------------------------------------------

def h_coeff(j, k, l) -> complex:
    """Bilinear coefficient ``<H_{e_j}, ẽ_k ⊗ ẽ_l>`` (no conjugation).

    Zero unless ``j = ±(k + l)``; zero if ``k`` or ``l`` vanishes.
    """
    j = (int(j[0]), int(j[1]))
    k1, k2 = int(k[0]), int(k[1])
    l1, l2 = int(l[0]), int(l[1])
    if (k1 == 0 and k2 == 0) or (l1 == 0 and l2 == 0):
        return 0j
    s = (k1 + l1, k2 + l2)
    plus = j == s
    minus = j == (-s[0], -s[1])
    if not (plus or minus):
        return 0j
    # j . l_perp / |l|^2 + j . k_perp / |k|^2 with v_perp = (v2, -v1)
    g = H_SCALE * ((j[0] * l2 - j[1] * l1) / (l1 * l1 + l2 * l2)
                   + (j[0] * k2 - j[1] * k1) / (k1 * k1 + k2 * k2))
    if is_positive(j):
        return complex(g * (plus - minus))
    return complex(0.0, g * (plus + minus))


def h_coeff_sq_reduced(j, k) -> float:
    """``|h(j, k, j - k)|^2 = 2 pi^4 (j.k_perp)^2 (1/|j-k|^2 - 1/|k|^2)^2``."""
    l = (j[0] - k[0], j[1] - k[1])
    jk = j[0] * k[1] - j[1] * k[0]
    return 2 * math.pi ** 4 * jk * jk * (1 / (l[0] ** 2 + l[1] ** 2) - 1 / (k[0] ** 2 + k[1] ** 2)) ** 2


@dataclass(frozen=True)
class HCoefficientTable:
    """Nonzero ``h(j, k, l)`` for fixed ``j`` and ``k, l`` in ``Λ_N``."""

    j: tuple
    cutoff: int
    k: np.ndarray
    l: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def sq_sum(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def h_table(j, N: int) -> HCoefficientTable:
    """Enumerate the coefficients for ``j`` over ``k, l in Λ_N`` (both orders)."""
    j = (int(j[0]), int(j[1]))
    ms = mode_set(N)
    ks, ls, vals = [], [], []
    for sgn in (1, -1):
        for k in ms.members:
            l = (sgn * j[0] - k[0], sgn * j[1] - k[1])
            if l not in ms:
                continue
            v = h_coeff(j, k, l)
            if v != 0:
                ks.append(tuple(k))
                ls.append(l)
                vals.append(v)
    return HCoefficientTable(j, N, np.array(ks, dtype=np.int64).reshape(-1, 2),
                             np.array(ls, dtype=np.int64).reshape(-1, 2), np.array(vals))


def _reduced_terms(j, ks: np.ndarray) -> np.ndarray:
    """Vectorised :func:`h_coeff_sq_reduced` over rows of ``ks`` (``k != 0, j``)."""
    k1 = ks[:, 0].astype(np.float64)
    k2 = ks[:, 1].astype(np.float64)
    l1, l2 = j[0] - k1, j[1] - k2
    jk = j[0] * k2 - j[1] * k1
    return 2 * math.pi ** 4 * jk * jk * (1 / (l1 * l1 + l2 * l2) - 1 / (k1 * k1 + k2 * k2)) ** 2


def h_coeff_sq_sum(j, cutoff: int | None = None, tol: float | None = None) -> float:
    """``sum_{k, l} |h(j, k, l)|^2`` over ``Λ_cutoff`` or, with ``cutoff=None``, all of ``Z^2 \\ 0``.

    The infinite sum needs ``tol``.  It is summed over ``|k| <= R`` and
    completed with the asymptotic tail ``2 pi^5 |j|^4 / R^2`` (the summand
    of the reduced sum behaves like ``|j|^4 / (2 |k|^4)`` on average over
    directions).  ``R`` is doubled until that tail is below ``tol`` times the
    total; the result is an estimate, not a certified bound.
    """
    j = (int(j[0]), int(j[1]))
    if j == (0, 0):
        return 0.0
    if cutoff is not None:
        ms = mode_set(cutoff)
        ks = ms.members
        l = np.array(j) - ks
        inside = ((l ** 2).sum(axis=1) <= cutoff * cutoff) & ((l ** 2).sum(axis=1) > 0)
        # the j = -(k + l) branch equals the j = k + l branch after k -> -k
        return 2.0 * math.fsum(_reduced_terms(j, ks[inside]))
    if tol is None or not tol > 0:
        raise ValueError("the infinite sum needs a positive tolerance")
    nj2 = j[0] ** 2 + j[1] ** 2
    R = 8 * (math.isqrt(nj2) + 1)
    while True:
        ks = mode_set(R).members
        ks = ks[(ks[:, 0] != j[0]) | (ks[:, 1] != j[1])]
        partial = 2.0 * math.fsum(_reduced_terms(j, ks))
        # tail of 2 * sum over |k| > R of |j|^4 / (2 |k|^4) * 2 pi^4
        tail = 2.0 * 2 * math.pi ** 4 * nj2 ** 2 / 2 * math.pi / R ** 2
        if tail <= tol * (partial + tail):
            return partial + tail
        R *= 2
        if R > 4096:
            raise OverflowError("tolerance too small for the infinite coefficient sum")


# -- the Galerkin drift ---------------------------------------------------------

def galerkin_drift(omega: RealSpectralField) -> RealSpectralField:
    """``b_N(ω)`` by direct convolution with the closed-form coefficients.

    ``<b_N, e_j> = -sum_{k,l in Λ_N} h(j, k, l) ω̂_k ω̂_l``.  The double sum is
    complex in general; its imaginary part must cancel (checked to 1e-12
    relative).  O(N^4); meant as a reference.
    """
    N = omega.cutoff
    c = real_to_complex(omega)
    ms = mode_set(N)
    out = np.zeros(len(ms))
    scale = 0.0
    worst_imag = 0.0
    for i, j in enumerate(ms.members):
        acc = 0j
        for sgn in (1, -1):
            for k in ms.members:
                l = (sgn * j[0] - k[0], sgn * j[1] - k[1])
                if l not in ms:
                    continue
                v = h_coeff(j, k, l)
                if v != 0:
                    acc += v * c.coeff(k) * c.coeff(l)
        out[i] = -acc.real
        scale = max(scale, abs(acc))
        worst_imag = max(worst_imag, abs(acc.imag))
    if worst_imag > 1e-12 * max(scale, 1.0):
        raise ArithmeticError(f"drift coefficients have imaginary residue {worst_imag:.3e}")
    return RealSpectralField(N, out)


def _grid_size(N: int, grid: int | None) -> int:
    G = 3 * N if grid is None else int(grid)
    if G < 3 * N:
        raise ValueError(f"grid {G} < 3N = {3 * N} aliases the quadratic product")
    return G


def galerkin_drift_pseudospectral(omega: RealSpectralField, grid: int | None = None) -> RealSpectralField:
    """``b_N(ω)`` by evaluating ``u . ∇ω`` on a uniform grid of side ``G >= 3N``.

    Products of two modes in the disc have frequency at most ``2N``; with
    ``G >= 3N`` aliases of such products land outside ``Λ_N``, so the
    projection back onto ``Λ_N`` is exact up to rounding.
    """
    N = omega.cutoff
    G = _grid_size(N, grid)
    c = real_to_complex(omega)
    u1, u2 = biot_savart(c)

    def to_grid(f: ComplexSpectralField, factor=None) -> np.ndarray:
        a = np.zeros((G, G), dtype=np.complex128)
        k = np.arange(-N, N + 1)
        g = f.grid if factor is None else f.grid * factor
        a[np.ix_(k % G, k % G)] = g
        return scipy.fft.ifft2(a, norm="forward").real

    k1, k2 = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1), indexing="ij")
    w1 = to_grid(c, 2j * math.pi * k1)
    w2 = to_grid(c, 2j * math.pi * k2)
    prod = to_grid(u1) * w1 + to_grid(u2) * w2
    spec = scipy.fft.fft2(prod, norm="forward")
    lay = layout(N)
    z = spec[lay.half[:, 0] % G, lay.half[:, 1] % G]
    out = np.zeros(len(mode_set(N)))
    out[lay.pos_index] = SQRT2 * z.real
    out[lay.neg_index] = SQRT2 * z.imag
    return RealSpectralField(N, out)


def pairing_H(omega: RealSpectralField, j) -> float:
    """``<ω ⊗ ω, H_{e_j}>`` for a single mode ``j`` in O(|Λ_N|)."""
    N = omega.cutoff
    c = real_to_complex(omega)
    ms = mode_set(N)
    acc = 0j
    for sgn in (1, -1):
        l = np.array([sgn * j[0], sgn * j[1]]) - ms.members
        inside = ((l ** 2).sum(axis=1) <= N * N) & ((l ** 2).sum(axis=1) > 0)
        for k, ll in zip(ms.members[inside], l[inside]):
            v = h_coeff(j, k, ll)
            if v != 0:
                acc += v * c.coeff(k) * c.coeff(ll)
    return float(acc.real)


# -- batched drift for ensembles ------------------------------------------------

@dataclass(frozen=True)
class TriadTable:
    """Unordered triads ``k + l = p`` (``p`` positive) with weights ``2 g``."""

    cutoff: int
    p: np.ndarray
    k: np.ndarray
    k_sign: np.ndarray
    l: np.ndarray
    l_sign: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.weight)


@lru_cache(maxsize=8)
def triad_table(N: int) -> TriadTable:
    lay = layout(N)
    ms = mode_set(N)
    members = ms.members
    n2 = (members ** 2).sum(axis=1)
    # total order on modes: position in the mode set
    rows = {name: [] for name in ("p", "k", "ks", "l", "ls", "w")}
    for ip, p in enumerate(lay.half):
        l = p - members
        l2 = (l ** 2).sum(axis=1)
        ok = (l2 > 0) & (l2 <= N * N)
        kk, ll = members[ok], l[ok]
        kn2, ln2 = n2[ok], l2[ok]
        idx_k = np.nonzero(ok)[0]
        idx_l = np.array([ms.index(x) for x in ll], dtype=np.int64)
        keep = idx_k < idx_l
        kk, ll, kn2, ln2 = kk[keep], ll[keep], kn2[keep], ln2[keep]
        g = H_SCALE * ((p[0] * ll[:, 1] - p[1] * ll[:, 0]) / ln2
                       + (p[0] * kk[:, 1] - p[1] * kk[:, 0]) / kn2)
        nz = g != 0
        for a, b in ((kk, "k"), (ll, "l")):
            loc = np.array([lay.locate(x) for x in a[nz]], dtype=np.int64).reshape(-1, 2)
            rows[b].append(loc[:, 0])
            rows[b + "s"].append(loc[:, 1])
        rows["p"].append(np.full(int(nz.sum()), ip, dtype=np.int64))
        rows["w"].append(2.0 * g[nz])
    cat = {key: np.concatenate(v) for key, v in rows.items()}
    return TriadTable(N, cat["p"], cat["k"], cat["ks"].astype(np.float64),
                      cat["l"], cat["ls"].astype(np.float64), cat["w"])


DRIFT_METHODS = ("auto", "triad", "fft", "none")


class EnsembleDrift:
    """Batched ``X -> <ω ⊗ ω, H_{e_j}>_j = -b_N`` on internal-layout arrays.

    ``method`` is ``"triad"`` (compiled direct sum), ``"fft"`` (batched
    pseudospectral), ``"auto"`` (triads up to ``N = 16``) or ``"none"``
    (nonlinearity switched off, for testing the linear parts).
    """

    def __init__(self, N: int, method: str = "auto"):
        self.N = N
        if method == "auto":
            method = "triad" if N <= 16 else "fft"
        if method not in DRIFT_METHODS:
            raise ValueError(f"unknown drift method {method!r}")
        self.method = method
        self.layout = layout(N)
        if method == "triad":
            self.table = triad_table(N)
        elif method == "fft":
            self._setup_fft()

    def _setup_fft(self):
        N = self.N
        G = scipy.fft.next_fast_len(3 * N, real=True)
        self.G = G
        half = self.layout.half
        # rfft keeps k2 >= 0; store every mode of Λ_N with k2 >= 0
        ms = mode_set(N).members
        up = ms[ms[:, 1] >= 0]
        self._up_r = up[:, 0] % G
        self._up_c = up[:, 1]
        loc = np.array([self.layout.locate(k) for k in up], dtype=np.int64)
        self._up_slot = loc[:, 0]
        self._up_sign = loc[:, 1].astype(np.float64)
        self._k1 = up[:, 0].astype(np.float64)
        self._k2 = up[:, 1].astype(np.float64)
        self._n2 = self._k1 ** 2 + self._k2 ** 2
        # output: half modes read from the k2 >= 0 half-plane, conjugating as needed
        flip = half[:, 1] < 0
        src = np.where(flip[:, None], -half, half)
        self._out_r = src[:, 0] % G
        self._out_c = src[:, 1]
        self._out_sign = np.where(flip, -1.0, 1.0)

    def __call__(self, X: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(X)
        if self.method == "triad":
            t = self.table
            _kernels.triad_drift(X, t.p, t.k, t.k_sign, t.l, t.l_sign, t.weight, out)
        elif self.method == "none":
            out[...] = 0.0
        else:
            self._fft_drift(X, out)
        return out

    def _fft_drift(self, X, out, batch: int = 16):
        h = self.layout.h
        G = self.G
        P = X.shape[1]
        for a in range(0, P, batch):
            b = min(P, a + batch)
            raw = X[self._up_slot, a:b] + 1j * (self._up_sign[:, None] * X[self._up_slot + h, a:b])
            # raw = sqrt(2) ω̂; the sqrt(2)^2 / 2 factors are folded in below
            w = raw.T / SQRT2
            fields = []
            for factor in (2j * math.pi * self._k2 / self._n2, -2j * math.pi * self._k1 / self._n2,
                           2j * math.pi * self._k1, 2j * math.pi * self._k2):
                a_ = np.zeros((b - a, G, G // 2 + 1), dtype=np.complex128)
                a_[:, self._up_r, self._up_c] = w * factor
                fields.append(scipy.fft.irfft2(a_, s=(G, G), norm="forward"))
            prod = fields[0] * fields[2] + fields[1] * fields[3]
            spec = scipy.fft.rfft2(prod, norm="forward")
            z = spec[:, self._out_r, self._out_c]
            z = z.real + 1j * (self._out_sign * z.imag)
            # drift is -b_N; real coefficients are sqrt(2) (Re, Im)
            out[:h, a:b] = -SQRT2 * z.real.T
            out[h:, a:b] = -SQRT2 * z.imag.T
        return out


def to_internal(fields: np.ndarray, N: int) -> np.ndarray:
    """Public coefficient rows ``(paths, |Λ_N|)`` -> internal ``(2h, paths)``."""
    return np.ascontiguousarray(np.asarray(fields)[..., layout(N).to_internal].T)


def to_public(X: np.ndarray, N: int) -> np.ndarray:
    return np.ascontiguousarray(X[layout(N).to_public].T)


# -- R-term and generators --------------------------------------------------------

def product_projection(omega: RealSpectralField, k, l) -> float:
    """``<ω, e_k e_l>`` from the exact product expansion (zero-mean ``ω``)."""
    _, prod = product_coefficients(k, l)
    total = 0.0
    ms = mode_set(omega.cutoff)
    for m, n in prod.items():
        if m not in ms:
            raise ValueError(f"field cutoff {omega.cutoff} too small for mode {m}")
        total += n / SQRT2 * omega.coeffs[ms.index(m)]
    return total


def r_term(omega: RealSpectralField, l, m, N: int, kind: str = FULL) -> float:
    """``R_{l,m} = sum_k C_{k,l} C_{k,m} (<ω, e_k e_{-l}> <ω, e_k e_{-m}> - δ_{lm})``.

    ``k`` runs over the ``kind`` mode set with cutoff ``N``; ``ω`` must carry
    every mode up to ``N + max(|l|, |m|)``.
    """
    from .lattice import coupling
    l = (int(l[0]), int(l[1]))
    m = (int(m[0]), int(m[1]))
    delta = 1.0 if l == m else 0.0
    total = []
    for k in mode_set(N, kind).members:
        cl, cm = coupling(k, l), coupling(k, m)
        if cl == 0.0 or cm == 0.0:
            continue
        a = product_projection(omega, k, (-l[0], -l[1]))
        b = a if l == m else product_projection(omega, k, (-m[0], -m[1]))
        total.append(cl * cm * (a * b - delta))
    return math.fsum(total)


@dataclass(frozen=True)
class CylinderFunction:
    """``F(ω) = f(<ω, e_l>)_{l in modes}`` with callables for f, ∇f, ∇²f."""

    modes: tuple
    f: object
    grad: object
    hess: object

    def coordinates(self, omega: RealSpectralField) -> np.ndarray:
        ms = mode_set(omega.cutoff)
        return np.array([omega.coeffs[ms.index(k)] if k in ms else 0.0 for k in self.modes])


def generator_apply(F: CylinderFunction, omega: RealSpectralField, which: str = "limit",
                    nu: float = 1.0, N: int | None = None) -> float:
    """Apply a Kolmogorov generator to a cylinder function at ``ω``.

    ``which="limit"``: ``4 nu pi^2 sum_l |l|^2 (f_ll - f_l x_l) + sum_l f_l <ω ⊗ ω, H_{e_l}>``,
    with the pairing evaluated from every mode ``ω`` carries.

    ``which="approx"``: the Galerkin transport generator with the reduced
    noise set at cutoff ``N``: ``8 nu eps^2 [pi^2 sum_{l,m} f_lm R_lm + (pi^2 / 2) eps^-2
    sum_l |l|^2 (f_ll - f_l x_l)]`` plus the drift paired on ``Π_N ω``.
    """
    x = F.coordinates(omega)
    g = np.asarray(F.grad(x), dtype=float)
    H = np.asarray(F.hess(x), dtype=float)
    modes = [tuple(int(v) for v in k) for k in F.modes]
    nsq = np.array([k[0] ** 2 + k[1] ** 2 for k in modes], dtype=float)
    diag = float(np.sum(nsq * (np.diag(H) - g * x)))
    if which == "limit":
        drift = sum(gi * pairing_H(omega, k) for gi, k in zip(g, modes) if gi != 0)
        return 4 * nu * PI2 * diag + drift
    if which != "approx":
        raise ValueError(f"unknown generator {which!r}")
    if N is None:
        raise ValueError("the approximating generator needs a cutoff N")
    band = mode_set(N // 3) if N >= 3 else None
    outside = [k for k in modes if band is None or k not in band]
    if outside:
        raise ValueError(f"modes {outside} lie outside the safe band |k| <= {N // 3}")
    e2 = eps(N, THIRD) ** 2
    rsum = 0.0
    for a, ka in enumerate(modes):
        for b, kb in enumerate(modes):
            if H[a, b] != 0:
                rsum += H[a, b] * r_term(omega, ka, kb, N, THIRD)
    low = omega.truncate(N) if N < omega.cutoff else omega
    drift = sum(gi * pairing_H(low, k) for gi, k in zip(g, modes) if gi != 0 and k in mode_set(N))
    return 8 * nu * e2 * (PI2 * rsum + 0.5 * PI2 / e2 * diag) + drift


# -- second moment of the truncation error --------------------------------------

def _full_sq_sums(js: np.ndarray, radii) -> np.ndarray:
    """Reduced sums ``sum_{|k| <= R, k != j} ...`` for many ``j`` (factor 2 included)."""
    js = np.ascontiguousarray(js, dtype=np.int64)
    radii = np.broadcast_to(np.asarray(radii, dtype=np.int64), (len(js),)).copy()
    out = np.empty(len(js))
    _kernels.reduced_sq_sums(js, radii, out)
    return out


def truncation_second_moment(Ns, delta: float = 0.5, j_max: int = 64, k_factor: int = 12):
    """``T(N) = 2 sum_j |j|^{-4-2δ} sum_{(k,l) not in Λ_N x Λ_N} |h(j,k,l)|^2`` for each ``N``.

    ``T(N)`` bounds ``E_μ ||ω ⊗ ω - ω_N ⊗ ω_N||^2`` in the negative Sobolev
    norm used for the nonlinearity.  The inner sum is the full coefficient
    sum minus its ``Λ_N`` part.  Full sums use ``|k| <= k_factor |j|`` plus
    the asymptotic tail ``2 pi^5 |j|^4 / R^2``.  The ``j`` sum is explicit
    for ``|j| <= j_max`` and beyond uses the fit ``|j|^2 (a log|j| + b)`` to
    the full sums on ``j_max/2 < |j| <= j_max``, integrated radially.

    Returns ``(T, tail)`` arrays, where ``tail`` is the fitted part.
    """
    Ns = [int(n) for n in Ns]
    if 2 * max(Ns) > j_max:
        raise ValueError("j_max must be at least twice the largest cutoff")
    js = mode_set(j_max).members
    # reduced sums depend only on the dihedral orbit of j; use |j1| >= |j2| >= 0 representatives
    key = np.sort(np.abs(js), axis=1)[:, ::-1]
    reps, inv = np.unique(key, axis=0, return_inverse=True)
    rep_norm = np.hypot(reps[:, 0], reps[:, 1])
    radii = np.maximum(16, (k_factor * rep_norm).astype(np.int64) + 2)
    full = _full_sq_sums(reps, radii) + 2.0 * math.pi ** 5 * rep_norm ** 4 / radii ** 2
    full_j = full[inv.ravel()]
    nj = np.sqrt((js ** 2).sum(axis=1).astype(float))
    w = nj ** (-4 - 2 * delta)
    # radial fit for the tail beyond j_max
    sel = nj > j_max / 2
    A = np.stack([nj[sel] ** 2 * np.log(nj[sel]), nj[sel] ** 2], axis=1)
    a, b = np.linalg.lstsq(A, full_j[sel], rcond=None)[0]
    from scipy.integrate import quad
    tail = quad(lambda r: 2 * math.pi * r * r ** (-4 - 2 * delta) * r * r * (a * math.log(r) + b),
                j_max + 0.5, np.inf)[0]
    Ts = []
    for N in Ns:
        inner = full_j.copy()
        near = nj <= 2 * N
        for i in np.nonzero(near)[0]:
            inner[i] -= h_coeff_sq_sum(tuple(js[i]), cutoff=N)
        Ts.append(2.0 * (math.fsum(w * inner) + tail))
    return np.array(Ts), 2.0 * tail
