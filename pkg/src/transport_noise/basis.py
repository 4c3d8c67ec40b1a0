"""Real and complex Fourier bases on the unit torus.

Real basis: ``e_k = sqrt(2) cos(2 pi k.x)`` for positive ``k`` and
``sqrt(2) sin(2 pi k.x)`` for negative ``k``.  Complex basis:
``ẽ_k = exp(2 pi i k.x)``.  For positive ``q`` the complex coefficient is
``ω̂_q = (x_q + i x_{-q}) / sqrt(2)`` and ``ω̂_{-q}`` is its conjugate.

Equivalently ``e_k = (a_k ẽ_k + conj(a_k) ẽ_{-k}) / sqrt(2)`` with unit
``a_k = 1`` for positive and ``a_k = -i`` for negative ``k``.  Products of
basis functions are expanded exactly through these Gaussian-integer units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .lattice import FULL, coupling_matrix, eps, mode_set, positive_mask

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return x


def eval_basis(k, x) -> np.ndarray:
    """Evaluate the real basis function ``e_k`` at points ``x`` (shape ``(..., 2)``)."""
    k1, k2 = int(k[0]), int(k[1])
    if k1 == 0 and k2 == 0:
        raise ValueError("the real basis is indexed by nonzero modes")
    x = _as_points(x)
    phase = TWO_PI * (k1 * x[..., 0] + k2 * x[..., 1])
    if k1 > 0 or (k1 == 0 and k2 > 0):
        return SQRT2 * np.cos(phase)
    return SQRT2 * np.sin(phase)


def unit(k) -> complex:
    """Unit ``a_k`` with ``e_k = (a_k ẽ_k + conj(a_k) ẽ_{-k}) / sqrt(2)``."""
    return 1.0 + 0j if (k[0] > 0 or (k[0] == 0 and k[1] > 0)) else -1j


# -- fields ------------------------------------------------------------------

@dataclass(frozen=True)
class RealSpectralField:
    """Coefficients in the real basis over ``{0 < |k| <= cutoff}``.

    ``coeffs[i]`` belongs to ``mode_set(cutoff).members[i]``.
    """

    cutoff: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        n = len(mode_set(self.cutoff))
        if c.shape != (n,):
            raise ValueError(f"cutoff {self.cutoff} needs {n} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def modes(self) -> np.ndarray:
        return mode_set(self.cutoff).members

    def coeff(self, k) -> float:
        return float(self.coeffs[mode_set(self.cutoff).index(k)])

    @classmethod
    def from_dict(cls, cutoff: int, values: dict) -> "RealSpectralField":
        ms = mode_set(cutoff)
        c = np.zeros(len(ms))
        for k, v in values.items():
            c[ms.index(k)] = v
        return cls(cutoff, c)

    @classmethod
    def zeros(cls, cutoff: int) -> "RealSpectralField":
        return cls(cutoff, np.zeros(len(mode_set(cutoff))))

    def norm_sq(self) -> float:
        """Squared L^2 norm (enstrophy of the vorticity field)."""
        return float(self.coeffs @ self.coeffs)

    def truncate(self, N: int) -> "RealSpectralField":
        """Projection onto ``{|k| <= N}``; ``N`` may exceed the cutoff (zero padding)."""
        src = mode_set(self.cutoff)
        dst = mode_set(N)
        out = np.zeros(len(dst))
        for i, k in enumerate(dst.members):
            if k in src:
                out[i] = self.coeffs[src.index(k)]
        return RealSpectralField(N, out)

    def evaluate(self, x) -> np.ndarray:
        x = _as_points(x)
        return sum(c * eval_basis(k, x) for k, c in zip(self.modes, self.coeffs) if c != 0.0) \
            + np.zeros(x.shape[:-1])


@dataclass(frozen=True)
class ComplexSpectralField:
    """Complex Fourier coefficients on the square ``|k1|, |k2| <= cutoff``.

    ``grid[k1 + cutoff, k2 + cutoff]`` is the coefficient of ``ẽ_k``.
    Entries outside the disc ``|k| <= cutoff`` are kept at zero.
    """

    cutoff: int
    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.complex128)
        n = 2 * self.cutoff + 1
        if g.shape != (n, n):
            raise ValueError(f"cutoff {self.cutoff} needs a {n}x{n} grid, got {g.shape}")
        object.__setattr__(self, "grid", g)

    def coeff(self, k) -> complex:
        k1, k2 = int(k[0]), int(k[1])
        N = self.cutoff
        if abs(k1) > N or abs(k2) > N:
            return 0j
        return complex(self.grid[k1 + N, k2 + N])

    def at(self, modes: np.ndarray) -> np.ndarray:
        modes = np.asarray(modes)
        return self.grid[modes[:, 0] + self.cutoff, modes[:, 1] + self.cutoff]

    @classmethod
    def zeros(cls, cutoff: int) -> "ComplexSpectralField":
        n = 2 * cutoff + 1
        return cls(cutoff, np.zeros((n, n), dtype=np.complex128))

    def evaluate(self, x) -> np.ndarray:
        x = _as_points(x)
        N = self.cutoff
        out = np.zeros(x.shape[:-1], dtype=np.complex128)
        for i, j in zip(*np.nonzero(self.grid)):
            out += self.grid[i, j] * np.exp(1j * TWO_PI * ((i - N) * x[..., 0] + (j - N) * x[..., 1]))
        return out


def real_to_complex(field_: RealSpectralField) -> ComplexSpectralField:
    N = field_.cutoff
    lay = layout(N)
    out = ComplexSpectralField.zeros(N)
    xp = field_.coeffs[lay.pos_index]
    xn = field_.coeffs[lay.neg_index]
    z = (xp + 1j * xn) / SQRT2
    p = lay.half
    out.grid[p[:, 0] + N, p[:, 1] + N] = z
    out.grid[-p[:, 0] + N, -p[:, 1] + N] = np.conj(z)
    return out


def complex_to_real(field_: ComplexSpectralField, tol: float = 1e-12) -> RealSpectralField:
    """Inverse of :func:`real_to_complex`.

    Raises ``ValueError`` naming the worst mode when the coefficients are not
    conjugate-symmetric within ``tol`` (relative to the largest coefficient),
    or when they carry a mean or modes outside the disc.
    """
    N = field_.cutoff
    g = field_.grid
    scale = max(1.0, float(np.abs(g).max(initial=0.0)))
    asym = np.abs(g - np.conj(g[::-1, ::-1]))
    if asym.max(initial=0.0) > tol * scale:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise ValueError(
            f"not conjugate-symmetric: mode ({i - N}, {j - N}) deviates by {asym[i, j]:.3e}")
    if abs(g[N, N]) > tol * scale:
        raise ValueError(f"nonzero mean coefficient {g[N, N]!r}")
    k1, k2 = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1), indexing="ij")
    outside = (k1 ** 2 + k2 ** 2 > N * N) & (np.abs(g) > tol * scale)
    if outside.any():
        i, j = np.argwhere(outside)[0]
        raise ValueError(f"mode ({i - N}, {j - N}) lies outside the disc of radius {N}")
    lay = layout(N)
    z = g[lay.half[:, 0] + N, lay.half[:, 1] + N]
    c = np.zeros(len(mode_set(N)))
    c[lay.pos_index] = SQRT2 * z.real
    c[lay.neg_index] = SQRT2 * z.imag
    return RealSpectralField(N, c)


# -- noise fields --------------------------------------------------------------

def sigma_eval(k, x) -> np.ndarray:
    """Noise vector field ``(1/sqrt 2) (k_perp / |k|^2) e_k(x)``; shape ``(..., 2)``."""
    k1, k2 = int(k[0]), int(k[1])
    ek = eval_basis(k, x) / (SQRT2 * (k1 * k1 + k2 * k2))
    return np.stack([k2 * ek, -k1 * ek], axis=-1)


def quadratic_form_Q(N: int, x) -> np.ndarray:
    """``sum_{k in Λ_N} σ_k(x) σ_k(x)^T``; equals ``I / (4 eps_N^2)``."""
    x = _as_points(x)
    ks = mode_set(N).members
    n2 = (ks ** 2).sum(axis=1).astype(np.float64)
    phase = TWO_PI * (x[..., None, 0] * ks[:, 0] + x[..., None, 1] * ks[:, 1])
    pos = positive_mask(ks)
    e = np.where(pos, SQRT2 * np.cos(phase), SQRT2 * np.sin(phase)) / (SQRT2 * n2)
    a = e * ks[:, 1]
    b = -e * ks[:, 0]
    q = np.empty(x.shape[:-1] + (2, 2))
    q[..., 0, 0] = (a * a).sum(-1)
    q[..., 0, 1] = q[..., 1, 0] = (a * b).sum(-1)
    q[..., 1, 1] = (b * b).sum(-1)
    return q


def biot_savart(omega: ComplexSpectralField) -> tuple[ComplexSpectralField, ComplexSpectralField]:
    """Velocity coefficients ``û(k) = 2 pi i (k_perp / |k|^2) ω̂(k)``."""
    N = omega.cutoff
    k1, k2 = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1), indexing="ij")
    n2 = (k1 ** 2 + k2 ** 2).astype(np.float64)
    n2[N, N] = 1.0
    m = 2j * math.pi * omega.grid / n2
    m[N, N] = 0
    return ComplexSpectralField(N, k2 * m), ComplexSpectralField(N, -k1 * m)


# -- exact products of basis functions ----------------------------------------

def product_coefficients(k, l) -> tuple[int, dict]:
    """Expand ``e_k e_l = c0 / 2 + sum_m (n_m / sqrt 2) e_m`` with integer ``c0``, ``n_m``.

    Returns ``(c0, {m: n_m})``; zero coefficients are omitted.
    """
    ak, al = unit(k), unit(l)
    terms = {}
    k, l = (int(k[0]), int(k[1])), (int(l[0]), int(l[1]))
    for sk, uk in ((1, ak), (-1, np.conj(ak))):
        for sl, ul in ((1, al), (-1, np.conj(al))):
            q = (sk * k[0] + sl * l[0], sk * k[1] + sl * l[1])
            terms[q] = terms.get(q, 0) + uk * ul
    c0 = int(round(terms.pop((0, 0), 0).real))
    out = {}
    for q, g in terms.items():
        if q[0] > 0 or (q[0] == 0 and q[1] > 0):
            n = int(round(g.real))
        else:
            n = int(round(terms.get((-q[0], -q[1]), 0).imag))
        if n:
            out[q] = n
    return c0, out


@dataclass(frozen=True)
class NoiseCoupling:
    """Matrix ``A_k[m, l] = <σ_k . ∇ e_l, e_m>`` on ``Λ_N`` as sorted COO triples."""

    k: tuple
    cutoff: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def to_sparse(self) -> sp.csr_matrix:
        n = len(mode_set(self.cutoff))
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=(n, n))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def entry(self, m, l) -> float:
        ms = mode_set(self.cutoff)
        i, j = ms.index(m), ms.index(l)
        hit = np.nonzero((self.rows == i) & (self.cols == j))[0]
        return float(self.values[hit[0]]) if len(hit) else 0.0


def noise_coupling_matrix(k, N: int) -> NoiseCoupling:
    """Galerkin matrix of the transport operator ``σ_k . ∇`` on ``Λ_N``.

    Uses ``σ_k . ∇ e_l = sqrt(2) pi C_{k,l} e_k e_{-l}``, so each entry is
    ``pi C_{k,l} n_m`` with ``n_m`` in ``{-1, 0, 1}`` from the exact product.
    """
    k = (int(k[0]), int(k[1]))
    ms = mode_set(N)
    C = coupling_matrix(np.array([k]), ms.members)[0]
    rows, cols, vals = [], [], []
    for j, l in enumerate(ms.members):
        if C[j] == 0.0:
            continue
        _, prod = product_coefficients(k, (-l[0], -l[1]))
        for m, n in prod.items():
            if m in ms:
                rows.append(ms.index(m))
                cols.append(j)
                vals.append(math.pi * C[j] * n)
    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    vals = np.array(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    return NoiseCoupling(k, N, rows[order], cols[order], vals[order])


# -- internal layout -------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    """Index bookkeeping shared by the compiled kernels.

    The kernels store a real field as ``X`` of shape ``(2h, paths)``:
    row ``i < h`` is ``x_{p_i}`` and row ``h + i`` is ``x_{-p_i}``, where
    ``p_i`` runs over the positive half of ``Λ_N`` in colex order.  Then
    ``X[i] + i X[h + i] = sqrt(2) ω̂_{p_i}``.
    """

    cutoff: int
    half: np.ndarray          # (h, 2) positive modes
    pos_index: np.ndarray     # public index of p_i
    neg_index: np.ndarray     # public index of -p_i
    to_internal: np.ndarray   # X_internal = x_public[to_internal]
    to_public: np.ndarray     # x_public = X_internal[to_public]
    slot: np.ndarray = field(repr=False)  # (2N+1, 2N+1) -> half index, -1 outside
    sign: np.ndarray = field(repr=False)  # +1 if mode positive, -1 if negative

    @property
    def h(self) -> int:
        return len(self.half)

    def locate(self, k) -> tuple[int, int]:
        """Half index and conjugation sign of mode ``k``."""
        i = self.slot[k[0] + self.cutoff, k[1] + self.cutoff]
        if i < 0:
            raise KeyError(f"mode {tuple(k)} outside cutoff {self.cutoff}")
        return int(i), int(self.sign[k[0] + self.cutoff, k[1] + self.cutoff])

    def internal_rows(self, modes) -> np.ndarray:
        """Rows of ``X`` holding the real coefficients of ``modes``."""
        out = []
        for k in modes:
            i, s = self.locate(k)
            out.append(i if s > 0 else i + self.h)
        return np.array(out, dtype=np.int64)


@lru_cache(maxsize=32)
def layout(N: int) -> Layout:
    ms = mode_set(N)
    pos = positive_mask(ms.members)
    half = ms.members[pos]
    pos_index = np.nonzero(pos)[0]
    neg_index = ms.indices(-half)
    to_internal = np.concatenate([pos_index, neg_index])
    to_public = np.empty_like(to_internal)
    to_public[to_internal] = np.arange(len(to_internal))
    n = 2 * N + 1
    slot = np.full((n, n), -1, dtype=np.int64)
    sign = np.zeros((n, n), dtype=np.int64)
    slot[half[:, 0] + N, half[:, 1] + N] = np.arange(len(half))
    sign[half[:, 0] + N, half[:, 1] + N] = 1
    slot[-half[:, 0] + N, -half[:, 1] + N] = np.arange(len(half))
    sign[-half[:, 0] + N, -half[:, 1] + N] = -1
    for a in (half, pos_index, neg_index, to_internal, to_public, slot, sign):
        a.setflags(write=False)
    return Layout(N, half, pos_index, neg_index, to_internal, to_public, slot, sign)


@dataclass(frozen=True)
class NoiseLines:
    """Tridiagonal structure of ``σ_k . ∇`` in the complex basis.

    Along each lattice line ``q0 + n k`` inside ``Λ_N`` the operator acts as
    ``(T z)_n = α z_{n-1} + β z_{n+1}`` with ``β = -conj(α)``, where
    ``α = sqrt(2) pi i C_{k,q0} a_k / sqrt(2)``.  Only one line of each
    conjugate pair is stored; lines with zero coupling are dropped.

    Flattened arrays: noise mode ``j`` owns lines
    ``mode_ptr[j]:mode_ptr[j+1]``; line ``t`` owns points
    ``line_ptr[t]:line_ptr[t+1]``.
    """

    cutoff: int
    noise_modes: np.ndarray
    mode_ptr: np.ndarray
    line_ptr: np.ndarray
    alpha_re: np.ndarray
    alpha_im: np.ndarray
    point_slot: np.ndarray
    point_sign: np.ndarray
    point_write: np.ndarray


@lru_cache(maxsize=16)
def noise_lines(N: int, noise_kind: str = "third") -> NoiseLines:
    lay = layout(N)
    ks = mode_set(N, noise_kind).members
    mode_ptr = [0]
    line_ptr = [0]
    a_re, a_im, slots, signs, writes = [], [], [], [], []
    inside = lay.slot >= 0

    def member(q):
        return abs(q[0]) <= N and abs(q[1]) <= N and inside[q[0] + N, q[1] + N]

    for k in ks:
        k = (int(k[0]), int(k[1]))
        ak = unit(k)
        nk = k[0] ** 2 + k[1] ** 2
        for q0 in mode_set(N).members:
            q0 = (int(q0[0]), int(q0[1]))
            if member((q0[0] - k[0], q0[1] - k[1])):
                continue  # not the start of its line
            c_num = k[1] * q0[0] - k[0] * q0[1]
            if c_num == 0:
                continue
            pts = [q0]
            while member((pts[-1][0] + k[0], pts[-1][1] + k[1])):
                pts.append((pts[-1][0] + k[0], pts[-1][1] + k[1]))
            mirror_start = (-pts[-1][0], -pts[-1][1])
            if mirror_start < q0:
                continue  # its conjugate line is the stored one
            self_conj = mirror_start == q0
            alpha = 1j * math.pi * (c_num / nk) * ak
            a_re.append(alpha.real)
            a_im.append(alpha.imag)
            for q in pts:
                i, s = lay.locate(q)
                slots.append(i)
                signs.append(s)
                writes.append(s > 0 or not self_conj)
            line_ptr.append(len(slots))
        mode_ptr.append(len(a_re))
    as_i = lambda a: np.array(a, dtype=np.int64)  # noqa: E731
    return NoiseLines(
        cutoff=N,
        noise_modes=ks,
        mode_ptr=as_i(mode_ptr),
        line_ptr=as_i(line_ptr),
        alpha_re=np.array(a_re),
        alpha_im=np.array(a_im),
        point_slot=as_i(slots),
        point_sign=as_i(signs),
        point_write=np.array(writes, dtype=np.bool_),
    )


def noise_scale(N: int, noise_kind: str, nu: float) -> float:
    """Noise intensity ``2 sqrt(2 nu) eps`` for the chosen noise mode set."""
    return 2.0 * math.sqrt(2.0 * nu) * eps(N, noise_kind)
