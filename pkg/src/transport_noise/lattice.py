"""Integer lattice combinatorics on Z^2 \\ {0}.

Modes are integer pairs ``(k1, k2)``.  The lattice splits into a positive
half ``k1 > 0 or (k1 == 0 and k2 > 0)`` and its negative, which fixes the
cosine/sine choice of the real basis.  Mode sets are ordered
colexicographically: by ``k2`` first, then ``k1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

FULL = "full"
THIRD = "third"
KINDS = (FULL, THIRD)

# Half-diagonal of a unit square; used by the lattice-sum tail bounds.
_HALF_DIAG = math.sqrt(2.0) / 2.0


def is_positive(k) -> bool:
    """True when ``k`` lies in the positive half-lattice."""
    k1, k2 = int(k[0]), int(k[1])
    if k1 == 0 and k2 == 0:
        raise ValueError("the zero mode has no half-lattice sign")
    return k1 > 0 or (k1 == 0 and k2 > 0)


def positive_mask(modes: np.ndarray) -> np.ndarray:
    """Vectorised :func:`is_positive` over an ``(n, 2)`` integer array."""
    modes = np.asarray(modes)
    return (modes[:, 0] > 0) | ((modes[:, 0] == 0) & (modes[:, 1] > 0))


def perp(k) -> tuple[int, int]:
    """Clockwise rotation ``(k1, k2) -> (k2, -k1)``."""
    return int(k[1]), -int(k[0])


def norm_sq(k) -> int:
    return int(k[0]) ** 2 + int(k[1]) ** 2


def _radius_sq_limit(N: int, kind: str) -> int:
    if kind == FULL:
        return N * N
    if kind == THIRD:
        # 9|k|^2 <= N^2 is an integer inequality: no float rounding involved.
        return (N * N) // 9
    raise ValueError(f"unknown mode-set kind {kind!r}; expected one of {KINDS}")


def _check_cutoff(N) -> int:
    if isinstance(N, bool) or int(N) != N:
        raise ValueError(f"cutoff must be an integer, got {N!r}")
    N = int(N)
    if N < 1:
        raise ValueError(f"cutoff must be >= 1, got {N}")
    return N


@dataclass(frozen=True)
class ModeSet:
    """A finite, ordered set of nonzero lattice modes.

    ``members`` is a read-only ``(n, 2)`` int64 array in colex order.
    """

    cutoff: int
    kind: str
    members: np.ndarray = field(repr=False)

    @cached_property
    def _lookup(self) -> dict:
        # built on first use; large sets are often only iterated as arrays
        return {(a, b): i for i, (a, b) in enumerate(self.members.tolist())}

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self._lookup)

    def __contains__(self, k) -> bool:
        return (int(k[0]), int(k[1])) in self._lookup

    def index(self, k) -> int:
        """Position of ``k`` in the ordering; ``KeyError`` if absent."""
        try:
            return self._lookup[(int(k[0]), int(k[1]))]
        except KeyError:
            raise KeyError(f"mode {tuple(k)} not in {self.kind} set with cutoff {self.cutoff}") from None

    def indices(self, modes) -> np.ndarray:
        return np.array([self.index(k) for k in modes], dtype=np.int64)

    @property
    def norms_sq(self) -> np.ndarray:
        return (self.members ** 2).sum(axis=1)


@lru_cache(maxsize=64)
def mode_set(N: int, kind: str = FULL) -> ModeSet:
    """Return ``{0 < |k| <= N}`` (``full``) or ``{0 < 3|k| <= N}`` (``third``)."""
    N = _check_cutoff(N)
    r2 = _radius_sq_limit(N, kind)
    r = math.isqrt(r2)
    g = np.arange(-r, r + 1, dtype=np.int64)
    k1, k2 = np.meshgrid(g, g, indexing="ij")
    k1, k2 = k1.ravel(), k2.ravel()
    n2 = k1 * k1 + k2 * k2
    keep = (n2 > 0) & (n2 <= r2)
    k1, k2 = k1[keep], k2[keep]
    order = np.lexsort((k1, k2))
    members = np.stack([k1[order], k2[order]], axis=1)
    members.setflags(write=False)
    return ModeSet(N, kind, members)


def _row_sums(r2: int, power: int) -> float:
    """``sum_{0 < |k|^2 <= r2} |k|^(-2*power)``, accurate to a few ulp.

    Each row ``k1 = const`` is summed pairwise by numpy; rows are combined
    with ``math.fsum``.
    """
    r = math.isqrt(r2)
    parts = []
    for k1 in range(0, r + 1):
        m = math.isqrt(r2 - k1 * k1)
        k2 = np.arange(-m, m + 1, dtype=np.float64)
        n2 = k1 * k1 + k2 * k2
        if k1 == 0:
            n2 = n2[n2 > 0]
        row = float(np.sum(n2 ** (-power)))
        parts.append(row if k1 == 0 else 2.0 * row)
    return math.fsum(parts)


@lru_cache(maxsize=256)
def inverse_square_sum(N: int, kind: str = FULL) -> float:
    """``sum |k|^-2`` over the mode set; ``eps(N, kind) ** -2``."""
    N = _check_cutoff(N)
    r2 = _radius_sq_limit(N, kind)
    if r2 == 0:
        raise ValueError(f"{kind} mode set with cutoff {N} is empty")
    return _row_sums(r2, 1)


def eps(N: int, kind: str = FULL) -> float:
    """Noise scaling ``(sum_{k in set} |k|^-2) ** -1/2``."""
    return 1.0 / math.sqrt(inverse_square_sum(N, kind))


def eps_table(N_max: int, kind: str = FULL) -> np.ndarray:
    """``eps(N, kind)`` for every ``N = 1..N_max`` (entry ``N - 1``).

    Uses one pass over lattice shells; entries where the set is empty are
    ``nan``.
    """
    N_max = _check_cutoff(N_max)
    r2_max = _radius_sq_limit(N_max, kind)
    counts = np.zeros(r2_max + 1, dtype=np.int64)
    r = math.isqrt(r2_max)
    for k1 in range(0, r + 1):
        m = math.isqrt(r2_max - k1 * k1)
        n2 = k1 * k1 + np.arange(0, m + 1, dtype=np.int64) ** 2
        w = np.full(m + 1, 2, dtype=np.int64)
        w[0] = 1
        if k1 > 0:
            w *= 2
        counts[n2] += w  # shells within one row are distinct
    counts[0] = 0
    shells = np.zeros(r2_max + 1)
    nz = np.nonzero(counts)[0]
    shells[nz] = counts[nz] / nz
    cumulative = np.cumsum(shells)
    out = np.full(N_max, np.nan)
    for N in range(1, N_max + 1):
        r2 = _radius_sq_limit(N, kind)
        if r2 > 0:
            out[N - 1] = 1.0 / math.sqrt(cumulative[r2])
    return out


def coupling(k, l) -> float:
    """Coupling ``(k_perp . l) / |k|^2``, with ``k_perp = (k2, -k1)``.

    Numerator and denominator are exact integers, so the result is a single
    correctly rounded division; in particular ``coupling(-k, l)`` is exactly
    ``-coupling(k, l)``.
    """
    k1, k2 = int(k[0]), int(k[1])
    num = k2 * int(l[0]) - k1 * int(l[1])
    den = k1 * k1 + k2 * k2
    if den == 0:
        raise ValueError("coupling is undefined for k = 0")
    return num / den


def coupling_matrix(ks: np.ndarray, ls: np.ndarray) -> np.ndarray:
    """Matrix ``C[i, j] = coupling(ks[i], ls[j])``."""
    ks = np.asarray(ks, dtype=np.int64)
    ls = np.asarray(ls, dtype=np.int64)
    num = np.outer(ks[:, 1], ls[:, 0]) - np.outer(ks[:, 0], ls[:, 1])
    den = (ks ** 2).sum(axis=1)
    if np.any(den == 0):
        raise ValueError("coupling is undefined for k = 0")
    return num / den[:, None]


def sum_coupling_sq(l, N: int, kind: str = FULL) -> float:
    """``sum_{k in set} coupling(k, l) ** 2``; equals ``|l|^2 / (2 eps^2)``."""
    ks = mode_set(N, kind).members
    if len(ks) == 0:
        raise ValueError(f"{kind} mode set with cutoff {N} is empty")
    c = coupling_matrix(ks, np.array([l]))[:, 0]
    return math.fsum(c * c)


def sum_coupling_sq_many(ls, N: int, kind: str = FULL) -> np.ndarray:
    """:func:`sum_coupling_sq` for every row of ``ls`` (pairwise summation)."""
    ks = mode_set(N, kind).members
    if len(ks) == 0:
        raise ValueError(f"{kind} mode set with cutoff {N} is empty")
    c = coupling_matrix(ks, np.asarray(ls, dtype=np.int64).reshape(-1, 2))
    return np.sum(c * c, axis=0)


# -- the constant S = sum_{k != 0} |k|^-4 ------------------------------------

def partial_quartic_sum(R: int) -> float:
    """``sum_{0 < |k| <= R} |k|^-4``."""
    return _row_sums(_check_cutoff(R) ** 2, 2)


def _quartic_tail_bounds(R: float) -> tuple[float, float]:
    """Rigorous lower/upper bounds on ``sum_{|k| > R} |k|^-4``.

    Every unit square centred on a lattice point ``k`` with ``|k| > R`` lies
    in ``|x| >= R - c`` and satisfies ``|k| >= |x| - c`` (``c`` the half
    diagonal); this gives the upper bound.  The squares cover ``|x| >= R + c``
    and satisfy ``|k| <= |x| + c``, which gives the lower bound.
    """
    c = _HALF_DIAG
    a = R - 2 * c
    b = R + 2 * c
    if a <= 0:
        raise ValueError("tail bounds need R > sqrt(2)")
    upper = 2 * math.pi * (1 / (2 * a * a) + c / (3 * a ** 3))
    lower = 2 * math.pi * (1 / (2 * b * b) - c / (3 * b ** 3))
    return lower, upper


@dataclass(frozen=True)
class LatticeSum:
    value: float
    tail_bound: float
    radius: int


def lattice_sum_S(rel_tol: float = 1e-10, max_radius: int = 20000) -> LatticeSum:
    """``S = sum_{k in Z^2 \\ 0} |k|^-4`` with a certified error bound.

    The partial sum over ``|k| <= R`` is completed with the midpoint of the
    rigorous tail bounds; ``tail_bound`` is half their width, so
    ``|S - value| <= tail_bound``.  ``R`` is the smallest radius meeting
    ``tail_bound <= rel_tol * value``.
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    floor_value = 6.0  # S > 6 already from |k| <= 4
    R = 4
    while True:
        lo, hi = _quartic_tail_bounds(R)
        if (hi - lo) / 2 <= rel_tol * floor_value:
            break
        R = int(math.ceil(R * 1.05)) + 1
        if R > max_radius:
            raise OverflowError(
                f"tolerance {rel_tol:g} needs a radius beyond max_radius={max_radius}")
    partial = partial_quartic_sum(R)
    lo, hi = _quartic_tail_bounds(R)
    value = partial + (lo + hi) / 2
    return LatticeSum(value=value, tail_bound=(hi - lo) / 2, radius=R)


def viscosity_threshold(S: float) -> float:
    """Lower bound ``2 sqrt(5 S) / pi^2`` on the viscosity for the given ``S``."""
    if not S > 0:
        raise ValueError("S must be positive")
    return 2.0 * math.sqrt(5.0 * S) / math.pi ** 2
