"""Algebraic identity suite.

Every check compares two independent computations of the same quantity
and reports the worst discrepancy against a fixed tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import noise_coupling_matrix, quadratic_form_Q
from .dynamics import SimulationConfig, ito_correction
from .lattice import FULL, KINDS, THIRD, eps, mode_set, sum_coupling_sq, sum_coupling_sq_many
from .measure import SeededSampler, sample_white_noise
from .nonlinear import EnsembleDrift, h_coeff, h_coeff_sq_reduced, to_internal


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    band: float
    cases: int
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "statistic": self.statistic, "band": self.band,
                "cases": self.cases, "passed": self.passed, "detail": self.detail}


def _result(name, errs, tol, detail=""):
    errs = np.asarray(errs, dtype=float)
    worst = float(errs.max()) if errs.size else 0.0
    return CheckResult(name, worst, tol, int(errs.size), bool(errs.size and worst <= tol), detail)


def check_coupling_sums(n_max: int = 64, l_max: int = 8, tol: float = 1e-12) -> CheckResult:
    """``sum_k coupling(k, l)^2 = |l|^2 / (2 eps^2)`` over both noise sets."""
    ls = mode_set(l_max).members
    n2 = (ls ** 2).sum(axis=1)
    errs = []
    for kind in KINDS:
        for N in range(1, n_max + 1):
            if kind == THIRD and N < 3:
                continue
            expect = 0.5 * n2 / eps(N, kind) ** 2
            got = sum_coupling_sq_many(ls, N, kind)
            errs.extend(np.abs(got - expect) / expect)
    # the scalar path must agree with the batched one
    for l in ls[:: max(1, len(ls) // 8)]:
        expect = 0.5 * float(l @ l) / eps(n_max) ** 2
        errs.append(abs(sum_coupling_sq(tuple(l), n_max) - expect) / expect)
    return _result("coupling sum", errs, tol, f"|l| <= {l_max}, N <= {n_max}, relative error")


def check_noise_covariance(n_max: int = 32, n_points: int = 100, seed: int = 0,
                           tol: float = 1e-12) -> CheckResult:
    """``sum_k σ_k σ_k^T = I / (4 eps^2)`` at random points."""
    x = SeededSampler(seed, 0).generator().random((n_points, 2))
    errs = []
    for N in range(1, n_max + 1):
        q = quadratic_form_Q(N, x)
        errs.append(np.abs(q - np.eye(2) / (4 * eps(N) ** 2)).max())
    return _result("noise covariance", errs, tol, f"{n_points} points, N <= {n_max}, absolute error")


def check_ito_correction(cutoffs=(3, 6, 9, 12), nu: float = 1.2, seed: int = 0,
                         tol: float = 1e-10) -> CheckResult:
    """Itô correction equals ``-4 nu pi^2 |j|^2 <ω, e_j>`` on the safe band."""
    errs = []
    for N in cutoffs:
        cfg = SimulationConfig(nu=nu, cutoff=N, dt=1e-3, T=1e-3)
        w = sample_white_noise(N, SeededSampler(seed, N))
        corr = ito_correction(w, cfg)
        ms = mode_set(N)
        for j in mode_set(N // 3).members:
            i = ms.index(j)
            errs.append(abs(corr.coeffs[i] + 4 * nu * math.pi ** 2 * float(j @ j) * w.coeffs[i]))
    return _result("Ito correction", errs, tol, f"safe band, N in {tuple(cutoffs)}, absolute error")


def check_h_magnitude(j_max: int = 2, k_max: int = 8, tol: float = 1e-12) -> CheckResult:
    """``|h(j, k, j - k)|^2`` matches its closed reduced form."""
    errs = []
    for j in mode_set(j_max).members:
        for k in mode_set(k_max).members:
            l = (int(j[0] - k[0]), int(j[1] - k[1]))
            if l == (0, 0):
                continue
            v = abs(h_coeff(tuple(j), tuple(k), l)) ** 2
            r = h_coeff_sq_reduced(tuple(j), tuple(k))
            errs.append(abs(v - r) / max(1.0, r))
    return _result("H magnitude", errs, tol, f"|j| <= {j_max}, |k| <= {k_max}, relative error")


def check_noise_antisymmetry(N: int = 9) -> CheckResult:
    """Every noise matrix is exactly antisymmetric."""
    errs = []
    for k in mode_set(N, THIRD).members:
        A = noise_coupling_matrix(tuple(k), N).to_sparse()
        d = (A + A.T).tocoo()
        errs.append(float(np.abs(d.data).max(initial=0.0)))
    return _result("noise antisymmetry", errs, 0.0, f"N = {N}, exact")


def check_drift_orthogonality(cutoffs=(4, 8, 12, 16), n_fields: int = 20, seed: int = 0,
                              tol: float = 1e-10) -> CheckResult:
    """``<b_N(ω), ω> = 0`` relative to ``|b_N| |ω|``."""
    errs = []
    for N in cutoffs:
        x = SeededSampler(seed, 1000 + N).generator().standard_normal((n_fields, len(mode_set(N))))
        X = to_internal(x, N)
        B = EnsembleDrift(N)(X)
        dots = np.einsum("ij,ij->j", B, X)
        scale = np.linalg.norm(B, axis=0) * np.linalg.norm(X, axis=0)
        errs.extend(np.abs(dots) / scale)
    return _result("drift orthogonality", errs, tol, f"N in {tuple(cutoffs)}, relative to |b||ω|")


def identity_suite(n: int = 16) -> list[CheckResult]:
    """All identities at cutoffs up to ``n``."""
    return [
        check_coupling_sums(n_max=n),
        check_noise_covariance(n_max=min(n, 32)),
        check_ito_correction(cutoffs=tuple(N for N in (3, 6, 9, 12) if N <= max(n, 3))),
        check_h_magnitude(k_max=min(n, 8)),
        check_noise_antisymmetry(N=min(max(n, 3), 9)),
        check_drift_orthogonality(cutoffs=tuple(N for N in (4, 8, 12, 16) if N <= max(n, 4))),
    ]


__all__ = ["CheckResult", "identity_suite", "FULL"]
