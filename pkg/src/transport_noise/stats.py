"""Ensemble statistics with explicit error bars.

Conventions: standard errors are path-level (paths are independent, times
within a path are not); acceptance bands are 4 standard errors wide;
bootstrap resamples paths with an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .dynamics import Ensemble, SimulationConfig, simulate_ensemble

BAND = 4.0
N_BOOT = 1000
KS_LEVEL = 1e-3
MIN_PATHS = 100


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def bootstrap(stat, data: np.ndarray, n_boot: int = N_BOOT, seed: int = 0) -> np.ndarray:
    """Apply ``stat`` to ``n_boot`` path-resampled copies of ``data`` (paths on axis 0)."""
    rng = _rng(seed)
    n = data.shape[0]
    return np.array([stat(data[rng.integers(0, n, n)]) for _ in range(n_boot)])


# -- stationarity ------------------------------------------------------------------

@dataclass
class EnsembleSummary:
    """Per-time, per-mode moments of an ensemble with 4-SE checks.

    ``variance[t, m]`` uses the known zero mean; ``z`` is
    ``(variance - 1) / se``; ``ks_pvalue`` tests the marginal against N(0, 1).
    """

    times: np.ndarray
    modes: list
    n_paths: int
    mean: np.ndarray
    variance: np.ndarray
    se: np.ndarray
    z: np.ndarray
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "modes": [list(k) for k in self.modes],
                "n_paths": self.n_paths, "variance": self.variance.tolist(), "se": self.se.tolist(),
                "z": self.z.tolist(), "ks_pvalue": self.ks_pvalue.tolist(), "flags": self.flags,
                "passed": self.passed}


def moments_report(samples: np.ndarray, times, modes, ks_level: float = KS_LEVEL) -> EnsembleSummary:
    """Build an :class:`EnsembleSummary` from ``samples[path, time, mode]``."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if x.ndim != 3 or n < 2:
        raise ValueError("need samples[path, time, mode] with at least two paths")
    sq = x * x
    var = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(n)
    mean = x.mean(axis=0)
    mean_se = x.std(axis=0, ddof=1) / math.sqrt(n)
    z = (var - 1.0) / se
    ks_s = np.empty_like(var)
    ks_p = np.empty_like(var)
    flags = []
    for t in range(x.shape[1]):
        for m in range(x.shape[2]):
            res = scipy.stats.kstest(x[:, t, m], "norm")
            ks_s[t, m], ks_p[t, m] = res.statistic, res.pvalue
            where = f"t={times[t]:.6g} mode={tuple(modes[m])}"
            if abs(z[t, m]) > BAND:
                flags.append(f"variance {var[t, m]:.4f} is {z[t, m]:+.1f} SE from 1 at {where}")
            if abs(mean[t, m]) > BAND * mean_se[t, m]:
                flags.append(f"mean {mean[t, m]:+.4f} exceeds {BAND:g} SE at {where}")
            if ks_p[t, m] < ks_level:
                flags.append(f"KS p-value {ks_p[t, m]:.2e} < {ks_level:g} at {where}")
    return EnsembleSummary(np.asarray(times, dtype=float), [tuple(k) for k in modes], n,
                           mean, var, se, z, ks_s, ks_p, flags)


def stationarity_report(ens: Ensemble, times=None, modes=None, ks_level: float = KS_LEVEL,
                        min_paths: int = MIN_PATHS) -> EnsembleSummary:
    """Check that each recorded mode stays N(0, 1) at the requested times."""
    if ens.n_paths < min_paths:
        raise ValueError(f"degenerate ensemble: {ens.n_paths} paths < {min_paths}")
    t_idx = range(len(ens.times)) if times is None else [_time_index(ens, t) for t in times]
    m_idx = range(len(ens.config.observables)) if modes is None else [ens.obs_index(k) for k in modes]
    t_idx, m_idx = list(t_idx), list(m_idx)
    x = _alive(ens)[:, t_idx][:, :, m_idx]
    return moments_report(x, ens.times[t_idx], [ens.config.observables[m] for m in m_idx], ks_level)


def _time_index(ens: Ensemble, t: float) -> int:
    i = int(np.argmin(np.abs(ens.times - t)))
    if abs(ens.times[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} was not recorded")
    return i


def _alive(ens: Ensemble) -> np.ndarray:
    ok = np.array([s == "ok" for s in ens.status])
    if not ok.any():
        raise ValueError("every path in the ensemble aborted")
    return ens.values[ok]


# -- quadratic variation -------------------------------------------------------------

@dataclass
class QVFit:
    slope: float
    se: float
    ci: tuple
    target: float | None = None

    @property
    def contains_target(self) -> bool:
        return self.target is not None and self.ci[0] <= self.target <= self.ci[1]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "se": self.se, "ci": list(self.ci), "target": self.target,
                "contains_target": self.contains_target if self.target is not None else None}


def _origin_slope(t: np.ndarray, y: np.ndarray) -> float:
    return float(np.dot(t, y) / np.dot(t, t))


def qv_fit(ens: Ensemble, l, m, target: float | None = None, n_boot: int = N_BOOT,
           seed: int = 0) -> QVFit:
    """Least-squares slope (through the origin) of the mean realized covariation against time.

    The confidence interval is the slope +- 4 bootstrap standard errors.
    """
    ok = np.array([s == "ok" for s in ens.status])
    q = ens.qv[ok][:, :, ens.obs_index(l), ens.obs_index(m)]
    t = ens.times
    if len(t) < 3:
        raise ValueError("a slope fit needs at least 3 recording times")
    if len(q) < 2:
        raise ValueError("a bootstrap needs at least 2 paths")
    slope = _origin_slope(t, q.mean(axis=0))
    boots = bootstrap(lambda d: _origin_slope(t, d.mean(axis=0)), q, n_boot, seed)
    se = float(boots.std(ddof=1))
    return QVFit(slope, se, (slope - BAND * se, slope + BAND * se), target)


def qv_target(nu: float, l) -> float:
    """Quadratic-variation rate ``8 nu pi^2 |l|^2`` of mode ``l`` in the limit equation."""
    return 8 * nu * math.pi ** 2 * (l[0] ** 2 + l[1] ** 2)


# -- increment moments ----------------------------------------------------------------

@dataclass
class IncrementScan:
    gaps: np.ndarray
    moments: np.ndarray
    se: np.ndarray
    slope: float
    slope_se: float
    order: int

    def to_dict(self) -> dict:
        return {"gaps": self.gaps.tolist(), "moments": self.moments.tolist(), "se": self.se.tolist(),
                "slope": self.slope, "slope_se": self.slope_se, "order": self.order}


def loglog_slope(gaps, moments) -> float:
    return float(np.polyfit(np.log(gaps), np.log(moments), 1)[0])


def increment_moments(series: np.ndarray, dt: float, gaps, order: int = 4, origin: str = "all",
                      n_boot: int = N_BOOT, seed: int = 0) -> IncrementScan:
    """``E |x_{t+g} - x_t|^order`` for paths ``series[path, time]`` sampled every ``dt``.

    ``origin="all"`` averages over every start time within a path
    (stationary data); ``origin="start"`` uses ``t = 0`` only.  The slope is
    the least-squares fit of log-moment on log-gap; its standard error is
    bootstrapped over paths.
    """
    series = np.asarray(series, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if gaps.size < 2:
        raise ValueError("a log-log slope needs at least two gaps")
    lags = np.rint(gaps / dt).astype(int)
    if np.any(np.abs(lags * dt - gaps) > 1e-9) or np.any(lags < 1):
        raise ValueError("gaps must be positive multiples of the sampling interval")
    if lags.max() >= series.shape[1]:
        raise ValueError("largest gap exceeds the recorded horizon")

    def per_path(x):
        cols = []
        for g in lags:
            d = x[:, g:] - x[:, :-g] if origin == "all" else x[:, g:g + 1] - x[:, :1]
            cols.append(np.mean(np.abs(d) ** order, axis=1))
        return np.stack(cols, axis=1)

    if origin not in ("all", "start"):
        raise ValueError("origin must be 'all' or 'start'")
    pp = per_path(series)
    mom = pp.mean(axis=0)
    se = pp.std(axis=0, ddof=1) / math.sqrt(len(pp))
    slope = loglog_slope(gaps, mom)
    boots = bootstrap(lambda d: loglog_slope(gaps, d.mean(axis=0)), pp, n_boot, seed)
    return IncrementScan(gaps, mom, se, slope, float(boots.std(ddof=1)), order)


def increment_moment_scan(cfg: SimulationConfig, gaps, n_paths: int, mode=(1, 0), order: int = 4,
                          first_stream: int = 0) -> IncrementScan:
    """Simulate ``cfg`` and scan increment moments of ``mode`` (stationary start)."""
    ens = simulate_ensemble(cfg, n_paths, first_stream=first_stream)
    x = _alive(ens)[:, :, ens.obs_index(mode)]
    return increment_moments(x, cfg.dt * cfg.record_stride, gaps, order=order)


# -- autocorrelation ---------------------------------------------------------------------

def _acf(x: np.ndarray, lags: np.ndarray) -> np.ndarray:
    var = np.mean(x * x)
    return np.array([np.mean(x[:, g:] * x[:, :x.shape[1] - g]) / var for g in lags])


@dataclass
class AutocorrelationComparison:
    lags: np.ndarray
    acf_a: np.ndarray
    acf_b: np.ndarray
    se_a: np.ndarray
    se_b: np.ndarray
    distance: float
    distance_se: float

    @property
    def bands_overlap(self) -> bool:
        """True when the 4-SE bands of the two curves intersect at every lag."""
        lo = np.maximum(self.acf_a - BAND * self.se_a, self.acf_b - BAND * self.se_b)
        hi = np.minimum(self.acf_a + BAND * self.se_a, self.acf_b + BAND * self.se_b)
        return bool(np.all(lo <= hi))

    def to_dict(self) -> dict:
        return {"lags": self.lags.tolist(), "acf_a": self.acf_a.tolist(), "acf_b": self.acf_b.tolist(),
                "se_a": self.se_a.tolist(), "se_b": self.se_b.tolist(), "distance": self.distance,
                "distance_se": self.distance_se, "bands_overlap": self.bands_overlap}


def autocorrelation(series: np.ndarray, dt: float, lags) -> np.ndarray:
    idx = np.rint(np.asarray(lags) / dt).astype(int)
    return _acf(np.asarray(series, dtype=float), idx)


def autocorrelation_compare(a, b, mode, lags, n_boot: int = N_BOOT, seed: int = 0) -> AutocorrelationComparison:
    """Compare stationary autocorrelations of ``mode`` in two ensembles.

    Each ACF averages over paths and start times.  The distance is the
    root-mean-square difference over ``lags``.  Standard errors come from
    independent path bootstraps of each ensemble.
    """
    if a.config.nu != b.config.nu:
        raise ValueError(f"ensembles have different viscosities ({a.config.nu} vs {b.config.nu})")
    xa = _alive(a)[:, :, a.obs_index(mode)]
    xb = _alive(b)[:, :, b.obs_index(mode)]
    da = a.config.dt * a.config.record_stride
    db = b.config.dt * b.config.record_stride
    lags = np.asarray(lags, dtype=float)
    ia = np.rint(lags / da).astype(int)
    ib = np.rint(lags / db).astype(int)
    if np.any(np.abs(ia * da - lags) > 1e-9) or np.any(np.abs(ib * db - lags) > 1e-9):
        raise ValueError("lags must be multiples of both recording intervals")
    if ia.max() >= xa.shape[1] or ib.max() >= xb.shape[1]:
        raise ValueError("largest lag exceeds a recorded horizon")
    ra, rb = _acf(xa, ia), _acf(xb, ib)
    ba = bootstrap(lambda d: _acf(d, ia), xa, n_boot, seed)
    bb = bootstrap(lambda d: _acf(d, ib), xb, n_boot, seed + 1)
    dist = float(np.sqrt(np.mean((ra - rb) ** 2)))
    dboot = np.sqrt(np.mean((ba - bb) ** 2, axis=1))
    return AutocorrelationComparison(lags, ra, rb, ba.std(axis=0, ddof=1), bb.std(axis=0, ddof=1),
                                     dist, float(dboot.std(ddof=1)))
