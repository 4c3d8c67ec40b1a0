"""Time stepping for the Galerkin transport-noise Euler system and its limit.

Transport system (Stratonovich), with ``c = 2 sqrt(2 nu) eps_N`` over the
noise set ``Γ_N = {3|k| <= N}``::

    dω = -b_N(ω) dt + c sum_{k in Γ_N} A_k ω ∘ dW_k

Limit equation: ``dω = -b_N(ω) dt + nu Δω dt + sqrt(2 nu) (-Δ)^{1/2} dW``,
i.e. every mode is an Ornstein-Uhlenbeck process with rate
``4 nu pi^2 |l|^2`` and unit stationary variance, coupled by the drift.

Schemes:

``cayley_split``
    Strang splitting: half a drift step (``drift_substeps`` classical RK4 steps), the noise, then half
    a drift step.  The noise substep applies, for each noise mode in mode
    order, the Cayley map ``(I - θA_k/2)^{-1}(I + θA_k/2)`` with
    ``θ = c ΔW_k``.  Each factor is orthogonal, so the substep preserves the
    enstrophy and the white-noise measure exactly.
``ito_em``
    The same Strang splitting, with the noise substep replaced by
    Euler-Maruyama on its Itô form ``(c^2/2) sum A_k^2 X dt + c sum A_k X dW_k``.
    The noise substep is not norm preserving: with ``C = (c^2/2) sum A_k^2``
    it maps ``E|X|^2`` to ``|X|^2 + dt^2 |CX|^2``, so the enstrophy grows like
    ``exp(dt T <λ^2>)`` with ``λ`` up to ``4 nu pi^2 N^2``.  Keeping
    ``dt <= 0.1 / (4 nu pi^2 N^2)`` bounds each step but not the horizon;
    useful only for ``dt T (4 nu pi^2 N^2)^2 << 1``.

The limit equation uses Strang splitting with an exact OU substep.

Ensembles are integrated as ``(2h, paths)`` arrays (see
:class:`transport_noise.basis.Layout`); path ``i`` draws all its randomness
from its own stream, so results do not depend on batching.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numba
import numpy as np

from . import _kernels
from .basis import RealSpectralField, layout, noise_coupling_matrix, noise_lines, noise_scale
from .lattice import FULL, KINDS, THIRD, mode_set
from .measure import NORMAL_METHOD, SEEDING, SeededSampler
from .nonlinear import DRIFT_METHODS, EnsembleDrift, to_internal, to_public

TRANSPORT = "transport"
LIMIT = "limit"
SCHEMES = ("cayley_split", "ito_em")
BLOWUP = 1e4  # enstrophy above BLOWUP * |Λ_N| aborts a path


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one simulation.

    ``record_stride`` is in steps; observables are recorded at
    ``t = 0, stride dt, 2 stride dt, ...``.
    """

    nu: float
    cutoff: int
    dt: float
    T: float
    equation: str = TRANSPORT
    noise_kind: str = THIRD
    scheme: str = "cayley_split"
    record_stride: int = 1
    seed: int = 0
    observables: tuple = ((1, 0),)
    drift_method: str = "auto"
    drift_substeps: int | str = "auto"
    threads: int | None = None

    def __post_init__(self):
        obs = tuple((int(k[0]), int(k[1])) for k in self.observables)
        object.__setattr__(self, "observables", obs)
        if not (isinstance(self.nu, (int, float)) and self.nu >= 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be a non-negative number, got {self.nu!r}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be a positive integer, got {self.cutoff!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.T >= 0:
            raise ValueError(f"T must be non-negative, got {self.T!r}")
        if self.T > 0 and self.dt > self.T:
            raise ValueError(f"dt={self.dt} exceeds T={self.T}")
        if self.equation not in (TRANSPORT, LIMIT):
            raise ValueError(f"equation must be {TRANSPORT!r} or {LIMIT!r}")
        if self.noise_kind not in KINDS:
            raise ValueError(f"noise_kind must be one of {KINDS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.drift_method not in DRIFT_METHODS:
            raise ValueError(f"drift_method must be one of {DRIFT_METHODS}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.T > 0 and self.record_stride * self.dt > self.T * (1 + 1e-12):
            raise ValueError("record_stride * dt exceeds T")
        if self.drift_substeps != "auto" and (
                isinstance(self.drift_substeps, str) or int(self.drift_substeps) != self.drift_substeps
                or self.drift_substeps < 1):
            raise ValueError("drift_substeps must be a positive integer or 'auto'")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not obs:
            raise ValueError("at least one observable mode is required")
        if self.equation == TRANSPORT and self.noise_kind == THIRD and self.cutoff < 3:
            raise ValueError("the reduced noise set is empty for cutoff < 3")
        band = self.cutoff // 3 if (self.equation == TRANSPORT and self.noise_kind == THIRD) else self.cutoff
        for k in obs:
            if band < 1 or k not in mode_set(band):
                raise ValueError(
                    f"observable {k} is outside the safe band |k| <= {band} for this configuration")
        self.n_steps  # validates T / dt

    @property
    def n_steps(self) -> int:
        if self.T == 0:
            return 0
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        return n

    @property
    def substeps(self) -> int:
        """RK4 substeps per drift half-step."""
        if self.drift_substeps == "auto":
            return suggest_drift_substeps(self.cutoff, 0.5 * self.dt)
        return int(self.drift_substeps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["observables"] = [list(k) for k in self.observables]
        return d


def drift_rate(N: int) -> float:
    """Root-mean-square of ``<ω ⊗ ω, H_{e_j}>`` over ``j`` in ``Λ_N`` under white noise.

    Exact: ``E |<ω ⊗ ω, H_{e_j}>|^2 = 2 sum_{k,l in Λ_N} |h(j, k, l)|^2``.
    """
    return _drift_rate(int(N))


@lru_cache(maxsize=32)
def _drift_rate(N: int) -> float:
    from .nonlinear import h_coeff_sq_sum
    ms = mode_set(N).members
    return math.sqrt(np.mean([2.0 * h_coeff_sq_sum(tuple(j), cutoff=N) for j in ms]))


def suggest_drift_substeps(N: int, h: float, kappa: float = 0.15) -> int:
    """Smallest ``m`` with ``drift_rate(N) * h / m <= kappa``.

    At ``kappa = 0.15`` classical RK4 loses well under 1% of the enstrophy
    per unit time on white-noise data.
    """
    return max(1, math.ceil(drift_rate(N) * h / kappa))


@dataclass
class Ensemble:
    """Recorded observables for a set of paths.

    Shapes: ``values (paths, times, obs)``, ``enstrophy (paths, times)``,
    ``qv (paths, times, obs, obs)`` (running realized covariations).
    ``status`` is ``"ok"`` or a diagnostic for aborted paths, whose records
    are ``nan`` from the abort onward.
    """

    config: SimulationConfig
    streams: np.ndarray
    times: np.ndarray
    values: np.ndarray
    enstrophy: np.ndarray
    qv: np.ndarray
    status: list = field(default_factory=list)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def obs_index(self, k) -> int:
        return self.config.observables.index((int(k[0]), int(k[1])))

    def path(self, i: int) -> "TrajectoryRecord":
        return TrajectoryRecord(self.config, int(self.streams[i]), self.times, self.values[i],
                                self.enstrophy[i], self.qv[i], self.status[i])

    def metadata(self) -> dict:
        return {"config": self.config.to_dict(), "n_paths": self.n_paths,
                "first_stream": int(self.streams[0]) if self.n_paths else 0,
                "seeding": SEEDING, "normal_method": NORMAL_METHOD,
                "aborted_paths": [i for i, s in enumerate(self.status) if s != "ok"]}


@dataclass
class TrajectoryRecord:
    config: SimulationConfig
    stream: int
    times: np.ndarray
    values: np.ndarray
    enstrophy: np.ndarray
    qv: np.ndarray
    status: str = "ok"

    def observable(self, k) -> np.ndarray:
        return self.values[:, self.config.observables.index((int(k[0]), int(k[1])))]


# -- the integrator -------------------------------------------------------------

class Integrator:
    """Batched stepper for one configuration."""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        N = cfg.cutoff
        self.N = N
        self.layout = layout(N)
        self.dim = 2 * self.layout.h
        self.drift = EnsembleDrift(N, cfg.drift_method)
        if cfg.equation == TRANSPORT:
            self.lines = noise_lines(N, cfg.noise_kind)
            self.n_noise = len(self.lines.noise_modes)
            self.c = noise_scale(N, cfg.noise_kind, cfg.nu)
        else:
            self.n_noise = self.dim
            n2 = (self.layout.half ** 2).sum(axis=1).astype(float)
            lam = 4 * cfg.nu * math.pi ** 2 * np.concatenate([n2, n2])
            self.ou_decay = np.exp(-lam * cfg.dt)[:, None]
            self.ou_scale = np.sqrt(-np.expm1(-2 * lam * cfg.dt))[:, None]
        self._k = [None] * 4
        self.substeps = cfg.substeps

    # drift ----------------------------------------------------------------
    def rk4(self, X: np.ndarray, h: float) -> None:
        """In place: one classical RK4 step of ``dX/dt = -b_N(X)``."""
        f = self.drift
        if self._k[0] is None or self._k[0].shape != X.shape:
            self._k = [np.empty_like(X) for _ in range(4)]
            self._tmp = np.empty_like(X)
        k1, k2, k3, k4 = self._k
        tmp = self._tmp
        f(X, k1)
        np.multiply(k1, 0.5 * h, out=tmp)
        tmp += X
        f(tmp, k2)
        np.multiply(k2, 0.5 * h, out=tmp)
        tmp += X
        f(tmp, k3)
        np.multiply(k3, h, out=tmp)
        tmp += X
        f(tmp, k4)
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        k1 *= h / 6.0
        X += k1

    def half_drift(self, X: np.ndarray) -> None:
        m = self.substeps
        for _ in range(m):
            self.rk4(X, 0.5 * self.cfg.dt / m)

    # noise ----------------------------------------------------------------
    def apply_noise_matrix(self, X: np.ndarray, j: int, out: np.ndarray) -> np.ndarray:
        L = self.lines
        _kernels.lines_matvec(X, L.mode_ptr, L.line_ptr, L.alpha_re, L.alpha_im,
                              L.point_slot, L.point_sign, L.point_write, j, out)
        return out

    def cayley_noise(self, X: np.ndarray, dW: np.ndarray) -> None:
        """In place; ``dW`` has shape ``(n_noise, paths)``."""
        L = self.lines
        for j in range(self.n_noise):
            theta = np.ascontiguousarray(self.c * dW[j])
            _kernels.lines_cayley(X, L.mode_ptr, L.line_ptr, L.alpha_re, L.alpha_im,
                                  L.point_slot, L.point_sign, L.point_write, j, theta)

    def ito_correction(self, X: np.ndarray) -> np.ndarray:
        """``(c^2 / 2) sum_k A_k^2 X``."""
        out = np.zeros_like(X)
        y = np.empty_like(X)
        z = np.empty_like(X)
        for j in range(self.n_noise):
            self.apply_noise_matrix(X, j, y)
            self.apply_noise_matrix(y, j, z)
            out += z
        out *= 0.5 * self.c ** 2
        return out

    def ito_drift(self, X: np.ndarray) -> np.ndarray:
        return self.drift(X) + self.ito_correction(X)

    # steps ----------------------------------------------------------------
    def step(self, X: np.ndarray, noise: np.ndarray) -> None:
        """Advance ``X`` by one step in place.

        ``noise`` is ``(n_noise, paths)`` of standard normals: Brownian
        increments are ``sqrt(dt) * noise``; for the limit equation they are
        the OU innovations.
        """
        cfg = self.cfg
        dt = cfg.dt
        if cfg.equation == LIMIT:
            self.half_drift(X)
            X *= self.ou_decay
            X += self.ou_scale * noise
            self.half_drift(X)
        elif cfg.scheme == "cayley_split":
            self.half_drift(X)
            self.cayley_noise(X, math.sqrt(dt) * noise)
            self.half_drift(X)
        else:
            self.half_drift(X)
            self.euler_maruyama_noise(X, math.sqrt(dt) * noise)
            self.half_drift(X)

    def euler_maruyama_noise(self, X: np.ndarray, dW: np.ndarray) -> None:
        """In place: ``X += dt (c^2/2) sum A_k^2 X + c sum A_k X dW_k`` (``dW`` already scaled)."""
        inc = self.ito_correction(X)
        inc *= self.cfg.dt
        y = np.empty_like(X)
        for j in range(self.n_noise):
            self.apply_noise_matrix(X, j, y)
            inc += (self.c * dW[j]) * y
        X += inc


def _set_threads(cfg: SimulationConfig):
    if cfg.threads is not None:
        numba.set_num_threads(max(1, min(int(cfg.threads), numba.config.NUMBA_NUM_THREADS)))


def _block_steps(n_paths: int, n_noise: int, budget: int = 4_000_000) -> int:
    return max(1, budget // max(1, n_paths * n_noise))


def simulate_ensemble(cfg: SimulationConfig, n_paths: int, first_stream: int = 0,
                      batch: int = 128, initial: np.ndarray | None = None) -> Ensemble:
    """Integrate ``n_paths`` independent paths; path ``i`` uses stream ``first_stream + i``.

    Each stream first supplies the initial field (``|Λ_N|`` normals in mode
    order, a sample of white noise) unless ``initial`` is given, then one
    block of ``n_noise`` normals per step.  ``initial`` may be one public
    coefficient vector or one per path.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    _set_threads(cfg)
    integ = Integrator(cfg)
    N = cfg.cutoff
    d = integ.dim
    n_steps = cfg.n_steps
    stride = cfg.record_stride
    rec_steps = list(range(0, n_steps + 1, stride)) if n_steps else [0]
    times = np.array(rec_steps, dtype=float) * cfg.dt
    n_obs = len(cfg.observables)
    rows = integ.layout.internal_rows(cfg.observables)
    values = np.full((n_paths, len(rec_steps), n_obs), np.nan)
    enst = np.full((n_paths, len(rec_steps)), np.nan)
    qv = np.full((n_paths, len(rec_steps), n_obs, n_obs), np.nan)
    status = ["ok"] * n_paths
    streams = np.arange(first_stream, first_stream + n_paths)
    if initial is not None:
        initial = np.atleast_2d(np.asarray(initial, dtype=float))
        if initial.shape[1] != d:
            raise ValueError(f"initial fields need {d} coefficients")
    # limit-equation innovations are drawn in mode order like the initial field
    perm = integ.layout.to_internal if cfg.equation == LIMIT else None
    for a in range(0, n_paths, batch):
        b = min(n_paths, a + batch)
        P = b - a
        gens = [SeededSampler(cfg.seed, int(s)).generator() for s in streams[a:b]]
        init = np.stack([g.standard_normal(d) for g in gens])
        if initial is not None:
            init = np.broadcast_to(initial if len(initial) > 1 else initial[0], (n_paths, d))[a:b]
        X = to_internal(init, N)
        alive = np.ones(P, dtype=bool)
        acc = np.zeros((P, n_obs, n_obs))
        prev = X[rows].T.copy()
        r = 0

        def record(r):
            values[a:b, r] = X[rows].T
            enst[a:b, r] = np.einsum("ij,ij->j", X, X)
            qv[a:b, r] = acc
            bad = ~np.isfinite(enst[a:b, r]) | (enst[a:b, r] > BLOWUP * d)
            for i in np.nonzero(bad & alive)[0]:
                status[a + i] = f"aborted at t={times[r]:.6g}: enstrophy {enst[a + i, r]:.3e}"
            alive[bad] = False
            dead = ~alive
            values[a:b][dead, r] = np.nan
            enst[a:b][dead, r] = np.nan
            qv[a:b][dead, r] = np.nan

        record(0)
        B = _block_steps(P, integ.n_noise)
        step = 0
        while step < n_steps:
            nb = min(B, n_steps - step)
            draws = np.stack([g.standard_normal((nb, integ.n_noise)) for g in gens], axis=-1)
            for s in range(nb):
                noise = draws[s][perm] if perm is not None else draws[s]
                integ.step(X, noise)
                if not alive.all():
                    X[:, ~alive] = 0.0
                cur = X[rows].T
                inc = cur - prev
                acc += inc[:, :, None] * inc[:, None, :]
                prev = cur.copy()
                step += 1
                if step % stride == 0:
                    r += 1
                    record(r)
    return Ensemble(cfg, streams, times, values, enst, qv, status)


def simulate_path(cfg: SimulationConfig, stream: int = 0) -> TrajectoryRecord:
    """One path from stream ``stream`` of ``cfg.seed``."""
    return simulate_ensemble(cfg, 1, first_stream=stream).path(0)


def realized_qv(rec, l, m) -> tuple[np.ndarray, np.ndarray]:
    """Running realized covariation ``sum Δx_l Δx_m`` at the recording times.

    Accepts a :class:`TrajectoryRecord` (returns shape ``(times,)``) or an
    :class:`Ensemble` (``(paths, times)``).
    """
    obs = rec.config.observables
    i, j = obs.index(tuple(l)), obs.index(tuple(m))
    return rec.times, rec.qv[..., i, j]


# -- single-field API -------------------------------------------------------------

def _single(cfg: SimulationConfig, omega: RealSpectralField) -> tuple[Integrator, np.ndarray]:
    if omega.cutoff != cfg.cutoff:
        raise ValueError(f"field cutoff {omega.cutoff} != config cutoff {cfg.cutoff}")
    return Integrator(cfg), to_internal(omega.coeffs[None, :], cfg.cutoff)


def ito_drift(omega: RealSpectralField, cfg: SimulationConfig) -> RealSpectralField:
    """Itô drift ``-b_N(ω) + (c^2/2) sum_k A_k^2 ω`` of the transport system."""
    integ, X = _single(replace_equation(cfg, TRANSPORT), omega)
    return RealSpectralField(cfg.cutoff, to_public(integ.ito_drift(X), cfg.cutoff)[0])


def ito_correction(omega: RealSpectralField, cfg: SimulationConfig) -> RealSpectralField:
    integ, X = _single(replace_equation(cfg, TRANSPORT), omega)
    return RealSpectralField(cfg.cutoff, to_public(integ.ito_correction(X), cfg.cutoff)[0])


def ito_correction_sparse(omega: RealSpectralField, cfg: SimulationConfig) -> RealSpectralField:
    """Reference version of :func:`ito_correction` built from the sparse matrices."""
    x = omega.coeffs
    out = np.zeros_like(x)
    for k in mode_set(cfg.cutoff, cfg.noise_kind).members:
        A = noise_coupling_matrix(k, cfg.cutoff).to_sparse()
        out += A @ (A @ x)
    c = noise_scale(cfg.cutoff, cfg.noise_kind, cfg.nu)
    return RealSpectralField(cfg.cutoff, 0.5 * c * c * out)


def replace_equation(cfg: SimulationConfig, equation: str) -> SimulationConfig:
    """``cfg`` for the other equation; observables fall back to ``(1, 0)``."""
    if cfg.equation == equation:
        return cfg
    return replace(cfg, equation=equation, observables=((1, 0),))


def step_transport_euler(omega: RealSpectralField, dW: np.ndarray, cfg: SimulationConfig) -> RealSpectralField:
    """One step of the transport system; ``dW`` are the Brownian increments over ``cfg.dt``,
    one per noise mode in mode order."""
    integ, X = _single(replace_equation(cfg, TRANSPORT), omega)
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (integ.n_noise,):
        raise ValueError(f"expected {integ.n_noise} increments")
    integ.step(X, dW[:, None] / math.sqrt(cfg.dt))
    return RealSpectralField(cfg.cutoff, to_public(X, cfg.cutoff)[0])


def step_limit_nse(omega: RealSpectralField, xi: np.ndarray, cfg: SimulationConfig) -> RealSpectralField:
    """One step of the limit equation; ``xi`` are standard normal OU innovations in mode order."""
    integ, X = _single(replace_equation(cfg, LIMIT), omega)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (integ.dim,):
        raise ValueError(f"expected {integ.dim} innovations")
    integ.step(X, to_internal(xi[None, :], cfg.cutoff))
    return RealSpectralField(cfg.cutoff, to_public(X, cfg.cutoff)[0])


def rk4_drift_flow(omega: RealSpectralField, dt: float, n_steps: int, method: str = "auto") -> RealSpectralField:
    """Deterministic Galerkin Euler flow ``dω/dt = -b_N(ω)`` by RK4 (``nu = 0``)."""
    cfg = SimulationConfig(nu=0.0, cutoff=omega.cutoff, dt=dt, T=dt * n_steps,
                           equation=LIMIT, drift_method=method)
    integ, X = _single(cfg, omega)
    for _ in range(n_steps):
        integ.rk4(X, dt)
    return RealSpectralField(omega.cutoff, to_public(X, omega.cutoff)[0])
