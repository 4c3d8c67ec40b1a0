"""Plain-text formats: fields, coefficient tables, trajectories, configs and reports.

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back reproduces every value bit for bit.  JSON keeps insertion order
and maps non-finite floats to ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .basis import ComplexSpectralField, RealSpectralField
from .dynamics import Ensemble, SimulationConfig
from .lattice import mode_set
from .nonlinear import HCoefficientTable

REAL = "real"
COMPLEX = "complex"
FIELD_COLUMNS = ["k1", "k2", "re", "im"]
H_COLUMNS = ["j1", "j2", "k1", "k2", "l1", "l2", "re", "im"]


def _num(x) -> str:
    return repr(float(x))


def _writer(buf):
    return csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)


# -- fields -------------------------------------------------------------------------

def field_to_csv(f) -> str:
    """Serialise a real or complex spectral field."""
    buf = io.StringIO()
    w = _writer(buf)
    if isinstance(f, RealSpectralField):
        buf.write(f"# cutoff={f.cutoff},basis={REAL}\n")
        w.writerow(FIELD_COLUMNS)
        for k, c in zip(f.modes, f.coeffs):
            w.writerow([int(k[0]), int(k[1]), _num(c), _num(0.0)])
    elif isinstance(f, ComplexSpectralField):
        N = f.cutoff
        buf.write(f"# cutoff={N},basis={COMPLEX}\n")
        w.writerow(FIELD_COLUMNS)
        for k1 in range(-N, N + 1):
            for k2 in range(-N, N + 1):
                if k1 * k1 + k2 * k2 <= N * N:
                    z = f.grid[k1 + N, k2 + N]
                    w.writerow([k1, k2, _num(z.real), _num(z.imag)])
    else:
        raise TypeError(f"cannot serialise {type(f).__name__}")
    return buf.getvalue()


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise ValueError("field CSV must start with a '# cutoff=...,basis=...' line")
    out = {}
    for item in line[1:].strip().split(","):
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    if "cutoff" not in out or out.get("basis") not in (REAL, COMPLEX):
        raise ValueError(f"bad field header {line.strip()!r}")
    return out


def field_from_csv(text: str):
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty field CSV")
    head = _parse_header(lines[0])
    N = int(head["cutoff"])
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != FIELD_COLUMNS:
        raise ValueError(f"expected header row {','.join(FIELD_COLUMNS)}")
    data = [(int(r[0]), int(r[1]), float(r[2]), float(r[3])) for r in rows[1:] if r]
    if head["basis"] == REAL:
        ms = mode_set(N)
        c = np.zeros(len(ms))
        for k1, k2, re, im in data:
            if im != 0.0:
                raise ValueError(f"real-basis coefficient of ({k1}, {k2}) has an imaginary part")
            c[ms.index((k1, k2))] = re
        return RealSpectralField(N, c)
    out = ComplexSpectralField.zeros(N)
    for k1, k2, re, im in data:
        if max(abs(k1), abs(k2)) > N:
            raise ValueError(f"mode ({k1}, {k2}) outside cutoff {N}")
        out.grid[k1 + N, k2 + N] = complex(re, im)
    return out


def write_field(path, f) -> None:
    Path(path).write_text(field_to_csv(f), encoding="utf-8")


def read_field(path):
    return field_from_csv(Path(path).read_text(encoding="utf-8"))


# -- coefficient tables ---------------------------------------------------------------

def h_tables_to_csv(tables) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(H_COLUMNS)
    for t in tables:
        if not isinstance(t, HCoefficientTable):
            raise TypeError("expected HCoefficientTable")
        for k, l, v in zip(t.k, t.l, t.values):
            w.writerow([t.j[0], t.j[1], int(k[0]), int(k[1]), int(l[0]), int(l[1]),
                        _num(v.real), _num(v.imag)])
    return buf.getvalue()


# -- trajectories ----------------------------------------------------------------------

def _obs_name(k) -> str:
    return f"w_{k[0]}_{k[1]}"


def trajectory_columns(cfg: SimulationConfig) -> list:
    obs = cfg.observables
    qv = [f"qv_{_obs_name(a)[2:]}__{_obs_name(b)[2:]}" for i, a in enumerate(obs) for b in obs[i:]]
    return ["stream", "time"] + [_obs_name(k) for k in obs] + ["enstrophy"] + qv


def trajectory_to_csv(ens: Ensemble) -> str:
    """One row per (path, recording time); aborted records are empty cells."""
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(trajectory_columns(ens.config))
    n = len(ens.config.observables)
    iu = np.triu_indices(n)

    def cell(x):
        return _num(x) if math.isfinite(x) else ""

    for p in range(ens.n_paths):
        s = int(ens.streams[p])
        for r, t in enumerate(ens.times):
            row = [s, _num(t)] + [cell(x) for x in ens.values[p, r]] + [cell(ens.enstrophy[p, r])]
            row += [cell(x) for x in ens.qv[p, r][iu]]
            w.writerow(row)
    return buf.getvalue()


def ensemble_from_csv(text: str, cfg: SimulationConfig, status=None) -> Ensemble:
    """Rebuild an :class:`Ensemble` from :func:`trajectory_to_csv` output."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != trajectory_columns(cfg):
        raise ValueError("trajectory columns do not match the configuration")
    body = rows[1:]
    streams = sorted({int(r[0]) for r in body})
    times = sorted({float(r[1]) for r in body})
    n = len(cfg.observables)
    iu = np.triu_indices(n)
    P, R = len(streams), len(times)
    if len(body) != P * R:
        raise ValueError("trajectory CSV is not a full (stream, time) grid")
    sidx = {s: i for i, s in enumerate(streams)}
    tidx = {t: i for i, t in enumerate(times)}
    vals = np.full((P, R, n), np.nan)
    enst = np.full((P, R), np.nan)
    qv = np.full((P, R, n, n), np.nan)

    def num(x):
        return float(x) if x != "" else math.nan

    for r in body:
        i, j = sidx[int(r[0])], tidx[float(r[1])]
        vals[i, j] = [num(x) for x in r[2:2 + n]]
        enst[i, j] = num(r[2 + n])
        q = np.full((n, n), np.nan)
        q[iu] = [num(x) for x in r[3 + n:]]
        q.T[iu] = q[iu]
        qv[i, j] = q
    if status is None:
        status = ["ok" if np.isfinite(enst[i]).all() else "aborted" for i in range(P)]
    return Ensemble(cfg, np.array(streams), np.array(times), vals, enst, qv, list(status))


# -- configs ------------------------------------------------------------------------------

_INT_KEYS = {"cutoff", "record_stride", "seed"}
_FLOAT_KEYS = {"nu", "dt", "T"}
_STR_KEYS = {"equation", "noise_kind", "scheme", "drift_method"}
CONFIG_KEYS = tuple(f.name for f in fields(SimulationConfig))
REQUIRED_KEYS = ("nu", "cutoff", "dt", "T")


class ConfigError(ValueError):
    """Invalid or incomplete configuration (a usage error)."""


def parse_modes(text: str) -> tuple:
    """``"1,0; 1,1"`` -> ``((1, 0), (1, 1))``."""
    out = []
    for part in text.replace("(", "").replace(")", "").split(";"):
        part = part.strip()
        if not part:
            continue
        a, _, b = part.partition(",")
        try:
            out.append((int(a), int(b)))
        except ValueError:
            raise ConfigError(f"bad mode {part!r}; expected 'k1,k2'") from None
    return tuple(out)


def format_modes(modes) -> str:
    return "; ".join(f"{k[0]},{k[1]}" for k in modes)


def parse_value(key: str, raw: str, extra: dict | None = None):
    """Convert ``raw`` according to the type of ``key``."""
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _STR_KEYS:
            return raw
        if key == "observables":
            return parse_modes(raw)
        if key == "drift_substeps":
            return raw if raw == "auto" else int(raw)
        if key == "threads":
            return None if raw in ("", "none", "None") else int(raw)
        if extra and key in extra:
            return extra[key](raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {key!r}") from None
    raise ConfigError(f"unknown configuration key {key!r}")


def parse_config_text(text: str, extra: dict | None = None) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {n}: expected 'key = value'")
        if key not in CONFIG_KEYS and not (extra and key in extra):
            raise ConfigError(f"line {n}: unknown configuration key {key!r}")
        out[key] = parse_value(key, value, extra)
    return out


def build_config(values: dict) -> SimulationConfig:
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required configuration key {missing[0]!r}")
    try:
        return SimulationConfig(**{k: v for k, v in values.items() if k in CONFIG_KEYS})
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def config_to_text(cfg: SimulationConfig, extra: dict | None = None) -> str:
    """Full resolved configuration in the input format."""
    lines = []
    for k, v in cfg.to_dict().items():
        if k == "observables":
            v = format_modes(cfg.observables)
        elif v is None:
            v = "none"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# -- JSON -----------------------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")
