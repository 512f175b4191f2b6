"""Run configuration: one YAML document drives every CLI command.

Every modeling constant (windows, bounds, guesses, seeds, factor widths)
has an overridable default; the defaults reproduce the Italy 2020 study
setup. The resolved configuration is hashed so output files can record
exactly what produced them.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .calibrate import DEFAULT_BOUNDS
from .errors import DataError

VERSION = "0.1.0"

PRE_GUESS = {
    "alpha": 0.0,
    "beta": 1.18,
    "gamma_inv": 2.18,
    "delta": 0.60,
    "lambda0": 0.044,
    "lambda1": 0.116,
    "kappa0": 0.016,
    "kappa1": 0.046,
}
POST_GUESS = {
    "alpha": 0.11,
    "beta": 2.0,
    "gamma_inv": 14.2,
    "delta": 0.375,
    "lambda0": 0.017,
    "lambda1": 1.0,
    "kappa0": 0.024,
    "kappa1": 0.043,
}
# Latent periods under 2 days are not plausible for this disease; the
# pre-intervention window additionally pins the protection rate to zero
# (no distancing measures were in force before the lockdown).
PRE_BOUNDS = {**DEFAULT_BOUNDS, "gamma_inv": (2.0, 30.0), "alpha": (0.0, 1e-6)}
POST_BOUNDS = {**DEFAULT_BOUNDS, "gamma_inv": (2.0, 30.0)}


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        return dt.date.fromisoformat(value[:10])
    raise DataError(f"cannot interpret {value!r} as a date")


@dataclass
class WindowFitConfig:
    guess: dict[str, float]
    bounds: dict[str, tuple[float, float]]
    i0: float | None = None  # None: seed E0=I0 at the window's opening total-confirmed count


@dataclass
class FitConfig:
    n_starts: int = 5
    jitter: float = 0.1
    ftol: float = 1e-9
    max_nfev: int = 2000
    pre: WindowFitConfig = field(
        default_factory=lambda: WindowFitConfig(dict(PRE_GUESS), dict(PRE_BOUNDS))
    )
    post: WindowFitConfig = field(
        default_factory=lambda: WindowFitConfig(dict(POST_GUESS), dict(POST_BOUNDS))
    )


@dataclass
class UqConfig:
    n_samples: int = 10_000
    alpha_rel: float = 0.10
    beta_rel: float = 0.10
    gamma_inv_rel: float = 0.10
    delta_rel: float = 0.30
    i0_rel: float = 0.20
    max_delay_days: int = 7
    i0_base: float | None = None  # None: the fitted pre-window seed
    quantiles: tuple[float, ...] = (0.025, 0.5, 0.975)
    histogram_bins: int = 100


@dataclass
class GsaConfig:
    mode: str = "both"  # given-data | finite-change | both
    samples_csv: str | None = None  # default: <out_dir>/uq_samples.csv
    m_bins: int = 50
    n_replicates: int = 20_000  # 64 evaluations each; reduce for desk scale
    replicate_seed_offset: int = 7  # finite changes draw from seed + offset


@dataclass
class RunConfig:
    data_file: str = ""
    out_dir: str = "episens_out"
    seed: int = 20200224
    threads: int = 1
    n_pop: float = 60_360_000.0
    step_days: float = 0.05
    pre_window: tuple[dt.date, dt.date] = (dt.date(2020, 2, 24), dt.date(2020, 3, 8))
    post_window: tuple[dt.date, dt.date] = (dt.date(2020, 3, 9), dt.date(2020, 4, 20))
    issuance_date: dt.date = dt.date(2020, 3, 9)
    horizon_date: dt.date = dt.date(2020, 4, 20)
    forecast_delay_days: int = 0
    sweep_delays: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    fit: FitConfig = field(default_factory=FitConfig)
    uq: UqConfig = field(default_factory=UqConfig)
    gsa: GsaConfig = field(default_factory=GsaConfig)

    def validate(self) -> "RunConfig":
        for name, (start, end) in (("pre_window", self.pre_window), ("post_window", self.post_window)):
            if start > end:
                raise DataError(f"{name} start {start} after end {end}")
        if self.issuance_date > self.horizon_date:
            raise DataError("issuance_date after horizon_date")
        if self.pre_window[0] > self.issuance_date:
            raise DataError("issuance_date before the pre window start")
        if self.uq.n_samples < 1:
            raise DataError("uq.n_samples must be >= 1")
        if self.gsa.n_replicates < 2:
            raise DataError("gsa.n_replicates must be >= 2")
        if self.gsa.mode not in ("given-data", "finite-change", "both"):
            raise DataError(f"unknown gsa.mode {self.gsa.mode!r}")
        if self.threads < 1:
            raise DataError("threads must be >= 1")
        if self.uq.max_delay_days < 0:
            raise DataError("uq.max_delay_days must be >= 0")
        return self


def _merge_window(base: WindowFitConfig, raw: dict) -> WindowFitConfig:
    guess = dict(base.guess)
    guess.update(raw.get("guess", {}))
    bounds = dict(base.bounds)
    for key, pair in raw.get("bounds", {}).items():
        bounds[key] = (float(pair[0]), float(pair[1]))
    i0 = raw.get("i0", base.i0)
    return WindowFitConfig(guess=guess, bounds=bounds, i0=None if i0 is None else float(i0))


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML config, filling unspecified keys with defaults."""
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise DataError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError("config root must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    cfg = RunConfig()
    simple = {
        "data_file": str,
        "out_dir": str,
        "seed": int,
        "threads": int,
        "n_pop": float,
        "step_days": float,
        "forecast_delay_days": int,
    }
    for key, cast in simple.items():
        if key in raw:
            setattr(cfg, key, cast(raw[key]))
    for key in ("issuance_date", "horizon_date"):
        if key in raw:
            setattr(cfg, key, _as_date(raw[key]))
    for key in ("pre_window", "post_window"):
        if key in raw:
            pair = raw[key]
            if isinstance(pair, dict):
                pair = (pair["start"], pair["end"])
            setattr(cfg, key, (_as_date(pair[0]), _as_date(pair[1])))
    if "sweep_delays" in raw:
        cfg.sweep_delays = tuple(int(z) for z in raw["sweep_delays"])

    fit_raw = raw.get("fit", {})
    for key in ("n_starts", "max_nfev"):
        if key in fit_raw:
            setattr(cfg.fit, key, int(fit_raw[key]))
    for key in ("jitter", "ftol"):
        if key in fit_raw:
            setattr(cfg.fit, key, float(fit_raw[key]))
    cfg.fit.pre = _merge_window(cfg.fit.pre, fit_raw.get("pre", {}))
    cfg.fit.post = _merge_window(cfg.fit.post, fit_raw.get("post", {}))

    uq_raw = raw.get("uq", {})
    for key in ("n_samples", "max_delay_days", "histogram_bins"):
        if key in uq_raw:
            setattr(cfg.uq, key, int(uq_raw[key]))
    for key in ("alpha_rel", "beta_rel", "gamma_inv_rel", "delta_rel", "i0_rel"):
        if key in uq_raw:
            setattr(cfg.uq, key, float(uq_raw[key]))
    if "i0_base" in uq_raw:
        cfg.uq.i0_base = None if uq_raw["i0_base"] is None else float(uq_raw["i0_base"])
    if "quantiles" in uq_raw:
        cfg.uq.quantiles = tuple(float(q) for q in uq_raw["quantiles"])

    gsa_raw = raw.get("gsa", {})
    if "mode" in gsa_raw:
        cfg.gsa.mode = str(gsa_raw["mode"])
    if "samples_csv" in gsa_raw:
        value = gsa_raw["samples_csv"]
        cfg.gsa.samples_csv = None if value is None else str(value)
    for key in ("m_bins", "n_replicates", "replicate_seed_offset"):
        if key in gsa_raw:
            setattr(cfg.gsa, key, int(gsa_raw[key]))

    return cfg.validate()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dt.date):
        return obj.isoformat()
    return obj


def config_digest(cfg: RunConfig) -> str:
    """Short stable hash of the resolved configuration.

    Thread count and output location cannot change any computed value, so
    they are excluded; reruns at different parallelism hash identically.
    """
    def encode(value):
        if hasattr(value, "__dataclass_fields__"):
            return {k: encode(getattr(value, k)) for k in value.__dataclass_fields__}
        return _jsonable(value)

    payload = encode(cfg)
    payload.pop("threads", None)
    payload.pop("out_dir", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
