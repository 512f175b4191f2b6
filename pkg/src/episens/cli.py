"""Command-line front end: fit, forecast, delay-sweep, uq, gsa.

Each command reads one YAML config, writes machine-readable CSV/JSON
artifacts into the output directory, and is byte-reproducible for a
fixed (config, seed) at any thread count. Exit codes: 0 success,
1 input/data error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import calibrate
from .config import RunConfig, VERSION, config_digest, load_config
from .data import ObservedSeries, parse_national_csv, slice_window
from .errors import DataError, EpisensError, NumericalError
from .gsa import (
    build_report,
    pair_sampler,
    replicated_factorial,
)
from .persist import meta_lines, read_sample_csv, write_csv, write_json
from .scenario import TwoRegimeConfig, delay_sweep, simulate_two_regime
from .seir import SeirParams, total_confirmed
from .uq import (
    empirical_stats,
    evaluate_ensemble,
    evaluate_factor_matrix,
    sample_inputs,
    seir_factor_spec,
)

RATE_FIELDS = calibrate.RATE_FIELDS


def _meta(cfg: RunConfig) -> dict:
    return {"generator": f"episens/{VERSION}", "seed": cfg.seed, "config": config_digest(cfg)}


def _load_observations(cfg: RunConfig) -> ObservedSeries:
    if not cfg.data_file:
        raise DataError("config key data_file is required")
    try:
        payload = Path(cfg.data_file).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read data file {cfg.data_file}: {exc}") from exc
    return parse_national_csv(payload)


def _fit_window(cfg: RunConfig, obs: ObservedSeries, which: str) -> calibrate.FitResult:
    window_cfg = getattr(cfg.fit, which)
    start, end = getattr(cfg, f"{which}_window")
    window = slice_window(obs, start, end)
    try:
        guess = SeirParams(**window_cfg.guess, n_pop=cfg.n_pop)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid fit.{which}.guess: {exc}") from exc
    bounds = calibrate.ParamBounds(
        {k: tuple(v) for k, v in window_cfg.bounds.items()}
    )
    i0 = window_cfg.i0 if window_cfg.i0 is not None else float(window.total_confirmed[0])
    return calibrate.fit(
        window,
        guess,
        bounds,
        calibrate.InitPolicy(i0=i0, fit_i0=False),
        n_starts=cfg.fit.n_starts,
        jitter=cfg.fit.jitter,
        seed=cfg.seed,
        step=cfg.step_days,
        ftol=cfg.fit.ftol,
        max_nfev=cfg.fit.max_nfev,
    )


def _params_path(cfg: RunConfig, which: str) -> Path:
    return Path(cfg.out_dir) / f"{which}_params.yaml"


def _write_params(cfg: RunConfig, which: str, result: calibrate.FitResult) -> Path:
    payload = {name: float(getattr(result.params, name)) for name in RATE_FIELDS}
    payload["n_pop"] = float(result.params.n_pop)
    payload["i0"] = float(result.i0)
    lines = meta_lines(_meta(cfg))
    lines.extend(f"{k}: {v!r}" for k, v in payload.items())
    path = _params_path(cfg, which)
    path.write_text("\n".join(lines) + "\n")
    return path


def _read_params(cfg: RunConfig, which: str) -> tuple[SeirParams, float] | None:
    path = _params_path(cfg, which)
    if not path.exists():
        return None
    try:
        raw = yaml.safe_load(path.read_text())
        params = SeirParams(
            **{k: float(raw[k]) for k in RATE_FIELDS}, n_pop=float(raw["n_pop"])
        )
        return params, float(raw["i0"])
    except (yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise DataError(
            f"cannot read fitted parameters from {path}: {exc}; "
            f"delete the file or rerun `episens fit`"
        ) from exc


def _fitted_regimes(cfg: RunConfig, obs: ObservedSeries):
    """Read fitted parameter files, fitting (and writing them) when absent."""
    loaded = {}
    for which in ("pre", "post"):
        cached = _read_params(cfg, which)
        if cached is None:
            result = _fit_window(cfg, obs, which)
            _write_params(cfg, which, result)
            loaded[which] = (result.params, result.i0)
        else:
            loaded[which] = cached
    return loaded["pre"], loaded["post"]


def _base_scenario(cfg: RunConfig, obs: ObservedSeries) -> tuple[TwoRegimeConfig, float]:
    (pre_params, pre_i0), (post_params, _post_i0) = _fitted_regimes(cfg, obs)
    start = cfg.pre_window[0]
    window = slice_window(obs, start, cfg.horizon_date)
    init = calibrate.build_initial_state(window, pre_i0, cfg.n_pop)
    base = TwoRegimeConfig(
        pre=pre_params,
        post=post_params,
        start_day=start,
        issuance_day=cfg.issuance_date,
        delay_days=0,
        horizon_end=cfg.horizon_date,
        init=init,
    )
    return base, pre_i0


def _trajectory_rows(traj, start_day):
    import datetime as dt

    for k in range(len(traj)):
        day = start_day + dt.timedelta(days=int(traj.t[k]))
        yield (
            int(traj.t[k]),
            day.isoformat(),
            traj.s[k],
            traj.p[k],
            traj.e[k],
            traj.i[k],
            traj.q[k],
            traj.r[k],
            traj.d[k],
            traj.q[k] + traj.r[k] + traj.d[k],
        )


_TRAJ_HEADER = ("t", "date", "s", "p", "e", "i", "q", "r", "d", "total_confirmed")


def cmd_fit(cfg: RunConfig) -> int:
    obs = _load_observations(cfg)
    diagnostics = {}
    worst_converged = True
    for which in ("pre", "post"):
        result = _fit_window(cfg, obs, which)
        path = _write_params(cfg, which, result)
        print(f"wrote {path}")
        diagnostics[which] = {
            "params": {name: float(getattr(result.params, name)) for name in RATE_FIELDS},
            "i0": result.i0,
            "r2": result.r2_by_series(),
            "r2_avg": result.r2_avg,
            "r2_total": result.r2_total,
            "rmse_total": result.rmse_total,
            "objective": result.objective,
            "n_evals": result.n_evals,
            "converged": result.converged,
        }
        worst_converged &= result.converged
    path = write_json(Path(cfg.out_dir) / "fit_diagnostics.json", diagnostics, _meta(cfg))
    print(f"wrote {path}")
    if not worst_converged:
        print("fit did not converge; best-so-far parameters were written", file=sys.stderr)
        return 2
    return 0


def cmd_forecast(cfg: RunConfig) -> int:
    obs = _load_observations(cfg)
    base, _ = _base_scenario(cfg, obs)
    traj = simulate_two_regime(
        replace(base, delay_days=cfg.forecast_delay_days), step=cfg.step_days
    )
    path = write_csv(
        Path(cfg.out_dir) / "forecast_trajectory.csv",
        _TRAJ_HEADER,
        _trajectory_rows(traj, base.start_day),
        _meta(cfg),
    )
    print(f"wrote {path}")
    totals = total_confirmed(traj)
    print(f"total confirmed at {cfg.horizon_date}: {totals[-1]:.0f}")
    return 0


def cmd_delay_sweep(cfg: RunConfig) -> int:
    obs = _load_observations(cfg)
    base, _ = _base_scenario(cfg, obs)
    rows = delay_sweep(base, cfg.sweep_delays, obs, step=cfg.step_days)
    path = write_csv(
        Path(cfg.out_dir) / "delay_sweep.csv",
        ("delay", "r2", "rmse"),
        ((r.delay_days, r.r2, r.rmse) for r in rows),
        _meta(cfg),
    )
    print(f"wrote {path}")
    for row in rows:
        traj = simulate_two_regime(replace(base, delay_days=row.delay_days), step=cfg.step_days)
        tpath = write_csv(
            Path(cfg.out_dir) / f"trajectory_delay_{row.delay_days}.csv",
            _TRAJ_HEADER,
            _trajectory_rows(traj, base.start_day),
            _meta(cfg),
        )
        print(f"wrote {tpath}")
    return 0


def _uq_spec(cfg: RunConfig, base: TwoRegimeConfig, pre_i0: float):
    i0_base = cfg.uq.i0_base if cfg.uq.i0_base is not None else pre_i0
    return seir_factor_spec(
        base.post,
        i0_base=i0_base,
        alpha_rel=cfg.uq.alpha_rel,
        beta_rel=cfg.uq.beta_rel,
        gamma_inv_rel=cfg.uq.gamma_inv_rel,
        delta_rel=cfg.uq.delta_rel,
        i0_rel=cfg.uq.i0_rel,
        max_delay_days=cfg.uq.max_delay_days,
    )


def _samples_csv_path(cfg: RunConfig) -> Path:
    if cfg.gsa.samples_csv:
        return Path(cfg.gsa.samples_csv)
    return Path(cfg.out_dir) / "uq_samples.csv"


def cmd_uq(cfg: RunConfig) -> int:
    obs = _load_observations(cfg)
    base, pre_i0 = _base_scenario(cfg, obs)
    spec = _uq_spec(cfg, base, pre_i0)
    samples = sample_inputs(spec, cfg.uq.n_samples, cfg.seed)
    outputs = evaluate_ensemble(samples, base, step=cfg.step_days, threads=cfg.threads)

    rows = (
        (*(samples.matrix[k]), outputs.values[k] if not outputs.failed[k] else "", int(outputs.failed[k]))
        for k in range(samples.n)
    )
    csv_path = write_csv(
        Path(cfg.out_dir) / "uq_samples.csv",
        (*spec.names, "total_confirmed", "failed"),
        rows,
        _meta(cfg),
    )
    print(f"wrote {csv_path}")
    sidecar = {
        "seed": cfg.seed,
        "n_samples": cfg.uq.n_samples,
        "horizon_date": cfg.horizon_date.isoformat(),
        "factors": {
            name: {"kind": f.kind, "low": f.low, "high": f.high}
            for name, f in zip(spec.names, spec.factors)
        },
    }
    meta_path = write_json(Path(cfg.out_dir) / "uq_samples.meta.json", sidecar, _meta(cfg))
    print(f"wrote {meta_path}")

    stats = empirical_stats(
        outputs.valid_values(), cfg.uq.quantiles, bins=cfg.uq.histogram_bins
    )
    stats_payload = {
        "n": stats.n,
        "n_failed": int(outputs.failed.sum()),
        "mean": stats.mean,
        "sd": stats.sd,
        "quantiles": {repr(p): v for p, v in stats.quantiles},
        "degenerate": stats.degenerate,
        "horizon_date": cfg.horizon_date.isoformat(),
    }
    stats_path = write_json(Path(cfg.out_dir) / "uq_stats.json", stats_payload, _meta(cfg))
    print(f"wrote {stats_path}")

    hist_rows = (
        (stats.histogram_edges[k], stats.histogram_edges[k + 1], int(stats.histogram_counts[k]))
        for k in range(len(stats.histogram_counts))
    )
    hist_path = write_csv(
        Path(cfg.out_dir) / "uq_histogram.csv",
        ("bin_left", "bin_right", "count"),
        hist_rows,
        _meta(cfg),
    )
    print(f"wrote {hist_path}")
    print(f"mean={stats.mean:.6g} sd={stats.sd:.6g}")
    return 0


def cmd_gsa(cfg: RunConfig) -> int:
    obs = _load_observations(cfg)
    base, pre_i0 = _base_scenario(cfg, obs)
    spec = _uq_spec(cfg, base, pre_i0)

    names = list(spec.names)
    csv_path = _samples_csv_path(cfg)
    if cfg.gsa.mode in ("given-data", "both") and csv_path.exists():
        names, X, y, failed = read_sample_csv(csv_path)
        keep = ~failed & np.isfinite(y)
        X, y = X[keep], y[keep]
        print(f"loaded {len(y)} samples from {csv_path}")
    elif cfg.gsa.mode == "given-data":
        raise DataError(
            f"given-data mode needs a sample CSV at {csv_path}; run `episens uq` first"
        )
    else:
        samples = sample_inputs(spec, cfg.uq.n_samples, cfg.seed)
        outputs = evaluate_ensemble(samples, base, step=cfg.step_days, threads=cfg.threads)
        keep = ~outputs.failed
        X, y = samples.matrix[keep], outputs.values[keep]

    ensemble = None
    if cfg.gsa.mode in ("finite-change", "both"):
        def batch_g(matrix):
            totals, bad = evaluate_factor_matrix(
                matrix, spec.names, base, step=cfg.step_days, threads=cfg.threads
            )
            if bad.any():
                raise NumericalError(f"{int(bad.sum())} finite-change vertices failed")
            return totals

        ensemble = replicated_factorial(
            None,
            pair_sampler(spec),
            cfg.gsa.n_replicates,
            cfg.seed + cfg.gsa.replicate_seed_offset,
            factor_names=spec.names,
            batch_g=batch_g,
        )

    report = build_report(
        names,
        X,
        y,
        cfg.gsa.m_bins,
        ensemble=ensemble,
        output_variance=float(np.var(y, ddof=1)) if ensemble is not None else None,
    )
    report_path = write_json(Path(cfg.out_dir) / "gsa_report.json", report.to_dict(), _meta(cfg))
    print(f"wrote {report_path}")

    if ensemble is not None:
        from .gsa import interaction_spectrum

        bars = interaction_spectrum(ensemble)
        spectrum_rows = (
            (label, len(subset), value)
            for label, subset, value in zip(bars.labels(), bars.subset_list, bars.mean_abs)
        )
        spath = write_csv(
            Path(cfg.out_dir) / "gsa_spectrum.csv",
            ("factors", "order", "mean_abs_effect"),
            spectrum_rows,
            _meta(cfg),
        )
        print(f"wrote {spath}")

    from .gsa import conditional_regression

    for j, name in enumerate(names):
        curve = conditional_regression(X[:, j], y, cfg.gsa.m_bins, factor_name=name)
        cpath = write_csv(
            Path(cfg.out_dir) / f"gsa_conditional_{name}.csv",
            ("center", "mean", "median", "count"),
            zip(curve.centers, curve.means, curve.medians, curve.counts),
            _meta(cfg),
        )
        print(f"wrote {cpath}")

    top = report.ranks["first_order"][0]
    print(f"top-ranked factor (first order): {top}")
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "delay-sweep": cmd_delay_sweep,
    "uq": cmd_uq,
    "gsa": cmd_gsa,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are input errors (exit 1); 2 is reserved for
        # numerical failures
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="episens",
        description="Generalized SEIR calibration, uncertainty quantification, "
        "and global sensitivity analysis for epidemic case data.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--threads", type=int, default=None, help="override config threads")
    parser.add_argument("--out", default=None, help="override config out_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out_dir = args.out
        cfg.validate()
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (DataError, EpisensError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
