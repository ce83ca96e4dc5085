"""Command-line pipeline: solve, train, validate, sample, benchmark, report.

Every subcommand validates the full configuration before touching the file
system; outputs are plain CSV/JSON so the plotting scripts and external tools
can consume them without sharing a runtime.  Exit codes: 0 success, 2 for
configuration/input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import autodiff, benchmark, pinn, samplers
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .heatsim import (MaterialSample, back_temperature_batch, solve_explicit,
                      solve_implicit)
from .reliability import PosteriorModel, PriorLogDensity, PriorSampler, make_target

REPORT_SCHEMA_VERSION = 1
PAPER_REFERENCE_RMSE_C = 3.43  # published full-field accuracy, reported not asserted

_NUMERICAL_ERRORS = (
    samplers.SamplerError,
    pinn.TrainingDivergedError,
    autodiff.NonFiniteLossError,
    FloatingPointError,
)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _weights_path(cfg: RunConfig, args) -> Path:
    if args.weights:
        return Path(args.weights)
    return Path(cfg.output_dir) / "weights.txt"


def _load_model(cfg: RunConfig, args) -> pinn.SurrogateModel:
    path = _weights_path(cfg, args)
    if not path.exists():
        raise ConfigError(f"weights file not found: {path}")
    model = pinn.load_weights(path)
    sc, msc = cfg.scenario, model.scenario
    mismatches = [
        name for name in ("Q", "L", "t_final", "T_init", "T_norm")
        if getattr(sc, name) != getattr(msc, name)
    ]
    if mismatches:
        raise ConfigError(
            f"weights were trained for a different scenario (fields differ: {', '.join(mismatches)})"
        )
    return model


def _field_rows(scheme: str, times, x, temps):
    for i, t in enumerate(times):
        for j, xv in enumerate(x):
            yield (xv, t, temps[i, j], scheme)


def cmd_solve(cfg: RunConfig, args) -> int:
    mat = MaterialSample(k=0.65, rho_cp=1509.0 * 1050.0)
    if args.k is not None or args.rho_cp is not None:
        mat = MaterialSample(
            k=args.k if args.k is not None else mat.k,
            rho_cp=args.rho_cp if args.rho_cp is not None else mat.rho_cp,
        )
    fe = solve_explicit(cfg.scenario, mat)
    fi = solve_implicit(cfg.scenario, mat)
    times = fi.times
    fe_sampled = fe.at_times(times)
    out = _out_dir(cfg)
    write_csv(
        out / "field_fdm.csv",
        ["x_m", "t_s", "T_C", "scheme"],
        list(_field_rows("explicit", times, fe.x, fe_sampled))
        + list(_field_rows("implicit", times, fi.x, fi.temps)),
    )
    diff = fe_sampled - fi.temps
    write_csv(
        out / "field_diff.csv",
        ["x_m", "t_s", "dT_C"],
        ((xv, t, diff[i, j]) for i, t in enumerate(times) for j, xv in enumerate(fi.x)),
    )
    print(f"solve: wrote field_fdm.csv and field_diff.csv to {out} "
          f"(max |explicit-implicit| = {np.abs(diff).max():.3f} C)")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    model = pinn.train(cfg.training, cfg.scenario)
    out = _out_dir(cfg)
    weights = _weights_path(cfg, args)
    weights.parent.mkdir(parents=True, exist_ok=True)
    pinn.save_weights(model, weights)
    hist = model.loss_history
    write_csv(
        out / "loss_history.csv",
        ["epoch", "total", "physics", "initial", "boundary"],
        ((e, *hist[e]) for e in range(hist.shape[0])),
    )
    final = hist[-1, 0] if hist.size else float("nan")
    print(f"train: {hist.shape[0]} epochs, final loss {final:.6g}; weights -> {weights}")
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args)
    sc = cfg.scenario
    mat = MaterialSample(k=0.65, rho_cp=1509.0 * 1050.0)
    fe = solve_explicit(sc, mat)
    t_norm = np.linspace(0.0, 1.0, 100)
    x_norm = fe.x / sc.L
    fdm = fe.at_times(t_norm * sc.t_final)
    pred = pinn.predict_field(model, mat, x_norm, t_norm)
    err = pred - fdm
    rmse = float(np.sqrt(np.mean(err**2)))
    worst = np.unravel_index(int(np.argmax(np.abs(err))), err.shape)
    out = _out_dir(cfg)
    write_csv(
        out / "field_pinn.csv",
        ["x_m", "t_s", "T_C"],
        ((xv, t, pred[i, j]) for i, t in enumerate(t_norm * sc.t_final)
         for j, xv in enumerate(fe.x)),
    )
    write_csv(
        out / "field_error.csv",
        ["x_m", "t_s", "abs_error_C"],
        ((xv, t, abs(err[i, j])) for i, t in enumerate(t_norm * sc.t_final)
         for j, xv in enumerate(fe.x)),
    )
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "rmse_C": rmse,
        "max_abs_error_C": float(np.abs(err).max()),
        "max_error_t_norm": float(t_norm[worst[0]]),
        "max_error_x_norm": float(x_norm[worst[1]]),
        "paper_reference_rmse_C": PAPER_REFERENCE_RMSE_C,
        "grid": [len(t_norm), len(x_norm)],
    }
    _write_json(out / "validation.json", payload)
    print(f"validate: RMSE {rmse:.3f} C (reference {PAPER_REFERENCE_RMSE_C} C), "
          f"max {payload['max_abs_error_C']:.3f} C at t'={payload['max_error_t_norm']:.3f}")
    return 0


def _r_tag(r: float) -> str:
    return format(r, "g")


def cmd_sample(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args)
    prior = cfg.prior.to_spec()
    predictor = pinn.SurrogatePredictor(model)
    out = _out_dir(cfg)
    sb = cfg.sampler
    for r in cfg.target.R_levels:
        target = make_target(cfg.target.T_critical, r, cfg.target.sigma_target)
        posterior = PosteriorModel(target=target, prior=prior, predictor=predictor)
        ensemble, diags = samplers.smc_run(
            PriorSampler(prior),
            PriorLogDensity(prior),
            posterior.log_likelihood,
            sb.n_particles,
            ess_threshold_ratio=sb.ess_threshold_ratio,
            mutation_steps=sb.mutation_steps,
            seed=sb.seed,
            workers=sb.workers,
        )
        thetas = ensemble.thetas
        t_pinn = predictor(thetas)
        n = thetas.shape[0]
        n_check = sb.fdm_check_subsample or n
        t_fdm = np.full(n, np.nan)
        check_idx = (np.arange(n) if n_check >= n else
                     np.random.default_rng(sb.seed).choice(n, n_check, replace=False))
        t_fdm[check_idx] = back_temperature_batch(
            cfg.scenario, thetas[check_idx, 0], thetas[check_idx, 1]
        )
        tag = _r_tag(r)
        write_csv(
            out / f"samples_R{tag}.csv",
            ["k", "rho_cp", "alpha", "T_back_pinn", "T_back_fdm", "weight"],
            ((thetas[i, 0], thetas[i, 1], thetas[i, 0] / thetas[i, 1],
              t_pinn[i], t_fdm[i], ensemble.weights[i]) for i in range(n)),
        )
        write_csv(
            out / f"diagnostics_R{tag}.csv",
            ["stage", "phi", "ess", "acceptance_rate", "resampled", "elapsed_s"],
            ((d.stage, d.phi, d.ess, d.acceptance_rate, int(d.resampled), d.elapsed_s)
             for d in diags),
        )
        verified = t_fdm[check_idx]
        frac = float(np.mean(verified <= cfg.target.T_critical))
        print(f"sample R={tag}: {len(diags)} stages, FDM-verified fraction "
              f"{frac:.4f} over {n_check} samples")
    return 0


def cmd_benchmark(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args)
    out = _out_dir(cfg)
    inf_rows = benchmark.bench_inference(cfg.scenario, model, seed=cfg.sampler.seed)
    write_csv(
        out / "bench_inference.csv",
        ["batch", "fdm_time_s", "pinn_time_s"],
        ((r.batch, r.fdm_time_s, r.pinn_time_s) for r in inf_rows),
    )
    prior = cfg.prior.to_spec()
    target = make_target(cfg.target.T_critical, cfg.target.R_levels[0], cfg.target.sigma_target)
    posterior = PosteriorModel(target=target, prior=prior, predictor=pinn.SurrogatePredictor(model))
    smc_rows = benchmark.bench_smc(
        posterior, prior,
        n_particles=cfg.sampler.n_particles,
        ess_threshold_ratio=cfg.sampler.ess_threshold_ratio,
        mutation_steps=cfg.sampler.mutation_steps,
        seed=cfg.sampler.seed,
    )
    write_csv(
        out / "bench_smc.csv",
        ["workers", "time_s"],
        ((r.workers, r.time_s) for r in smc_rows),
    )
    print("benchmark: wrote bench_inference.csv and bench_smc.csv")
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    expected = ["validation.json", "bench_inference.csv", "bench_smc.csv"]
    expected += [f"samples_R{_r_tag(r)}.csv" for r in cfg.target.R_levels]
    missing = [name for name in expected if not (out / name).exists()]
    if missing:
        raise ConfigError(f"missing pipeline outputs in {out}: {', '.join(sorted(missing))}")

    validation = json.loads((out / "validation.json").read_text())

    reliability_section = {}
    for r in cfg.target.R_levels:
        tag = _r_tag(r)
        with open(out / f"samples_R{tag}.csv") as fh:
            rows = list(csv.DictReader(fh))
        t_fdm = np.array([float(row["T_back_fdm"]) for row in rows])
        verified = t_fdm[np.isfinite(t_fdm)]
        reliability_section[tag] = {
            "target": r,
            "n_samples": len(rows),
            "n_fdm_verified": int(verified.size),
            "fdm_verified_fraction": float(np.mean(verified <= cfg.target.T_critical)),
            "mean_T_back_fdm": float(verified.mean()),
        }

    def read_rows(name):
        with open(out / name) as fh:
            return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]

    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "T_critical": cfg.target.T_critical,
        "validation": validation,
        "reliability": reliability_section,
        "benchmark": {
            "inference": read_rows("bench_inference.csv"),
            "smc": read_rows("bench_smc.csv"),
        },
    }
    _write_json(out / "report.json", payload)
    print(f"report: wrote {out / 'report.json'}")
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "train": cmd_train,
    "validate": cmd_validate,
    "sample": cmd_sample,
    "benchmark": cmd_benchmark,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tps-reliab",
        description="Reliability-targeted thermal protection design pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "run both FDM schemes and export the temperature fields"),
        ("train", "train the surrogate and save weights plus loss history"),
        ("validate", "compare the trained surrogate against the FDM field"),
        ("sample", "run tempered SMC for each reliability level"),
        ("benchmark", "time FDM vs batched surrogate and SMC worker scaling"),
        ("report", "merge pipeline outputs into report.json"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (defaults reproduce the reference setup)")
        p.add_argument("--weights", help="weights file path (default: <out>/weights.txt)")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--seed", type=int, help="seed override for training and sampling")
        p.add_argument("--workers", type=int, help="worker-count override for the sampler")
        if name == "solve":
            p.add_argument("--k", type=float, help="material conductivity override")
            p.add_argument("--rho-cp", dest="rho_cp", type=float,
                           help="material thermal density override")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    if args.seed is not None:
        cfg = replace(
            cfg,
            training=replace(cfg.training, seed=args.seed),
            sampler=replace(cfg.sampler, seed=args.seed),
        )
    if args.workers is not None:
        cfg = replace(cfg, sampler=replace(cfg.sampler, workers=args.workers))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        cfg = _apply_overrides(cfg, args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, pinn.WeightsFormatError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
