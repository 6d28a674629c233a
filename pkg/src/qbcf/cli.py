"""Batch command-line front end.

Subcommands::

    qbcf simulate  --config cfg.json --out DIR [--seed N] [--threads N]
    qbcf fit       --config cfg.json --out DIR [--seed N] [--threads N]
    qbcf bootstrap --config cfg.json --out DIR [--seed N] [--threads N]
    qbcf coverage  --config cfg.json --out DIR [--seed N] [--threads N]

Every command reads a single JSON configuration document (unknown keys are
rejected), fills in defaults, writes the fully-resolved configuration next
to its outputs, and emits CSV/JSON artifacts whose bytes depend only on the
resolved configuration -- never on --threads or wall-clock state.  Exit
codes: 0 success, 2 configuration/schema errors, 3 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bootstrap import (
    BootstrapConfig,
    percentile_interval,
    percentile_t_interval,
    run_bootstrap,
)
from .datasets import MnpDataset
from .errors import (
    DegenerateFirstStage,
    ExcessiveFailures,
    InsufficientReplications,
    NotPositiveDefinite,
    ZeroStandardError,
)
from .first_stage import fit_control_functions
from .mnp_gibbs import GibbsConfig, PriorSpec, run_gibbs, summarize
from .rng import RandomStream
from .serialize import (
    SchemaError,
    dataset_to_csv,
    dumps_json,
    fmt_float,
    parse_dataset_csv,
    write_csv,
)
from .simulation import METHODS, DgpSpec, generate_dataset, run_coverage_experiment

_NUMERICAL_ERRORS = (
    DegenerateFirstStage,
    ExcessiveFailures,
    InsufficientReplications,
    NotPositiveDefinite,
    ZeroStandardError,
    np.linalg.LinAlgError,
)

_GIBBS_DEFAULTS = {"burn_in": 2000, "keep": 2000, "thin": 1}
_PRIOR_DEFAULTS = {"mu_beta": None, "v_beta": None, "wishart_dof": None, "wishart_scale": None}
_FIRST_STAGE_DEFAULTS = {"n_grid": 25, "span": [0.05, 5.0]}

_SCHEMAS = {
    "simulate": {
        "design": None,
        "J": 2,
        "n": None,
        "seed": None,
        "beta_tilde": 1.0,
        "lambda": 0.6,
        "sigma2": 0.75,
        "name": "dataset",
    },
    "fit": {
        "dataset": None,
        "seed": None,
        "levels": [0.90, 0.95, 0.99],
        "gibbs": dict(_GIBBS_DEFAULTS),
        "prior": dict(_PRIOR_DEFAULTS),
        "first_stage": dict(_FIRST_STAGE_DEFAULTS),
    },
    "bootstrap": {
        "dataset": None,
        "seed": None,
        "levels": [0.90, 0.95, 0.99],
        "gibbs": {"burn_in": 1000, "keep": 1000, "thin": 1},
        "prior": dict(_PRIOR_DEFAULTS),
        "first_stage": dict(_FIRST_STAGE_DEFAULTS),
        "bootstrap": {"B": 100, "S": 1000, "variant": "qbb", "include_qbb1": False},
    },
    "coverage": {
        "design": None,
        "J": 2,
        "n": 500,
        "reps": 200,
        "seed": None,
        "beta_tilde": 1.0,
        "lambda": 0.6,
        "sigma2": 0.75,
        "levels": [0.90, 0.95, 0.99],
        "methods": list(METHODS),
        "bootstrap": {"B": 100, "S": 1000},
        "gibbs": {"burn_in": 1000},
        "use_true_residuals": False,
    },
}

_REQUIRED = {
    "simulate": ("design", "n", "seed"),
    "fit": ("dataset", "seed"),
    "bootstrap": ("dataset", "seed"),
    "coverage": ("design", "seed"),
}


def _resolve(command, raw, seed_override=None):
    schema = _SCHEMAS[command]
    unknown = set(raw) - set(schema)
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for key, default in schema.items():
        value = raw.get(key, default)
        if isinstance(default, dict):
            value = dict(value) if value is not None else {}
            bad = set(value) - set(default)
            if bad:
                raise SchemaError(f"unknown config keys in {key!r}: {sorted(bad)}")
            value = {k: value.get(k, d) for k, d in default.items()}
        resolved[key] = value
    if seed_override is not None:
        resolved["seed"] = int(seed_override)
    missing = [k for k in _REQUIRED[command] if resolved.get(k) is None]
    if missing:
        raise SchemaError(f"missing required config keys: {missing}")
    return resolved


def _prior_from_config(cfg, n_alternatives, n_coefficients):
    mu = cfg["mu_beta"]
    vb = cfg["v_beta"]
    dof = cfg["wishart_dof"]
    scale = cfg["wishart_scale"]
    mu = np.zeros(n_coefficients) if mu is None else np.asarray(mu, dtype=float)
    if vb is not None:
        vb = np.asarray(vb, dtype=float)
        if vb.ndim == 0:
            vb = float(vb) * np.eye(n_coefficients)
    dof = float(n_alternatives + 1) if dof is None else float(dof)
    scale = np.eye(n_alternatives) if scale is None else np.asarray(scale, dtype=float)
    return PriorSpec(mu_beta=mu, v_beta=vb, wishart_dof=dof, wishart_scale=scale)


def _interval_dict(names, pairs):
    return {name: [lo, hi] for name, (lo, hi) in zip(names, pairs)}


def cmd_simulate(cfg, out_dir):
    spec = DgpSpec(
        design=cfg["design"], J=int(cfg["J"]), n=int(cfg["n"]),
        beta_tilde=cfg["beta_tilde"], lam=cfg["lambda"], sigma2=cfg["sigma2"],
    )
    dataset, truth = generate_dataset(spec, RandomStream(cfg["seed"]))
    name = cfg["name"]
    dataset_to_csv(out_dir / f"{name}.csv", dataset)
    sidecar = {
        "design": spec.design,
        "J": spec.J,
        "n": spec.n,
        "seed": cfg["seed"],
        "beta_tilde": truth["beta_tilde"],
        "lambda": truth["lambda"],
        "sigma": truth["sigma"],
    }
    (out_dir / f"{name}_truth.json").write_text(dumps_json(sidecar), encoding="utf-8")


def _fit_pipeline(cfg, rng):
    dataset = parse_dataset_csv(cfg["dataset"])
    fs_cfg = cfg["first_stage"]
    fit = fit_control_functions(
        dataset.first_stage_data(), n_grid=int(fs_cfg["n_grid"]), span=fs_cfg["span"]
    )
    control = dataset.control_functions(fit.residuals)
    mnp = MnpDataset.from_control_functions(dataset.choices, dataset.x_diff, control)
    prior = _prior_from_config(cfg["prior"], mnp.n_alternatives, mnp.n_coefficients)
    g = cfg["gibbs"]
    gibbs_cfg = GibbsConfig(
        rng=rng, burn_in=int(g["burn_in"]), keep=int(g["keep"]), thin=int(g["thin"])
    )
    draws = run_gibbs(mnp, prior, gibbs_cfg)
    summary = summarize(draws, levels=tuple(cfg["levels"]))
    return dataset, fit, mnp, prior, draws, summary


def _summary_json(fit, draws, summary, levels):
    names = summary.param_names
    return {
        "theta_mean": dict(zip(names, summary.mean)),
        "theta_cov": summary.cov,
        "posterior_sd": dict(zip(names, summary.sd)),
        "mc_error": dict(zip(names, summary.mc_error)),
        "credible_intervals": {
            str(level): _interval_dict(names, summary.intervals[level]) for level in levels
        },
        "first_stage": {"bandwidths": fit.bandwidths, "cv_scores": fit.cv_scores},
        "keep": draws.keep,
    }


def cmd_fit(cfg, out_dir):
    base = RandomStream(cfg["seed"])
    _, fit, _, _, draws, summary = _fit_pipeline(cfg, base.substream(0))
    (out_dir / "posterior_summary.json").write_text(
        dumps_json(_summary_json(fit, draws, summary, cfg["levels"])), encoding="utf-8"
    )
    write_csv(
        out_dir / "draws.csv",
        summary.param_names,
        ([fmt_float(v) for v in row] for row in draws.draws),
    )


def cmd_bootstrap(cfg, out_dir, threads):
    base = RandomStream(cfg["seed"])
    dataset, fit, mnp, prior, draws, summary = _fit_pipeline(cfg, base.substream(0))
    b_cfg = cfg["bootstrap"]
    fs_cfg = cfg["first_stage"]
    g = cfg["gibbs"]
    config = BootstrapConfig(
        B=int(b_cfg["B"]),
        S=int(b_cfg["S"]),
        rng=base,
        variant=b_cfg["variant"],
        prior=prior,
        burn_in=int(g["burn_in"]),
        thin=int(g["thin"]),
        n_grid=int(fs_cfg["n_grid"]),
        span=tuple(fs_cfg["span"]),
    )
    run = run_bootstrap(dataset, config, threads=threads)

    names = run.param_names
    header = ["b", "seed", "status"]
    header += [f"theta_{n}" for n in names]
    header += [f"se_{n}" for n in names]
    header += [f"draw1_{n}" for n in names]
    fail_msgs = dict(run.failures)

    def rows():
        for b in range(1, config.B + 1):
            i = b - 1
            if run.ok[i]:
                status = "ok"
                cells = [fmt_float(v) for v in run.theta_star[i]]
                cells += [fmt_float(v) for v in run.se_star[i]]
                cells += [fmt_float(v) for v in run.first_draw[i]]
            else:
                status = "failed: " + fail_msgs[b]
                cells = [""] * (3 * len(names))
            yield [str(b), str(b), status.replace(",", ";")] + cells

    write_csv(out_dir / "bootstrap_run.csv", header, rows())

    levels = cfg["levels"]
    report = {
        "center": dict(zip(names, summary.mean)),
        "posterior_sd": dict(zip(names, summary.sd)),
        "n_success": run.n_success,
        "n_replications": config.B,
        "percentile": {},
        "percentile_t": {},
    }
    qbb1 = run.as_qbb1() if (run.variant == "qbb" and b_cfg["include_qbb1"]) else None
    if qbb1 is not None:
        report["qbb1_percentile"] = {}
    for level in levels:
        alpha = 1.0 - level
        key = str(level)
        report["percentile"][key] = _interval_dict(
            names, [percentile_interval(run, j, alpha) for j in range(len(names))]
        )
        if run.variant == "qbb":
            report["percentile_t"][key] = _interval_dict(
                names, [percentile_t_interval(run, summary, j, alpha) for j in range(len(names))]
            )
        if qbb1 is not None:
            report["qbb1_percentile"][key] = _interval_dict(
                names, [percentile_interval(qbb1, j, alpha) for j in range(len(names))]
            )
    if run.variant == "qbb1":
        del report["percentile_t"]
    (out_dir / "intervals.json").write_text(dumps_json(report), encoding="utf-8")


def cmd_coverage(cfg, out_dir, threads):
    spec = DgpSpec(
        design=cfg["design"], J=int(cfg["J"]), n=int(cfg["n"]),
        beta_tilde=cfg["beta_tilde"], lam=cfg["lambda"], sigma2=cfg["sigma2"],
    )
    report = run_coverage_experiment(
        spec,
        reps=int(cfg["reps"]),
        rng=RandomStream(cfg["seed"]),
        levels=tuple(cfg["levels"]),
        methods=tuple(cfg["methods"]),
        B=int(cfg["bootstrap"]["B"]),
        S=int(cfg["bootstrap"]["S"]),
        burn_in=int(cfg["gibbs"]["burn_in"]),
        use_true_residuals=bool(cfg["use_true_residuals"]),
        threads=threads,
    )
    header = ["method", "level", "coverage", "avg_length", "reps"]
    rows = (
        [r["method"], fmt_float(r["level"]), fmt_float(r["coverage"]),
         fmt_float(r["avg_length"]), str(r["reps"])]
        for r in report.to_long_rows()
    )
    write_csv(out_dir / "coverage.csv", header, rows)
    (out_dir / "coverage_table.txt").write_text(report.format_table() + "\n", encoding="utf-8")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qbcf",
        description="Two-stage quasi-Bayesian estimation for endogenous multinomial probit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "bootstrap", "coverage"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=os.cpu_count(), help="worker bound")
    args = parser.parse_args(argv)

    try:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise SchemaError("config must be a JSON object")
        cfg = _resolve(args.command, raw, seed_override=args.seed)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "resolved_config.json").write_text(dumps_json(cfg), encoding="utf-8")
        if args.command == "simulate":
            cmd_simulate(cfg, out_dir)
        elif args.command == "fit":
            cmd_fit(cfg, out_dir)
        elif args.command == "bootstrap":
            cmd_bootstrap(cfg, out_dir, threads=args.threads)
        else:
            cmd_coverage(cfg, out_dir, threads=args.threads)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
