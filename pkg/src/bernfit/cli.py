"""Command-line interface.

Subcommands: fit-sofr, fit-fosr, fit-flcm, fit-fofr, fit-qfosr, test-shape,
ci, cv-order, simulate, bench. Results are written as JSON (plus plot-ready
CSV alongside); diagnostics go to stderr. Exit codes: 0 success, 1 data
error, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .basis import BasisSpec, TensorBasisSpec
from .constraints import ShapeSpec, check_shape
from .dataset import read_dataset, write_dataset
from .errors import BernfitError, ConfigError, DataError, NumericalError
from .functional import fit_functional, reconstruct_sparse
from .inference import bootstrap_shape_test, projection_ci, qfosr_projection_ci
from .model_selection import cv_select_order
from .qfosr import fit_qfosr
from .simulation import SCENARIO_KINDS, ScenarioSpec, generate_scenario, run_benchmark
from .sofr import fit_sofr
from .utils import resolve_threads

REPORT_POINTS = 200

_FIT_MODELS = {"fit-sofr": "sofr", "fit-fosr": "fosr", "fit-flcm": "flcm", "fit-fofr": "fofr"}


class RunConfig:
    """Validated view of the JSON configuration object."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        self.raw = raw
        self.model = raw.get("model")
        self.order = raw.get("order")
        self.candidates = raw.get("candidates")
        self.pve = float(raw.get("pve", 0.95))
        self.level = float(raw.get("level", 0.95))
        self.draws = int(raw.get("draws", 500))
        self.bootstrap = int(raw.get("bootstrap", 200))
        self.folds = int(raw.get("folds", 5))
        self.seed = int(raw.get("seed", 0))
        self.whiten = bool(raw.get("whiten", True))
        self.shape = ShapeSpec.from_json(raw["shape"]) if raw.get("shape") else None
        self.extra_shapes = {
            int(k): ShapeSpec.from_json(v) for k, v in raw.get("extra_shapes", {}).items()
        }
        if self.shape is not None:
            if self.shape.bivariate and self.model not in (None, "fofr"):
                raise ConfigError("bivariate shapes apply only to the fofr model")
            if self.shape.kind == "quantile_monotone" and self.model not in (None, "qfosr"):
                raise ConfigError("quantile monotonicity applies only to the qfosr model")
        if not 0.0 < self.pve <= 1.0:
            raise ConfigError("pve must lie in (0, 1]")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")

    def basis(self, default_order: int | None = None) -> BasisSpec:
        order = self.order if self.order is not None else default_order
        if order is None:
            raise ConfigError("config needs an 'order' (or 'candidates' for cv-order)")
        return BasisSpec(int(order))

    def tensor(self) -> TensorBasisSpec:
        if self.order is None:
            raise ConfigError("config needs an 'order' for the tensor basis")
        return TensorBasisSpec(int(self.order), int(self.order))


def _load_config(path: str | None, seed_override: int | None) -> RunConfig:
    raw = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
    config = RunConfig(raw)
    if seed_override is not None:
        config.seed = seed_override
    return config


def _ensure_finite(obj, where="result"):
    if isinstance(obj, dict):
        for key, value in obj.items():
            _ensure_finite(value, f"{where}.{key}")
    elif isinstance(obj, (list, tuple)):
        for i, value in enumerate(obj):
            _ensure_finite(value, f"{where}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise NumericalError(f"non-finite value in output at {where}")


def _write_json(payload: dict, path: Path) -> None:
    _ensure_finite(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(rows: list[dict], path: Path) -> None:
    if not rows:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _report_grid(domain) -> np.ndarray:
    return np.linspace(domain[0], domain[1], REPORT_POINTS)


def _shape_report(coefs, shape, spec) -> dict:
    if shape is None:
        return {"feasible": True, "worst_violation": 0.0, "violated_rows": []}
    report = check_shape(coefs, shape, spec=spec)
    return {
        "feasible": bool(report.feasible),
        "worst_violation": report.worst_violation,
        "violated_rows": report.violated_rows.tolist(),
    }


def _read_cli_dataset(args):
    if not args.data:
        raise ConfigError("this subcommand needs --data")
    return read_dataset(args.data, fmt=args.format, scalars_path=args.scalars)


def _cmd_fit(args, command: str) -> dict:
    config = _load_config(args.config, args.seed)
    model = _FIT_MODELS[command]
    data = _read_cli_dataset(args)
    payload: dict = {"model": model, "seed": config.seed}
    if model == "sofr":
        spec = config.basis()
        if data.x_curves is not None and not np.isfinite(data.x_curves).all():
            data = reconstruct_sparse(data, pve=config.pve)
        fit = fit_sofr(data, spec, config.shape)
        grid = _report_grid(spec.domain)
        payload.update(
            {
                "order": spec.order,
                "alpha": fit.alpha,
                "gamma": fit.gamma.tolist(),
                "beta_coefs": fit.beta_coefs.tolist(),
                "grid": grid.tolist(),
                "beta_values": fit.beta_fn(grid).tolist(),
                "rss": fit.rss,
                "ridge": fit.ridge_used,
                "shape_report": _shape_report(fit.beta_coefs, config.shape, spec),
            }
        )
        band_rows = [
            {"t": t, "estimate": v} for t, v in zip(payload["grid"], payload["beta_values"])
        ]
    elif model == "fofr":
        tensor = config.tensor()
        if data.x_curves is not None and not np.isfinite(data.x_curves).all():
            data = reconstruct_sparse(data, pve=config.pve)
        fit = fit_functional(
            data, "fofr", tensor=tensor, shape=config.shape, pve=config.pve,
            whiten_fit=config.whiten,
        )
        side = np.linspace(tensor.domain_s[0], tensor.domain_s[1], 50)
        surface = fit.beta1_fn(side, s=side)
        payload.update(
            {
                "order": tensor.order,
                "beta0_coefs": fit.beta0_coefs.tolist(),
                "beta1_coefs": fit.beta1_coefs.tolist(),
                "surface_grid": side.tolist(),
                "surface_values": surface.tolist(),
                "rss_raw": fit.rss_raw,
                "rss_whitened": fit.rss_whitened,
                "ridge": fit.ridge_used,
                "shape_report": _shape_report(fit.beta1_coefs, config.shape, tensor),
            }
        )
        band_rows = [
            {"s": s_val, "t": t_val, "estimate": surface[i, j]}
            for i, s_val in enumerate(side)
            for j, t_val in enumerate(side)
        ]
    else:
        spec = config.basis()
        if model == "flcm" and data.x_curves is not None and not np.isfinite(data.x_curves).all():
            data = reconstruct_sparse(data, pve=config.pve)
        fit = fit_functional(
            data, model, spec, shape=config.shape, pve=config.pve, whiten_fit=config.whiten
        )
        grid = _report_grid(spec.domain)
        payload.update(
            {
                "order": spec.order,
                "beta0_coefs": fit.beta0_coefs.tolist(),
                "beta1_coefs": fit.beta1_coefs.tolist(),
                "grid": grid.tolist(),
                "beta0_values": fit.beta0_fn(grid).tolist(),
                "beta1_values": fit.beta1_fn(grid).tolist(),
                "rss_raw": fit.rss_raw,
                "rss_whitened": fit.rss_whitened,
                "ridge": fit.ridge_used,
                "shape_report": _shape_report(fit.beta1_coefs, config.shape, spec),
            }
        )
        band_rows = [
            {"t": t, "beta0": b0, "beta1": b1}
            for t, b0, b1 in zip(payload["grid"], payload["beta0_values"], payload["beta1_values"])
        ]
    return {"payload": payload, "rows": band_rows}


def _cmd_fit_qfosr(args) -> dict:
    config = _load_config(args.config, args.seed)
    data = _read_cli_dataset(args)
    spec = config.basis()
    fit = fit_qfosr(
        data, spec, extra_shapes=config.extra_shapes or None, pve=config.pve,
        whiten_fit=config.whiten,
    )
    grid = _report_grid(spec.domain)
    blocks = {
        name: fit.coefficient_fn(j + 1, grid).tolist()
        for j, name in enumerate(fit.predictor_names)
    }
    payload = {
        "model": "qfosr",
        "order": spec.order,
        "seed": config.seed,
        "coef_blocks": fit.coef_blocks.tolist(),
        "predictors": fit.predictor_names,
        "rescale": [list(r) for r in fit.rescale],
        "grid": grid.tolist(),
        "intercept_values": fit.coefficient_fn(0, grid).tolist(),
        "effect_values": blocks,
        "rss_raw": fit.rss_raw,
        "rss_whitened": fit.rss_whitened,
        "ridge": fit.ridge_used,
        "monotone_certificate": _shape_report(
            fit.coef_blocks.ravel(),
            ShapeSpec("quantile_monotone", n_predictors=fit.n_predictors),
            spec,
        ),
    }
    rows = [{"p": p, "intercept": v} for p, v in zip(payload["grid"], payload["intercept_values"])]
    for name, values in blocks.items():
        for row, v in zip(rows, values):
            row[name] = v
    return {"payload": payload, "rows": rows}


def _cmd_test_shape(args) -> dict:
    config = _load_config(args.config, args.seed)
    if config.model is None or config.shape is None:
        raise ConfigError("test-shape needs 'model' and 'shape' in the config")
    data = _read_cli_dataset(args)
    tensor = config.tensor() if config.model == "fofr" else None
    spec = None if config.model == "fofr" else config.basis()
    report = bootstrap_shape_test(
        data,
        config.model,
        spec,
        config.shape,
        draws=config.bootstrap,
        seed=config.seed,
        tensor=tensor,
    )
    payload = {"model": config.model, **report.to_json()}
    rows = [{"draw": i, "statistic": s} for i, s in enumerate(report.bootstrap_stats)]
    return {"payload": payload, "rows": rows}


def _cmd_ci(args) -> dict:
    config = _load_config(args.config, args.seed)
    if config.model is None:
        raise ConfigError("ci needs 'model' in the config")
    data = _read_cli_dataset(args)
    spec = config.basis()
    if config.model == "qfosr":
        band = qfosr_projection_ci(
            data,
            spec,
            block=int(config.raw.get("block", 0)),
            level=config.level,
            draws=config.draws,
            seed=config.seed,
            extra_shapes=config.extra_shapes or None,
            eval_grid=_report_grid(spec.domain),
            pve=config.pve,
            whiten_fit=config.whiten,
        )
    else:
        band = projection_ci(
            data,
            config.model,
            spec,
            config.shape,
            level=config.level,
            draws=config.draws,
            seed=config.seed,
            eval_grid=_report_grid(spec.domain),
            pve=config.pve,
            whiten_fit=config.whiten,
        )
    payload = {"model": config.model, "order": spec.order, **band.to_json()}
    rows = [
        {"t": t, "lower": lo, "upper": hi}
        for t, lo, hi in zip(band.grid, band.lower, band.upper)
    ]
    return {"payload": payload, "rows": rows}


def _cmd_cv_order(args) -> dict:
    config = _load_config(args.config, args.seed)
    if config.model is None:
        raise ConfigError("cv-order needs 'model' in the config")
    data = _read_cli_dataset(args)
    result = cv_select_order(
        data,
        config.model,
        config.shape,
        candidates=config.candidates,
        folds=config.folds,
        seed=config.seed,
    )
    payload = {"model": config.model, **result.to_json()}
    rows = [{"order": k, "score": v} for k, v in sorted(result.scores.items())]
    return {"payload": payload, "rows": rows}


def _cmd_simulate(args) -> dict:
    spec = ScenarioSpec(args.scenario, n=args.n, seed=args.seed if args.seed is not None else 0)
    data = generate_scenario(spec, args.rep)
    out = Path(args.out or f"scenario_{args.scenario}.csv")
    fmt = "wide_csv" if spec.model == "sofr" else "long_csv"
    write_dataset(data, out, fmt=fmt)
    grid = _report_grid((0.0, 1.0))
    payload = {
        "scenario": spec.kind,
        "model": spec.model,
        "n": spec.n,
        "replication": args.rep,
        "seed": spec.seed,
        "data_file": str(out),
        "format": fmt,
        "grid": grid.tolist(),
        "beta_true": np.asarray(data.meta["beta_true"](grid), dtype=float).tolist(),
        "shape": data.meta["shape"].to_json(),
        "default_order": data.meta["default_order"],
    }
    return {"payload": payload, "rows": [], "json_path": Path(str(out) + ".meta.json")}


def _cmd_bench(args) -> dict:
    shape = ShapeSpec.from_json(json.loads(args.test_shape)) if args.test_shape else None
    spec = ScenarioSpec(
        args.scenario,
        n=args.n,
        seed=args.seed if args.seed is not None else 0,
        replications=args.reps,
    )
    table = run_benchmark(
        spec,
        mode=args.mode,
        order=args.order,
        ci_draws=args.ci_draws,
        bootstrap_draws=args.bootstrap_draws,
        test_shape=shape,
        threads=resolve_threads(args.threads),
    )
    return {
        "payload": table.summary(),
        "rows": [table.summary_row()],
        "extra_rows": table.rows(),
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bernfit",
        description="Shape-constrained functional regression with Bernstein bases",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_data=True):
        if with_data:
            p.add_argument("--data", help="input dataset file")
            p.add_argument("--format", default="wide_csv", choices=["wide_csv", "long_csv"])
            p.add_argument("--scalars", help="companion scalar CSV for long format")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output JSON path")
        p.add_argument("--threads", type=int, default=None)

    for name in (*_FIT_MODELS, "fit-qfosr", "test-shape", "ci", "cv-order"):
        p = sub.add_parser(name)
        add_common(p)

    p = sub.add_parser("simulate")
    p.add_argument("--scenario", required=True, choices=SCENARIO_KINDS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="dataset output path")
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("bench")
    p.add_argument("--scenario", required=True, choices=SCENARIO_KINDS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--mode", default="imse", choices=["imse", "coverage", "test"])
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--ci-draws", type=int, default=300)
    p.add_argument("--bootstrap-draws", type=int, default=200)
    p.add_argument("--test-shape", help="JSON shape for test mode")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output JSON path")
    p.add_argument("--threads", type=int, default=None)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _FIT_MODELS:
            result = _cmd_fit(args, args.command)
        elif args.command == "fit-qfosr":
            result = _cmd_fit_qfosr(args)
        elif args.command == "test-shape":
            result = _cmd_test_shape(args)
        elif args.command == "ci":
            result = _cmd_ci(args)
        elif args.command == "cv-order":
            result = _cmd_cv_order(args)
        elif args.command == "simulate":
            result = _cmd_simulate(args)
        else:
            result = _cmd_bench(args)
        json_path = result.get("json_path")
        if json_path is None:
            json_path = Path(args.out) if args.out else Path(f"{args.command.replace('-', '_')}.json")
        _write_json(result["payload"], Path(json_path))
        if result["rows"]:
            _write_csv(result["rows"], Path(json_path).with_suffix(".csv"))
        if result.get("extra_rows"):
            _write_csv(result["extra_rows"], Path(json_path).with_suffix(".reps.csv"))
        print(str(json_path))
        return 0
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BernfitError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
