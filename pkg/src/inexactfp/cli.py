"""Command-line interface for the experiment harness and acceptance suite.

Parameters may come from a plain key=value configuration file, command-line
flags, or both; flags win. Exit codes: 0 success, 1 usage error, 2
acceptance failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .acceptance import ALL_CHECKS, run_acceptance
from .experiments import (
    CRITERION_LABELS,
    EXPERIMENT_IDS,
    ExperimentConfig,
    UsageError,
    emit,
    export_field_csvs,
    run_experiment,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_number(token: str) -> float:
    token = token.strip()
    if "/" in token:
        num, den = token.split("/", 1)
        return float(num) / float(den)
    return float(token)


def _parse_list(text: str) -> list[float]:
    return [_parse_number(t) for t in text.split(",") if t.strip()]


_LIST_KEYS = {
    "tau": "taus",
    "dx": "dxs",
    "gammas": "gammas",
    "alphas": "alphas",
    "betas": "betas",
    "eps": "eps_values",
    "ls": "ls_values",
    "lf": "lf_values",
    "outer-tols": "outer_tols",
}
_SCALAR_KEYS = {"tol": ("tol", float), "adaptive-c": ("adaptive_c", float),
                "max-outer": ("max_outer", int)}
_STR_KEYS = {"experiment": "experiment", "criterion": "criterion",
             "inner-guess": "inner_guess", "format": "out_format",
             "out": "out_path", "export-fields": "export_fields"}


def read_config_file(path: str) -> dict:
    """Parse a plain key=value file; keys are the long flag names."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _LIST_KEYS:
            values[_LIST_KEYS[key]] = _parse_list(value)
        elif key in _SCALAR_KEYS:
            field, cast = _SCALAR_KEYS[key]
            values[field] = cast(value)
        elif key in _STR_KEYS:
            values[_STR_KEYS[key]] = value
        else:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def build_parser() -> _Parser:
    p = _Parser(
        prog="inexactfp",
        description="Reproduce the inexact fixed point experiments or run the "
        "acceptance suite.",
    )
    p.add_argument("--config", help="key=value configuration file; flags override it")
    p.add_argument("--experiment", choices=EXPERIMENT_IDS, help="experiment to run")
    p.add_argument("--criterion", choices=CRITERION_LABELS,
                   help="inner termination criterion")
    p.add_argument("--tau", help="comma-separated inner tolerances")
    p.add_argument("--dx", help="comma-separated mesh widths (0.1 or 1/10)")
    p.add_argument("--tol", type=float, help="outer tolerance")
    p.add_argument("--outer-tols", help="outer tolerance sweep (efficiency protocol)")
    p.add_argument("--gammas", help="scalar problem gamma values")
    p.add_argument("--alphas", help="2x2 problem alpha values")
    p.add_argument("--betas", help="2x2 problem beta values")
    p.add_argument("--eps", help="perturbation sizes")
    p.add_argument("--ls", help="outer Lipschitz constants (nested scalar)")
    p.add_argument("--lf", help="inner Lipschitz constants (nested scalar)")
    p.add_argument("--adaptive-c", type=float, help="adaptive schedule prefactor")
    p.add_argument("--inner-guess", choices=("previous", "zero"),
                   help="initial guess policy for the inner solves")
    p.add_argument("--max-outer", type=int, help="outer iteration cap")
    p.add_argument("--format", choices=("csv", "md"), help="output format")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--export-fields", metavar="PREFIX",
                   help="also write exact/discrete field CSV grids (transmission)")
    p.add_argument("--run-acceptance", action="store_true",
                   help="run the acceptance suite instead of an experiment")
    p.add_argument("--criteria", help="comma-separated criterion ids (e.g. A1,A7)")
    p.add_argument("--verbose", action="store_true", help="print per-check details")
    return p


def _merge_config(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    overrides = {
        "experiment": args.experiment,
        "criterion": args.criterion,
        "taus": _parse_list(args.tau) if args.tau else None,
        "dxs": _parse_list(args.dx) if args.dx else None,
        "tol": args.tol,
        "outer_tols": _parse_list(args.outer_tols) if args.outer_tols else None,
        "gammas": _parse_list(args.gammas) if args.gammas else None,
        "alphas": _parse_list(args.alphas) if args.alphas else None,
        "betas": _parse_list(args.betas) if args.betas else None,
        "eps_values": _parse_list(args.eps) if args.eps else None,
        "ls_values": _parse_list(args.ls) if args.ls else None,
        "lf_values": _parse_list(args.lf) if args.lf else None,
        "adaptive_c": args.adaptive_c,
        "inner_guess": args.inner_guess,
        "max_outer": args.max_outer,
        "out_format": args.format,
        "out_path": args.out,
        "export_fields": args.export_fields,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "experiment" not in values or values["experiment"] is None:
        raise UsageError("an experiment id is required (--experiment or config file)")
    defaults = {"adaptive_c": 1e-2, "inner_guess": "previous", "out_format": "csv"}
    for key, fallback in defaults.items():
        values.setdefault(key, fallback)
        if values[key] is None:
            values[key] = fallback
    return ExperimentConfig(**values)


def _run_acceptance_command(args) -> int:
    ids = None
    if args.criteria:
        ids = [c.strip().upper() for c in args.criteria.split(",") if c.strip()]
        unknown = [c for c in ids if c not in ALL_CHECKS]
        if unknown:
            raise UsageError(f"unknown acceptance criteria: {unknown}")
    results, ok = run_acceptance(ids)
    for result in results:
        print(f"{result.criterion:4s} {'PASS' if result.passed else 'FAIL'}  {result.title}")
        if args.verbose or not result.passed:
            for line in result.details:
                print(f"      {line}")
    print(f"acceptance: {sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.run_acceptance:
            return _run_acceptance_command(args)
        cfg = _merge_config(args)
        report = run_experiment(cfg)
        payload = emit(report, cfg.out_format)
        if cfg.out_path:
            Path(cfg.out_path).write_bytes(payload)
        else:
            sys.stdout.write(payload.decode("utf-8"))
        if cfg.export_fields:
            if not cfg.experiment.startswith("transmission"):
                raise UsageError("--export-fields applies to transmission experiments")
            dx = min(cfg.dxs or [0.05])
            for path in export_field_csvs(dx, cfg.export_fields):
                print(f"wrote {path}", file=sys.stderr)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
