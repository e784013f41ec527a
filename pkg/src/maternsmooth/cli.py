"""Command-line front end for the identity suites and experiments.

Subcommands mirror the experiment engines: ``verify-identities``,
``variance-decay``, ``non-undersmoothing``, ``logdet-growth``,
``convergence``, and ``gaussian-scale-probe``.  Configuration comes from
an optional flat ``key=value`` file plus command-line overrides; every
run is deterministic given its configuration, seeds included.

Exit codes: 0 on success, 1 when an asserted experiment fails its
criterion, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from .errors import DomainError, MaternSmoothError
from .estimators import EstimatorConfig
from .experiments import (
    ExperimentConfig,
    run_convergence,
    run_gaussian_scale_probe,
    run_identity_suite,
    run_logdet_growth,
    run_non_undersmoothing,
    run_variance_decay,
)

__all__ = ["main", "parse_config_file", "write_csv"]

_ESTIMATOR_KEYS = {"nu_min", "nu_max", "coarse_grid", "refine_tol", "objective",
                   "profile_sigma"}
_LIST_KEYS = {"schedule", "seeds", "nu_grid", "nu_model"}


def _parse_scalar(text):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_value(key, text):
    if key in _LIST_KEYS:
        items = [t for t in text.split(",") if t.strip()]
        return tuple(_parse_scalar(t) for t in items)
    return _parse_scalar(text)


def parse_config_file(path):
    """Read a flat ``key=value`` configuration file.

    Blank lines and ``#`` comments are ignored; list-valued keys use
    comma separation.
    """
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, text = line.split("=", 1)
            key = key.strip().replace("-", "_")
            values[key] = _parse_value(key, text)
    return values


def _format_cell(value):
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    """Write rows with a fixed header; floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _build_config(args):
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    overrides = {
        "d": args.d,
        "nu0": args.nu0,
        "schedule": args.schedule,
        "seeds": args.seed_list,
        "threads": args.threads,
        "output_path": args.out,
        "f0": args.f0,
        "nu_grid": args.nu_grid,
        "nu_model": args.nu_model,
        "sigma": args.sigma,
        "lambda_": getattr(args, "lambda_"),
        "design": args.design,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value

    est_values = {k: values.pop(k) for k in list(values) if k in _ESTIMATOR_KEYS}
    if "lambda" in values:
        values["lambda_"] = values.pop("lambda")
    estimator = EstimatorConfig(**est_values) if est_values else EstimatorConfig()
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    unknown = set(values) - known
    if unknown:
        raise DomainError(f"unknown configuration keys: {sorted(unknown)}")
    config = ExperimentConfig(estimator=estimator, **values)
    if config.lambda_ != estimator.lambda_ or config.sigma != estimator.sigma:
        config = replace(config,
                         estimator=replace(estimator, lambda_=config.lambda_,
                                           sigma=config.sigma))
    return config


def _emit(result, config, args):
    out = args.out or config.output_path
    if out:
        write_csv(out, result.header, result.rows)
        print(f"wrote {len(result.rows)} rows to {out}")
    print(result.summary)


def cmd_verify_identities(config, args):
    """Exit nonzero iff any identity residual exceeds the tolerance."""
    result = run_identity_suite()
    _emit(result, config, args)
    return 0 if result.ok else 1


def cmd_variance_decay(config, args):
    result = run_variance_decay(config)
    _emit(result, config, args)
    return 0


def cmd_non_undersmoothing(config, args):
    result = run_non_undersmoothing(config)
    _emit(result, config, args)
    if args.check and result.ok is not None:
        return 0 if result.ok else 1
    return 0


def cmd_logdet_growth(config, args):
    result = run_logdet_growth(config)
    _emit(result, config, args)
    return 0


def cmd_convergence(config, args):
    result = run_convergence(config)
    _emit(result, config, args)
    return 0


def cmd_gaussian_scale_probe(config, args):
    result = run_gaussian_scale_probe(config)
    _emit(result, config, args)
    return 0


_COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "variance-decay": cmd_variance_decay,
    "non-undersmoothing": cmd_non_undersmoothing,
    "logdet-growth": cmd_logdet_growth,
    "convergence": cmd_convergence,
    "gaussian-scale-probe": cmd_gaussian_scale_probe,
}


def _int_list(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _float_list(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="maternsmooth",
        description="Identity suites and smoothness-estimation experiments "
                    "for Matern Gaussian process regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed-list", type=_int_list, default=None,
                       help="comma-separated seeds")
        p.add_argument("--d", type=int, choices=(1, 2), default=None)
        p.add_argument("--nu0", type=float, default=None)
        p.add_argument("--schedule", type=_int_list, default=None,
                       help="comma-separated prefix sizes")
        p.add_argument("--f0", default=None, help="catalog test-function label")
        p.add_argument("--nu-grid", dest="nu_grid", type=_float_list, default=None)
        p.add_argument("--nu-model", dest="nu_model", type=_float_list, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--lambda", dest="lambda_", type=float, default=None)
        p.add_argument("--design", choices=("van_der_corput", "uniform_grid"),
                       default=None)
        p.add_argument("--check", action="store_true",
                       help="exit 1 when the experiment's built-in criterion fails")
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        config = _build_config(args)
        config = replace(config, experiment=args.command)
    except (MaternSmoothError, TypeError, OSError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](config, args)
    except MaternSmoothError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
