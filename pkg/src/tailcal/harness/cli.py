"""Command line interface.

Exit codes: 0 success, 1 diagnostic-degenerate (outputs may be partial),
2 usage, file or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..diagnostics import thresholds_from_quantiles
from ..dists import Ensemble
from ..errors import DatasetError, DomainError, ParameterError, SpecParseError, TailcalError
from ..inference import binomial_occurrence_test, severity_ks_test
from ..scoring import EMOS_FAMILIES, EmosModel, emos_fit, ensemble_statistics
from ..simlab import SCENARIOS, ScenarioSpec, generate, marginal_description
from .io import read_dataset, write_ensemble_csv, write_jsonl
from .pipeline import RunConfig, run_diagnose, write_manifest
from .repro import FIGURES, run_figure

USAGE_ERRORS = (FileNotFoundError, IsADirectoryError, DatasetError, SpecParseError, DomainError, ParameterError)


class UsageError(Exception):
    """Bad command line input detected after argument parsing."""


def _floats(text: str) -> tuple[float, ...]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    try:
        return tuple(float(s) for s in items)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _command_text(argv: Sequence[str]) -> str:
    return " ".join(["tailcal", *argv])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailcal", description="Tail calibration diagnostics for forecasts.")
    parser.add_argument("--version", action="version", version=f"tailcal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic forecast-observation datasets",
                       description="Write one dataset per forecaster of a scenario.  Scenario parameters are "
                                   "given as extra flags, e.g. --gamma 0.25 --nu 1.4.")
    p.add_argument("scenario", choices=sorted(SCENARIOS))
    p.add_argument("--n", type=int, default=1000, help="number of pairs (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="dataset format; csv only for ensemble forecasts (default jsonl)")

    p = sub.add_parser("diagnose", help="tail calibration tables and plots for a dataset")
    p.add_argument("dataset")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--thresholds", type=_floats,
                   help="raw thresholds, comma separated; -inf allowed (write --thresholds=-inf,2)")
    g.add_argument("--threshold-quantiles", type=_floats,
                   help="thresholds as empirical quantile levels of y, e.g. 0.9,0.99,0.995")
    p.add_argument("--standard", action="store_true", help="also show t = -inf (ordinary PITs)")
    p.add_argument("--u-grid", type=int, default=101, help="number of u grid points in [0, 1] (default 101)")
    p.add_argument("--ci-level", type=float, default=None, help="delta-method band level, e.g. 0.95")
    p.add_argument("--bins-covariate", default=None, help="covariate for equal-count bins")
    p.add_argument("--n-bins", type=int, default=3, help="number of bins (default 3)")
    p.add_argument("--marginal-tail", action="store_true", help="also write the marginal tail curve")
    p.add_argument("--grid-size", type=int, default=50,
                   help="thresholds in the ratio-versus-threshold panels (default 50)")
    p.add_argument("--tests", type=lambda s: tuple(x.strip() for x in s.split(",") if x.strip()), default=(),
                   help="formal tests per threshold: ks, binomial or ks,binomial")
    p.add_argument("--seed", type=int, default=0, help="seed of the PIT randomizer for atomic forecasts")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("test", help="KS test of excess PITs or binomial occurrence test")
    p.add_argument("dataset")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--threshold", type=float)
    g.add_argument("--threshold-quantile", type=float)
    p.add_argument("--kind", choices=("ks", "binomial"), required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the PIT randomizer for atomic forecasts")
    p.add_argument("--out", default=None, help="optional directory for report.json and a manifest")

    p = sub.add_parser("emos", help="fit or apply ensemble model output statistics")
    esub = p.add_subparsers(dest="emos_command", required=True)
    q = esub.add_parser("fit", help="fit EMOS by mean CRPS minimization")
    q.add_argument("dataset", help="dataset with ensemble forecasts")
    q.add_argument("--family", choices=EMOS_FAMILIES, default="censored_logistic")
    q.add_argument("--budget", type=int, default=2000, help="objective evaluations (default 2000)")
    q.add_argument("--init", type=_floats, default=None, help="starting a,b,c,d[,shape]")
    q.add_argument("--censor-point", type=float, default=0.0)
    q.add_argument("--out", required=True, help="model JSON file")
    q = esub.add_parser("predict", help="turn ensembles into EMOS forecasts")
    q.add_argument("model", help="model JSON file")
    q.add_argument("dataset", help="dataset with ensemble forecasts")
    q.add_argument("--out", required=True, help="output JSON-lines dataset")

    p = sub.add_parser("repro", help="regenerate a figure's data and panels")
    p.add_argument("figure", choices=sorted(FIGURES) + ["list"])
    p.add_argument("--n", type=int, default=None, help="sample size (default: the figure's own)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory (required unless listing)")
    return parser


def _scenario_params(extra: Sequence[str]) -> dict[str, float]:
    params: dict[str, float] = {}
    items = list(extra)
    while items:
        flag = items.pop(0)
        if not flag.startswith("--"):
            raise UsageError(f"unexpected argument {flag!r}")
        name, _, value = flag[2:].partition("=")
        if not value:
            if not items:
                raise UsageError(f"missing value for {flag}")
            value = items.pop(0)
        try:
            params[name.replace("-", "_")] = float(value)
        except ValueError:
            raise UsageError(f"{flag} needs a number, got {value!r}") from None
    return params


def cmd_simulate(args, extra, argv) -> int:
    spec = ScenarioSpec(args.scenario, args.n, args.seed, _scenario_params(extra))
    streams = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, pairs in streams.items():
        if args.format == "csv":
            if not isinstance(pairs.forecast, Ensemble):
                continue
            fname = f"{name}.csv"
            write_ensemble_csv(out / fname, pairs)
        else:
            fname = f"{name}.jsonl"
            write_jsonl(out / fname, pairs)
        files.append(fname)
    if not files:
        raise UsageError(f"scenario {args.scenario!r} has no ensemble forecasters to write as CSV")
    law = marginal_description(spec)
    write_manifest(out / "manifest.json", _command_text(argv), {
        "scenario": spec.name, "n": spec.n, "params": spec.resolved_params(), "format": args.format,
    }, spec.seed, outputs=files, extra={"marginal_law": law})
    print(f"marginal law of y: {law}")
    for f in files:
        print(out / f)
    return 0


def cmd_diagnose(args, argv) -> int:
    config = RunConfig(
        thresholds=args.thresholds or (), quantile_levels=args.threshold_quantiles or (),
        standard=args.standard, u_grid_size=args.u_grid, ci_level=args.ci_level,
        bins_covariate=args.bins_covariate, n_bins=args.n_bins, marginal_tail=args.marginal_tail,
        grid_size=args.grid_size, tests=args.tests, seed=args.seed,
    )
    pairs = read_dataset(args.dataset)
    out = Path(args.out)
    result = run_diagnose(pairs, config, out)
    thresholds = [{"label": c.label, "t": c.t if math.isfinite(c.t) else "-inf",
                   "level": None if math.isnan(c.level) else c.level} for c in result.thresholds]
    write_manifest(out / "manifest.json", _command_text(argv), config.to_dict(), config.seed,
                   inputs=[args.dataset], outputs=result.files,
                   extra={"thresholds": thresholds, "warnings": result.warnings})
    for c in result.thresholds:
        print(f"threshold {c.label}: t = {c.t!r}")
    for w in result.warnings:
        print(f"tailcal: warning: {w}", file=sys.stderr)
    return 1 if result.degenerate else 0


def cmd_test(args, argv) -> int:
    pairs = read_dataset(args.dataset)
    if pairs.randomizer is None and not pairs.forecast.continuous:
        pairs = pairs.with_randomizer(np.random.default_rng(args.seed))
    if args.threshold_quantile is not None:
        t = float(thresholds_from_quantiles(pairs.y, [args.threshold_quantile])[0])
    else:
        t = args.threshold
    report = severity_ks_test(pairs, t) if args.kind == "ks" else binomial_occurrence_test(pairs, t)
    record = json.loads(report.to_json())
    record.update({"kind": args.kind, "threshold": t})
    text = json.dumps(record)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text + "\n", encoding="utf-8")
        write_manifest(out / "manifest.json", _command_text(argv),
                       {"kind": args.kind, "threshold": t, "threshold_quantile": args.threshold_quantile},
                       args.seed, inputs=[args.dataset], outputs=["report.json"])
    return 0


def _ensemble_inputs(path) -> tuple:
    pairs = read_dataset(path)
    if not isinstance(pairs.forecast, Ensemble):
        raise UsageError(f"{path}: EMOS needs ensemble forecasts with the same number of members")
    m, s = ensemble_statistics(pairs.forecast.members)
    return pairs, m, s


def cmd_emos(args, argv) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = out.with_name(out.name + ".manifest.json")
    if args.emos_command == "fit":
        pairs, m, s = _ensemble_inputs(args.dataset)
        model = emos_fit(m, s, pairs.y, args.family, args.init, args.budget, args.censor_point)
        out.write_text(model.to_json() + "\n", encoding="utf-8")
        write_manifest(manifest, _command_text(argv), {
            "family": args.family, "budget": args.budget, "init": args.init, "censor_point": args.censor_point,
        }, None, inputs=[args.dataset], outputs=[out.name])
        print(model.to_json())
        return 0
    model = EmosModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    pairs, m, s = _ensemble_inputs(args.dataset)
    write_jsonl(out, pairs.with_forecast(model.predict(m, s)))
    write_manifest(manifest, _command_text(argv), {"model": model.to_dict()}, None,
                   inputs=[args.model, args.dataset], outputs=[out.name])
    print(out)
    return 0


def cmd_repro(args, argv) -> int:
    if args.figure == "list":
        for name, fig in sorted(FIGURES.items()):
            print(f"{name}: {fig.description} (default n = {fig.default_n})")
        return 0
    if args.out is None:
        raise UsageError("repro needs --out")
    out = Path(args.out)
    files = run_figure(args.figure, args.n, args.seed, out)
    n = FIGURES[args.figure].default_n if args.n is None else args.n
    write_manifest(out / "manifest.json", _command_text(argv), {"figure": args.figure, "n": n}, args.seed,
                   outputs=files)
    for f in files:
        print(out / f)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if extra and args.command != "simulate":
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "simulate":
            return cmd_simulate(args, extra, argv)
        if args.command == "diagnose":
            return cmd_diagnose(args, argv)
        if args.command == "test":
            return cmd_test(args, argv)
        if args.command == "emos":
            return cmd_emos(args, argv)
        return cmd_repro(args, argv)
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"tailcal: error: {exc}", file=sys.stderr)
        return 2
    except TailcalError as exc:
        print(f"tailcal: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
