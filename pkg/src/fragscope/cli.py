"""Command-line front end.

Subcommands: metrics (embedding diversity/disparity report), mi (mixture
information report), props (randomized proposition verification), simulate
(shortcut-learning knob sweep), plan (bridge-mass search). Reports are
written atomically into the --out directory; identical configuration plus
seed yields byte-identical files regardless of the thread setting
(--threads flag or FRAGSCOPE_THREADS).

Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 missing file,
4 malformed input file, 5 invariant/validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from typing import Sequence

from . import bridge as bridge_mod
from . import factors, formats, metrics, simulate
from .errors import FormatError, FragscopeError, ValidationError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_FORMAT = 4
EXIT_VALIDATION = 5


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated number list, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fragscope",
        description="Dataset fragmentation and shortcut-learning diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="diversity/disparity report on embeddings")
    p.add_argument("--embeddings", required=True, help="EMBF or CSV embedding matrix")
    p.add_argument("--partition", help="index,subdataset CSV; omit for a single group")
    p.add_argument("--temps", type=_float_list, default=list(metrics.DEFAULT_TEMPERATURES))
    p.add_argument("--estimator", choices=["exact", "subsample"], default="exact")
    p.add_argument("--budget", type=int, default=None, help="pairs per expectation (subsample)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aggregate", choices=["mean", "geomean"], default="mean")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mi", help="information report for a factor-mixture JSON")
    p.add_argument("--mixture", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("props", help="randomized verification of the NMI propositions")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-support", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="shortcut-learning knob sweep")
    p.add_argument("--knob", choices=list(simulate.SWEEP_KNOBS), default="viewpoint_radius")
    p.add_argument("--values", default=None, help="comma-separated knob values")
    p.add_argument("--lambda", dest="ridge_lambda", type=float, default=simulate.DEFAULT_RIDGE_LAMBDA)
    p.add_argument("--delta", type=float, default=simulate.DEFAULT_SUCCESS_TOLERANCE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plan", help="minimal bridge mass reaching a target NMI")
    p.add_argument("--mixture", required=True)
    p.add_argument("--factor", choices=["u", "v"], required=True)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--grid", type=_float_list, required=True)
    p.add_argument("--bridge-symbols", default=None, help="comma-separated symbols (default: 'bridge')")
    p.add_argument("--out", required=True)

    return parser


def _parse_knob_values(knob: str, text: str | None) -> list:
    if text is None:
        return list(simulate.DEFAULT_KNOB_GRIDS[knob])
    items = [x.strip() for x in text.split(",") if x.strip() != ""]
    if not items:
        raise ValidationError("--values must list at least one knob value")
    if knob == "positions_per_subdataset":
        return [int(x) for x in items]
    if knob == "layout":
        return items
    if knob == "per_task_viewpoints":
        mapping = {"true": True, "false": False, "1": True, "0": False}
        try:
            return [mapping[x.lower()] for x in items]
        except KeyError as exc:
            raise ValidationError(f"per_task_viewpoints values must be true/false, got {exc}") from exc
    return [float(x) for x in items]


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_metrics(args: argparse.Namespace) -> None:
    vectors = formats.read_embeddings(args.embeddings)
    embeddings = metrics.normalize_rows(metrics.EmbeddingSet(vectors))
    if args.partition:
        labels = formats.read_partition_csv(args.partition)
        if len(labels) != embeddings.n:
            raise ValidationError(
                f"partition covers {len(labels)} rows but embeddings have {embeddings.n}"
            )
    else:
        labels = ["all"] * embeddings.n
    cfg = metrics.EstimatorConfig(mode=args.estimator, pair_budget=args.budget, seed=args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = metrics.temperature_sweep(
            embeddings,
            metrics.Partition(tuple(labels)),
            args.temps,
            cfg,
            aggregation=args.aggregate,
            threads=args.threads,
        )
    out = _ensure_out(args.out)
    formats.write_json_report(os.path.join(out, "metrics.json"), report.to_dict())
    formats.write_csv_report(os.path.join(out, "metrics.csv"), report.to_csv_rows())
    print(os.path.join(out, "metrics.json"))


def _cmd_mi(args: argparse.Namespace) -> None:
    mix = factors.load_mixture_json(args.mixture)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        nmi = factors.normalized_mi(mix)
    degenerate = any(issubclass(w.category, factors.DegenerateMixtureWarning) for w in caught)
    doc: dict = {
        "m": mix.m,
        "entropy_u": [factors.entropy(c.u) for c in mix.components],
        "entropy_v": [factors.entropy(c.v) for c in mix.components],
        "mixture_entropy_u": factors.entropy(factors.mixture_marginal(mix, "u")),
        "mixture_entropy_v": factors.entropy(factors.mixture_marginal(mix, "v")),
        "mutual_information_bits": factors.mutual_information(factors.joint_mixture(mix)),
        "normalized_mi": nmi,
        "c_diversity_bits": factors.c_diversity(mix),
        "degenerate": degenerate,
        "c_interleave": None,
        "prop1_nmi": None,
        "prop2_bound": None,
    }
    if mix.m == 2:
        doc["c_interleave"] = factors.c_interleave(mix)
        doc["prop2_bound"] = factors.prop2_nmi_upper_bound(mix)
        if factors.supports_disjoint(mix, "u") and factors.supports_disjoint(mix, "v"):
            doc["prop1_nmi"] = factors.prop1_predicted_nmi(mix)
    out = _ensure_out(args.out)
    formats.write_json_report(os.path.join(out, "mi.json"), doc)
    print(os.path.join(out, "mi.json"))


def _cmd_props(args: argparse.Namespace) -> None:
    report = factors.verify_propositions(
        trials=args.trials, seed=args.seed, support_size_range=(1, args.max_support)
    )
    out = _ensure_out(args.out)
    formats.write_json_report(os.path.join(out, "props.json"), report.to_dict())
    print(os.path.join(out, "props.json"))
    if not report.ok:
        raise ValidationError(
            f"proposition check failed: max equality residual {report.max_equality_residual:g}, "
            f"max bound violation {report.max_bound_violation:g}"
        )


def _cmd_simulate(args: argparse.Namespace) -> None:
    values = _parse_knob_values(args.knob, args.values)
    base = simulate.SimConfig(seed=args.seed)
    table = simulate.sweep(base, args.knob, values, args.ridge_lambda, args.delta)
    out = _ensure_out(args.out)
    formats.write_json_report(os.path.join(out, "sweep.json"), table.to_dict())
    formats.write_csv_report(os.path.join(out, "sweep.csv"), table.to_csv_rows())
    print(os.path.join(out, "sweep.csv"))


def _cmd_plan(args: argparse.Namespace) -> None:
    with open(args.mixture, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.mixture}: invalid JSON: {exc}") from exc
    mix = factors.mixture_from_dict(doc)
    if args.bridge_symbols:
        symbols = tuple(s.strip() for s in args.bridge_symbols.split(",") if s.strip())
    elif isinstance(doc.get("bridge"), dict) and "symbols" in doc["bridge"]:
        symbols = tuple(doc["bridge"]["symbols"])
    else:
        symbols = ("bridge",)
    template = bridge_mod.BridgeSpec(factor=args.factor, bridge_symbols=symbols)
    plan = bridge_mod.plan_bridge(mix, template, args.target, args.grid)
    out = _ensure_out(args.out)
    doc = plan.to_dict()
    doc["factor"] = args.factor
    doc["bridge_symbols"] = list(symbols)
    formats.write_json_report(os.path.join(out, "plan.json"), doc)
    print(os.path.join(out, "plan.json"))


_COMMANDS = {
    "metrics": _cmd_metrics,
    "mi": _cmd_mi,
    "props": _cmd_props,
    "simulate": _cmd_simulate,
    "plan": _cmd_plan,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None:
        os.environ[metrics.THREADS_ENV_VAR] = str(args.threads)
    try:
        _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"fragscope: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except FormatError as exc:
        print(f"fragscope: malformed input: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValidationError as exc:
        print(f"fragscope: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FragscopeError as exc:
        print(f"fragscope: error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
