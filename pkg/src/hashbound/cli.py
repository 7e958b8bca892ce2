"""Command-line entry point: bound tables, data generation, training,
evaluation, and margin / quantization-weight sweeps.

Subcommands: ``bound``, ``gen-data``, ``train``, ``eval``, ``sweep``.  Any
subcommand accepts ``--config PATH`` pointing at a JSON object whose keys
are the long flag names with underscores; explicit flags override the file.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
All outputs are machine readable (JSON / CSV) and byte-identical across
reruns with the same config and seed, except the ``metadata.created_at``
timestamp isolated inside evaluation reports.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from .bounds import BoundProblem, bound_holds, derive_margins
from .codes import correction_radius
from .data import (
    DatasetSplits,
    FeatureDataset,
    SplitSpec,
    generate_synthetic,
    load_csv,
    save_csv,
    split_dataset,
)
from .encoder import (
    TrainConfig,
    TrainingDivergedError,
    EncoderParams,
    encode,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .evaluation import EvalReport, mean_average_precision

__all__ = ["main", "entry_point"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this CLI reserves 2 for
    # runtime failures, so usage problems are rerouted through _UsageError.
    def error(self, message):
        raise _UsageError(message)


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("data source")
    group.add_argument("--data", type=str, default=None, help="feature CSV path")
    group.add_argument("--classes", type=int, default=10, help="synthetic class count")
    group.add_argument("--per-class", type=int, default=100, help="synthetic samples per class")
    group.add_argument("--dim", type=int, default=32, help="synthetic feature dimension")
    group.add_argument("--center-scale", type=float, default=10.0)
    group.add_argument("--noise-sigma", type=float, default=1.0)
    group.add_argument("--data-seed", type=int, default=0)


def _add_split_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("split protocol")
    group.add_argument("--query-per-class", type=int, default=10)
    group.add_argument("--train-per-class", type=int, default=50)
    group.add_argument("--val-per-class", type=int, default=10)
    group.add_argument("--split-seed", type=int, default=0)


def _add_train_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--bits", type=int, default=12, help="hash code length")
    group.add_argument("--hidden", type=int, default=64, help="hidden layer width")
    group.add_argument("--lr", type=float, default=0.05)
    group.add_argument("--momentum", type=float, default=0.5)
    group.add_argument("--quant-weight", type=float, default=0.002,
                       help="weight of the quantization term in the objective")
    group.add_argument("--batch-size", type=int, default=64)
    group.add_argument("--epochs", type=int, default=50)
    group.add_argument("--seed", type=int, default=0)
    group.add_argument("--classwise", action="store_true",
                       help="compare against class centers instead of all pairs")
    group.add_argument("--margin-override", type=int, default=None,
                       help="use this negative margin instead of the derived one")
    group.add_argument("--center-momentum", type=float, default=0.9)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hashbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", help="derive loss margins from the packing bound")
    p_bound.add_argument("--config", type=str, default=None)
    p_bound.add_argument("--bits", type=int, required=False)
    p_bound.add_argument("--classes", type=int, required=False)
    p_bound.add_argument("--out", type=str, default=None, help="write the margins as JSON")

    p_gen = sub.add_parser("gen-data", help="write a synthetic feature CSV")
    p_gen.add_argument("--config", type=str, default=None)
    _add_data_args(p_gen)
    p_gen.add_argument("--out", type=str, required=False, help="CSV output path")

    p_train = sub.add_parser("train", help="train the encoder and evaluate it")
    p_train.add_argument("--config", type=str, default=None)
    _add_data_args(p_train)
    _add_split_args(p_train)
    _add_train_args(p_train)
    p_train.add_argument("--k", type=int, default=None, help="MAP@k cutoff for the report")
    p_train.add_argument("--out-dir", type=str, required=False)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--config", type=str, default=None)
    p_eval.add_argument("--checkpoint", type=str, required=False)
    _add_data_args(p_eval)
    _add_split_args(p_eval)
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--out-dir", type=str, required=False)

    p_sweep = sub.add_parser("sweep", help="train+eval across margin or weight values")
    p_sweep.add_argument("--config", type=str, default=None)
    _add_data_args(p_sweep)
    _add_split_args(p_sweep)
    _add_train_args(p_sweep)
    p_sweep.add_argument("--margins", type=str, default=None,
                         help="comma list of negative margins to sweep")
    p_sweep.add_argument("--quant-weights", type=str, default=None,
                         help="comma list of quantization weights to sweep")
    p_sweep.add_argument("--seeds", type=str, default=None,
                         help="comma list of seeds per sweep value (default: --seed)")
    p_sweep.add_argument("--out", type=str, required=False, help="sweep CSV path")
    return parser


def _apply_config_file(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    """Parse argv, then re-parse with the JSON config file as defaults."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    path = Path(args.config)
    if not path.is_file():
        raise _UsageError(f"config file not found: {path}")
    try:
        values = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise _UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(values, dict):
        raise _UsageError(f"config file {path} must hold a JSON object")
    known = vars(args)
    for key in values:
        if key not in known:
            raise _UsageError(f"config file {path}: unknown field {key!r}")
    sub = _build_parser()
    for action_parser in _subparsers(sub):
        action_parser.set_defaults(**values)
    return sub.parse_args(argv)


def _subparsers(parser: _Parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            yield from action.choices.values()


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            flag = "--" + name.replace("_", "-")
            raise _UsageError(f"{flag} is required (flag or config file)")


def _load_dataset(args: argparse.Namespace) -> FeatureDataset:
    if args.data is not None:
        path = Path(args.data)
        if not path.is_file():
            raise _UsageError(f"dataset file not found: {path}")
        dataset, mapping = load_csv(path)
        remapped = {k: v for k, v in mapping.items() if k != v}
        if remapped:
            print(f"remapped labels: {remapped}")
        return dataset
    return generate_synthetic(
        num_classes=args.classes,
        per_class=args.per_class,
        dim=args.dim,
        center_scale=args.center_scale,
        noise_sigma=args.noise_sigma,
        seed=args.data_seed,
    )


def _make_splits(args: argparse.Namespace, dataset: FeatureDataset) -> DatasetSplits:
    spec = SplitSpec(
        query_per_class=args.query_per_class,
        train_per_class=args.train_per_class,
        validation_per_class=args.val_per_class,
    )
    return split_dataset(dataset, spec, seed=args.split_seed)


def _train_config(args: argparse.Namespace, seed: int | None = None,
                  margin_override: int | None = None,
                  quant_weight: float | None = None) -> TrainConfig:
    return TrainConfig(
        code_bits=args.bits,
        hidden_dim=args.hidden,
        learning_rate=args.lr,
        momentum=args.momentum,
        quant_weight=args.quant_weight if quant_weight is None else quant_weight,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed if seed is None else seed,
        classwise=args.classwise,
        margin_override=(
            args.margin_override if margin_override is None else margin_override
        ),
        center_momentum=args.center_momentum,
    )


def _evaluate(
    params: EncoderParams, splits: DatasetSplits, k: int | None
) -> EvalReport:
    dataset = splits.dataset
    return mean_average_precision(
        encode(params, dataset.features[splits.query]),
        dataset.labels[splits.query],
        encode(params, dataset.features[splits.database]),
        dataset.labels[splits.database],
        k=k,
    )


def _report_doc(report: EvalReport, extra_meta: dict) -> dict:
    doc = asdict(report)
    doc["metadata"] = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "tie_break": "distance ascending, then database index ascending",
        **extra_meta,
    }
    return doc


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _write_precision_csv(path: Path, report: EvalReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "precision"])
        for cutoff, value in report.precision_curve:
            writer.writerow([cutoff, repr(value)])


def _write_history_csv(path: Path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "pairwise", "quan", "total", "val_map", "min_dist"])
        for r in history.records:
            writer.writerow(
                [r.epoch, repr(r.pairwise), repr(r.quantization), repr(r.total),
                 repr(r.val_map), r.min_center_distance]
            )


def _cmd_bound(args: argparse.Namespace) -> int:
    _require(args, "bits", "classes")
    problem = BoundProblem(code_bits=args.bits, num_classes=args.classes)
    margins = derive_margins(problem)
    clamped = bound_holds(problem, margins.target_distance)
    print(f"code bits:          {args.bits}")
    print(f"classes:            {args.classes}")
    print(f"target distance:    {margins.target_distance}")
    print(f"positive margin:    {margins.positive_margin}")
    print(f"negative margin:    {margins.negative_margin}")
    print(f"correction radius:  {correction_radius(margins.target_distance)}")
    print(f"clamped to length:  {'yes' if clamped else 'no'}")
    if args.out:
        _write_json(
            Path(args.out),
            {
                "code_bits": args.bits,
                "num_classes": args.classes,
                "target_distance": margins.target_distance,
                "positive_margin": margins.positive_margin,
                "negative_margin": margins.negative_margin,
                "correction_radius": correction_radius(margins.target_distance),
                "clamped": clamped,
            },
        )
    return EXIT_OK


def _cmd_gen_data(args: argparse.Namespace) -> int:
    _require(args, "out")
    if args.data is not None:
        raise _UsageError("gen-data generates synthetic data; --data makes no sense")
    dataset = _load_dataset(args)
    save_csv(Path(args.out), dataset)
    print(f"wrote {len(dataset)} rows x {dataset.dim} features to {args.out}")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    _require(args, "out_dir")
    config = _train_config(args)
    dataset = _load_dataset(args)
    splits = _make_splits(args, dataset)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params, history = train(splits, config)

    save_checkpoint(out_dir / "checkpoint.json", params, config, epoch=config.epochs)
    _write_history_csv(out_dir / "history.csv", history)
    _write_json(
        out_dir / "splits.json",
        {
            "train": splits.train.tolist(),
            "validation": splits.validation.tolist(),
            "query": splits.query.tolist(),
            "database": splits.database.tolist(),
        },
    )
    report = _evaluate(params, splits, args.k)
    _write_json(
        out_dir / "report.json",
        _report_doc(
            report,
            {
                "negative_margin": history.margins.negative_margin,
                "classwise": config.classwise,
                "seed": config.seed,
            },
        ),
    )
    _write_precision_csv(out_dir / "precision_curve.csv", report)
    final = history.records[-1]
    print(
        f"trained {config.epochs} epochs: total loss {final.total:.6f}, "
        f"val MAP {final.val_map:.4f}, query MAP {report.map:.4f}"
    )
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    _require(args, "checkpoint", "out_dir")
    path = Path(args.checkpoint)
    if not path.is_file():
        raise _UsageError(f"checkpoint not found: {path}")
    try:
        params, meta = load_checkpoint(path)
    except json.JSONDecodeError as exc:
        print(
            f"error: corrupted checkpoint {path}: line {exc.lineno} "
            f"column {exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    dataset = _load_dataset(args)
    if dataset.dim != params.input_dim:
        print(
            f"error: checkpoint expects {params.input_dim}-d features, "
            f"dataset has {dataset.dim}",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    splits = _make_splits(args, dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = _evaluate(params, splits, args.k)
    _write_json(
        out_dir / "report.json",
        _report_doc(report, {"checkpoint": str(path), "epoch": meta.get("epoch")}),
    )
    _write_precision_csv(out_dir / "precision_curve.csv", report)
    print(f"query MAP {report.map:.4f}" + (f", MAP@{args.k} {report.map_at_k:.4f}" if args.k else ""))
    return EXIT_OK


def _parse_number_list(text: str, cast) -> list:
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise _UsageError(f"could not parse list {text!r}")


def _cmd_sweep(args: argparse.Namespace) -> int:
    _require(args, "out")
    if (args.margins is None) == (args.quant_weights is None):
        raise _UsageError("exactly one of --margins / --quant-weights is required")
    if args.margins is not None:
        parameter = "negative_margin"
        values = _parse_number_list(args.margins, int)
    else:
        parameter = "quant_weight"
        values = _parse_number_list(args.quant_weights, float)
    if not values:
        raise _UsageError("the sweep list is empty")
    seeds = (
        _parse_number_list(args.seeds, int) if args.seeds is not None else [args.seed]
    )

    dataset = _load_dataset(args)
    splits = _make_splits(args, dataset)
    derived = derive_margins(
        BoundProblem(code_bits=args.bits, num_classes=dataset.num_classes)
    ).negative_margin

    # Validate all configurations before any training starts.
    configs = []
    for value in values:
        for seed in seeds:
            if parameter == "negative_margin":
                try:
                    cfg = _train_config(args, seed=seed, margin_override=value)
                except ValueError as exc:
                    raise _UsageError(f"sweep value {value}: {exc}")
            else:
                if value < 0:
                    raise _UsageError("quantization weights must be >= 0")
                cfg = _train_config(args, seed=seed, quant_weight=value)
            configs.append((value, seed, cfg))

    rows = []
    any_failed = False
    for value, seed, cfg in configs:
        try:
            params, _ = train(splits, cfg)
            result_map = repr(_evaluate(params, splits, None).map)
            status = "ok"
        except TrainingDivergedError as exc:
            result_map = ""
            status = "failed"
            any_failed = True
            print(f"{parameter}={value} seed={seed}: {exc}", file=sys.stderr)
        flagged = parameter == "negative_margin" and value == derived
        rows.append([parameter, value, seed, result_map, status, flagged])
        if status == "ok":
            print(f"{parameter}={value} seed={seed}: MAP {float(result_map):.4f}")

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "value", "seed", "map", "status", "bound_derived"])
        writer.writerows(rows)
    return EXIT_RUNTIME if any_failed else EXIT_OK


_COMMANDS = {
    "bound": _cmd_bound,
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; returns the process exit code."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # invalid domain values surfacing from the library are config errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry_point() -> None:
    raise SystemExit(main())
