"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import network, pipeline
from .dataset import (BENCHMARKS, BREAST_CANCER_CLASSES, BREAST_CANCER_SCHEMA, IRIS_CLASSES,
                      IRIS_SCHEMA, Dataset, infer_schema, input_matrix, load_benchmark, load_csv,
                      normalize)
from .discretize import DEFAULT_GRID
from .errors import DataError, RexError, UsageError
from .network import TrainConfig
from .rex import ExtractConfig, RuleSet

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
SEED_ENV = "REXKIT_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _seed(value):
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def load_data(spec: str, *, header=False, class_column=-1, schema="infer") -> Dataset:
    """``fixture:<name>`` for a bundled dataset, otherwise a CSV path."""
    if spec.startswith("fixture:"):
        return load_benchmark(spec.split(":", 1)[1])
    path = Path(spec)
    if not path.is_file():
        raise DataError(f"no such file: {spec}")
    if schema == "iris":
        return load_csv(path, IRIS_SCHEMA, 4, header=header, classes=IRIS_CLASSES, name=path.stem)
    if schema == "breast-cancer":
        return load_csv(path, BREAST_CANCER_SCHEMA, 10, header=header,
                        classes=BREAST_CANCER_CLASSES, ignore_columns=(0,),
                        class_aliases={"2": "benign", "4": "malignant"}, name=path.stem)
    attrs = infer_schema(path, class_column, header)
    return load_csv(path, attrs, class_column, header=header, name=path.stem)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV path or fixture:<name> "
                   f"({', '.join(BENCHMARKS)})")
    p.add_argument("--header", action="store_true", help="first CSV row holds column names")
    p.add_argument("--class-column", type=int, default=-1)
    p.add_argument("--schema", choices=("infer", "iris", "breast-cancer"), default="infer")


def _add_train_flags(p):
    d = TrainConfig()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--max-epochs", type=int, default=d.max_epochs)
    p.add_argument("--target-mse", type=float, default=d.target_mse)
    p.add_argument("--stall-window", type=int, default=d.stall_window)
    p.add_argument("--stall-tolerance", type=float, default=d.stall_tolerance)
    p.add_argument("--max-hidden", type=int, default=d.max_hidden)
    p.add_argument("--prune-slack", type=float, default=d.prune_accuracy_slack)


def _train_config(args, seed) -> TrainConfig:
    return TrainConfig(args.learning_rate, args.momentum, args.max_epochs, args.target_mse,
                       args.stall_window, args.stall_tolerance, args.max_hidden,
                       args.prune_slack, seed)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rexkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="induce rules from data or from a trained network")
    _add_data_flags(p)
    p.add_argument("--mode", choices=pipeline.MODES, default="direct")
    p.add_argument("--search", choices=("greedy", "exhaustive"), default="exhaustive")
    p.add_argument("--max-len", type=int, default=3, help="exhaustive search depth")
    p.add_argument("--noise-min-coverage", type=int, default=1)
    p.add_argument("--noise-fraction", type=float, default=0.0)
    p.add_argument("--test-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    _add_train_flags(p)

    p = sub.add_parser("train", help="train and prune a network, write network.json")
    _add_data_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a rules JSON document on a dataset")
    _add_data_flags(p)
    p.add_argument("--rules", type=Path, required=True)
    p.add_argument("--format", choices=pipeline.REPORT_FORMATS, default="text")

    p = sub.add_parser("reproduce", help="rerun the four benchmarks and check reference bands")
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=pipeline.REPORT_FORMATS, default="text")

    p = sub.add_parser("export-fixture", help="write a bundled dataset as CSV")
    p.add_argument("--name", required=True, choices=BENCHMARKS)
    p.add_argument("--out", type=Path, help="file to write (standard output if omitted)")
    return parser


def _echo(command, config):
    print(f"# rexkit {command} " + json.dumps(config, sort_keys=True), file=sys.stderr)


def _data(args):
    return load_data(args.data, header=args.header, class_column=args.class_column,
                     schema=args.schema)


def cmd_extract(args) -> int:
    seed = _seed(args.seed)
    cfg = pipeline.PipelineConfig(
        mode=args.mode, train=_train_config(args, seed),
        extract=ExtractConfig(args.search, args.max_len, args.noise_min_coverage,
                              args.noise_fraction),
        delta_grid=DEFAULT_GRID, test_fraction=args.test_fraction, split_seed=seed)
    _echo("extract", {"data": args.data, **cfg.to_dict()})
    rules, report, artifacts = pipeline.run(_data(args), cfg)
    if args.out:
        pipeline.write_artifacts(args.out, artifacts)
    print(rules.render())
    print()
    print(pipeline.report_render(report, "text"), end="")
    return EXIT_OK


def cmd_train(args) -> int:
    seed = _seed(args.seed)
    cfg = _train_config(args, seed)
    _echo("train", {"data": args.data, "train": asdict(cfg)})
    data = normalize(_data(args))
    X, _ = input_matrix(data)
    net = network.init_network(X.shape[1], data.n_classes, seed)
    report = network.train(net, data, cfg)
    net = network.prune(net, data, cfg)
    report.connections_pruned = int((~net.mask_ih).sum() + (~net.mask_ho).sum())
    report.inputs_removed = network.removed_inputs(net)
    report.train_accuracy = network.accuracy(net, data)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "network.json").write_text(net.to_json(cfg))
    print(json.dumps(asdict(report), indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    _echo("eval", {"data": args.data, "rules": str(args.rules), "format": args.format})
    data = _data(args)
    try:
        text = args.rules.read_text()
    except OSError as exc:
        raise DataError(f"cannot read rules: {exc}") from None
    rules = RuleSet.from_json(text, data.schema)
    if tuple(rules.classes) != data.classes:
        raise DataError(f"rule classes {rules.classes} do not match data classes {data.classes}")
    report = pipeline.evaluate(rules, data, name=data.name)
    print(pipeline.report_render(report, args.format), end="")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    seed = _seed(args.seed)
    _echo("reproduce", {"seed": seed, "datasets": list(BENCHMARKS),
                        "configs": {n: pipeline.benchmark_config(n, seed).to_dict()
                                    for n in BENCHMARKS}})
    rows, failed = [], False
    for name in BENCHMARKS:
        try:
            rows.extend(pipeline.reproduce([name], seed))
        except RexError as exc:
            print(f"{name}: {exc}", file=sys.stderr)
            failed = True
    if args.out:
        for row in rows:
            pipeline.write_artifacts(args.out / row.name, row.artifacts)
        for fmt, ext in (("text", "txt"), ("csv", "csv"), ("json", "json")):
            (args.out / f"table.{ext}").write_text(pipeline.render_reproduction(rows, fmt))
    print(pipeline.render_reproduction(rows, args.format), end="")
    failed = failed or not all(row.passed for row in rows)
    return EXIT_DATA if failed else EXIT_OK


def cmd_export_fixture(args) -> int:
    _echo("export-fixture", {"name": args.name, "out": str(args.out) if args.out else None})
    text = load_benchmark(args.name).to_csv()
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
            "reproduce": cmd_reproduce, "export-fixture": cmd_export_fixture}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RexError, OSError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
