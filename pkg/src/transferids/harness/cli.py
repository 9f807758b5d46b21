"""``transferids`` command line.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from transferids import kernels
from transferids.classical import KINDS, ClassifierKind
from transferids.container import ContainerError
from transferids.data import FAMILIES, DataError, family_counts
from transferids.harness.config import ConfigError, describe_keys, fixture_config, load_config, parse_config_text
from transferids.harness.experiments import EXPERIMENTS, Pipeline, StageError, run_experiment
from transferids.harness.report import merge_metrics, write_report
from transferids.nn import NumericalError

logger = logging.getLogger("transferids")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--fixture", action="store_true", help="use the synthetic fixture with small model settings")
    p.add_argument("--data", help="path to KDDTrain+ (overrides data.path)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transferids", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    sub.add_parser("prepare", parents=[common], help="ingest, split and persist the three partitions")
    p = sub.add_parser("train", parents=[common], help="train the surrogate and/or victims")
    p.add_argument("--model", default="all", choices=["all", "dnn", *(k.value for k in KINDS)])
    p = sub.add_parser("attack", parents=[common], help="craft and persist adversarial Test batches")
    p.add_argument("--method", choices=["fgsm", "pgd"], help="restrict to one attack")
    p = sub.add_parser("evaluate", parents=[common], help="run one experiment and write its report")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p = sub.add_parser("report", parents=[common], help="merge metrics.csv files into one report")
    p.add_argument("inputs", nargs="+", help="run directories or metrics.csv files")
    sub.add_parser("keys", help="list every config key with its default")
    return parser


def _config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output.dir"] = args.out
    if args.data:
        overrides["data.path"] = args.data
    if args.fixture:
        base = fixture_config()
        values = parse_config_text(Path(args.config).read_text()) if args.config else {}
        return base.override({**values, **overrides})
    return load_config(args.config, **overrides)


def _cmd_prepare(pipe: Pipeline, out: Path, args) -> None:
    data = pipe.datasets()
    rows = [(name, family_counts(ds)) for name, ds in data.items()]
    with open(out / "partition_counts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["partition", *FAMILIES])
        for name, counts in rows:
            w.writerow([name, *(counts[f] for f in FAMILIES)])
    print(f"{'partition':<10}" + "".join(f"{f:>8}" for f in FAMILIES))
    for name, counts in rows:
        print(f"{name:<10}" + "".join(f"{counts[f]:>8}" for f in FAMILIES))
    print(f"feature dimensions: {data['test'].n_dims}")


def _cmd_train(pipe: Pipeline, out: Path, args) -> None:
    targets = ["dnn", *(k.value for k in KINDS)] if args.model == "all" else [args.model]
    for name in targets:
        if name == "dnn":
            m = pipe.surrogate()
            print(f"dnn: train accuracy {m.train_accuracy:.4f}  fingerprint {m.fingerprint}")
        else:
            clf = pipe.victim(ClassifierKind.parse(name))
            print(f"{name}: fingerprint {clf.fingerprint}")


def _cmd_attack(pipe: Pipeline, out: Path, args) -> None:
    methods = [args.method] if args.method else pipe.cfg["attack.methods"]
    for method in methods:
        for eps in pipe.cfg["attack.epsilons"]:
            pipe.persist_batch(method, eps)
            b = pipe.batch(method, eps)
            print(f"{method} eps={eps}: {len(b)} rows, max |dx| {b.max_perturbation():.4f}, fingerprint {b.fingerprint}")


def _cmd_evaluate(pipe: Pipeline, out: Path, args) -> None:
    report = run_experiment(args.experiment, pipe.cfg, pipe)
    report.config["kernel_backend"] = kernels.BACKEND
    paths = write_report(report, out / args.experiment)
    for w in report.warnings:
        logger.warning(w)
    print("\n".join(str(p) for p in paths))


def _cmd_report(args, out: Path) -> None:
    records = merge_metrics(args.inputs, out)
    print(f"merged {len(records)} records into {out / 'metrics.csv'}")


def _run(args) -> int:
    if args.command == "keys":
        print(describe_keys())
        return EXIT_OK
    cfg = _config(args)
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "report":
        _cmd_report(args, out)
        return EXIT_OK
    pipe = Pipeline(cfg, out)
    {"prepare": _cmd_prepare, "train": _cmd_train, "attack": _cmd_attack,
     "evaluate": _cmd_evaluate}[args.command](pipe, out, args)
    return EXIT_OK


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_USAGE
    if isinstance(exc, (NumericalError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, ContainerError, OSError, ValueError)):
        return EXIT_DATA
    return EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except Exception as exc:  # report and map to the documented exit code
        print(f"transferids: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
