"""Command-line entry point: ``cdlearn <subcommand> [flags]``.

Exit codes: 0 success, 1 usage, 2 I/O, 3 validation, 4 numeric divergence.
Any long flag may also come from ``--config FILE`` (``key=value`` lines,
``#`` comments); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .core import ValidationError
from .cv import ExperimentConfig, merge_reports, run_cv
from .estimator import ConcentrationLearner
from .metrics import METRICS, eval_metrics
from .network import DivergenceError, forward_batch, load_model, save_model
from .recovery import recover_rows

EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_DIVERGENCE = 1, 2, 3, 4

logger = logging.getLogger("cdlearn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)  # keeps --c distinct from --config
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _hidden(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--hidden expects comma-separated integers, got {text!r}")
    if not dims:
        raise argparse.ArgumentTypeError("--hidden needs at least one width")
    return dims


def _add_network_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network")
    g.add_argument("--epochs", type=int, default=500)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--hidden", type=_hidden, default=None, help="hidden widths, e.g. 64 or 128,64")
    g.add_argument("--activation", choices=("tanh", "relu"), default="tanh")
    g.add_argument("--batch", type=int, default=32)
    g.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    g.add_argument("--weight-decay", type=float, default=0.0)
    g.add_argument("--early-stopping", type=int, default=None, metavar="PATIENCE")
    g.add_argument("--seed", type=int, default=0)


def _network_params(args) -> dict:
    return {"epochs": args.epochs, "learning_rate": args.lr, "hidden_dims": args.hidden,
            "hidden_activation": args.activation, "batch_size": args.batch,
            "optimizer": args.optimizer, "weight_decay": args.weight_decay,
            "early_stopping": args.early_stopping}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdlearn", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file supplying default flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a confidence network and write a model file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--protocol", choices=("hide-last", "native-cd", "none"), default="none",
                   help="target transform; 'none' trains on an ldl file as is")
    p.add_argument("--model", help="output model path (default OUT/model.json)")
    p.add_argument("--out", default=".")
    _add_network_flags(p)

    p = sub.add_parser("predict", help="write concentration distributions for a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="dataset file; only its features are used")
    p.add_argument("--out", default=".")

    p = sub.add_parser("eval", help="compare two concentration-distribution files")
    p.add_argument("truth")
    p.add_argument("prediction")

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--protocol", choices=("hide-last", "native-cd"), default="hide-last")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--baseline", action="store_true", help="also run the softmax + noise-append baseline")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")
    _add_network_flags(p)

    p = sub.add_parser("build-cdl", help="concentration dataset from a ratings file")
    p.add_argument("ratings")
    p.add_argument("--scale-max", type=float, default=None, help="overrides the file's R")
    p.add_argument("--out", default=".")

    p = sub.add_parser("synth", help="write a synthetic concentration dataset")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--m", type=int, default=24)
    p.add_argument("--c", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("report", help="merge cv reports into rank tables and Friedman statistics")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=".")
    return parser


def read_config_file(path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-")] = value
    return values


def _apply_config(argv: list[str]) -> list[str]:
    """Insert config-file values as flags after the subcommand, before user flags."""
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    values = read_config_file(known.config)
    cmd_pos = next((i for i, a in enumerate(rest) if not a.startswith("-")), None)
    if cmd_pos is None:
        return rest
    injected = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            injected.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            injected += [flag, value]
    return rest[:cmd_pos + 1] + injected + rest[cmd_pos + 1:]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    ds = data_mod.load_dataset(args.dataset)
    if args.protocol == "none":
        if ds.kind != "ldl":
            raise ValidationError("a cdl dataset needs --protocol hide-last or native-cd")
        Y = ds.targets
    elif args.protocol == "hide-last":
        Y = data_mod.hide_last_label(ds.targets).train_targets
    else:
        if ds.kind != "cdl":
            raise ValidationError("the native-cd protocol needs a concentration (cdl) dataset")
        Y = data_mod.apparent_from_cd(ds.targets).train_targets
    est = ConcentrationLearner(random_state=args.seed, **_network_params(args)).fit(ds.features, Y)
    path = Path(args.model) if args.model else _out_dir(args) / "model.json"
    save_model(est.model_, path)
    epoch, loss = est.history_[-1]
    print(f"trained {epoch} epochs, final loss {loss:.6g}; model written to {path}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    _, _, X = data_mod.load_targets(args.dataset)
    if X is None:
        raise ValidationError(f"{args.dataset}: no feature columns")
    CD = recover_rows(forward_batch(model, X))
    path = _out_dir(args) / "predictions.csv"
    data_mod.write_dataset(path, None, CD, "cdl")
    print(f"wrote {CD.shape[0]} concentration distributions to {path}")
    return 0


def cmd_eval(args) -> int:
    _, T, _ = data_mod.load_targets(args.truth)
    _, P, _ = data_mod.load_targets(args.prediction)
    if T.shape != P.shape:
        raise ValidationError(f"truth {T.shape} and prediction {P.shape} differ in shape")
    rep = eval_metrics(T, P).as_dict()
    for m in METRICS:
        print(f"{m}\t{rep[m]:.6f}")
    return 0


def cmd_cv(args) -> int:
    config = ExperimentConfig(dataset_path=args.dataset, protocol=args.protocol,
                              network=_network_params(args), folds=args.folds,
                              master_seed=args.seed, output_dir=args.out,
                              baseline=args.baseline, n_jobs=args.jobs)
    report = run_cv(config)
    sys.stdout.write(report.summary())
    return 0


def cmd_build_cdl(args) -> int:
    ratings = data_mod.load_ratings(args.ratings)
    if args.scale_max is not None:
        ratings = data_mod.RatingMatrix(ratings.ratings, args.scale_max, ratings.features)
    CD = data_mod.build_cdl_from_ratings(ratings)
    path = _out_dir(args) / "cdl_dataset.csv"
    data_mod.write_dataset(path, ratings.features, CD, "cdl")
    print(f"wrote {CD.shape[0]} rows to {path}")
    return 0


def cmd_synth(args) -> int:
    syn = data_mod.synth_generate(args.n, args.m, args.c, args.seed)
    out = _out_dir(args)
    data_mod.save_dataset(out / "synthetic.csv", syn.dataset)
    np.savetxt(out / "synthetic_weights.tsv", syn.weights, delimiter="\t", fmt="%.17g")
    print(f"wrote {args.n} rows to {out / 'synthetic.csv'}")
    return 0


def cmd_report(args) -> int:
    merged = merge_reports(args.reports)
    merged.write(_out_dir(args))
    sys.stdout.write(merged.summary())
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "cv": cmd_cv,
            "build-cdl": cmd_build_cdl, "synth": cmd_synth, "report": cmd_report}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cdlearn: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"cdlearn: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValidationError, ValueError) as exc:
        print(f"cdlearn: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cdlearn: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
