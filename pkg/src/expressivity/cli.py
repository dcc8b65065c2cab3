"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
Every JSON report embeds the resolved configuration; apart from the
``timestamp`` field the output depends only on input files, flags and seed
(the worker count and output path are deliberately left out).
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import featio, probes, protocols, synthgen
from .mine import TrainConfig
from .protocols import RestartDiverged

log = logging.getLogger("expressivity")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

# (slack below, slack above) the true MI for a synth-validate pass
CONTINUOUS_BAND = (0.13, 0.07)
INDEPENDENT_BAND = 0.05
DISCRETE_BAND = (0.10, 0.01)  # relative to the true MI


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def _add_training(p):
    g = p.add_argument_group("training")
    g.add_argument("--restarts", type=_positive_int, default=protocols.DEFAULT_RESTARTS)
    g.add_argument("--seed", type=_nonneg_int, default=42)
    g.add_argument("--workers", type=_positive_int, default=None,
                   help="threads for restarts (default: available CPUs); does not affect output")
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float, dest="learning_rate")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--window", type=int, dest="convergence_window")
    g.add_argument("--tol", type=float, dest="convergence_tol")
    g.add_argument("--ema-rate", type=float)
    g.add_argument("--optimizer", choices=("adam", "sgd"))
    g.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="expressivity", description="MINE-based attribute expressivity")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("p1", help="expressivity of attributes in flattened features")
    p.add_argument("--features", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--col", required=True, action="append", help="attribute column (repeatable)")
    p.add_argument("--kind", choices=protocols.ATTRIBUTE_KINDS)
    p.add_argument("--out", required=True)
    _add_training(p)

    p = sub.add_parser("p2", help="expressivity of attributes in convolutional feature maps")
    p.add_argument("--maps", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--col", required=True, action="append")
    p.add_argument("--kind", choices=protocols.ATTRIBUTE_KINDS)
    p.add_argument("--channels", type=_positive_int, required=True, help="z, channels kept")
    p.add_argument("--out", required=True)
    _add_training(p)

    p = sub.add_parser("probe", help="linear-probe accuracy or error")
    p.add_argument("--features", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--col", required=True)
    p.add_argument("--task", choices=("classify", "regress"), required=True)
    p.add_argument("--train", type=_positive_int, default=probes.DEFAULT_TRAIN)
    p.add_argument("--test", type=_positive_int, default=probes.DEFAULT_TEST)
    p.add_argument("--threshold", type=float,
                   help="binarise the attribute at this value for classification")
    p.add_argument("--seed", type=_nonneg_int, default=42)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth-validate", help="end-to-end run on a known-MI synthetic family")
    p.add_argument("--family", choices=synthgen.FAMILIES, required=True)
    p.add_argument("--param", type=float, default=0.0)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--dim", type=_positive_int, default=1)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--data-seed", type=_nonneg_int, default=0)
    p.add_argument("--out", required=True)
    _add_training(p)

    p = sub.add_parser("gray", help="grayscale-flatten an RGB EXPRMAP1 stack into a CSV")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    return parser


def _train_config(args) -> TrainConfig:
    overrides = {
        k: getattr(args, k)
        for k in ("batch_size", "learning_rate", "max_iters", "convergence_window",
                  "convergence_tol", "ema_rate", "optimizer")
    }
    try:
        return TrainConfig(standardize=args.standardize).with_overrides(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolved(args, train: TrainConfig | None = None) -> dict:
    skip = {"workers", "out", "verbose"} | set(TrainConfig.__dataclass_fields__)
    skip |= {"learning_rate", "convergence_window", "convergence_tol"}
    d = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if train is not None:
        d["train"] = train.to_dict()
    return d


def _workers(args) -> int:
    return args.workers or protocols.default_workers()


def cmd_p1(args) -> dict:
    train = _train_config(args)
    F = featio.load_feature_csv(args.features)
    estimates = []
    for col in args.col:
        A = featio.load_attributes_csv(args.attrs, col, kind=args.kind)
        log.info("p1: attribute %s, %d x %d features", A.name, *F.shape)
        estimates.append(protocols.protocol1(F, A, args.restarts, train, args.seed, _workers(args)))
    return featio.build_report("p1", _resolved(args, train), estimates)


def cmd_p2(args) -> dict:
    train = _train_config(args)
    stack = featio.load_feature_maps(args.maps)
    if args.channels > stack.k:
        raise featio.DataError(f"--channels {args.channels} exceeds the layer's {stack.k} channels")
    estimates = []
    for col in args.col:
        A = featio.load_attributes_csv(args.attrs, col, kind=args.kind)
        log.info("p2: attribute %s, stack n=%d k=%d d=%d", A.name, stack.n, stack.k, stack.d)
        estimates.append(protocols.protocol2(stack, A, args.channels, args.restarts, train,
                                             args.seed, _workers(args)))
    return featio.build_report("p2", _resolved(args, train), estimates)


def cmd_probe(args) -> dict:
    F = featio.load_feature_csv(args.features)
    A = featio.load_attributes_csv(args.attrs, args.col)
    y = A.values
    if args.task == "classify" and args.threshold is not None:
        y = (y > args.threshold).astype(np.float64)
    report = probes.run_probe(F, y, args.task, args.train, args.test, args.seed, attribute=A.name)
    return featio.build_report("probe", _resolved(args), probes=[report])


def synth_band(family: str, true_mi: float, stderr: float = 0.0) -> tuple[float, float]:
    if family == "independent":
        return -INDEPENDENT_BAND, INDEPENDENT_BAND
    if family == "discrete_embed":
        lo, hi = DISCRETE_BAND
        return true_mi * (1 - lo) - 3 * stderr, true_mi * (1 + hi) + 3 * stderr
    lo, hi = CONTINUOUS_BAND
    return true_mi - lo, true_mi + hi


def cmd_synth_validate(args) -> dict:
    train = _train_config(args)
    try:
        spec = synthgen.SynthSpec(args.family, n=args.n, dim=args.dim, parameter=args.param,
                                  classes=args.classes, seed=args.data_seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    F, A, _ = synthgen.generate(spec)
    oracle = synthgen.true_mi(spec)
    est = protocols.protocol1(F, A, args.restarts, train, args.seed, _workers(args))
    lo, hi = synth_band(args.family, oracle.value, oracle.stderr)
    extra = {
        "true_mi": oracle.value,
        "true_mi_stderr": oracle.stderr,
        "band": [lo, hi],
        "pass": bool(lo <= est.mean <= hi),
    }
    return featio.build_report("synth-validate", _resolved(args, train), [est], extra=extra)


def cmd_gray(args) -> None:
    arr = featio.read_feature_map_array(args.images)
    if arr.shape[1] != 3:
        raise featio.DataError(f"{args.images}: expected 3 (RGB) channels, got {arr.shape[1]}")
    F = protocols.grayscale_flatten(arr.astype(np.float64))
    featio.write_feature_csv(F, args.out)


COMMANDS = {
    "p1": cmd_p1,
    "p2": cmd_p2,
    "probe": cmd_probe,
    "synth-validate": cmd_synth_validate,
    "gray": cmd_gray,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        report = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"expressivity {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RestartDiverged as exc:
        print(f"expressivity {args.command}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (featio.DataError, OSError, ValueError) as exc:
        print(f"expressivity {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    if report is not None:
        featio.write_result_json(report, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
