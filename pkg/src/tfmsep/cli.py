"""Command-line entry point: ``tfmsep synth|train|separate|evaluate``.

Exit codes: 0 success, 2 config/usage error, 3 data error, 4 numeric error.
"""
import argparse
import logging
import sys

from . import harness
from .errors import TfmsepError


def _add_common(p):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--paper-mode", action="store_true",
                   help="start from the full-scale settings (44.1 kHz, 60 s, hop 1) "
                        "instead of the 16 kHz / 10 s / hop 64 desk profile")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tfmsep",
        description="Two-source single-channel separation with time-frequency masks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the two synthetic source WAVs")
    _add_common(p)

    p = sub.add_parser("train", help="train the mask-estimation network")
    _add_common(p)
    p.add_argument("--model", dest="model_path", help="model file to write")

    p = sub.add_parser("separate", help="separate the held-out mixture and score it")
    _add_common(p)
    p.add_argument("--method", choices=harness.METHODS)
    p.add_argument("--model", dest="model_path", help="model file for --method dnn")

    p = sub.add_parser("evaluate", help="score estimate WAVs against reference WAVs")
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--references", nargs="+", required=True)
    p.add_argument("--out", dest="out_dir", help="write metrics.csv/metrics.json here")
    p.add_argument("--method", default="external", help="label for the method column")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    base = harness.RunConfig.full_scale() if args.paper_mode else harness.RunConfig.desk()
    cfg = harness.load_config_file(args.config, base) if args.config else base.validate()
    overrides = {k: getattr(args, k, None) for k in ("seed", "out_dir", "method", "model_path")}
    return cfg.with_overrides(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "evaluate":
            rows = harness.cmd_evaluate(args.estimates, args.references, args.out_dir,
                                        args.method)
            print(harness.format_table(rows))
            return 0
        cfg = resolve_config(args)
        if args.command == "synth":
            for path in harness.cmd_synth(cfg):
                print(path)
        elif args.command == "train":
            path, history = harness.cmd_train(cfg)
            for row in history:
                print(f"epoch {row['epoch']}: train_mse={row['train_mse']:.6f} "
                      f"val_mse={row['val_mse']:.6f}")
            print(path)
        else:
            rows, _ = harness.cmd_separate(cfg)
            print(harness.format_table(rows))
    except TfmsepError as exc:
        print(f"tfmsep: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"tfmsep: error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
