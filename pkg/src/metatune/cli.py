"""Command-line interface: ``metatune <verb> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import campaign as camp
from .backend import ProcessAdapter, load_adapter
from .dtree import ClassWeighting, TrainParams, read_model, train, write_model
from .errors import MetatuneError
from .features import features_of_file
from .flags import format_grid, load_grid
from .mock import MockAdapter, load_table
from .predict import EXIT_ERROR, EXIT_USAGE, describe_flags, select_flags, verify

BACKEND_ENV = "METATUNE_BACKEND"

log = logging.getLogger("metatune")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _adapter(args):
    grid = load_grid(getattr(args, "grid", None))
    if getattr(args, "mock", None):
        adapter = MockAdapter(load_table(args.mock), grid=grid, sleep=args.mock_sleep)
    else:
        path = args.backend or os.environ.get(BACKEND_ENV)
        adapter = load_adapter(path) if path else ProcessAdapter()
        if isinstance(adapter, MockAdapter):
            adapter.grid = grid
    if getattr(args, "arch", None):
        adapter.arch = args.arch
    return adapter


def _add_backend_options(p):
    p.add_argument("--backend", metavar="CONFIG",
                   help=f"backend adapter config file (default: ${BACKEND_ENV}, else esbmc)")
    p.add_argument("--mock", metavar="TABLE", help="use the scripted mock backend with this table")
    p.add_argument("--mock-sleep", action="store_true",
                   help="make the mock really sleep instead of simulating delays")


def cmd_extract(args):
    for path in args.files:
        feats = features_of_file(path)
        record = {"file": path}
        record.update(zip(feats.names(), feats.as_list()))
        print(json.dumps(record))
    return 0


def cmd_grid(args):
    text = format_grid(load_grid(args.grid))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_label(args):
    manifest = camp.CampaignManifest(
        camp.read_manifest(args.manifest), load_grid(args.grid), args.timeout, args.jobs
    )
    journal = args.journal or args.output + ".journal"
    rows = camp.run_campaign(manifest, _adapter(args), journal_path=journal)
    camp.write_dataset(rows, args.output)
    print(f"wrote {len(rows)} rows for {len(manifest.benchmarks)} benchmark(s) to {args.output}")
    return 0


def cmd_train(args):
    rows = camp.read_dataset(args.dataset)
    if args.train_fraction is not None:
        rows, holdout = camp.split_train(rows, args.train_fraction, args.seed)
        if args.holdout:
            camp.write_dataset(holdout, args.holdout)
    params = TrainParams(
        min_samples_split=args.min_samples_split,
        min_samples_leaf=args.min_samples_leaf,
        max_depth=args.max_depth,
        class_weighting=ClassWeighting.UNIFORM if args.uniform else ClassWeighting.BALANCED,
    )
    model = train(camp.to_samples(rows), params)
    write_model(model, args.output)
    print(f"trained on {len(rows)} samples: {len(model.nodes)} nodes, "
          f"{len(model.leaves())} leaves, depth {model.depth()} -> {args.output}")
    return 0


def cmd_predict(args):
    model = read_model(args.model)
    grid = load_grid(args.grid)
    for path in args.programs:
        pred = select_flags(model, features_of_file(path), grid)
        print(f"{path}: cfg {pred.chosen_index} class {pred.predicted_class} "
              f"flags {describe_flags(pred.chosen)}")
    return 0


def cmd_verify(args):
    if not args.fallback_default and not args.model:
        raise MetatuneError("--model is required unless --fallback-default is given")
    adapter = _adapter(args)
    result = verify(args.benchmark, args.property, args.model, load_grid(args.grid), adapter,
                    args.timeout, fallback_default=args.fallback_default)
    out = result.outcome
    print(f"verdict: {out.raw.value}")
    print(f"time: {out.wall_time_s:.3f} s")
    print(f"flags: {describe_flags(result.config, getattr(adapter, 'strategy_flags', None))}")
    if result.prediction is not None:
        print(f"cfg: {result.prediction.chosen_index} "
              f"(predicted class {result.prediction.predicted_class})")
    return result.exit_code


def cmd_report(args):
    from .plotting import plot_report
    from .report import default_rows, predicted_rows, report_compare

    if args.campaign:
        if not args.model:
            raise MetatuneError("--campaign needs --model")
        rows = camp.read_dataset(args.campaign)
        grid = load_grid(args.grid)
        base = default_rows(rows, grid)
        chosen = predicted_rows(rows, read_model(args.model), grid)
    elif args.default and args.predicted:
        base = camp.read_dataset(args.default)
        chosen = camp.read_dataset(args.predicted)
    else:
        raise MetatuneError("give --campaign with --model, or both --default and --predicted")
    report = report_compare(base, chosen)
    os.makedirs(args.out_dir, exist_ok=True)
    table = report.format_table()
    files = {
        "report.txt": table,
        "counts.csv": report.to_csv(),
        "pairs.csv": report.pairs_csv(),
    }
    for name, text in files.items():
        with open(os.path.join(args.out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    figure = plot_report(report, os.path.join(args.out_dir, "comparison.png"))
    sys.stdout.write(table)
    print(f"wrote {', '.join(files)} and {os.path.basename(figure)} to {args.out_dir}")
    return 0


def build_parser():
    ap = _Parser(prog="metatune",
                 description="Predict bounded-model-checker flags for concurrent C programs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="print static program features")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("grid", help="dump the flag grid")
    p.add_argument("--grid", default="builtin", help="grid file to normalize (default: builtin)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("label", help="run a labeling campaign")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True, help="dataset CSV to write")
    p.add_argument("--journal", help="checkpoint journal (default: OUTPUT.journal)")
    p.add_argument("--grid", default="builtin")
    p.add_argument("--timeout", type=float, default=camp.DEFAULT_TIMEOUT_S)
    p.add_argument("-j", "--jobs", type=int, default=1)
    p.add_argument("--arch", choices=["32", "64"], default="32")
    _add_backend_options(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train the decision tree on a dataset")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--min-samples-split", type=int, default=4)
    p.add_argument("--min-samples-leaf", type=int, default=3)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--uniform", action="store_true", help="do not balance class weights")
    p.add_argument("--train-fraction", type=float,
                   help="train on this fraction of the benchmarks only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", help="write the held-out rows to this CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="print the chosen flags without verifying")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="builtin")
    p.add_argument("programs", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify", help="predict flags and run the backend once")
    p.add_argument("-p", "--property", default="", help="property file")
    p.add_argument("--model")
    p.add_argument("--grid", default="builtin")
    p.add_argument("--arch", choices=["32", "64"], default="32")
    p.add_argument("--timeout", type=float, default=camp.DEFAULT_TIMEOUT_S)
    p.add_argument("--fallback-default", action="store_true",
                   help="skip prediction and use the backend's default flags")
    _add_backend_options(p)
    p.add_argument("benchmark")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="compare default and predicted results")
    p.add_argument("--default", help="dataset CSV with the default configuration's results")
    p.add_argument("--predicted", help="dataset CSV with the predicted configuration's results")
    p.add_argument("--campaign", help="full campaign CSV to derive both from")
    p.add_argument("--model", help="model used with --campaign")
    p.add_argument("--grid", default="builtin")
    p.add_argument("--out-dir", default="report")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (MetatuneError, OSError, ValueError) as exc:
        print(f"metatune: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
