"""Command line surface: synth | train | evolve | eval | report.

Every run writes a JSON manifest next to its primary output recording the
resolved configuration, master seed, inputs, output checksums, and duration.
"""

import argparse
import hashlib
import json
import sys
import time

from . import checkpoint, data, evo, metrics, pipeline, report, train as trainer
from .errors import EvorocError
from .nn import build_model
from .rng import RngStream


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(command, args, primary_out, inputs, outputs, started):
    manifest = {
        "command": command,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": args.seed,
        "inputs": inputs,
        "outputs": {p: _sha256(p) for p in outputs},
        "duration_seconds": round(time.time() - started, 3),
    }
    path = f"{primary_out}.manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _profile(args):
    return pipeline.PROFILES[args.profile]


def cmd_synth(args):
    started = time.time()
    cfg = data.SynthConfig(
        n_patients=args.patients or _profile(args)["patients"], master_seed=args.seed
    )
    dataset = data.generate_synthetic(cfg)
    data.save_dataset(dataset, args.out)
    _write_manifest("synth", args, args.out, {}, [args.out], started)
    print(f"wrote {args.out}: {len(dataset)} slices, {cfg.n_patients} patients")
    return 0


def cmd_train(args):
    started = time.time()
    dataset = data.load_dataset(args.data)
    splits = pipeline.make_splits(dataset, args.seed)
    cfg = trainer.TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        l2_penalty=args.l2,
        max_epochs=args.epochs or _profile(args)["epochs"],
        master_seed=args.seed,
    )
    model0 = build_model(RngStream(args.seed).child("model_init"))
    best, history = trainer.train(model0, splits[0], splits[1], cfg)
    checkpoint.save_model(best, args.out)
    outputs = [args.out]
    if args.history:
        history.to_csv(args.history)
        outputs.append(args.history)
    _write_manifest("train", args, args.out, {args.data: _sha256(args.data)}, outputs, started)
    sel = history.epochs[history.selected_epoch]
    print(
        f"wrote {args.out}: selected epoch {sel.epoch} "
        f"(train_auc={sel.train_auc:.6f}, val_auc={sel.val_auc:.6f})"
    )
    return 0


def cmd_evolve(args):
    started = time.time()
    dataset = data.load_dataset(args.data)
    splits = pipeline.make_splits(dataset, args.seed)
    model = checkpoint.load_model(args.model)
    cfg = evo.EvoConfig(
        population_size=args.population or _profile(args)["population"],
        mutation_probability=args.mutation,
        max_generations=args.max_generations,
        master_seed=args.seed,
    )
    best_head, stats = evo.evolve(model, splits[0], splits[1], cfg)
    checkpoint.save_head(best_head, args.out)
    outputs = [args.out]
    if args.stats:
        evo.write_stats_csv(stats, args.stats)
        outputs.append(args.stats)
    inputs = {args.data: _sha256(args.data), args.model: _sha256(args.model)}
    _write_manifest("evolve", args, args.out, inputs, outputs, started)
    print(f"wrote {args.out}: {len(stats)} generations, max_val_auc={stats[-1].max_val_auc:.6f}")
    return 0


def _split_records(args):
    dataset = data.load_dataset(args.data)
    splits = pipeline.make_splits(dataset, args.seed)
    return dict(zip(("train", "val", "test"), splits))[args.split]


def cmd_eval(args):
    started = time.time()
    records = _split_records(args)
    labels = [r.label for r in records]
    model = checkpoint.load_model(args.model)
    if args.head:
        head = checkpoint.load_head(args.head)
        cache = evo.build_feature_cache(model, records)
        scores = evo.head_scores(head, cache)
    else:
        scores = trainer.positive_scores(model, records)
    value = metrics.auc(scores, labels)
    print(f"{args.split}_auc={value:.6f}")
    if args.roc:
        metrics.roc_curve(scores, labels).to_csv(args.roc)
        _write_manifest(
            "eval", args, args.roc, {args.data: _sha256(args.data)}, [args.roc], started
        )
    return 0


def cmd_report(args):
    started = time.time()
    dataset = data.load_dataset(args.data)
    splits = pipeline.make_splits(dataset, args.seed)
    model = checkpoint.load_model(args.model)
    head = checkpoint.load_head(args.head)
    sgd = pipeline.sgd_metrics(model, splits)
    ga = pipeline.ga_metrics(model, head, splits)
    csv_path, txt_path, improvement = report.write_report(sgd, ga, args.out)
    inputs = {p: _sha256(p) for p in (args.data, args.model, args.head)}
    _write_manifest("report", args, csv_path, inputs, [csv_path, txt_path], started)
    with open(txt_path) as f:
        print(f.read(), end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evoroc",
        description="Train a small CNN with SGD, then fine-tune its FC head with a "
        "layer-level genetic algorithm whose fitness is exact ROC AUC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
        p.add_argument("--profile", choices=sorted(pipeline.PROFILES), default="quick")

    p = sub.add_parser("synth", help="generate a synthetic patient-grouped dataset")
    common(p)
    p.add_argument("--patients", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="SGD-train the CNN, select checkpoint by val AUC")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--momentum", type=float, default=0.8)
    p.add_argument("--l2", type=float, default=0.001)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evolve", help="GA fine-tune the FC head on frozen features")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--mutation", type=float, default=0.01)
    p.add_argument("--max-generations", type=int, default=50)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("eval", help="compute AUC of a model or head on one split")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--head", default=None)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--roc", default=None, help="also export the ROC curve CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="SGD vs GA comparison table with improvement line")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--out", required=True, help="base path; writes <out>.csv and <out>.txt")
    p.set_defaults(func=cmd_report)
    return parser


def run_cli(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvorocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
