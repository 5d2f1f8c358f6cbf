"""Command-line interface: synth, train, predict, eval, inspect.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blocks import AttentionConfig, attention_mask
from .channelsel import write_channel_report
from .corpus import SplitConfig, labeled_dir_pair, load_image, scan_corpus, write_manifest
from .ensemble import EnsembleConfig, image_score
from .errors import APixelHopError
from .gbdt import BoostConfig
from .pipeline import TrainConfig, evaluate, train_detector
from .store import format_param_report, load, param_report, save
from .synthgen import SynthConfig, write_corpus

REPORT_HEADER = ["subset", "auc", "ap", "acc", "n_real", "n_fake"]


def set_threads(n: int | None) -> None:
    import numba

    if n is None:
        env = os.environ.get("APIX_THREADS")
        n = int(env) if env else None
    if n is not None:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _subset(text: str) -> tuple[str, str, str]:
    parts = text.split(":")
    if len(parts) != 3 or not all(parts):
        raise argparse.ArgumentTypeError("subset must be NAME:REAL_DIR:FAKE_DIR")
    return parts[0], parts[1], parts[2]


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--n-sel", type=int, default=2, choices=[1, 2, 3, 4])
    p.add_argument("--p", type=float, default=20.0, help="percent of soft decisions taken from both tails")
    p.add_argument("--tail", type=_positive_int, default=13, help="values sampled per tail")
    p.add_argument("--blocks-per-image", type=_positive_int, default=64)
    p.add_argument("--n-trees", type=_positive_int, default=100)
    p.add_argument("--max-depth", type=_positive_int, default=6)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--target-side", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=7)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apixelhop", description="Attentive PixelHop fake-image detector")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic real/fake corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=_positive_int, default=100, help="images per class")
    p.add_argument("--side", type=_positive_int, default=256)
    p.add_argument("--factor", type=_positive_int, default=4, help="upsampling factor of fakes")
    p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("train", help="train a detector")
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.add_argument("--kernels", choices=["selected", "full"], default="selected",
                   help="store only the selected channels' kernels, or all")
    p.add_argument("--report-channels", help="CSV file for per-channel AUCs")
    p.add_argument("--manifest", help="CSV file listing path,label,split")
    p.add_argument("--stamp", action="store_true", help="record wall-clock creation time")
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("predict", help="score images")
    p.add_argument("--model", required=True)
    p.add_argument("images", nargs="+")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--header", action="store_true", help="emit a path,score,label header line")
    p.add_argument("--dump-attention", metavar="DIR", help="write selected-block masks as PNG")
    p.add_argument("--threads", type=_positive_int)

    p = sub.add_parser("eval", help="evaluate on labeled subsets")
    p.add_argument("--model")
    p.add_argument("--real")
    p.add_argument("--fake")
    p.add_argument("--subset", action="append", type=_subset, default=[], metavar="NAME:REAL:FAKE")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--leave-one-out", action="store_true",
                   help="train on all subsets but one, test on the held-out one, for each subset")
    _add_train_flags(p)
    p.add_argument("--threads", type=_positive_int)

    p = sub.add_parser("inspect", help="print a model's parameter table")
    p.add_argument("--model", required=True)
    return parser


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        attention=AttentionConfig(blocks_per_image=args.blocks_per_image),
        boost=BoostConfig(n_trees=args.n_trees, max_depth=args.max_depth, learning_rate=args.learning_rate),
        ensemble=EnsembleConfig(p=args.p, tail=args.tail),
        n_sel_per_unit=args.n_sel,
        seed=args.seed,
        target_side=args.target_side,
    )


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_per_class=args.n, side=args.side, seed=args.seed, upsample_factor=args.factor)
    real, fake = write_corpus(cfg, args.out)
    print(f"wrote {len(real)} real and {len(fake)} fake images to {args.out}")
    return 0


def cmd_train(args) -> int:
    set_threads(args.threads)
    cfg = _train_config(args)
    train, val = scan_corpus(args.real, args.fake, SplitConfig(args.val_frac, args.seed))
    if args.manifest:
        write_manifest([train, val], args.manifest)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    model = train_detector(train, val, cfg, log=log, stamp=args.stamp)
    save(model, args.out, kernels=args.kernels)
    if args.report_channels:
        write_channel_report(model.bank, args.report_channels)
    print("selected channels:")
    for r in model.bank.selected:
        print(f"  {r.key.unit}x{r.key.unit}x3 channel {r.key.k:2d}  train AUC {r.train_auc:.4f}  val AUC {r.val_auc:.4f}")
    print(f"bank size: {len(model.bank)}")
    print(format_param_report(param_report(model, args.kernels)))
    return 0


def cmd_predict(args) -> int:
    set_threads(args.threads)
    model = load(args.model)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    skipped = 0
    try:
        w = csv.writer(out, lineterminator="\n")
        if args.header:
            w.writerow(["path", "score", "label"])
        for path in args.images:
            try:
                image = load_image(path, model.target_side)
            except (APixelHopError, OSError) as exc:
                print(f"skipping {path}: {exc}", file=sys.stderr)
                skipped += 1
                continue
            score = image_score(image, model)
            w.writerow([path, repr(score), "fake" if score >= args.threshold else "real"])
            if args.dump_attention:
                from PIL import Image

                Path(args.dump_attention).mkdir(parents=True, exist_ok=True)
                Image.fromarray(attention_mask(image, model.attention)).save(
                    Path(args.dump_attention) / (Path(path).stem + "_attention.png"))
    finally:
        if args.out:
            out.close()
    return 1 if skipped else 0


def _write_report(rows, out_path):
    out = open(out_path, "w", newline="") if out_path else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for name, r in rows:
            w.writerow([name, f"{r['auc']:.6f}", f"{r['ap']:.6f}", f"{r['acc']:.6f}", r["n_real"], r["n_fake"]])
        w.writerow(["mAP", f"{np.mean([r['auc'] for _, r in rows]):.6f}", f"{np.mean([r['ap'] for _, r in rows]):.6f}",
                    f"{np.mean([r['acc'] for _, r in rows]):.6f}",
                    sum(r["n_real"] for _, r in rows), sum(r["n_fake"] for _, r in rows)])
    finally:
        if out_path:
            out.close()


def cmd_eval(args, parser) -> int:
    set_threads(args.threads)
    subsets = list(args.subset)
    if args.real or args.fake:
        if not (args.real and args.fake):
            parser.error("--real and --fake must be given together")
        subsets.insert(0, ("default", args.real, args.fake))
    if not subsets:
        parser.error("give --real/--fake or at least one --subset")
    sets = {name: labeled_dir_pair(r, f) for name, r, f in subsets}
    rows = []
    if args.leave_one_out:
        if len(sets) < 2:
            parser.error("--leave-one-out needs at least two subsets")
        cfg = _train_config(args)
        for held in sets:
            pooled = [it for name, s in sets.items() if name != held for it in s.items]
            reals = [p for p, lab in pooled if lab == 0]
            fakes = [p for p, lab in pooled if lab == 1]
            train, val = _split_items(reals, fakes, SplitConfig(args.val_frac, args.seed))
            model = train_detector(train, val, cfg, log=lambda m: print(f"[{held}] {m}", file=sys.stderr))
            rows.append((held, evaluate(model, sets[held], args.threshold)))
    else:
        if not args.model:
            parser.error("--model is required unless --leave-one-out is given")
        model = load(args.model)
        rows = [(name, evaluate(model, s, args.threshold)) for name, s in sets.items()]
    _write_report(rows, args.out)
    return 0


def _split_items(reals, fakes, split: SplitConfig):
    from .corpus import LabeledSet, _round_half_up

    train, val = [], []
    for label, paths in ((0, sorted(reals)), (1, sorted(fakes))):
        n_val = min(_round_half_up(split.val_fraction * len(paths)), len(paths) - 1)
        perm = np.random.default_rng([split.seed, label]).permutation(len(paths))
        val_idx = set(perm[:n_val].tolist())
        for i, p in enumerate(paths):
            (val if i in val_idx else train).append((p, label))
    return LabeledSet(train, "train"), LabeledSet(val, "val")


def cmd_inspect(args) -> int:
    model = load(args.model)
    stored = "selected" if all(not u.is_full for u in model.units.values()) else "full"
    print(format_param_report(param_report(model, stored)))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "predict":
            return cmd_predict(args)
        if args.command == "eval":
            return cmd_eval(args, parser)
        return cmd_inspect(args)
    except (APixelHopError, OSError, ValueError) as exc:
        print(f"apixelhop {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
