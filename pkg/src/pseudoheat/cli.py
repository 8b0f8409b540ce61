"""Command line entry point: ``pseudoheat <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import io as pio
from .config import Config, load_config
from .core import seeded_rng


def _config(path) -> Config:
    return load_config(path) if path else Config()


def cmd_cluster(args) -> int:
    from .heatmap import write_pgm
    from .pipeline import segment_frame

    cfg = _config(args.config)
    cloud = pio.read_point_file(args.points)
    sem = pio.read_label_file(args.semantics, len(cloud)).semantic
    off = pio.read_offsets_file(args.offsets, len(cloud))
    fr = segment_frame(cloud, sem, off, cfg, algo=args.algo)
    pio.write_label_file(args.out, fr.labels)
    if args.heatmap_pgm:
        if fr.cluster.heatmap is None:
            print("no heatmap for this algorithm", file=sys.stderr)
        else:
            write_pgm(args.heatmap_pgm, fr.cluster.heatmap)
    n_inst = len(np.unique(fr.labels.instance[fr.labels.instance > 0]))
    print(f"points {len(cloud)}  thing elements {fr.n_thing_elements}  instances {n_inst}")
    for k, v in fr.timings.items():
        print(f"{k:>20s} {v:9.3f} ms")
    return 0


def cmd_eval(args) -> int:
    from .metrics import PanopticEvaluator

    cfg = _config(args.config)
    if len(args.pred) != len(args.gt):
        print("error: --pred and --gt need the same number of files", file=sys.stderr)
        return 2
    ev = PanopticEvaluator(cfg.table, cfg.min_segment_points)
    for p, g in zip(args.pred, args.gt):
        gt = pio.read_label_file(g)
        ev.add_frame(pio.read_label_file(p, len(gt)), gt)
    rep = ev.report()
    text = rep.to_json()
    if args.json:
        with open(args.json, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(rep.to_csv(cfg.table.names))
    return 0


def cmd_synth(args) -> int:
    from .synth import SceneSpec, generate_scene

    with open(args.spec) as f:
        spec = SceneSpec.from_json(f.read())
    scene = generate_scene(spec)
    stem = args.out
    pio.write_point_file(stem + ".bin", scene.cloud)
    pio.write_label_file(stem + ".label", scene.labels)
    pio.write_offsets_file(stem + ".offsets", scene.offsets)
    print(f"wrote {len(scene.cloud)} points, {len(scene.centers)} instances to {stem}.*")
    return 0


_PRESETS = ("separated", "crowded", "bus", "latency")


def _preset(name, table, seed):
    from . import synth

    return {
        "separated": synth.separated_instances,
        "crowded": synth.crowded_pedestrians,
        "bus": synth.partial_bus,
        "latency": synth.latency_scene,
    }[name](table, seed=seed)


def cmd_synth_bench(args) -> int:
    from .bench import sweep, write_csv
    from .synth import SceneSpec

    cfg = _config(args.config)
    if args.spec:
        with open(args.spec) as f:
            spec = SceneSpec.from_json(f.read())
    else:
        seed = cfg.seed if args.seed is None else args.seed
        spec = replace(_preset(args.preset, cfg.table, seed), center_mode=cfg.center_mode)
    sigmas = [float(s) for s in args.sigmas.split(",") if s]
    algos = [a for a in args.algos.split(",") if a]
    rows = sweep(spec, cfg, sigmas, algos, n_seeds=args.seeds)
    if args.out:
        with open(args.out, "w") as f:
            write_csv(rows, f)
    else:
        write_csv(rows, sys.stdout)
    return 0


def cmd_attn_check(args) -> int:
    from .knn_attention import AttentionWeights, ThingFeatures, attention_forward, knn_indices
    from .reference import dense_attention

    cfg = _config(args.config)
    k = cfg.knn_k if args.k is None else args.k
    seed = cfg.seed if args.seed is None else args.seed
    heads = cfg.attention_heads if args.heads is None else args.heads
    if args.m < 1:
        raise ValueError(f"--m must be positive, got {args.m}")
    rng = seeded_rng(seed)
    feats = ThingFeatures(rng.normal(size=(args.m, args.channels)), rng.uniform(-10, 10, size=(args.m, 3)))
    w = AttentionWeights.random(args.channels, heads=heads, ff=cfg.ff_mult * args.channels, seed=seed + 1)
    idx = knn_indices(feats.positions, k)
    out = attention_forward(feats, idx, w)
    if k >= args.m:
        ref, what = dense_attention(feats.features, w), "dense attention"
    else:
        ref, what = dense_attention(feats.features, w, idx), "masked dense attention"
    dev = float(np.max(np.abs(out - ref)) / max(np.max(np.abs(ref)), 1e-300))
    print(f"M={args.m} k={k} max relative deviation vs {what}: {dev:.3e}")
    return 0 if dev < 1e-6 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudoheat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="panoptic labels from points, semantics and offsets")
    c.add_argument("--points", required=True, help="KITTI .bin point file")
    c.add_argument("--semantics", required=True, help=".label file (lower 16 bits used)")
    c.add_argument("--offsets", required=True, help="float32 (dx, dy) per point")
    c.add_argument("--config", help="JSON config")
    c.add_argument("--out", required=True, help="output .label file")
    c.add_argument("--algo", default="phnet", choices=["phnet", "phnet-nogroup", "meanshift", "dbscan"])
    c.add_argument("--heatmap-pgm", help="dump the pseudo heatmap as a 16-bit PGM")
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("eval", help="PQ/SQ/RQ/mIoU report for label files")
    e.add_argument("--pred", required=True, nargs="+")
    e.add_argument("--gt", required=True, nargs="+")
    e.add_argument("--config")
    e.add_argument("--json", help="write the JSON report here instead of stdout")
    e.add_argument("--csv", help="also write one CSV row per class")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic scene (.bin/.label/.offsets)")
    s.add_argument("--spec", required=True, help="SceneSpec JSON")
    s.add_argument("--out", required=True, help="output path stem")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("synth-bench", help="noise x algorithm sweep on synthetic scenes")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="SceneSpec JSON")
    src.add_argument("--preset", choices=_PRESETS)
    b.add_argument("--sigmas", default="0,0.05,0.1,0.2,0.4")
    b.add_argument("--algos", default="phnet,meanshift,dbscan")
    b.add_argument("--seeds", type=int, default=1)
    b.add_argument("--seed", type=int, help="preset seed (default: config seed)")
    b.add_argument("--config")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_synth_bench)

    a = sub.add_parser("attn-check", help="knn attention vs dense reference")
    a.add_argument("--m", type=int, required=True)
    a.add_argument("--k", type=int, help="neighbors per query (default: config knn_k)")
    a.add_argument("--seed", type=int, help="default: config seed")
    a.add_argument("--channels", type=int, default=32)
    a.add_argument("--heads", type=int, help="default: config attention_heads")
    a.add_argument("--config")
    a.set_defaults(func=cmd_attn_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
