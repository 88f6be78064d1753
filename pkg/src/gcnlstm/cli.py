"""Command-line entry point: ``gcnlstm <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as D
from .evaluate import alpha_grid, alpha_sweep, caption_all, evaluate_captions, format_sweep_csv
from .graph import RelationGraph, dumps_graph, parse_graph
from .inference import DEFAULT_ALPHA, DEFAULT_BEAM, DEFAULT_MAX_LEN, MODES, generate
from .model import Branch, canonical_kind, label_names_for
from .params import dumps_checkpoint, load_checkpoint
from .semantic import RelationTrainConfig, build_semantic_graph, train_relation_classifier
from .selfcheck import full_model_gradcheck
from .train import TrainConfig, train_branch


def _read_graphs(path, kind: str, n_sem: int) -> dict[str, RelationGraph]:
    labels = label_names_for(kind, n_sem)
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        doc = json.loads(line)
        out[str(doc["image_id"])] = parse_graph(line, labels=labels, line_offset=n - 1)
    return out


def _config(args) -> TrainConfig:
    cfg = TrainConfig.load(args.config) if args.config else TrainConfig.desk()
    doc = cfg.to_json()
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "max_iters", None) is not None:
        doc["max_iters"] = args.max_iters
    return TrainConfig(**doc)


def _branches(args) -> dict[str, Branch]:
    out = {}
    for key in ("sem", "spa"):
        path = getattr(args, key, None)
        if path:
            b = Branch.load(path)
            if b.kind != key:
                raise ValueError(f"--{key} checkpoint holds a {b.kind} branch")
            out[key] = b
    needed = ("sem", "spa") if args.mode == "fused" else (args.mode,)
    missing = [k for k in needed if k not in out]
    if missing:
        raise ValueError(f"mode {args.mode} needs checkpoints for {missing}")
    if len(out) == 2 and out["sem"].vocab != out["spa"].vocab:
        raise ValueError("semantic and spatial checkpoints use different vocabularies")
    return out


def cmd_gen_data(args) -> int:
    spec = D.SyntheticSpec(d_v=args.d_v, n_sem=args.n_sem, n_categories=max(args.categories, args.k), max_captions=args.max_captions)
    scenes = D.generate_synthetic_corpus(args.n_scenes, args.k, args.d_v, seed=args.seed or 0, spec=spec)
    D.write_scenes(args.out, scenes)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


def cmd_train_relation(args) -> int:
    scenes = D.read_scenes(args.scenes)
    parts = [D.pair_arrays(s) for s in scenes if s.k > 1]
    subj, obj, union, labels = (np.concatenate([p[c] for p in parts]) for c in range(4))
    cfg = RelationTrainConfig(steps=args.steps, lr=args.lr, seed=args.seed or 0)
    res = train_relation_classifier(subj, obj, union, labels, args.n_sem, cfg)
    Path(args.out).write_text(dumps_checkpoint(res.params, {"kind": "relation", "n_sem": args.n_sem}))
    print(json.dumps({"initial_loss": res.initial_loss, "final_loss": res.final_loss}))
    return 0


def cmd_build_graphs(args) -> int:
    scenes = D.read_scenes(args.scenes)
    kind = canonical_kind(args.kind)
    params = None
    if kind == "sem" and args.classifier:
        params, _ = load_checkpoint(args.classifier)
    with open(args.out, "w") as fh:
        for s in scenes:
            if kind == "spa":
                g = s.spatial_graph()
            elif params is not None:
                if s.union_features is None:
                    raise ValueError(f"scene {s.image_id} has no union features")
                g = build_semantic_graph(s.features, s.union_features, params)
            else:
                g = s.semantic_graph(args.n_sem)
            fh.write(dumps_graph(g, image_id=s.image_id) + "\n")
    print(f"wrote {len(scenes)} {args.kind} graphs to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    scenes = D.read_scenes(args.scenes)
    kind = canonical_kind(args.kind)
    graphs = _read_graphs(args.graphs, kind, cfg.n_sem) if args.graphs else None
    res = train_branch(scenes, kind, cfg, graphs)
    res.branch.save(args.out, {"config": cfg.to_json()})
    if args.loss_curve:
        res.write_loss_curve(args.loss_curve)
    print(json.dumps({"kind": kind, "iterations": len(res.losses), "first_loss": res.losses[0][1], "last_loss": res.losses[-1][1]}))
    return 0


def _caption_graphs(args, branches):
    per_kind = {}
    for key in branches:
        path = getattr(args, f"{key}_graphs", None)
        if path:
            per_kind[key] = _read_graphs(path, key, len(branches[key].label_names) - 1)
    return per_kind


def _captions(args):
    scenes = D.read_scenes(args.scenes)
    branches = _branches(args)
    per_kind = _caption_graphs(args, branches)
    if per_kind:
        caps = [
            generate(
                s,
                branches,
                mode=args.mode,
                beam=args.beam,
                alpha=args.alpha,
                max_len=args.max_len,
                graphs={k: g[s.image_id] for k, g in per_kind.items()},
            )
            for s in scenes
        ]
    else:
        caps = caption_all(scenes, branches, args.mode, args.beam, args.alpha, args.max_len)
    return scenes, branches, caps


def cmd_caption(args) -> int:
    _, _, caps = _captions(args)
    with open(args.out, "w") as fh:
        for c in caps:
            fh.write(json.dumps(c.to_json(), sort_keys=True) + "\n")
    if args.attention:
        with open(args.attention, "w") as fh:
            for c in caps:
                for row in c.attention:
                    fh.write(json.dumps({"image_id": c.image_id, **row}, sort_keys=True) + "\n")
    print(f"wrote {len(caps)} captions to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    if args.captions:
        scenes = D.read_scenes(args.scenes)
        by_id = {}
        for line in Path(args.captions).read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                by_id[str(rec["image_id"])] = rec["caption"].split()
        missing = [s.image_id for s in scenes if s.image_id not in by_id]
        if missing:
            raise ValueError(f"no caption for scenes {missing[:5]}")
        words = [by_id[s.image_id] for s in scenes]
        echo = {"captions": args.captions}
    else:
        scenes, _, caps = _captions(args)
        words = [c.words for c in caps]
        echo = {"mode": args.mode, "beam": args.beam, "alpha": args.alpha, "max_len": args.max_len}
    report = evaluate_captions(scenes, words, config=echo, seed=args.seed)
    text = json.dumps(report.to_json(), sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(json.dumps(report.bleu, sort_keys=True))
    return 0


def cmd_alpha_sweep(args) -> int:
    scenes = D.read_scenes(args.scenes)
    args.mode = "fused"
    branches = _branches(args)
    grid = [float(a) for a in args.grid.split(",")] if args.grid else alpha_grid(args.points)
    rows = alpha_sweep(scenes, branches, grid, beam=args.beam, max_len=args.max_len)
    text = format_sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    reports = full_model_gradcheck(args.instances, seed=args.seed or 0, tol=args.tol)
    ok = True
    for n, rep in enumerate(reports):
        name, worst = rep.worst
        print(f"instance {n}: {'PASS' if rep.passed else 'FAIL'} worst {name} rel_err={worst:.3e}")
        if args.verbose or not rep.passed:
            for line in rep.lines():
                print("  " + line)
        ok &= rep.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcnlstm", description="Relation-graph image captioning at desk scale.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None)
        return sp

    g = common(sub.add_parser("gen-data", help="write a synthetic scenes file"))
    g.add_argument("--out", required=True)
    g.add_argument("--n-scenes", type=int, default=50)
    g.add_argument("--k", type=int, default=6)
    g.add_argument("--d-v", type=int, default=64)
    g.add_argument("--n-sem", type=int, default=4)
    g.add_argument("--categories", type=int, default=12)
    g.add_argument("--max-captions", type=int, default=5)
    g.set_defaults(func=cmd_gen_data)

    r = common(sub.add_parser("train-relation", help="train the semantic relation classifier"))
    r.add_argument("--scenes", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--n-sem", type=int, default=4)
    r.add_argument("--steps", type=int, default=400)
    r.add_argument("--lr", type=float, default=1e-2)
    r.set_defaults(func=cmd_train_relation)

    b = common(sub.add_parser("build-graphs", help="export semantic or spatial graphs"), seed=False)
    b.add_argument("--scenes", required=True)
    b.add_argument("--kind", choices=["semantic", "spatial"], required=True)
    b.add_argument("--classifier", help="relation classifier checkpoint (semantic only)")
    b.add_argument("--n-sem", type=int, default=4)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_graphs)

    t = common(sub.add_parser("train", help="train one branch"))
    t.add_argument("--scenes", required=True)
    t.add_argument("--kind", choices=["semantic", "spatial"], required=True)
    t.add_argument("--config")
    t.add_argument("--graphs")
    t.add_argument("--max-iters", type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--loss-curve")
    t.set_defaults(func=cmd_train)

    def decoding(sp):
        sp.add_argument("--scenes", required=True)
        sp.add_argument("--sem", help="semantic branch checkpoint")
        sp.add_argument("--spa", help="spatial branch checkpoint")
        sp.add_argument("--sem-graphs")
        sp.add_argument("--spa-graphs")
        sp.add_argument("--beam", type=int, default=DEFAULT_BEAM)
        sp.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
        return sp

    c = decoding(common(sub.add_parser("caption", help="caption scenes")))
    c.add_argument("--mode", choices=MODES, default="fused")
    c.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    c.add_argument("--out", required=True)
    c.add_argument("--attention")
    c.set_defaults(func=cmd_caption)

    e = decoding(common(sub.add_parser("evaluate", help="BLEU@1-4 of captions")))
    e.add_argument("--captions", help="captions JSONL; generated when omitted")
    e.add_argument("--mode", choices=MODES, default="fused")
    e.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    a = decoding(common(sub.add_parser("alpha-sweep", help="BLEU@4 over a grid of fusion weights")))
    a.add_argument("--points", type=int, default=11)
    a.add_argument("--grid", help="comma-separated alphas, overrides --points")
    a.add_argument("--out")
    a.set_defaults(func=cmd_alpha_sweep)

    k = common(sub.add_parser("gradcheck", help="finite-difference check of the full model"))
    k.add_argument("--instances", type=int, default=5)
    k.add_argument("--tol", type=float, default=1e-4)
    k.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - surfaced as a machine-readable error
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
