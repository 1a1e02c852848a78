"""Batch command-line interface.

Subcommands: validate, label, gen-qa, synth, tokenize, evaluate. Every command
is deterministic given identical inputs and config; per-scene work can fan out
with --jobs, results are always written in scene-id order. Failures exit
nonzero with a machine-readable JSON error on stderr.

Config precedence: flag > config file > default.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import Config
from .errors import DrivekitError, RefError, SchemaError
from .interactions import InteractionLabel, critical_objects, label_interactions, merge_override_labels
from .metrics import PlanSample, evaluate_plans, report_csv
from .qa import (
    QATask,
    gen_perception_qas,
    gen_planning_qas,
    gen_reasoning_qas,
    load_templates,
)
from .metrics import future_complete
from .relations import compute_relations, relations_records
from .scene import canonical_dumps, load_scene_file, save_scene_file
from .synth import synth_corpus
from .tokens import fixture_encode, write_bundle


def _resolve_config(args) -> Config:
    config = Config.from_file(args.config) if args.config else Config()
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    return config


def _load_scenes(paths):
    scenes = []
    for path in paths:
        try:
            scenes.append(load_scene_file(path))
        except DrivekitError as exc:
            raise type(exc)(f"{path}: {exc.message}") from None
    scenes.sort(key=lambda s: s.id)
    return scenes


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


# --------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    failures = 0
    for path in args.scenes:
        try:
            scene = load_scene_file(path)
            print(_dump({"path": str(path), "ok": True, "scene_id": scene.id}))
        except DrivekitError as exc:
            failures += 1
            print(
                _dump(
                    {
                        "path": str(path),
                        "ok": False,
                        "error": exc.code,
                        "message": exc.message,
                    }
                )
            )
    return 1 if failures else 0


# --------------------------------------------------------------------------
# label


def _label_scene(path: str, config_dict: dict):
    config = Config.from_dict(config_dict)
    scene = load_scene_file(path)
    rel = compute_relations(scene, config)
    labels = label_interactions(scene, rel, config)
    lines = [_dump(r) for r in relations_records(scene, rel)]
    lines.append(
        _dump(
            {
                "scene_id": scene.id,
                "interactions": [label.to_dict() for label in labels],
            }
        )
    )
    return scene.id, lines


def _map_jobs(fn, items, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, *zip(*items))) if items else []
    return [fn(*item) for item in items]


def cmd_label(args) -> int:
    config = _resolve_config(args)
    items = [(str(p), config.to_dict()) for p in sorted(args.scenes)]
    results = _map_jobs(_label_scene, items, args.jobs)
    results.sort(key=lambda r: r[0])
    lines = [line for _, scene_lines in results for line in scene_lines]
    _write_lines(args.out, lines)
    print(_dump({"scenes": len(results), "records": len(lines), "out": str(args.out)}))
    return 0


# --------------------------------------------------------------------------
# gen-qa


def _qa_scene(path: str, config_dict: dict, sidecar_json: str, templates_path):
    config = Config.from_dict(config_dict)
    templates = load_templates(templates_path)
    scene = load_scene_file(path)
    rel = compute_relations(scene, config)
    labels = label_interactions(scene, rel, config)
    if sidecar_json:
        # sidecar records may carry an optional scene_id to scope them; an
        # unscoped record applies to any scene holding that agent
        agent_ids = {t.id for t in scene.agents}
        sidecar = [
            InteractionLabel.from_dict(d)
            for d in json.loads(sidecar_json)
            if d.get("scene_id") in (None, scene.id) and int(d["agent_id"]) in agent_ids
        ]
        labels = merge_override_labels(labels, sidecar)
    lines = []
    for frame in range(scene.n_frames):
        crits = critical_objects(scene, labels, frame, config)
        records = gen_perception_qas(scene, frame, rel, crits, config, templates)
        records += gen_reasoning_qas(scene, frame, rel, labels, crits, config, templates)
        if future_complete(scene.ego, frame, scene.frame_rate):
            records.append(
                gen_planning_qas(scene, frame, rel, labels, crits, config, templates)
            )
        order = {task: i for i, task in enumerate(QATask)}
        records.sort(key=lambda r: (r.frame, order[r.task], r.id))
        lines.extend(_dump(r.to_dict()) for r in records)
    return scene.id, lines


def cmd_gen_qa(args) -> int:
    config = _resolve_config(args)
    sidecar_json = ""
    if args.labels:
        sidecar_json = Path(args.labels).read_text(encoding="utf-8")
    items = [
        (str(p), config.to_dict(), sidecar_json, args.templates)
        for p in sorted(args.scenes)
    ]
    results = _map_jobs(_qa_scene, items, args.jobs)
    results.sort(key=lambda r: r[0])
    lines = [line for _, ls in results for line in ls]
    _write_lines(args.out, lines)
    print(_dump({"scenes": len(results), "records": len(lines), "out": str(args.out)}))
    return 0


# --------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    counts = spec.get("counts", spec if all(isinstance(v, int) for v in spec.values()) else {})
    base_seed = spec.get("base_seed", 0) if "counts" in spec else 0
    params = spec.get("params") if "counts" in spec else None
    config = _resolve_config(args)
    scenes, manifest = synth_corpus(counts, base_seed, params, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for scene in scenes:
        save_scene_file(scene, out_dir / f"{scene.id}.json")
    (out_dir / "manifest.json").write_text(canonical_dumps(manifest) + "\n", "utf-8")
    print(_dump({"scenes": len(scenes), "out_dir": str(out_dir)}))
    return 0


# --------------------------------------------------------------------------
# tokenize


def _tokenize_scene(path: str, seed: int, out_dir: str):
    scene = load_scene_file(path)
    written = []
    for frame in range(scene.n_frames):
        bundle = fixture_encode(scene, frame, seed)
        dest = Path(out_dir) / f"{scene.id}_f{frame:04d}.tokb"
        write_bundle(bundle, dest)
        written.append(str(dest))
    return scene.id, written


def cmd_tokenize(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [(str(p), config.seed, str(out_dir)) for p in sorted(args.scenes)]
    results = _map_jobs(_tokenize_scene, items, args.jobs)
    print(_dump({"bundles": sum(len(w) for _, w in results), "out_dir": str(out_dir)}))
    return 0


# --------------------------------------------------------------------------
# evaluate


def _load_plans(path):
    plans = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                plans.append(
                    PlanSample(
                        scene_id=record["scene_id"],
                        frame=int(record["frame"]),
                        waypoints=tuple((float(x), float(y)) for x, y in record["waypoints"]),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise SchemaError(f"{path}:{i + 1}: bad plan record: {exc}") from None
    return plans


def _plan_svg(pred, gt) -> str:
    import numpy as np

    pts = np.vstack([[[0.0, 0.0]], np.asarray(pred, float), np.asarray(gt, float)])
    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    span = max(float((hi - lo).max()), 1e-6)
    size = 360.0

    def map_xy(p):
        # x forward -> up, y left -> left (plot rotated into a driver's view)
        u = (p[1] - lo[1]) / span * size
        v = size - (p[0] - lo[0]) / span * size
        return size - u, v

    def poly(arr, color):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (map_xy(p) for p in arr))
        return (
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )

    pred_path = np.vstack([[[0.0, 0.0]], np.asarray(pred, float)])
    gt_path = np.vstack([[[0.0, 0.0]], np.asarray(gt, float)])
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">'
        f'<rect width="100%" height="100%" fill="white"/>'
        + poly(gt_path, "#2a9d2a")
        + poly(pred_path, "#d43a3a")
        + "</svg>\n"
    )


def cmd_evaluate(args) -> int:
    config = _resolve_config(args)
    scenes = {s.id: s for s in _load_scenes(args.scenes)}
    plans = _load_plans(args.plans)
    missing = sorted({p.scene_id for p in plans} - set(scenes))
    if missing:
        raise RefError(f"plans reference unknown scenes: {', '.join(missing)}")
    report = evaluate_plans(plans, scenes, config)

    out = Path(args.out)
    payload = {"config": config.to_dict(), "report": report.to_dict()}
    out.with_suffix(".json").write_text(canonical_dumps(payload) + "\n", "utf-8")
    out.with_suffix(".csv").write_text(report_csv(report), "utf-8")

    if args.plots:
        from .metrics import apply_frame_mask
        from .planners import ego_future_waypoints

        plot_dir = Path(args.plots)
        plot_dir.mkdir(parents=True, exist_ok=True)
        kept, _ = apply_frame_mask(plans, scenes)
        for sample in sorted(kept, key=lambda p: (p.scene_id, p.frame)):
            gt = ego_future_waypoints(scenes[sample.scene_id], sample.frame)
            svg = _plan_svg(sample.waypoints, gt)
            (plot_dir / f"{sample.scene_id}_f{sample.frame:04d}.svg").write_text(svg, "utf-8")
    print(_dump({"n_samples": report.n_samples, "n_masked": report.n_masked}))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivekit",
        description="Scene labeling, QA generation, token plumbing, plan "
        "evaluation, and long-tail scenario synthesis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenes=True):
        p.add_argument("--config", help="JSON config file (see README for keys)")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel scene workers")
        if scenes:
            p.add_argument("scenes", nargs="+", help="scene JSON files")

    p = sub.add_parser("validate", help="validate scene files")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("label", help="write relations + interaction labels JSONL")
    common(p)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("gen-qa", help="write the QA corpus JSONL")
    common(p)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--labels", help="interaction label sidecar JSON to merge")
    p.add_argument("--templates", help="template JSON file (default: built-in)")
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("synth", help="synthesize a scene corpus")
    common(p, scenes=False)
    p.add_argument("--spec", required=True, help="corpus spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tokenize", help="write TOKB fixture bundles per frame")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("evaluate", help="score a plan file against scenes")
    common(p)
    p.add_argument("--plans", required=True, help="plan JSONL file")
    p.add_argument("--out", required=True, help="report path prefix (.json/.csv)")
    p.add_argument("--plots", help="optional directory for per-sample SVG plots")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DrivekitError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
