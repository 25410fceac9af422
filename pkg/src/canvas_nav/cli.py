"""Command-line entry points: eval campaigns, codebook fitting, supervision
export, rendering, misleading-sketch generation, fixture generation, and the
teleop/annotation service.

Log level comes from the CANVAS_NAV_LOG environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .control import PDGains
from .dataset import (
    atomic_write,
    iter_datapoints,
    load_datapoint,
    load_dataset_map,
    make_misleading,
    save_datapoint,
    stable_json,
    stable_json_line,
)
from .errors import CanvasNavError, CodebookMismatch, InsufficientData, SchemaError
from .fixtures import build_fixture_datasets
from .geometry import to_ego_frame_many
from .render import encode_png, render_canvas, render_front_view
from .runner import RunConfig, run_eval
from .sim import SimConfig
from .tokenizer import WaypointCodebook, extract_supervision, fit_codebook, inertia_of, iter_supervision_groups

log = logging.getLogger("canvas_nav")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3


def _setup_logging():
    level = os.environ.get("CANVAS_NAV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config_file(path: str) -> dict:
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(text.decode())
    return json.loads(text)


def _build_run_config(args) -> RunConfig:
    raw = {}
    if args.config:
        raw = _load_config_file(args.config)
    gains = PDGains(**raw.get("gains", {}))
    sim = SimConfig(**raw.get("sim", {}))
    dataset_root = args.dataset or raw.get("dataset_root")
    if not dataset_root:
        raise CanvasNavError("dataset root required (--dataset or config dataset_root)")
    return RunConfig(
        dataset_root=str(dataset_root),
        out_dir=str(args.out) if args.out else raw.get("out_dir"),
        policy=args.policy or raw.get("policy", "oracle"),
        environments=tuple(args.env or raw.get("environments", ())),
        iterations=args.iterations or raw.get("iterations", 3),
        seed=args.seed if args.seed is not None else raw.get("seed", 0),
        workers=args.workers or raw.get("workers", 1),
        codebook_path=args.codebook or raw.get("codebook_path"),
        gains=gains,
        sim=sim,
    )


def cmd_eval(args) -> int:
    try:
        config = _build_run_config(args)
    except (CanvasNavError, TypeError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, outcomes = run_eval(config)
    except (FileNotFoundError, SchemaError, CanvasNavError) as e:
        print(f"dataset error: {e}", file=sys.stderr)
        return EXIT_DATASET
    print(report.to_text())
    return EXIT_OK


def _collect_ego_waypoints(dataset_root, envs=()):
    from .runner import discover_environments
    samples = []
    for env in discover_environments(dataset_root, envs):
        for dp in iter_datapoints(Path(dataset_root) / env):
            if dp.demo is None:
                continue
            try:
                for _, pose, group, _ in iter_supervision_groups(dp.demo):
                    samples.extend(to_ego_frame_many(pose, group))
            except CanvasNavError:
                continue
    return np.asarray(samples)


def cmd_fit_codebook(args) -> int:
    try:
        samples = _collect_ego_waypoints(args.dataset, tuple(args.env or ()))
        if len(samples) == 0:
            raise InsufficientData("no demonstrations found")
        cb = fit_codebook(samples, K=args.k, seed=args.seed or 0)
    except InsufficientData as e:
        print(f"dataset error: {e}", file=sys.stderr)
        return EXIT_DATASET
    out = Path(args.out or "codebook.json")
    atomic_write(out, cb.to_json() + "\n")
    print(f"fitted K={cb.K} on {len(samples)} waypoints: "
          f"inertia={inertia_of(cb, samples):.4f} max_radius={cb.max_radius:.4f} -> {out}")
    return EXIT_OK


def cmd_export_supervision(args) -> int:
    cb = WaypointCodebook.from_json(Path(args.codebook).read_text())
    if args.k and args.k != cb.K:
        raise CodebookMismatch(f"codebook file has K={cb.K}, requested K={args.k}")
    out_dir = Path(args.out or "supervision")
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    from .runner import discover_environments
    for env in discover_environments(args.dataset, tuple(args.env or ())):
        env_dir = Path(args.dataset) / env
        grid, _ = load_dataset_map(env_dir)
        for dp in iter_datapoints(env_dir):
            if dp.demo is None:
                continue
            try:
                steps = extract_supervision(dp.demo, cb)
            except CanvasNavError:
                continue
            img_dir = out_dir / dp.id
            img_dir.mkdir(exist_ok=True)
            for step in steps:
                canvas = render_canvas(grid, dp.sketch, step.hindsight, step.start_pose)
                front = render_front_view(grid, step.start_pose)
                canvas_path = img_dir / f"tick{step.tick:03d}_canvas.png"
                front_path = img_dir / f"tick{step.tick:03d}_front.png"
                canvas_path.write_bytes(encode_png(canvas))
                front_path.write_bytes(encode_png(front))
                records.append({
                    "datapoint_id": dp.id,
                    "tick": step.tick,
                    "canvas_png_path": str(canvas_path.relative_to(out_dir)),
                    "front_png_path": str(front_path.relative_to(out_dir)),
                    "language": dp.language,
                    "target_tokens": list(step.tokens),
                })
    lines = [stable_json_line(r) for r in records]
    (out_dir / "supervision.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
    if not records:
        print("warning: empty dataset, wrote empty supervision file", file=sys.stderr)
    print(f"wrote {len(records)} supervision records to {out_dir}")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        dp = load_datapoint(args.datapoint)
        env_dir = Path(args.datapoint).parent.parent
        grid, _ = load_dataset_map(env_dir)
    except (FileNotFoundError, SchemaError) as e:
        print(f"dataset error: {e}", file=sys.stderr)
        return EXIT_DATASET
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    hindsight = None
    pose = dp.start_pose
    if args.tick is not None and dp.demo is not None:
        for tick, start_pose, _, hs in iter_supervision_groups(dp.demo):
            if tick == args.tick:
                hindsight = hs
                pose = start_pose
                break
    base = render_canvas(grid)
    canvas = render_canvas(grid, dp.sketch, hindsight, pose)
    front = render_front_view(grid, pose)
    (out / f"{dp.id}_base.png").write_bytes(encode_png(base))
    (out / f"{dp.id}_canvas.png").write_bytes(encode_png(canvas))
    (out / f"{dp.id}_front.png").write_bytes(encode_png(front))
    print(f"wrote {dp.id}_base.png, {dp.id}_canvas.png, {dp.id}_front.png to {out}")
    return EXIT_OK


def cmd_make_misleading(args) -> int:
    try:
        dp = load_datapoint(args.datapoint)
        env_dir = Path(args.datapoint).parent.parent
        grid, _ = load_dataset_map(env_dir)
        noisy = make_misleading(grid, dp.sketch, seed=args.seed or 0)
    except CanvasNavError as e:
        print(f"generation error: {e}", file=sys.stderr)
        return EXIT_DATASET
    out_dp = replace(dp, id=dp.id.replace("_p_", "_m_") + "_gen",
                     sketch=noisy, condition="misleading")
    if out_dp.demo is not None:
        from .dataset import annotate_fd
        out_dp = annotate_fd(out_dp)
    path = Path(args.out) if args.out else Path(args.datapoint).with_name(f"dp_{out_dp.id}.json")
    save_datapoint(out_dp, path, grid)
    print(f"wrote misleading datapoint {out_dp.id} -> {path}")
    return EXIT_OK


def cmd_gen_fixtures(args) -> int:
    summary = build_fixture_datasets(Path(args.out or "datasets"), seed=args.seed or 7)
    print(stable_json(summary).strip())
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(Path(args.dataset), ui_dir=Path(args.ui) if args.ui else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="canvas-nav",
                                     description="sketch+language navigation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="run an evaluation campaign")
    p.add_argument("--dataset", help="dataset root directory")
    p.add_argument("--config", help="TOML/JSON config file")
    p.add_argument("--policy", help="baseline | baseline:legacy | oracle | remote:<endpoint>")
    p.add_argument("--env", action="append", help="restrict to environment (repeatable)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--codebook")
    p.add_argument("--out", help="output directory for reports and logs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit-codebook", help="fit the waypoint token codebook")
    p.add_argument("--dataset", required=True)
    p.add_argument("--env", action="append")
    p.add_argument("--k", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_codebook)

    p = sub.add_parser("export-supervision", help="emit imitation-learning targets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--env", action="append")
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_supervision)

    p = sub.add_parser("render", help="render canvas/front-view PNGs for a datapoint")
    p.add_argument("datapoint", help="path to dp_*.json")
    p.add_argument("--tick", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("make-misleading", help="perturb a precise sketch into a misleading one")
    p.add_argument("datapoint", help="path to dp_*.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_misleading)

    p = sub.add_parser("gen-fixtures", help="write the bundled fixture datasets")
    p.add_argument("--out", default="datasets")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gen_fixtures)

    p = sub.add_parser("serve", help="start the annotation/teleop service")
    p.add_argument("--dataset", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--ui", help="static frontend directory to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CanvasNavError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
