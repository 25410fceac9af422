"""Evaluation campaign engine: datapoint x iteration episode loops with
seeded start-orientation randomization, per-episode logs, outcome
aggregation, and byte-reproducible reports.

Per-episode seeds derive from (campaign seed, datapoint id, iteration), so
parallel workers produce exactly the serial results.
"""

from __future__ import annotations

import base64
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .control import PDGains
from .dataset import Datapoint, load_datapoint, load_dataset_map, stable_json, stable_json_line
from .episode import EpisodeStatus, advance_episode, episode_log_lines, start_episode
from .errors import CanvasNavError, NoPath
from .geometry import Polyline, Pose2, polyline_length
from .metrics import EpisodeOutcome, aggregate_report, check_violations, frechet_resampled
from .policies import ActContext, BaselinePolicy, OraclePolicy, Policy, RemotePolicy
from .render import encode_png, render_canvas, render_front_view
from .sim import SimConfig
from .tokenizer import WaypointCodebook

FD_RESOLUTION = 0.1


@dataclass(frozen=True)
class RunConfig:
    dataset_root: str
    out_dir: Optional[str] = None
    policy: str = "oracle"
    environments: tuple = ()          # empty: every env dir under the root
    iterations: int = 3
    seed: int = 0
    workers: int = 1
    codebook_path: Optional[str] = None
    gains: PDGains = PDGains()
    sim: SimConfig = SimConfig()

    def header(self) -> dict:
        # worker count is an execution detail: it must not change any output
        # byte, so it stays out of the provenance header
        return {
            "policy": self.policy,
            "iterations": self.iterations,
            "seed": self.seed,
            "gains": self.gains.to_dict(),
            "sim": self.sim.to_dict(),
        }


def make_policy(spec: str, cfg: SimConfig, codebook: Optional[WaypointCodebook]) -> Policy:
    if spec == "baseline":
        return BaselinePolicy(cfg)
    if spec == "baseline:legacy":
        return BaselinePolicy(cfg, legacy_perception=True)
    if spec == "oracle":
        return OraclePolicy(cfg)
    if spec == "oracle:tokens":
        return OraclePolicy(cfg, codebook=codebook)
    if spec.startswith("remote:"):
        return RemotePolicy(spec[len("remote:"):], codebook=codebook)
    raise CanvasNavError(f"unknown policy spec {spec!r}")


def episode_seed(campaign_seed: int, dp_id: str, iteration: int) -> int:
    digest = hashlib.sha256(f"{campaign_seed}:{dp_id}:{iteration}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def run_episode(grid, regions, dp: Datapoint, policy: Policy, gains: PDGains,
                cfg: SimConfig, heading_offset: float,
                codebook: Optional[WaypointCodebook] = None,
                iteration: int = 0):
    """One full episode; returns (EpisodeOutcome, log lines)."""
    start = Pose2(dp.start_pose.x, dp.start_pose.y, dp.start_pose.heading + heading_offset)
    ep = start_episode(dp.id, start, dp.goal, polyline_length(dp.sketch), cfg)
    policy.reset()

    def render_fn():
        canvas = render_canvas(grid, dp.sketch, ep.hindsight, ep.robot.pose)
        front = render_front_view(grid, ep.robot.pose)
        return (base64.b64encode(encode_png(front)).decode(),
                base64.b64encode(encode_png(canvas)).decode())

    ctx = ActContext(ep=ep, world=grid, sketch=dp.sketch, language=dp.language,
                     demo=dp.demo, codebook=codebook,
                     render_fn=render_fn if policy.wants_renders else None)
    used_fallback = False
    no_path = False
    while ep.status is EpisodeStatus.Running:
        try:
            waypoints = policy.act(ctx)
        except NoPath:
            no_path = True
            break
        advance_episode(ep, grid, waypoints, gains, cfg)
        latency = getattr(policy, "last_latency_s", None)
        if latency is not None:
            ep.tick_records[-1]["latency_s"] = latency
    used_fallback = bool(getattr(policy, "used_fallback", False))

    fd = None
    if dp.demo is not None and len(ep.trace_points) >= 2:
        fd = frechet_resampled(Polyline(np.array(ep.trace_points)), dp.demo, FD_RESOLUTION)
    active_regions = [r for r in regions if r.id in set(dp.constraints)]
    times, points = ep.executed_trace()
    violations = check_violations(times, points, active_regions, grid)
    outcome = EpisodeOutcome(
        datapoint_id=dp.id,
        environment=dp.environment,
        condition=dp.condition,
        success=ep.status is EpisodeStatus.Success,
        collided=len(ep.collision_events) > 0,
        frechet_to_demo=fd,
        violations=violations,
        iteration=iteration,
        extras={"used_fallback": used_fallback, "no_path": no_path,
                "ticks": ep.tick, "status": ep.status.value},
    )
    return outcome, episode_log_lines(ep)


@lru_cache(maxsize=8)
def _cached_env(dataset_root: str, env: str):
    env_dir = Path(dataset_root) / env
    grid, regions = load_dataset_map(env_dir)
    dps = {}
    for path in sorted((env_dir / "datapoints").glob("dp_*.json")):
        dp = load_datapoint(path)
        dps[dp.id] = dp
    return grid, regions, dps


@lru_cache(maxsize=4)
def _cached_codebook(path: str) -> WaypointCodebook:
    return WaypointCodebook.from_json(Path(path).read_text())


def _run_one(args):
    config, env, dp_id, iteration = args
    grid, regions, dps = _cached_env(config.dataset_root, env)
    dp = dps[dp_id]
    codebook = _cached_codebook(config.codebook_path) if config.codebook_path else None
    policy = make_policy(config.policy, config.sim, codebook)
    rng = np.random.default_rng(episode_seed(config.seed, dp_id, iteration))
    heading_offset = float(rng.uniform(-math.pi, math.pi))
    outcome, log_lines = run_episode(grid, regions, dp, policy, config.gains, config.sim,
                                     heading_offset, codebook, iteration)
    if config.out_dir:
        log_dir = Path(config.out_dir) / "episodes"
        log_dir.mkdir(parents=True, exist_ok=True)
        log_path = log_dir / f"{dp_id}_iter{iteration}.jsonl"
        log_path.write_text("\n".join(log_lines) + ("\n" if log_lines else ""), encoding="utf-8")
    return (env, dp_id, iteration), outcome


def discover_environments(dataset_root, wanted=()) -> list:
    root = Path(dataset_root)
    envs = sorted(d.name for d in root.iterdir()
                  if d.is_dir() and (d / "map.pgm").exists())
    if wanted:
        missing = [e for e in wanted if e not in envs]
        if missing:
            raise CanvasNavError(f"environments not found under {root}: {missing}")
        envs = [e for e in envs if e in wanted]
    return envs


def run_eval(config: RunConfig) -> tuple:
    """Run the full campaign; returns (EvalReport, outcomes). Writes
    report.json/report.txt/outcomes.jsonl plus per-episode logs when
    out_dir is set."""
    envs = discover_environments(config.dataset_root, config.environments)
    specs = []
    for env in envs:
        _, _, dps = _cached_env(config.dataset_root, env)
        for dp_id in sorted(dps):
            for iteration in range(config.iterations):
                specs.append((config, env, dp_id, iteration))
    results = {}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for key, outcome in pool.map(_run_one, specs, chunksize=1):
                results[key] = outcome
    else:
        for spec in specs:
            key, outcome = _run_one(spec)
            results[key] = outcome
    outcomes = [results[k] for k in sorted(results)]
    report = aggregate_report(outcomes, header=config.header())
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(stable_json(report.to_dict()), encoding="utf-8")
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        lines = [stable_json_line(o.to_dict()) for o in outcomes]
        (out / "outcomes.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report, outcomes
