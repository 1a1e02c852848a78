"""Reference planners that exercise the evaluation harness end to end.

Every planner emits exactly 6 waypoints at uniform 0.5 s spacing in the
anchor-frame ego coordinates.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .config import Config
from .errors import InsufficientFutureError, NoLaneError
from .geometry import associate_lane, point_at_arclength, to_frame
from .metrics import PLAN_DT, PLAN_STEPS, _steps_per_frame, future_complete
from .scene import Scene, Trajectory


def _trajectory(xy) -> Trajectory:
    return Trajectory(
        waypoints=tuple(
            (PLAN_DT * (k + 1), float(x), float(y)) for k, (x, y) in enumerate(xy)
        )
    )


def ego_future_waypoints(scene: Scene, frame: int, steps: int = PLAN_STEPS) -> np.ndarray:
    """Ground-truth ego future resampled to plan steps, in the anchor ego frame."""
    if not future_complete(scene.ego, frame, scene.frame_rate, steps):
        raise InsufficientFutureError(
            f"scene {scene.id} frame {frame}: ground-truth future incomplete"
        )
    spf = _steps_per_frame(scene.frame_rate)
    anchor = scene.ego.states[frame].pose
    pts = np.array(
        [
            (
                scene.ego.states[frame + (k + 1) * spf].pose.x,
                scene.ego.states[frame + (k + 1) * spf].pose.y,
            )
            for k in range(steps)
        ]
    )
    return to_frame(pts, anchor)


def replay_planner(scene: Scene, frame: int) -> Trajectory:
    """Oracle planner: replays the ground-truth ego future."""
    return _trajectory(ego_future_waypoints(scene, frame))


def constant_velocity_planner(scene: Scene, frame: int) -> Trajectory:
    """Extrapolates the current ego velocity vector for 3 s."""
    speed = scene.ego.states[frame].speed
    xy = [(speed * PLAN_DT * (k + 1), 0.0) for k in range(PLAN_STEPS)]
    return _trajectory(xy)


def plan_record(scene_id: str, frame: int, trajectory: Trajectory) -> dict:
    """One plan-file record: {scene_id, frame, waypoints[6][2]}."""
    return {
        "scene_id": scene_id,
        "frame": frame,
        "waypoints": [[x, y] for _, x, y in trajectory.waypoints],
    }


def write_plan_file(records, path) -> None:
    """JSON-lines plan file, the input format of the evaluation command."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def lane_follow_planner(
    scene: Scene,
    frame: int,
    target_speed: Optional[float] = None,
    config: Optional[Config] = None,
) -> Trajectory:
    """Advances along the associated lane centerline by arc length; past the
    lane end it continues along the final tangent."""
    config = config or Config()
    state = scene.ego.states[frame]
    assoc = associate_lane(state.pose, scene.lanes, config, check_heading=True)
    if assoc is None:
        raise NoLaneError(f"scene {scene.id} frame {frame}: ego is not on any lane")
    lane = scene.lane_by_id(assoc.lane_id)
    speed = target_speed if target_speed is not None else abs(state.speed)
    anchor = state.pose
    pts = np.array(
        [
            point_at_arclength(lane.centerline, assoc.frenet.s + speed * PLAN_DT * (k + 1))
            for k in range(PLAN_STEPS)
        ]
    )
    return _trajectory(to_frame(pts, anchor))
