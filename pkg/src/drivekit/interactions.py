"""Interaction labels and critical-object determination.

Heuristics combine lane-mode patterns, ego lane decisions, and speed profiles.
A JSON sidecar of human-accepted labels can be merged over the heuristic
output; the sidecar wins on (agent_id, kind, overlapping span).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .config import Config
from .errors import SchemaError
from .geometry import polyline_obb_distance
from .relations import EgoLaneDecision, LaneMode, RelationOutputs
from .scene import AgentCategory, Scene


class InteractionKind(enum.Enum):
    BYPASS_CONES = "BYPASS_CONES"
    YIELD_TO_PEDESTRIAN = "YIELD_TO_PEDESTRIAN"
    YIELD_TO_VEHICLE = "YIELD_TO_VEHICLE"
    OVERTAKE_STRADDLE = "OVERTAKE_STRADDLE"
    OVERTAKE_LANE_CHANGE = "OVERTAKE_LANE_CHANGE"


class Side(enum.Enum):
    LEFT = "LEFT"
    RIGHT = "RIGHT"


_SIDED_KINDS = {
    InteractionKind.BYPASS_CONES,
    InteractionKind.OVERTAKE_STRADDLE,
    InteractionKind.OVERTAKE_LANE_CHANGE,
}

VEHICLE_CATEGORIES = frozenset(
    {
        AgentCategory.CAR,
        AgentCategory.TRUCK,
        AgentCategory.BUS,
        AgentCategory.MOTORCYCLE,
        AgentCategory.BICYCLE,
    }
)
BLOCKING_CATEGORIES = frozenset({AgentCategory.TRAFFIC_CONE, AgentCategory.BARRIER})


@dataclass(frozen=True)
class InteractionLabel:
    agent_id: int
    kind: InteractionKind
    side: Optional[Side]
    frame_span: Tuple[int, int]  # inclusive

    def __post_init__(self):
        start, end = self.frame_span
        if start > end:
            raise SchemaError("frame_span start must not exceed end")
        if self.kind in _SIDED_KINDS and self.side is None:
            raise SchemaError(f"{self.kind.value} requires a side")

    def covers(self, frame: int) -> bool:
        return self.frame_span[0] <= frame <= self.frame_span[1]

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "kind": self.kind.value,
            "side": self.side.value if self.side else None,
            "frame_span": [self.frame_span[0], self.frame_span[1]],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InteractionLabel":
        try:
            side = data.get("side")
            return cls(
                agent_id=int(data["agent_id"]),
                kind=InteractionKind(data["kind"]),
                side=Side(side) if side else None,
                frame_span=(int(data["frame_span"][0]), int(data["frame_span"][1])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad interaction label record: {exc}") from None


class CriticalReason(enum.Enum):
    HAS_INTERACTION = "HAS_INTERACTION"
    IN_EGO_CORRIDOR = "IN_EGO_CORRIDOR"
    NONE = "NONE"


@dataclass(frozen=True)
class Criticality:
    agent_id: int
    critical: bool
    reason: CriticalReason


def _mode_runs(modes) -> list:
    """Compress a per-frame mode sequence into (mode, start, end) runs."""
    runs = []
    start = 0
    for f in range(1, len(modes) + 1):
        if f == len(modes) or modes[f] is not modes[start]:
            runs.append((modes[start], start, f - 1))
            start = f
    return runs


def _mean_abs_speed(track, start: int, end: int) -> float:
    speeds = [abs(st.speed) for st in track.states[start : end + 1] if st.valid]
    return float(np.mean(speeds)) if speeds else 0.0


def _pass_patterns(modes) -> list:
    """(span, lateral mode) for each AHEAD -> LEFT/RIGHT -> BEHIND run triple."""
    runs = _mode_runs(modes)
    found = []
    for (m0, s0, _), (m1, s1, e1), (m2, s2, _) in zip(runs, runs[1:], runs[2:]):
        if (
            m0 is LaneMode.AHEAD
            and m1 in (LaneMode.LEFT, LaneMode.RIGHT)
            and m2 is LaneMode.BEHIND
        ):
            found.append(((s0, s2), m1, (s1, e1)))
    return found


def _overtake_kind(decisions) -> Optional[InteractionKind]:
    """Kind of a pass from the ego decisions during the lateral phase: a
    KEEP_LANE dwell on the neighbor lane means a committed lane change,
    straddle frames without a dwell mean a divider-straddling pass."""
    if any(d is EgoLaneDecision.KEEP_LANE for d in decisions):
        return InteractionKind.OVERTAKE_LANE_CHANGE
    if any(d is EgoLaneDecision.STRADDLE for d in decisions):
        return InteractionKind.OVERTAKE_STRADDLE
    if any(
        d in (EgoLaneDecision.LEFT_LANE_CHANGE, EgoLaneDecision.RIGHT_LANE_CHANGE)
        for d in decisions
    ):
        return InteractionKind.OVERTAKE_LANE_CHANGE
    return None


def _stopped_runs(speeds, v_stop: float) -> list:
    runs = []
    start = None
    for f, v in enumerate(speeds):
        stopped = abs(v) < v_stop
        if stopped and start is None:
            start = f
        elif not stopped and start is not None:
            runs.append((start, f - 1))
            start = None
    if start is not None:
        runs.append((start, len(speeds) - 1))
    return runs


def label_interactions(
    scene: Scene, rel: RelationOutputs, config: Config
) -> List[InteractionLabel]:
    """Heuristic interaction labels, in canonical (agent id, start frame) order.

    Passes fire on the AHEAD -> LEFT/RIGHT -> BEHIND lane-mode pattern for a
    static-or-slower agent; blocking categories read BYPASS_CONES, vehicles
    read OVERTAKE_*. Yields fire when the ego holds below v_stop while the
    agent sits AHEAD within d_yield and has cleared by the resume frame.
    """
    labels: List[InteractionLabel] = []
    ego_speeds = [st.speed for st in scene.ego.states]
    stop_runs = _stopped_runs(ego_speeds, config.v_stop)

    for track in scene.agents:
        modes = rel.lane_modes[track.id]
        gaps = rel.lon_gaps[track.id]

        if track.category in VEHICLE_CATEGORIES or track.category in BLOCKING_CATEGORIES:
            for (start, end), lateral, (mid_s, mid_e) in _pass_patterns(modes):
                if _mean_abs_speed(track, start, end) >= _mean_abs_speed(
                    scene.ego, start, end
                ):
                    continue
                side = Side.LEFT if lateral is LaneMode.LEFT else Side.RIGHT
                if track.category in BLOCKING_CATEGORIES:
                    kind = InteractionKind.BYPASS_CONES
                else:
                    kind = _overtake_kind(rel.ego_decisions[mid_s : mid_e + 1])
                    if kind is None:
                        continue
                labels.append(
                    InteractionLabel(
                        agent_id=track.id, kind=kind, side=side, frame_span=(start, end)
                    )
                )

        if track.category is AgentCategory.PEDESTRIAN or track.category in VEHICLE_CATEGORIES:
            def _blocks(f: int) -> bool:
                return (
                    modes[f] is LaneMode.AHEAD
                    and gaps[f] is not None
                    and gaps[f] <= config.d_yield
                )

            for run_start, run_end in stop_runs:
                resume = run_end + 1
                if resume >= scene.n_frames:
                    continue  # scene ends stopped: no resume, no yield
                if not any(_blocks(f) for f in range(run_start, run_end + 1)):
                    continue
                if _blocks(resume):
                    continue  # agent has not cleared by the resume frame
                kind = (
                    InteractionKind.YIELD_TO_PEDESTRIAN
                    if track.category is AgentCategory.PEDESTRIAN
                    else InteractionKind.YIELD_TO_VEHICLE
                )
                labels.append(
                    InteractionLabel(
                        agent_id=track.id,
                        kind=kind,
                        side=None,
                        frame_span=(run_start, run_end),
                    )
                )

    labels.sort(key=lambda l: (l.agent_id, l.frame_span[0], l.kind.value))
    return labels


def ego_corridor(scene: Scene, frame: int, config: Config) -> np.ndarray:
    """Ego ground-truth path over the next t_corridor seconds, as points."""
    last = min(scene.n_frames - 1, frame + round(config.t_corridor * scene.frame_rate))
    pts = [
        (st.pose.x, st.pose.y)
        for st in scene.ego.states[frame : last + 1]
        if st.valid
    ]
    return np.asarray(pts, dtype=float)


def critical_objects(
    scene: Scene, labels: List[InteractionLabel], frame: int, config: Config
) -> List[Criticality]:
    """Criticality per agent at a frame: an active interaction label, or a
    footprint within the dilated ego corridor; interaction takes precedence."""
    corridor = ego_corridor(scene, frame, config)
    dilation = 0.5 * scene.ego.states[frame].box[1] + config.corridor_margin
    out = []
    for track in scene.agents:
        reason = CriticalReason.NONE
        if any(l.agent_id == track.id and l.covers(frame) for l in labels):
            reason = CriticalReason.HAS_INTERACTION
        else:
            st = track.states[frame]
            if st.valid and len(corridor) > 0:
                dist = polyline_obb_distance(
                    corridor,
                    (st.pose.x, st.pose.y),
                    st.pose.heading,
                    st.box[0],
                    st.box[1],
                )
                if dist <= dilation:
                    reason = CriticalReason.IN_EGO_CORRIDOR
        out.append(
            Criticality(
                agent_id=track.id,
                critical=reason is not CriticalReason.NONE,
                reason=reason,
            )
        )
    return out


def _spans_overlap(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def merge_override_labels(
    heuristic: List[InteractionLabel], sidecar: List[InteractionLabel]
) -> List[InteractionLabel]:
    """Merge human-verified labels over heuristic output: a sidecar label
    replaces every heuristic label sharing (agent_id, kind) with an
    overlapping span; the rest of both lists pass through."""
    kept = [
        h
        for h in heuristic
        if not any(
            s.agent_id == h.agent_id
            and s.kind == h.kind
            and _spans_overlap(s.frame_span, h.frame_span)
            for s in sidecar
        )
    ]
    merged = kept + list(sidecar)
    merged.sort(key=lambda l: (l.agent_id, l.frame_span[0], l.kind.value))
    return merged
