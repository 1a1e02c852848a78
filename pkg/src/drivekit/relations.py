"""Per-frame agent-ego lane modes, pairwise homotopy classes, ego lane
decisions, and road-level navigation command labeling.

Lane modes give lateral relations precedence over longitudinal ones: an agent
on a lane reachable by left/right neighbor hops reads LEFT/RIGHT even while it
is longitudinally offset, which is what makes an overtaken object read
AHEAD -> LEFT -> BEHIND as the ego laps it through the adjacent lane.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import Config
from .errors import DegenerateError, TopologyCycleError
from .geometry import (
    POSITION_ONLY_CATEGORIES,
    LaneAssociation,
    associate_lane,
    polyline_length,
)
from .scene import NavigationCommand, LaneSemantic, Scene, wrap_angle


class LaneMode(enum.Enum):
    LEFT = "LEFT"
    RIGHT = "RIGHT"
    AHEAD = "AHEAD"
    BEHIND = "BEHIND"
    NOTON = "NOTON"


class HomotopyClass(enum.Enum):
    S = "S"
    CW = "CW"
    CCW = "CCW"


@dataclass(frozen=True)
class Homotopy:
    kind: HomotopyClass
    winding: float  # signed accumulated angle, radians


class EgoLaneDecision(enum.Enum):
    KEEP_LANE = "KEEP_LANE"
    LEFT_LANE_CHANGE = "LEFT_LANE_CHANGE"
    RIGHT_LANE_CHANGE = "RIGHT_LANE_CHANGE"
    STRADDLE = "STRADDLE"


# --------------------------------------------------------------------------
# agent-ego lane mode


def _lateral_chain(lanes_by_id: dict, start: int, attr: str, max_hops: int) -> list:
    chain = []
    seen = {start}
    cur = start
    for _ in range(max_hops):
        nxt = getattr(lanes_by_id[cur], attr)
        if nxt is None:
            break
        if nxt in seen or len(chain) + 1 > len(lanes_by_id):
            raise TopologyCycleError(
                f"{attr} chain from lane {start} revisits lane {nxt}"
            )
        chain.append(nxt)
        seen.add(nxt)
        cur = nxt
    return chain


def _longitudinal_delta(
    lanes_by_id: dict,
    ego_lane: int,
    agent_lane: int,
    ego_s: float,
    agent_s: float,
    max_hops: int,
) -> Optional[float]:
    """Signed arc-length offset of the agent along the ego lane's
    successor/predecessor chain, or None if the agent lane is not on it."""
    if agent_lane == ego_lane:
        return agent_s - ego_s

    best: Optional[float] = None
    lengths = {lid: polyline_length(ln.centerline) for lid, ln in lanes_by_id.items()}

    # successors: offset accumulates past the end of the ego lane
    frontier: List[Tuple[int, float]] = [(ego_lane, lengths[ego_lane] - ego_s)]
    for _ in range(max_hops):
        nxt: List[Tuple[int, float]] = []
        for lid, acc in frontier:
            for suc in sorted(lanes_by_id[lid].successors):
                delta = acc + agent_s
                if suc == agent_lane and (best is None or abs(delta) < abs(best)):
                    best = delta
                nxt.append((suc, acc + lengths[suc]))
        frontier = nxt

    # predecessors: offset accumulates behind the start of the ego lane
    frontier = [(ego_lane, ego_s)]
    for _ in range(max_hops):
        nxt = []
        for lid, acc in frontier:
            for pre in sorted(lanes_by_id[lid].predecessors):
                delta = -(acc + (lengths[pre] - agent_s))
                if pre == agent_lane and (best is None or abs(delta) < abs(best)):
                    best = delta
                nxt.append((pre, acc + lengths[pre]))
        frontier = nxt

    return best


def agent_ego_lane_mode(
    agent_lane: Optional[int],
    ego_lane: Optional[int],
    lanes_by_id: dict,
    agent_s: Optional[float],
    ego_s: Optional[float],
    config: Config,
) -> Tuple[LaneMode, Optional[float]]:
    """Topological relation of the agent's lane to the ego's lane.

    Returns the mode plus the longitudinal offset when one is defined (used by
    downstream gap heuristics).
    """
    if agent_lane is None or ego_lane is None:
        return LaneMode.NOTON, None

    if agent_lane != ego_lane:
        if agent_lane in _lateral_chain(lanes_by_id, ego_lane, "left_neighbor", config.k_lat):
            return LaneMode.LEFT, None
        if agent_lane in _lateral_chain(lanes_by_id, ego_lane, "right_neighbor", config.k_lat):
            return LaneMode.RIGHT, None

    delta = _longitudinal_delta(
        lanes_by_id, ego_lane, agent_lane, ego_s or 0.0, agent_s or 0.0, config.k_lon
    )
    if delta is None:
        return LaneMode.NOTON, None
    if abs(delta) < config.eps_s_tie:
        return LaneMode.AHEAD, delta
    return (LaneMode.AHEAD if delta > 0 else LaneMode.BEHIND), delta


# --------------------------------------------------------------------------
# homotopy


def classify_homotopy(traj_a, traj_b, theta_s: float, eps_rel: float = 0.05) -> Homotopy:
    """Homotopy class of the relative motion b - a over common frames.

    winding = sum of wrapped increments of atan2(b - a); S when |winding| is
    below theta_s, otherwise the sign picks CCW/CW.
    """
    a = np.asarray(traj_a, dtype=float)
    b = np.asarray(traj_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or len(a) < 2:
        raise DegenerateError("homotopy needs two aligned trajectories of >= 2 frames")
    rel = b - a
    norms = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(norms < eps_rel):
        raise DegenerateError("relative position below eps_rel (coincident agents)")
    angles = np.arctan2(rel[:, 1], rel[:, 0])
    # fsum: correctly rounded total, so windings add exactly across splits
    winding = math.fsum(wrap_angle(float(d)) for d in np.diff(angles))
    if abs(winding) < theta_s:
        kind = HomotopyClass.S
    elif winding > 0:
        kind = HomotopyClass.CCW
    else:
        kind = HomotopyClass.CW
    return Homotopy(kind=kind, winding=winding)


# --------------------------------------------------------------------------
# per-scene association and relation outputs


@dataclass(frozen=True)
class RelationOutputs:
    ego_assoc: tuple  # Optional[LaneAssociation] per frame
    ego_decisions: tuple  # EgoLaneDecision per frame
    nav_commands: tuple  # NavigationCommand per frame
    lane_modes: dict  # agent id -> tuple[LaneMode] per frame
    lon_gaps: dict  # agent id -> tuple[Optional[float]] per frame
    agent_assoc: dict  # agent id -> tuple[Optional[LaneAssociation]] per frame


def _ego_associations(scene: Scene, config: Config) -> list:
    return [
        associate_lane(st.pose, scene.lanes, config, check_heading=True)
        for st in scene.ego.states
    ]


def ego_lane_decisions(
    scene: Scene, config: Config, ego_assoc: Optional[list] = None
) -> list:
    """Per-frame ego decision: lane-change on association-switch frames,
    straddle while the footprint crosses the divider, keep-lane otherwise."""
    assoc = ego_assoc if ego_assoc is not None else _ego_associations(scene, config)
    lanes_by_id = {ln.id: ln for ln in scene.lanes}
    decisions = []
    prev_lane: Optional[int] = None
    for f, la in enumerate(assoc):
        if la is None:
            decisions.append(EgoLaneDecision.KEEP_LANE)
            continue
        decision = EgoLaneDecision.KEEP_LANE
        lane = lanes_by_id[la.lane_id]
        if prev_lane is not None and la.lane_id != prev_lane:
            prev = lanes_by_id[prev_lane]
            if prev.left_neighbor == la.lane_id:
                decision = EgoLaneDecision.LEFT_LANE_CHANGE
            elif prev.right_neighbor == la.lane_id:
                decision = EgoLaneDecision.RIGHT_LANE_CHANGE
        if decision is EgoLaneDecision.KEEP_LANE:
            ego_width = scene.ego.states[f].box[1]
            if abs(la.frenet.d) > lane.half_width - 0.5 * ego_width:
                decision = EgoLaneDecision.STRADDLE
        decisions.append(decision)
        prev_lane = la.lane_id
    return decisions


def _heading_deltas(headings: list) -> list:
    return [wrap_angle(b - a) for a, b in zip(headings, headings[1:])]


def label_nav_commands(
    scene: Scene, config: Config, ego_assoc: Optional[list] = None
) -> list:
    """Road-level navigation command per frame, labeled offline from the full
    episode.

    Forward window of nav_window_s seconds: heading change beyond theta_uturn
    reads U-turn, or 3-point turn when the window contains reversing frames;
    changes in [theta_turn, theta_uturn) read turn while the ego is on an
    intersection lane and prepare-to-turn while one is within d_prep ahead.
    """
    assoc = ego_assoc if ego_assoc is not None else _ego_associations(scene, config)
    lanes_by_id = {ln.id: ln for ln in scene.lanes}
    n = scene.n_frames
    headings = [st.pose.heading for st in scene.ego.states]
    speeds = [st.speed for st in scene.ego.states]
    positions = np.array([(st.pose.x, st.pose.y) for st in scene.ego.states])
    deltas = _heading_deltas(headings)
    step = np.hypot(*(np.diff(positions, axis=0).T)) if n > 1 else np.array([])

    on_intersection = [
        la is not None
        and lanes_by_id[la.lane_id].semantic is LaneSemantic.INTERSECTION
        for la in assoc
    ]

    window = max(1, round(config.nav_window_s * scene.frame_rate))
    commands = []
    for t in range(n):
        end = min(t + window, n - 1)
        dpsi = sum(deltas[t:end])
        reversal = any(s < config.v_rev for s in speeds[t : end + 1])
        if abs(dpsi) >= config.theta_uturn:
            if reversal:
                cmd = (
                    NavigationCommand.THREE_POINT_TURN_LEFT
                    if dpsi > 0
                    else NavigationCommand.THREE_POINT_TURN_RIGHT
                )
            else:
                cmd = (
                    NavigationCommand.U_TURN_LEFT
                    if dpsi > 0
                    else NavigationCommand.U_TURN_RIGHT
                )
        elif abs(dpsi) >= config.theta_turn:
            if on_intersection[t]:
                cmd = (
                    NavigationCommand.TURN_LEFT
                    if dpsi > 0
                    else NavigationCommand.TURN_RIGHT
                )
            else:
                dist = 0.0
                upcoming = math.inf
                for k in range(t, n - 1):
                    if on_intersection[k]:
                        upcoming = dist
                        break
                    dist += float(step[k])
                else:
                    if n >= 1 and on_intersection[n - 1]:
                        upcoming = dist
                if upcoming < config.d_prep:
                    cmd = (
                        NavigationCommand.PREPARE_TURN_LEFT
                        if dpsi > 0
                        else NavigationCommand.PREPARE_TURN_RIGHT
                    )
                else:
                    cmd = NavigationCommand.KEEP_FORWARD
        else:
            cmd = NavigationCommand.KEEP_FORWARD
        commands.append(cmd)
    return commands


def compute_relations(scene: Scene, config: Config) -> RelationOutputs:
    """Run the full per-scene relation pipeline once; downstream labeling and
    QA generation consume this container."""
    ego_assoc = _ego_associations(scene, config)
    lanes_by_id = {ln.id: ln for ln in scene.lanes}

    lane_modes: Dict[int, tuple] = {}
    lon_gaps: Dict[int, tuple] = {}
    agent_assoc: Dict[int, tuple] = {}
    for track in scene.agents:
        check_heading = track.category not in POSITION_ONLY_CATEGORIES
        assoc_per_frame: List[Optional[LaneAssociation]] = []
        modes: List[LaneMode] = []
        gaps: List[Optional[float]] = []
        for f, st in enumerate(track.states):
            if not st.valid:
                assoc_per_frame.append(None)
                modes.append(LaneMode.NOTON)
                gaps.append(None)
                continue
            la = associate_lane(st.pose, scene.lanes, config, check_heading)
            assoc_per_frame.append(la)
            ego_la = ego_assoc[f]
            mode, gap = agent_ego_lane_mode(
                la.lane_id if la else None,
                ego_la.lane_id if ego_la else None,
                lanes_by_id,
                la.frenet.s if la else None,
                ego_la.frenet.s if ego_la else None,
                config,
            )
            modes.append(mode)
            gaps.append(gap)
        lane_modes[track.id] = tuple(modes)
        lon_gaps[track.id] = tuple(gaps)
        agent_assoc[track.id] = tuple(assoc_per_frame)

    decisions = ego_lane_decisions(scene, config, ego_assoc)
    nav = label_nav_commands(scene, config, ego_assoc)
    return RelationOutputs(
        ego_assoc=tuple(ego_assoc),
        ego_decisions=tuple(decisions),
        nav_commands=tuple(nav),
        lane_modes=lane_modes,
        lon_gaps=lon_gaps,
        agent_assoc=agent_assoc,
    )


def relations_records(scene: Scene, rel: RelationOutputs) -> list:
    """One JSON-able record per frame: lane modes, ego decision, nav command."""
    records = []
    for f in range(scene.n_frames):
        records.append(
            {
                "scene_id": scene.id,
                "frame": f,
                "lane_modes": {
                    str(track.id): rel.lane_modes[track.id][f].value
                    for track in scene.agents
                },
                "ego_decision": rel.ego_decisions[f].value,
                "nav_command": rel.nav_commands[f].value,
            }
        )
    return records
