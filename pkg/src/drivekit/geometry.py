"""Polyline arc-length parametrization, Frenet projection, lane association,
and the oriented-box primitives shared by the collision and corridor checks.

Sign convention: lateral offset d > 0 on the left of the travel direction.
Projections beyond a polyline end clamp s to [0, L] and measure d to the
clamped point, so longitudinal ordering stays well-defined off the ends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import Config
from .scene import AgentCategory, Lane, Pose2, wrap_angle

# categories whose headings are unreliable; they skip the alignment test
POSITION_ONLY_CATEGORIES = frozenset(
    {AgentCategory.PEDESTRIAN, AgentCategory.TRAFFIC_CONE, AgentCategory.BARRIER}
)


@dataclass(frozen=True)
class FrenetCoord:
    s: float  # meters along the polyline from its start
    d: float  # signed lateral offset, positive left
    segment_index: int


def polyline_array(polyline) -> np.ndarray:
    return np.asarray(polyline, dtype=float)


def cumulative_lengths(pts: np.ndarray) -> np.ndarray:
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    return np.concatenate(([0.0], np.cumsum(seg)))


def polyline_length(polyline) -> float:
    pts = polyline_array(polyline)
    return float(cumulative_lengths(pts)[-1])


def project_to_polyline(point, polyline) -> FrenetCoord:
    """Global minimum-distance projection; equidistant candidates take the
    smallest s."""
    pts = polyline_array(polyline)
    p = np.asarray(point, dtype=float)
    a = pts[:-1]
    b = pts[1:]
    d = b - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    t = np.einsum("ij,ij->i", p - a, d) / seg_len2
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * d
    diff = p - proj
    dist2 = np.einsum("ij,ij->i", diff, diff)
    seg_len = np.sqrt(seg_len2)
    cum = np.concatenate(([0.0], np.cumsum(seg_len)))
    s_cand = cum[:-1] + t * seg_len

    order = np.lexsort((s_cand, dist2))
    i = int(order[0])
    cross = d[i, 0] * diff[i, 1] - d[i, 1] * diff[i, 0]
    dist = math.sqrt(float(dist2[i]))
    signed = dist if cross > 0 else (-dist if cross < 0 else 0.0)
    return FrenetCoord(s=float(s_cand[i]), d=signed, segment_index=i)


def tangent_heading(polyline, segment_index: int) -> float:
    pts = polyline_array(polyline)
    dx = pts[segment_index + 1, 0] - pts[segment_index, 0]
    dy = pts[segment_index + 1, 1] - pts[segment_index, 1]
    return math.atan2(dy, dx)


def point_at_arclength(polyline, s: float) -> tuple:
    """Point at arc length s; beyond the ends, extend along the end tangent."""
    pts = polyline_array(polyline)
    cum = cumulative_lengths(pts)
    total = float(cum[-1])
    if s <= 0.0:
        h = tangent_heading(pts, 0)
        return (pts[0, 0] + s * math.cos(h), pts[0, 1] + s * math.sin(h))
    if s >= total:
        h = tangent_heading(pts, len(pts) - 2)
        extra = s - total
        return (pts[-1, 0] + extra * math.cos(h), pts[-1, 1] + extra * math.sin(h))
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(i, len(pts) - 2)
    seg = float(cum[i + 1] - cum[i])
    t = (s - float(cum[i])) / seg
    return (
        float(pts[i, 0] + t * (pts[i + 1, 0] - pts[i, 0])),
        float(pts[i, 1] + t * (pts[i + 1, 1] - pts[i, 1])),
    )


@dataclass(frozen=True)
class LaneAssociation:
    lane_id: int
    frenet: FrenetCoord


def associate_lane(
    pose: Pose2, lanes, config: Config, check_heading: bool = True
) -> Optional[LaneAssociation]:
    """Best eligible lane for a pose, or None (NOTON downstream).

    Eligible: |d| <= half_width + margin and, when check_heading, heading
    within theta_align of the local tangent. Minimum |d| wins; ties break by
    lane id order.
    """
    best: Optional[LaneAssociation] = None
    for lane in sorted(lanes, key=lambda l: l.id):
        fc = project_to_polyline((pose.x, pose.y), lane.centerline)
        if abs(fc.d) > lane.half_width + config.lane_margin:
            continue
        if check_heading:
            tangent = tangent_heading(lane.centerline, fc.segment_index)
            if abs(wrap_angle(pose.heading - tangent)) > config.theta_align:
                continue
        if best is None or abs(fc.d) < abs(best.frenet.d):
            best = LaneAssociation(lane_id=lane.id, frenet=fc)
    return best


def lane_association(
    agent_pose: Pose2, lanes, config: Config, check_heading: bool = True
) -> Optional[int]:
    assoc = associate_lane(agent_pose, lanes, config, check_heading)
    return assoc.lane_id if assoc else None


# --------------------------------------------------------------------------
# rigid transforms


def to_frame(xy, origin: Pose2) -> np.ndarray:
    """Transform world points into the frame anchored at origin."""
    pts = np.asarray(xy, dtype=float)
    c, s = math.cos(origin.heading), math.sin(origin.heading)
    dx = pts[..., 0] - origin.x
    dy = pts[..., 1] - origin.y
    return np.stack((c * dx + s * dy, -s * dx + c * dy), axis=-1)


def from_frame(xy, origin: Pose2) -> np.ndarray:
    """Transform frame-local points back into the world."""
    pts = np.asarray(xy, dtype=float)
    c, s = math.cos(origin.heading), math.sin(origin.heading)
    x = origin.x + c * pts[..., 0] - s * pts[..., 1]
    y = origin.y + s * pts[..., 0] + c * pts[..., 1]
    return np.stack((x, y), axis=-1)


# --------------------------------------------------------------------------
# oriented boxes


def obb_corners(center, heading: float, length: float, width: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)], dtype=float)
    rot = np.array([(c, -s), (s, c)], dtype=float)
    return local @ rot.T + np.asarray(center, dtype=float)


def obb_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Separating-axis test for two convex quads; touching counts as overlap."""
    for quad in (corners_a, corners_b):
        edges = np.roll(quad, -1, axis=0) - quad
        for ex, ey in edges[:2]:  # rectangle: two unique edge directions
            ax, ay = -ey, ex
            pa = corners_a[:, 0] * ax + corners_a[:, 1] * ay
            pb = corners_b[:, 0] * ax + corners_b[:, 1] * ay
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    len2 = float(ab @ ab)
    if len2 == 0.0:
        return float(np.hypot(*(p - a)))
    t = min(1.0, max(0.0, float((p - a) @ ab) / len2))
    return float(np.hypot(*(p - (a + t * ab))))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect(p0, p1, q0, q1) -> bool:
    # proper transversal crossing only; touching/collinear configurations are
    # covered by the zero endpoint distances in the caller
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    d3 = _orient(p0, p1, q0)
    d4 = _orient(p0, p1, q1)
    return (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0)


def _segment_segment_distance(p0, p1, q0, q1) -> float:
    """Exact distance between two segments: zero on crossing, otherwise the
    minimum is attained at one of the four endpoints."""
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    q0 = np.asarray(q0, float)
    q1 = np.asarray(q1, float)
    if _segments_intersect(p0, p1, q0, q1):
        return 0.0
    return min(
        _point_segment_distance(p0, q0, q1),
        _point_segment_distance(p1, q0, q1),
        _point_segment_distance(q0, p0, p1),
        _point_segment_distance(q1, p0, p1),
    )


def point_obb_distance(point, center, heading: float, length: float, width: float) -> float:
    pose = Pose2(float(center[0]), float(center[1]), heading)
    local = to_frame(np.asarray(point, float), pose)
    dx = max(abs(float(local[0])) - 0.5 * length, 0.0)
    dy = max(abs(float(local[1])) - 0.5 * width, 0.0)
    return math.hypot(dx, dy)


def segment_obb_distance(p0, p1, center, heading: float, length: float, width: float) -> float:
    pose = Pose2(float(center[0]), float(center[1]), heading)
    a = to_frame(np.asarray(p0, float), pose)
    b = to_frame(np.asarray(p1, float), pose)
    hl, hw = 0.5 * length, 0.5 * width
    inside = lambda q: abs(q[0]) <= hl and abs(q[1]) <= hw  # noqa: E731
    if inside(a) or inside(b):
        return 0.0
    rect = np.array([(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)], dtype=float)
    best = math.inf
    for i in range(4):
        e0 = rect[i]
        e1 = rect[(i + 1) % 4]
        best = min(best, _segment_segment_distance(a, b, e0, e1))
        if best == 0.0:
            return 0.0
    return best


def polyline_obb_distance(pts, center, heading: float, length: float, width: float) -> float:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1 or len(pts) == 1:
        p = pts if pts.ndim == 1 else pts[0]
        return point_obb_distance(p, center, heading, length, width)
    best = math.inf
    for i in range(len(pts) - 1):
        best = min(best, segment_obb_distance(pts[i], pts[i + 1], center, heading, length, width))
        if best == 0.0:
            return 0.0
    return best
