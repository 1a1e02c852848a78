"""Object-token data contract: fixed-width token types, concatenation, the
TOKB binary container, and a deterministic fixture encoder/decoder.

Token components are IEEE-754 single precision end to end: values quantize to
f32 at construction so the binary round trip is bit-exact. The fixture encoder
stands in for a trained tokenizer by planting ground-truth attributes in fixed
slots (and seeded pseudo-noise elsewhere), which makes downstream pipeline
correctness testable without any model.

TOKB layout (little-endian):

    offset  size  field
    0       4     magic "TOKB"
    4       2     version (u16, currently 1)
    6       2     scene id length in bytes (u16)
    8       4     frame index (u32)
    12      4     frame rate in hz (f32)
    16      4     agent token count (u32)
    20      4     map token count (u32)
    24      4     scene token count (u32)
    28      ...   scene id (utf-8), then per-agent [id u64 | 512 f32],
                  per-map [id u64 | 256 f32], per-scene-token [256 f32]
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import FormatError, LengthError, MagicError, TruncatedError, VersionError
from .scene import AgentCategory, LaneSemantic, Scene

TRACK_DIM = 256
MOTION_DIM = 256
MAP_DIM = 256
AGENT_DIM = TRACK_DIM + MOTION_DIM

MAGIC = b"TOKB"
VERSION = 1
HEADER_SIZE = 28
_HEADER = struct.Struct("<4sHHIfIII")

CATEGORY_ORDER = tuple(AgentCategory)  # one-hot order, 9 categories
SEMANTIC_ORDER = tuple(LaneSemantic)  # one-hot order, 3 semantics

# fixed fixture slots in the track half of an agent token
_AGENT_ATTR_SLOTS = 6  # x, y, heading, speed, length, width
_AGENT_ONEHOT_END = _AGENT_ATTR_SLOTS + len(CATEGORY_ORDER)
# fixed fixture slots in a map token
_MAP_ATTR_SLOTS = 4  # x0, y0, x1, y1
_MAP_ONEHOT_END = _MAP_ATTR_SLOTS + len(SEMANTIC_ORDER)


def _quantize(values, expected: int, what: str) -> tuple:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1 or arr.shape[0] != expected:
        raise LengthError(f"{what} must have exactly {expected} components")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{what} components must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TrackToken:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", _quantize(self.values, TRACK_DIM, "track token"))


@dataclass(frozen=True)
class MotionToken:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", _quantize(self.values, MOTION_DIM, "motion token"))


@dataclass(frozen=True)
class MapToken:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", _quantize(self.values, MAP_DIM, "map token"))


@dataclass(frozen=True)
class AgentToken:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", _quantize(self.values, AGENT_DIM, "agent token"))

    @property
    def track(self) -> tuple:
        return self.values[:TRACK_DIM]

    @property
    def motion(self) -> tuple:
        return self.values[TRACK_DIM:]


def concat_agent_token(track: TrackToken, motion: MotionToken) -> AgentToken:
    """Agent token = track token followed by motion token."""
    return AgentToken(values=track.values + motion.values)


@dataclass(frozen=True)
class TokenBundle:
    scene_id: str
    frame: int
    frame_rate: float
    agent_tokens: tuple  # ((agent_id, AgentToken), ...)
    map_tokens: tuple  # ((lane_id, MapToken), ...)
    scene_tokens: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "agent_tokens", tuple(self.agent_tokens))
        object.__setattr__(self, "map_tokens", tuple(self.map_tokens))
        object.__setattr__(
            self,
            "scene_tokens",
            tuple(
                t if isinstance(t, MapToken) else MapToken(t) for t in self.scene_tokens
            ),
        )
        object.__setattr__(self, "frame_rate", float(np.float32(self.frame_rate)))
        for name, pairs in (("agent", self.agent_tokens), ("map", self.map_tokens)):
            ids = [i for i, _ in pairs]
            if len(set(ids)) != len(ids):
                raise FormatError(f"duplicate {name} token ids in bundle")
            for i in ids:
                if not (0 <= i < 2**64):
                    raise FormatError(f"{name} token id {i} outside u64 range")


# --------------------------------------------------------------------------
# fixture encode / decode


def _entity_rng(seed: int, scene_id: str, frame: int, kind: str, entity_id: int):
    digest = hashlib.sha256(
        f"{seed}:{scene_id}:{frame}:{kind}:{entity_id}".encode("utf-8")
    ).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))


def fixture_encode(scene: Scene, frame: int, seed: int) -> TokenBundle:
    """Deterministic stand-in tokenizer: ground-truth attributes in fixed
    slots, seeded noise elsewhere. Agents invalid at the frame are skipped."""
    if not (0 <= frame < scene.n_frames):
        raise FormatError(f"frame {frame} outside scene of {scene.n_frames} frames")
    agent_tokens = []
    for track in scene.agents:
        st = track.states[frame]
        if not st.valid:
            continue
        rng = _entity_rng(seed, scene.id, frame, "agent", track.id)
        values = rng.standard_normal(AGENT_DIM)
        values[0:_AGENT_ATTR_SLOTS] = (
            st.pose.x,
            st.pose.y,
            st.pose.heading,
            st.speed,
            st.box[0],
            st.box[1],
        )
        onehot = np.zeros(len(CATEGORY_ORDER))
        onehot[CATEGORY_ORDER.index(track.category)] = 1.0
        values[_AGENT_ATTR_SLOTS:_AGENT_ONEHOT_END] = onehot
        agent_tokens.append((track.id, AgentToken(values)))

    map_tokens = []
    for lane in scene.lanes:
        rng = _entity_rng(seed, scene.id, frame, "map", lane.id)
        values = rng.standard_normal(MAP_DIM)
        x0, y0 = lane.centerline[0]
        x1, y1 = lane.centerline[-1]
        values[0:_MAP_ATTR_SLOTS] = (x0, y0, x1, y1)
        onehot = np.zeros(len(SEMANTIC_ORDER))
        onehot[SEMANTIC_ORDER.index(lane.semantic)] = 1.0
        values[_MAP_ATTR_SLOTS:_MAP_ONEHOT_END] = onehot
        map_tokens.append((lane.id, MapToken(values)))

    return TokenBundle(
        scene_id=scene.id,
        frame=frame,
        frame_rate=scene.frame_rate,
        agent_tokens=tuple(agent_tokens),
        map_tokens=tuple(map_tokens),
    )


@dataclass(frozen=True)
class AgentAttributes:
    agent_id: int
    x: float
    y: float
    heading: float
    speed: float
    length: float
    width: float
    category: AgentCategory


@dataclass(frozen=True)
class MapAttributes:
    lane_id: int
    x0: float
    y0: float
    x1: float
    y1: float
    semantic: LaneSemantic


def _decode_onehot(slots, order, what: str):
    hits = [i for i, v in enumerate(slots) if v == 1.0]
    if len(hits) != 1 or any(v not in (0.0, 1.0) for v in slots):
        raise FormatError(f"{what}: malformed one-hot slots")
    return order[hits[0]]


def fixture_decode(bundle: TokenBundle) -> Tuple[list, list]:
    """Inverse of fixture_encode on the designated slots."""
    agents = []
    for agent_id, token in bundle.agent_tokens:
        if not isinstance(token, AgentToken) or len(token.values) != AGENT_DIM:
            raise FormatError("agent token has wrong width")
        v = token.values
        category = _decode_onehot(
            v[_AGENT_ATTR_SLOTS:_AGENT_ONEHOT_END], CATEGORY_ORDER, f"agent {agent_id}"
        )
        agents.append(
            AgentAttributes(
                agent_id=agent_id,
                x=v[0],
                y=v[1],
                heading=v[2],
                speed=v[3],
                length=v[4],
                width=v[5],
                category=category,
            )
        )
    maps = []
    for lane_id, token in bundle.map_tokens:
        if not isinstance(token, MapToken) or len(token.values) != MAP_DIM:
            raise FormatError("map token has wrong width")
        v = token.values
        semantic = _decode_onehot(
            v[_MAP_ATTR_SLOTS:_MAP_ONEHOT_END], SEMANTIC_ORDER, f"lane {lane_id}"
        )
        maps.append(
            MapAttributes(
                lane_id=lane_id, x0=v[0], y0=v[1], x1=v[2], y1=v[3], semantic=semantic
            )
        )
    return agents, maps


# --------------------------------------------------------------------------
# TOKB container


def _f32_bytes(values: tuple) -> bytes:
    return np.asarray(values, dtype="<f4").tobytes()


def write_bundle(bundle: TokenBundle, sink) -> None:
    """Write a bundle to a path or binary file object, bit-exactly."""
    if hasattr(sink, "write"):
        _write_stream(bundle, sink)
    else:
        with open(sink, "wb") as fh:
            _write_stream(bundle, fh)


def _write_stream(bundle: TokenBundle, fh) -> None:
    sid = bundle.scene_id.encode("utf-8")
    if len(sid) > 0xFFFF:
        raise FormatError("scene id too long for TOKB header")
    fh.write(
        _HEADER.pack(
            MAGIC,
            VERSION,
            len(sid),
            bundle.frame,
            bundle.frame_rate,
            len(bundle.agent_tokens),
            len(bundle.map_tokens),
            len(bundle.scene_tokens),
        )
    )
    fh.write(sid)
    for agent_id, token in bundle.agent_tokens:
        fh.write(struct.pack("<Q", agent_id))
        fh.write(_f32_bytes(token.values))
    for lane_id, token in bundle.map_tokens:
        fh.write(struct.pack("<Q", lane_id))
        fh.write(_f32_bytes(token.values))
    for token in bundle.scene_tokens:
        fh.write(_f32_bytes(token.values))


def read_bundle(source) -> TokenBundle:
    """Read a bundle from a path, binary file object, or bytes."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    return _parse(data)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"need {self.pos + n} bytes, file has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def _parse(data: bytes) -> TokenBundle:
    cur = _Cursor(data)
    header = cur.take(HEADER_SIZE)
    magic, version, sid_len, frame, frame_rate, n_agents, n_maps, n_scene = _HEADER.unpack(
        header
    )
    if magic != MAGIC:
        raise MagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}")
    scene_id = cur.take(sid_len).decode("utf-8")

    def read_values(dim: int) -> tuple:
        raw = cur.take(4 * dim)
        return tuple(float(v) for v in np.frombuffer(raw, dtype="<f4"))

    agent_tokens = []
    for _ in range(n_agents):
        (agent_id,) = struct.unpack("<Q", cur.take(8))
        agent_tokens.append((agent_id, AgentToken(read_values(AGENT_DIM))))
    map_tokens = []
    for _ in range(n_maps):
        (lane_id,) = struct.unpack("<Q", cur.take(8))
        map_tokens.append((lane_id, MapToken(read_values(MAP_DIM))))
    scene_tokens = [MapToken(read_values(MAP_DIM)) for _ in range(n_scene)]

    if cur.pos != len(data):
        raise TruncatedError(f"{len(data) - cur.pos} unexpected trailing bytes")
    return TokenBundle(
        scene_id=scene_id,
        frame=frame,
        frame_rate=frame_rate,
        agent_tokens=tuple(agent_tokens),
        map_tokens=tuple(map_tokens),
        scene_tokens=tuple(scene_tokens),
    )
