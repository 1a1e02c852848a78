"""Single configuration object carrying every tunable threshold.

Angles are radians, distances meters, speeds m/s throughout. The JSON config
file accepted by the CLI is exactly ``asdict(Config())``; unknown keys are
rejected so typos fail loudly. Precedence is flag > config file > default.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from .errors import ParamError


@dataclass(frozen=True)
class Config:
    # degenerate-segment heading carry-forward
    eps_move: float = 1e-3

    # lane association envelope
    lane_margin: float = 0.5
    theta_align: float = math.radians(70.0)

    # agent-ego lane modes
    k_lat: int = 2
    k_lon: int = 3
    eps_s_tie: float = 1e-6

    # homotopy
    theta_s: float = math.pi / 6.0
    eps_rel: float = 0.05

    # navigation command labeling
    theta_turn: float = math.radians(60.0)
    theta_uturn: float = math.radians(150.0)
    v_rev: float = -0.2
    d_prep: float = 30.0
    nav_window_s: float = 6.0

    # interaction heuristics
    v_stop: float = 0.3
    d_yield: float = 15.0

    # criticality corridor
    t_corridor: float = 3.0
    corridor_margin: float = 1.0

    # metrics
    w_lon: float = 2.0
    grounding_gate: float = 2.0

    # QA generation
    distractor_ratio: float = 1.0
    seed: int = 0

    # scenario synthesis geometry
    synth_lane_length: float = 120.0
    synth_lane_width: float = 3.7
    synth_speed_min: float = 3.0
    synth_speed_max: float = 12.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **overrides) -> "Config":
        return dataclasses.replace(self, **overrides)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParamError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "Config":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParamError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ParamError("config file must hold a JSON object")
        return cls.from_dict(data)
