"""Run configuration shared by the pipeline, CLI, and service."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, fields

from .matching import MatchingConfig, DepthHypotheses
from .sampling import ScheduleConfig, DEFAULT_DELTAS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    d_min: float = 0.64
    d_max: float = 1.23
    depth_count: int = 64
    deltas: tuple = DEFAULT_DELTAS  # cap radii (degrees) for rounds 2..K
    candidates: int = 64
    stride: int = 4
    patch_radius: int = 3
    census_window: int = 5
    alpha: float = 0.3
    cost_ceiling: float = 1.5
    temperature: float = 0.1
    score_temperature: float = 0.5
    min_disparity: float = 70.0  # image px; near-identity warps self-match smooth texture
    consistency_eps: float = 0.02  # relative depth tolerance of the mirror check
    workers: int = 0  # 0 = use all cores
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        # delegate range/shape validation to the downstream types
        self.hypotheses()
        self.schedule()

    @property
    def rounds(self) -> int:
        return len(self.deltas) + 1

    def matching(self) -> MatchingConfig:
        return MatchingConfig(
            stride=self.stride,
            census_window=self.census_window,
            patch_radius=self.patch_radius,
            alpha=self.alpha,
            cost_ceiling=self.cost_ceiling,
            temperature=self.temperature,
            score_temperature=self.score_temperature,
            min_disparity=self.min_disparity,
        )

    def schedule(self) -> ScheduleConfig:
        return ScheduleConfig(deltas=self.deltas, candidates_per_round=self.candidates)

    def hypotheses(self) -> DepthHypotheses:
        return DepthHypotheses(self.d_min, self.d_max, self.depth_count)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["deltas"] = list(d["deltas"])
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))
