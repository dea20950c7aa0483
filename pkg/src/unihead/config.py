"""Head configuration: a flat JSON document with exactly these keys.
Unknown keys are a hard error so typos in stacking counts cannot pass
silently."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

PRECISIONS = {"f32": np.float32, "f64": np.float64}


@dataclass
class HeadConfig:
    C: int = 16
    n_dp: int = 1
    n_dat: int = 2
    n_cit: int = 2
    stripe_width: int = 1
    num_classes: int = 80
    num_anchors: int = 1
    ffn_enabled: bool = False
    precision: str = "f64"
    seed: int = 0

    def validate(self) -> "HeadConfig":
        if self.C <= 0 or self.C % 2 != 0:
            raise ConfigError(f"C must be a positive even integer, got C={self.C}")
        for field in ("n_dp", "n_dat", "n_cit"):
            if getattr(self, field) < 0:
                raise ConfigError(f"{field} must be non-negative, got {getattr(self, field)}")
        if self.stripe_width < 1:
            raise ConfigError(f"stripe_width must be positive, got {self.stripe_width}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be positive, got {self.num_classes}")
        if self.num_anchors < 1:
            raise ConfigError(f"num_anchors must be positive, got {self.num_anchors}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be f32 or f64, got {self.precision!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must fit in u64, got {self.seed}")
        return self

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def check_spatial(self, H: int, W: int) -> None:
        s = self.stripe_width
        if H % s != 0 or W % s != 0:
            raise ConfigError(
                f"stripe_width {s} must divide both H={H} and W={W}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "HeadConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        bad_type = [k for k, v in data.items() if isinstance(v, float) and k != "seed"]
        if bad_type:
            raise ConfigError(f"non-integer values for {sorted(bad_type)}")
        return cls(**data).validate()

    @classmethod
    def from_json(cls, text: str) -> "HeadConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path) -> "HeadConfig":
        return cls.from_json(Path(path).read_text())
