"""Hyperparameter search spaces and random sampling."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import InvalidInput

DIM_KINDS = ("continuous", "continuous_log", "discrete", "categorical")


@dataclass(frozen=True)
class Dim:
    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple | None = None

    def __post_init__(self):
        if self.kind not in DIM_KINDS:
            raise InvalidInput(f"dim {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.choices:
                raise InvalidInput(f"dim {self.name!r}: categorical needs choices")
        else:
            if self.low is None or self.high is None:
                raise InvalidInput(f"dim {self.name!r}: interval needs low and high")
            if self.low > self.high:
                raise InvalidInput(f"dim {self.name!r}: empty interval")
            if self.kind == "continuous_log" and self.low <= 0:
                raise InvalidInput(f"dim {self.name!r}: log domain must be positive")
            if self.kind == "discrete" and (
                int(self.low) != self.low or int(self.high) != self.high
            ):
                raise InvalidInput(f"dim {self.name!r}: discrete bounds must be integers")

    def contains(self, value) -> bool:
        if self.kind == "categorical":
            return value in self.choices
        if self.kind == "discrete":
            return isinstance(value, int) and self.low <= value <= self.high
        if not isinstance(value, (int, float)):
            return False
        return self.low <= value <= self.high


@dataclass(frozen=True)
class SearchSpace:
    name: str
    dims: tuple[Dim, ...]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise InvalidInput("dimension names must be unique")

    def dim(self, name: str) -> Dim:
        for d in self.dims:
            if d.name == name:
                return d
        raise InvalidInput(f"no dimension named {name!r}")

    def validate_config(self, config: "HpConfig") -> None:
        for d in self.dims:
            if d.name not in config.values:
                raise InvalidInput(f"config missing dimension {d.name!r}")
            if not d.contains(config.values[d.name]):
                raise InvalidInput(
                    f"value {config.values[d.name]!r} outside domain of {d.name!r}"
                )
        extra = set(config.values) - {d.name for d in self.dims}
        if extra:
            raise InvalidInput(f"config has unknown dimensions {sorted(extra)}")

    def to_dict(self) -> dict:
        dims = []
        for d in self.dims:
            if d.kind == "categorical":
                dims.append({"name": d.name, "kind": d.kind, "choices": list(d.choices)})
            else:
                dims.append({"name": d.name, "kind": d.kind, "low": d.low, "high": d.high})
        return {"name": self.name, "dims": dims}

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        if not isinstance(data, dict) or "dims" not in data:
            raise InvalidInput("space definition needs a 'dims' list")
        dims = []
        for d in data["dims"]:
            kind = d.get("kind")
            if kind == "categorical":
                dims.append(Dim(name=d["name"], kind=kind, choices=tuple(d["choices"])))
            else:
                dims.append(Dim(name=d["name"], kind=kind, low=d.get("low"), high=d.get("high")))
        return cls(name=data.get("name", "space"), dims=tuple(dims))

    @classmethod
    def from_file(cls, path) -> "SearchSpace":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class HpConfig:
    """One sampled point of a search space."""

    values: dict[str, Any]

    def __hash__(self):
        return hash(tuple(sorted(self.values.items())))


def random_sample(space: SearchSpace, rng: random.Random) -> HpConfig:
    """Uniform draw per dimension (log-uniform on continuous_log dims).

    Deterministic given the generator state; dimensions are consumed in
    space order.
    """
    values: dict[str, Any] = {}
    for d in space.dims:
        if d.kind == "continuous":
            values[d.name] = rng.uniform(d.low, d.high)
        elif d.kind == "continuous_log":
            values[d.name] = math.exp(rng.uniform(math.log(d.low), math.log(d.high)))
        elif d.kind == "discrete":
            values[d.name] = rng.randint(int(d.low), int(d.high))
        else:
            values[d.name] = d.choices[rng.randrange(len(d.choices))]
    return HpConfig(values=values)
