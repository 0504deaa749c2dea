"""Trial runner protocol and registry.

A runner turns one hyperparameter configuration into a stream of per-epoch
results. The scheduler owns wall-clock assignment and trace persistence; the
runner only reports what happened in the epoch plus a deterministic cost for
simulated-time execution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Protocol

from .errors import InvalidInput
from .space import HpConfig, SearchSpace
from .trace import LayerRecord


@dataclass(frozen=True)
class EpochPayload:
    train_loss: float
    val_metric: float
    cost_ms: int
    layers: tuple[LayerRecord, ...] = ()


class TrialProgram(Protocol):
    max_epoch: int

    def epochs(self) -> Iterator[EpochPayload]: ...


class TrialRunner(Protocol):
    name: str
    metric_mode: str

    def space(self) -> SearchSpace: ...

    def start(self, trial_id: str, config: HpConfig, seed: int) -> TrialProgram: ...


_RUNNERS: dict[str, Callable[[], "TrialRunner"]] = {}


def register_runner(name: str, factory: Callable[[], "TrialRunner"]) -> None:
    _RUNNERS[name] = factory


def get_runner(name: str) -> "TrialRunner":
    try:
        factory = _RUNNERS[name]
    except KeyError:
        raise InvalidInput(
            f"unknown runner {name!r}; registered: {sorted(_RUNNERS)}"
        ) from None
    return factory()


def runner_names() -> list[str]:
    return sorted(_RUNNERS)
