"""Sybil placement and the message-dropping policy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .protocol import EMPTY_DECISION, ForwardDecision
from .topology import Graph

__all__ = [
    "Placement",
    "DropPolicy",
    "AdversaryConfig",
    "SybilSet",
    "sybil_count",
    "place_sybils",
    "filter_decision",
]


class Placement(Enum):
    UNIFORM_RANDOM = "uniform_random"


class DropPolicy(Enum):
    DROP_ALL = "drop_all"


@dataclass(frozen=True)
class AdversaryConfig:
    fraction: float
    seed: int
    placement: Placement = Placement.UNIFORM_RANDOM
    policy: DropPolicy = DropPolicy.DROP_ALL

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise ValueError(f"fraction must lie in [0, 1), got {self.fraction}")


@dataclass(frozen=True)
class SybilSet:
    ids: frozenset[int]

    def __contains__(self, node: int) -> bool:
        return node in self.ids

    def __len__(self) -> int:
        return len(self.ids)


def sybil_count(fraction: float, node_count: int) -> int:
    """Number of Sybils for a fraction: round-half-up of fraction*n."""
    return int(math.floor(fraction * node_count + 0.5))


def place_sybils(g: Graph, cfg: AdversaryConfig) -> SybilSet:
    """Uniform sample without replacement of ``round(fraction*n)`` node ids.

    Deterministic per seed.  Raises ``ValueError`` when the fraction
    resolves to the whole network.
    """
    n = g.node_count
    count = sybil_count(cfg.fraction, n)
    if count >= n:
        raise ValueError(
            f"fraction {cfg.fraction} resolves to {count} Sybils on {n} nodes; "
            "at least one honest node is required"
        )
    if count == 0:
        return SybilSet(frozenset())
    rng = np.random.default_rng(cfg.seed)
    picked = rng.choice(n, size=count, replace=False)
    return SybilSet(frozenset(int(i) for i in picked))


def filter_decision(node: int, sybils: SybilSet, decision: ForwardDecision) -> ForwardDecision:
    """Drop-all policy: Sybils emit nothing, honest decisions pass unchanged."""
    if node in sybils.ids:
        return EMPTY_DECISION
    return decision
