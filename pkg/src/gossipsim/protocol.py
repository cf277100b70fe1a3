"""Per-node forwarding rules for the five dissemination protocols.

Handlers are pure functions of their inputs, a per-node seen-cache, and a
random stream; the engine owns all state and calls them sequentially
within a step.  A handler returns a :class:`ForwardDecision` describing
the copies to deliver at the next step, never sending anything itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Phase",
    "ProtocolKind",
    "Message",
    "ProtocolConfig",
    "ForwardDecision",
    "FailsafeState",
    "EMPTY_DECISION",
    "on_originate",
    "on_receive",
    "on_timer_expiry",
]


class Phase(Enum):
    STEM = "stem"
    FLUFF = "fluff"


class ProtocolKind(Enum):
    BROADCAST = "broadcast"
    FIXED_PROBABILITY = "fixed_probability"
    PROBABILISTIC_BROADCAST = "probabilistic_broadcast"
    DANDELION = "dandelion"
    DANDELION_PP = "dandelion_pp"


DANDELION_KINDS = frozenset({ProtocolKind.DANDELION, ProtocolKind.DANDELION_PP})


@dataclass(frozen=True)
class Message:
    """One dissemination token; copies share id/origin along a lineage.

    ``hop_count + ttl_remaining`` is constant across all copies of a
    lineage, and equals the delivery step of the copy plus its remaining
    budget.  ``phase`` matters only for the Dandelion variants.
    """

    id: int
    origin: int
    hop_count: int
    ttl_remaining: int
    phase: Phase = Phase.FLUFF

    def hop(self, phase: Phase | None = None) -> "Message":
        """The copy a neighbor receives one step later."""
        return Message(
            self.id,
            self.origin,
            self.hop_count + 1,
            self.ttl_remaining - 1,
            self.phase if phase is None else phase,
        )


@dataclass(frozen=True)
class ProtocolConfig:
    kind: ProtocolKind
    forward_probability: float = 0.7
    fluff_probability: float = 0.1
    failsafe_wait: int = 6

    def __post_init__(self):
        if not 0.0 <= self.forward_probability <= 1.0:
            raise ValueError(
                f"forward_probability must lie in [0, 1], got {self.forward_probability}"
            )
        if not 0.0 <= self.fluff_probability <= 1.0:
            raise ValueError(
                f"fluff_probability must lie in [0, 1], got {self.fluff_probability}"
            )
        if self.kind is ProtocolKind.DANDELION_PP and self.failsafe_wait < 1:
            raise ValueError(
                f"failsafe_wait must be >= 1 for dandelion_pp, got {self.failsafe_wait}"
            )


@dataclass(frozen=True)
class ForwardDecision:
    """Copies to deliver next step, plus an optional timer-arm request.

    ``arm_timer`` is a ``(message id, expiry step)`` pair used by the
    Dandelion++ fail-safe.  Targets are always neighbors of the deciding
    node, and never the message's immediate forwarder.
    """

    sends: tuple[tuple[int, Message], ...] = ()
    arm_timer: tuple[int, int] | None = None


EMPTY_DECISION = ForwardDecision()


@dataclass
class FailsafeState:
    """Armed Dandelion++ fail-safe timer, tracked by the engine."""

    msg_id: int
    origin: int
    expiry_step: int
    epoch_ttl: int
    fluff_seen: bool = False


def _flood(copy: Message, neighbors: list[int], exclude: int) -> ForwardDecision:
    sends = tuple((nb, copy) for nb in neighbors if nb != exclude)
    return ForwardDecision(sends) if sends else EMPTY_DECISION


def on_originate(
    node: int,
    msg: Message,
    neighbors: list[int],
    cfg: ProtocolConfig,
    rng: np.random.Generator,
) -> ForwardDecision:
    """Decide the first-step sends for a freshly created message.

    Broadcast, fixed-probability, and probabilistic-broadcast creators all
    perform a full first-hop broadcast; otherwise most messages would die
    at the creator.  Dandelion creators flip the stem/fluff coin like any
    relay would: on fluff they broadcast immediately, otherwise they relay
    a stem copy to one uniformly chosen neighbor (Dandelion++ creators also
    arm the fail-safe timer).
    """
    if not neighbors:
        return EMPTY_DECISION
    if cfg.kind in DANDELION_KINDS:
        if rng.random() < cfg.fluff_probability:
            copy = msg.hop(Phase.FLUFF)
            return ForwardDecision(tuple((nb, copy) for nb in neighbors))
        target = neighbors[int(rng.integers(len(neighbors)))]
        timer = None
        if cfg.kind is ProtocolKind.DANDELION_PP:
            timer = (msg.id, msg.hop_count + cfg.failsafe_wait)
        return ForwardDecision(((target, msg.hop(Phase.STEM)),), timer)
    copy = msg.hop()
    return ForwardDecision(tuple((nb, copy) for nb in neighbors))


def on_receive(
    node: int,
    msg: Message,
    sender: int,
    neighbors: list[int],
    cfg: ProtocolConfig,
    seen: set[int],
    rng: np.random.Generator,
) -> ForwardDecision:
    """Decide the forwards for a delivered copy.

    Already-seen message ids and exhausted TTLs fold into an empty
    decision; fresh copies are inserted into ``seen`` before dispatching
    on the protocol.
    """
    if msg.id in seen or msg.ttl_remaining == 0:
        return EMPTY_DECISION
    seen.add(msg.id)
    kind = cfg.kind
    if kind is ProtocolKind.BROADCAST:
        return _flood(msg.hop(), neighbors, sender)
    if kind is ProtocolKind.FIXED_PROBABILITY:
        # independent coin per neighbor, forwarder excluded
        copy = msg.hop()
        p = cfg.forward_probability
        sends = tuple(
            (nb, copy) for nb in neighbors if nb != sender and rng.random() < p
        )
        return ForwardDecision(sends) if sends else EMPTY_DECISION
    if kind is ProtocolKind.PROBABILISTIC_BROADCAST:
        # one coin decides all-or-nothing
        if rng.random() < cfg.forward_probability:
            return _flood(msg.hop(), neighbors, sender)
        return EMPTY_DECISION

    # Dandelion variants
    if msg.phase is Phase.FLUFF:
        return _flood(msg.hop(), neighbors, sender)
    if rng.random() < cfg.fluff_probability:
        return _flood(msg.hop(Phase.FLUFF), neighbors, sender)
    timer = None
    if kind is ProtocolKind.DANDELION_PP:
        timer = (msg.id, msg.hop_count + cfg.failsafe_wait)
    candidates = [nb for nb in neighbors if nb != sender]
    if not candidates:
        # stem dies when the forwarder is the only neighbor; a Dandelion++
        # node still arms its timer and will fluff on expiry
        return ForwardDecision((), timer) if timer else EMPTY_DECISION
    target = candidates[int(rng.integers(len(candidates)))]
    return ForwardDecision(((target, msg.hop()),), timer)


def on_timer_expiry(
    node: int,
    msg_id: int,
    neighbors: list[int],
    state: FailsafeState,
) -> ForwardDecision:
    """Fire a Dandelion++ fail-safe timer.

    If no fluff-phase copy of the message was observed before expiry, the
    node starts the fluff itself: a fresh fluff broadcast to all neighbors
    (there is no forwarder to exclude), with the remaining TTL budget of
    the epoch clock.
    """
    if state.fluff_seen or not neighbors:
        return EMPTY_DECISION
    ttl_remaining = state.epoch_ttl - state.expiry_step - 1
    if ttl_remaining < 0:
        return EMPTY_DECISION
    copy = Message(msg_id, state.origin, state.expiry_step + 1, ttl_remaining, Phase.FLUFF)
    return ForwardDecision(tuple((nb, copy) for nb in neighbors))
