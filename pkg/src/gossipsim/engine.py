"""Time-stepped execution of epochs, simulation runs, and attacker sweeps.

An epoch simulates one transaction from one victim: the victim originates
at step 0, every copy sent at step t is delivered at step t+1, honest
recipients run the protocol handler, Sybil recipients drop, and the epoch
ends after ``ttl`` steps (or earlier once nothing is in flight and no
fail-safe timer is pending).

All randomness is drawn from streams derived per (master seed, purpose,
index), so epochs are independent of execution order and sweeps are
reproducible bit-for-bit regardless of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .adversary import AdversaryConfig, SybilSet, filter_decision, place_sybils
from .protocol import (
    DANDELION_KINDS,
    FailsafeState,
    Message,
    Phase,
    ProtocolConfig,
    ProtocolKind,
    on_originate,
    on_receive,
    on_timer_expiry,
)
from .seeds import EPOCH_STREAM, FRACTION_STREAM, SYBIL_STREAM, VICTIM_STREAM, subseed, substream
from .topology import Graph, TopologySpec, generate_with_constraints

__all__ = [
    "EpochConfig",
    "SimulationRun",
    "EpochResult",
    "run_epoch",
    "run_simulation",
    "run_sweep",
    "place_for_run",
]

DEFAULT_TTL = 16
DEFAULT_TOTAL_STEPS = 5000


@dataclass(frozen=True)
class EpochConfig:
    victim: int
    epoch_index: int = 0
    ttl: int = DEFAULT_TTL

    def __post_init__(self):
        if self.ttl < 1:
            raise ValueError(f"ttl must be >= 1, got {self.ttl}")


@dataclass(frozen=True)
class SimulationRun:
    """Parameters of one simulation run at a fixed attacker fraction."""

    attacker_fraction: float
    master_seed: int
    total_steps: int = DEFAULT_TOTAL_STEPS
    ttl: int = DEFAULT_TTL

    def __post_init__(self):
        if not 0.0 <= self.attacker_fraction < 1.0:
            raise ValueError(
                f"attacker_fraction must lie in [0, 1), got {self.attacker_fraction}"
            )
        if self.ttl < 1:
            raise ValueError(f"ttl must be >= 1, got {self.ttl}")
        if self.total_steps < self.ttl:
            raise ValueError(
                f"total_steps must be >= ttl, got {self.total_steps} < {self.ttl}"
            )

    @property
    def epoch_count(self) -> int:
        # residual steps beyond the last whole epoch are discarded
        return self.total_steps // self.ttl


@dataclass
class EpochResult:
    victim: int
    reached: set[int]
    steps_elapsed: int
    fail_safe_activations: int = 0


def run_epoch(
    g: Graph,
    cfg: ProtocolConfig,
    sybils: SybilSet,
    ecfg: EpochConfig,
    rng: np.random.Generator,
) -> EpochResult:
    """Simulate one epoch and return the honest reached set.

    Sybil recipients receive and cache copies but never forward, and are
    excluded from ``reached``.
    """
    victim = ecfg.victim
    ttl = ecfg.ttl
    ids = sybils.ids
    if victim in ids:
        raise ValueError(f"victim {victim} is a Sybil")
    track_failsafe = cfg.kind is ProtocolKind.DANDELION_PP
    if track_failsafe and ttl <= cfg.failsafe_wait:
        raise ValueError(
            f"dandelion_pp needs ttl > failsafe_wait, got ttl={ttl}, "
            f"failsafe_wait={cfg.failsafe_wait}"
        )
    adj = g.adjacency
    origin_phase = Phase.STEM if cfg.kind in DANDELION_KINDS else Phase.FLUFF
    msg = Message(ecfg.epoch_index, victim, 0, ttl, origin_phase)

    seen: dict[int, set[int]] = {victim: {msg.id}}
    reached = {victim}
    timers: dict[int, FailsafeState] = {}
    activations = 0
    steps_elapsed = 0

    decision = filter_decision(victim, sybils, on_originate(victim, msg, adj[victim], cfg, rng))
    if decision.arm_timer is not None:
        mid, expiry = decision.arm_timer
        if expiry <= ttl:
            timers[victim] = FailsafeState(mid, victim, expiry, ttl)
    inflight = [(target, victim, copy) for target, copy in decision.sends]

    for step in range(1, ttl + 1):
        if not inflight and not any(
            st.expiry_step >= step and not st.fluff_seen for st in timers.values()
        ):
            break
        nxt: list[tuple[int, int, Message]] = []
        for target, sender, m in inflight:
            if target not in ids:
                reached.add(target)
            if track_failsafe and m.phase is Phase.FLUFF:
                st = timers.get(target)
                if st is not None:
                    st.fluff_seen = True
            cache = seen.get(target)
            if cache is None:
                cache = set()
                seen[target] = cache
            elif m.id in cache:
                continue  # duplicate; handler would fold to empty
            d = filter_decision(target, sybils, on_receive(target, m, sender, adj[target], cfg, cache, rng))
            if d.sends:
                nxt.extend((t, target, c) for t, c in d.sends)
            if d.arm_timer is not None:
                mid, expiry = d.arm_timer
                if expiry <= ttl and target not in timers:
                    timers[target] = FailsafeState(mid, m.origin, expiry, ttl)
        # timers are checked after deliveries: a fluff copy arriving at the
        # expiry step still cancels the fail-safe
        fired = False
        if track_failsafe and timers:
            due = [node for node, st in timers.items() if st.expiry_step == step]
            for node in due:
                st = timers.pop(node)
                d = on_timer_expiry(node, st.msg_id, adj[node], st)
                if d.sends:
                    activations += 1
                    fired = True
                    nxt.extend((t, node, c) for t, c in d.sends)
        if inflight or fired:
            steps_elapsed = step
        inflight = nxt

    return EpochResult(
        victim=victim,
        reached=reached,
        steps_elapsed=steps_elapsed,
        fail_safe_activations=activations,
    )


def place_for_run(g: Graph, run: SimulationRun) -> SybilSet:
    """The Sybil set a run places: once per run, from a derived sub-seed."""
    acfg = AdversaryConfig(
        fraction=run.attacker_fraction,
        seed=subseed(run.master_seed, SYBIL_STREAM),
    )
    return place_sybils(g, acfg)


def _victim_schedule(honest: list[int], count: int, rng: np.random.Generator) -> list[int]:
    # distinct victims until the honest population is exhausted, then
    # uniform with replacement
    order = rng.permutation(len(honest))
    victims = [honest[i] for i in order[: min(count, len(honest))]]
    if count > len(honest):
        extra = rng.integers(0, len(honest), size=count - len(honest))
        victims.extend(honest[int(i)] for i in extra)
    return victims


def run_simulation(g: Graph, cfg: ProtocolConfig, run: SimulationRun) -> list[EpochResult]:
    """Place Sybils once, then run ``run.epoch_count`` independent epochs."""
    sybils = place_for_run(g, run)
    return _run_epochs(g, cfg, run, sybils)


def _run_epochs(
    g: Graph, cfg: ProtocolConfig, run: SimulationRun, sybils: SybilSet
) -> list[EpochResult]:
    honest = [v for v in range(g.node_count) if v not in sybils.ids]
    if not honest:
        raise ValueError("no honest nodes to act as victims")
    victims = _victim_schedule(honest, run.epoch_count, substream(run.master_seed, VICTIM_STREAM))
    results = []
    for i in range(run.epoch_count):
        ecfg = EpochConfig(victim=victims[i], epoch_index=i, ttl=run.ttl)
        rng = substream(run.master_seed, EPOCH_STREAM, i)
        results.append(run_epoch(g, cfg, sybils, ecfg, rng))
    return results


def _sweep_point(
    g: Graph, cfg: ProtocolConfig, run: SimulationRun, fraction: float
) -> metrics.CoveragePoint:
    sybils = place_for_run(g, run)
    results = _run_epochs(g, cfg, run, sybils)
    honest_count = g.node_count - len(sybils)
    return metrics.aggregate(
        results, honest_count, fraction=fraction, sybil_count=len(sybils)
    )


def run_sweep(
    g: Graph | TopologySpec,
    cfg: ProtocolConfig,
    run_template: SimulationRun,
    fractions,
    *,
    threads: int = 1,
    topology_label: str | None = None,
    fingerprint: str = "",
) -> metrics.SweepResult:
    """One simulation run per attacker fraction, aggregated per point.

    Each fraction gets its own sub-seed of the template's master seed, so
    points are independent and the result does not depend on ``threads``
    (worker processes, despite the name the CLI uses).
    """
    fractions = list(fractions)
    if not fractions:
        raise ValueError("fractions must be nonempty")
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ValueError(f"sweep fractions must lie in (0, 1), got {f}")
    if sorted(set(fractions)) != fractions:
        raise ValueError("fractions must be strictly increasing")

    if isinstance(g, TopologySpec):
        topology_label = topology_label or g.describe()
        g = generate_with_constraints(g)
    elif topology_label is None:
        topology_label = f"graph-n{g.node_count}-m{len(g.edges)}"

    runs = [
        replace(
            run_template,
            attacker_fraction=f,
            master_seed=subseed(run_template.master_seed, FRACTION_STREAM, i),
        )
        for i, f in enumerate(fractions)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_sweep_point, g, cfg, run, f)
                for run, f in zip(runs, fractions)
            ]
            points = [fut.result() for fut in futures]
    else:
        points = [_sweep_point(g, cfg, run, f) for run, f in zip(runs, fractions)]

    return metrics.SweepResult(
        protocol=cfg.kind.value,
        topology=topology_label,
        points=tuple(points),
        fingerprint=fingerprint,
        seed=run_template.master_seed,
    )
