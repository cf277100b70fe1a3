"""Experiment configuration: line-oriented ``key = value`` files.

Dotted section keys (``topology.kind = random``), ``#`` comments, unknown
keys rejected.  Parsing applies documented defaults and yields a fully
validated :class:`ExperimentConfig`; :func:`dump_config` renders the
normalized form, which re-parses to an equal config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .adversary import DropPolicy, Placement
from .engine import DEFAULT_TOTAL_STEPS, DEFAULT_TTL
from .protocol import ProtocolConfig, ProtocolKind
from .seeds import TOPOLOGY_SEED_STREAM, subseed
from .topology import DEFAULT_REWIRE_PROBABILITY, TopologyKind, TopologySpec

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "dump_config", "fingerprint"]

DEFAULT_SEED = 1
DEFAULT_OUTPUT = "out"
DEFAULT_FRACTIONS_RANGE = "0.01:0.99:0.01"


class ConfigError(ValueError):
    """Invalid configuration; carries the offending key and line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        prefix = ""
        if key is not None:
            prefix += f"key '{key}'"
        if line is not None:
            prefix += f" (line {line})"
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologySpec
    protocols: tuple[ProtocolConfig, ...]
    fractions: tuple[float, ...]
    master_seed: int = DEFAULT_SEED
    ttl: int = DEFAULT_TTL
    total_steps: int = DEFAULT_TOTAL_STEPS
    output_dir: str = DEFAULT_OUTPUT
    threads: int | None = None  # None = auto
    placement: Placement = Placement.UNIFORM_RANDOM
    policy: DropPolicy = DropPolicy.DROP_ALL


_KNOWN_KEYS = (
    "seed",
    "threads",
    "output",
    "fractions",
    "topology.kind",
    "topology.nodes",
    "topology.edges",
    "topology.mean_degree",
    "topology.rewire_probability",
    "topology.max_diameter",
    "topology.seed",
    "protocol.kind",
    "protocol.forward_probability",
    "protocol.fluff_probability",
    "protocol.failsafe_wait",
    "run.ttl",
    "run.total_steps",
    "adversary.placement",
    "adversary.policy",
)


def _split_lines(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key with value {value!r}", key=key, line=lineno)
        if key in entries:
            raise ConfigError("duplicate key", key=key, line=lineno)
        if not value:
            raise ConfigError("empty value", key=key, line=lineno)
        entries[key] = (value, lineno)
    return entries


class _Entries:
    def __init__(self, entries: dict[str, tuple[str, int]]):
        self._entries = entries

    def raw(self, key: str) -> tuple[str, int] | None:
        return self._entries.get(key)

    def get(self, key: str, cast, default=None):
        item = self._entries.get(key)
        if item is None:
            return default
        value, lineno = item
        try:
            return cast(value)
        except (ValueError, InvalidOperation, KeyError) as exc:
            raise ConfigError(str(exc) or f"bad value {value!r}", key=key, line=lineno) from None

    def require(self, key: str, cast):
        if key not in self._entries:
            raise ConfigError("required key is missing", key=key)
        return self.get(key, cast)

    def line(self, key: str) -> int | None:
        item = self._entries.get(key)
        return item[1] if item else None


def _cast_int(value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"expected an integer, got {value!r}") from None


def _cast_float(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"expected a number, got {value!r}") from None


def _cast_enum(enum_cls, what: str):
    def cast(value: str):
        try:
            return enum_cls(value)
        except ValueError:
            options = ", ".join(e.value for e in enum_cls)
            raise ValueError(f"unknown {what} {value!r}; expected one of: {options}") from None

    return cast


def _cast_threads(value: str) -> int | None:
    if value == "auto":
        return None
    n = _cast_int(value)
    if n < 1:
        raise ValueError(f"threads must be >= 1 or 'auto', got {n}")
    return n


def _parse_fraction_list(value: str) -> tuple[float, ...]:
    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected 'start:stop:step', got {value!r}")
        start, stop, step = (Decimal(p.strip()) for p in parts)
        if step <= 0:
            raise ValueError("fraction step must be positive")
        fractions = []
        cur = start
        while cur <= stop:
            fractions.append(float(cur))
            cur += step
    else:
        fractions = [float(tok.strip()) for tok in value.split(",") if tok.strip()]
    if not fractions:
        raise ValueError("fractions must be nonempty")
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ValueError(f"fractions must lie in (0, 1), got {f}")
    if sorted(set(fractions)) != fractions:
        raise ValueError("fractions must be strictly increasing")
    return tuple(fractions)


def parse_config(text: str, *, seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate a config, applying documented defaults.

    ``seed_override`` replaces the file's master seed (the CLI feeds the
    ``--seed`` flag / ``GOSSIPSIM_SEED`` through here); an explicit
    ``topology.seed`` in the file is honored either way.
    """
    entries = _Entries(_split_lines(text))

    file_seed = entries.get("seed", _cast_int, DEFAULT_SEED)
    master_seed = file_seed if seed_override is None else seed_override
    if master_seed < 0:
        raise ConfigError("seed must be non-negative", key="seed", line=entries.line("seed"))

    kind = entries.require("topology.kind", _cast_enum(TopologyKind, "topology kind"))
    nodes = entries.require("topology.nodes", _cast_int)
    edges = entries.get("topology.edges", _cast_int)
    mean_degree = entries.get("topology.mean_degree", _cast_int)
    if edges is None and mean_degree is None:
        raise ConfigError(
            "one of topology.edges / topology.mean_degree is required", key="topology.edges"
        )
    if mean_degree is not None:
        derived = nodes * mean_degree
        if derived % 2 != 0:
            raise ConfigError(
                f"nodes*mean_degree must be even, got {nodes}*{mean_degree}",
                key="topology.mean_degree",
                line=entries.line("topology.mean_degree"),
            )
        derived //= 2
        if edges is not None and edges != derived:
            raise ConfigError(
                f"mean_degree {mean_degree} implies {derived} edges, but topology.edges is {edges}",
                key="topology.mean_degree",
                line=entries.line("topology.mean_degree"),
            )
        edges = derived
    rewire = entries.get("topology.rewire_probability", _cast_float)
    if rewire is not None and kind is not TopologyKind.SMALL_WORLD:
        raise ConfigError(
            "only small_world topologies take a rewire probability",
            key="topology.rewire_probability",
            line=entries.line("topology.rewire_probability"),
        )
    if kind is TopologyKind.SMALL_WORLD and rewire is None:
        rewire = DEFAULT_REWIRE_PROBABILITY
    max_diameter = entries.get("topology.max_diameter", _cast_int)
    topo_seed = entries.get("topology.seed", _cast_int)
    if topo_seed is None:
        topo_seed = subseed(master_seed, TOPOLOGY_SEED_STREAM)
    try:
        topology = TopologySpec(
            kind=kind,
            node_count=nodes,
            edge_count=edges,
            rewire_probability=rewire,
            max_diameter=max_diameter,
            seed=topo_seed,
        )
        if kind in (TopologyKind.SMALL_WORLD, TopologyKind.K_REGULAR):
            topology.degree_parameter()
        if kind is TopologyKind.SMALL_WORLD and topology.degree_parameter() % 2 != 0:
            raise ValueError(
                f"small_world degree must be even, got {topology.degree_parameter()}"
            )
    except ValueError as exc:
        raise ConfigError(str(exc), key="topology.kind", line=entries.line("topology.kind")) from None

    kinds_value, kinds_line = entries.raw("protocol.kind") or (None, None)
    if kinds_value is None:
        raise ConfigError("required key is missing", key="protocol.kind")
    protocol_kinds = []
    for token in kinds_value.split(","):
        token = token.strip()
        try:
            pk = ProtocolKind(token)
        except ValueError:
            options = ", ".join(e.value for e in ProtocolKind)
            raise ConfigError(
                f"unknown protocol {token!r}; expected one of: {options}",
                key="protocol.kind",
                line=kinds_line,
            ) from None
        if pk in protocol_kinds:
            raise ConfigError(f"protocol {token!r} listed twice", key="protocol.kind", line=kinds_line)
        protocol_kinds.append(pk)

    forward_p = entries.get("protocol.forward_probability", _cast_float, 0.7)
    fluff_p = entries.get("protocol.fluff_probability", _cast_float, 0.1)
    failsafe_wait = entries.get("protocol.failsafe_wait", _cast_int, 6)
    ttl = entries.get("run.ttl", _cast_int, DEFAULT_TTL)
    total_steps = entries.get("run.total_steps", _cast_int, DEFAULT_TOTAL_STEPS)
    if ttl < 1:
        raise ConfigError("ttl must be >= 1", key="run.ttl", line=entries.line("run.ttl"))
    if total_steps < ttl:
        raise ConfigError(
            f"total_steps must be >= ttl ({ttl})",
            key="run.total_steps",
            line=entries.line("run.total_steps"),
        )
    protocols = []
    for pk in protocol_kinds:
        try:
            pcfg = ProtocolConfig(
                kind=pk,
                forward_probability=forward_p,
                fluff_probability=fluff_p,
                failsafe_wait=failsafe_wait,
            )
        except ValueError as exc:
            raise ConfigError(str(exc), key="protocol.kind", line=kinds_line) from None
        if pk is ProtocolKind.DANDELION_PP and ttl <= failsafe_wait:
            raise ConfigError(
                f"dandelion_pp needs run.ttl > protocol.failsafe_wait "
                f"({ttl} <= {failsafe_wait})",
                key="protocol.failsafe_wait",
                line=entries.line("protocol.failsafe_wait"),
            )
        protocols.append(pcfg)

    fractions = entries.get("fractions", _parse_fraction_list)
    if fractions is None:
        fractions = _parse_fraction_list(DEFAULT_FRACTIONS_RANGE)

    return ExperimentConfig(
        topology=topology,
        protocols=tuple(protocols),
        fractions=fractions,
        master_seed=master_seed,
        ttl=ttl,
        total_steps=total_steps,
        output_dir=entries.get("output", str, DEFAULT_OUTPUT),
        threads=entries.get("threads", _cast_threads),
        placement=entries.get(
            "adversary.placement", _cast_enum(Placement, "placement"), Placement.UNIFORM_RANDOM
        ),
        policy=entries.get(
            "adversary.policy", _cast_enum(DropPolicy, "policy"), DropPolicy.DROP_ALL
        ),
    )


def dump_config(cfg: ExperimentConfig) -> str:
    """Normalized config text: every key explicit, defaults applied.

    Re-parsing the dump yields a config equal to ``cfg``.
    """
    lines = [
        f"seed = {cfg.master_seed}",
        f"threads = {'auto' if cfg.threads is None else cfg.threads}",
        f"output = {cfg.output_dir}",
        "fractions = " + ",".join(repr(f) for f in cfg.fractions),
        f"topology.kind = {cfg.topology.kind.value}",
        f"topology.nodes = {cfg.topology.node_count}",
        f"topology.edges = {cfg.topology.edge_count}",
    ]
    if cfg.topology.kind is TopologyKind.SMALL_WORLD:
        lines.append(f"topology.rewire_probability = {cfg.topology.rewire_probability!r}")
    if cfg.topology.max_diameter is not None:
        lines.append(f"topology.max_diameter = {cfg.topology.max_diameter}")
    lines.append(f"topology.seed = {cfg.topology.seed}")
    first = cfg.protocols[0]
    lines += [
        "protocol.kind = " + ",".join(p.kind.value for p in cfg.protocols),
        f"protocol.forward_probability = {first.forward_probability!r}",
        f"protocol.fluff_probability = {first.fluff_probability!r}",
        f"protocol.failsafe_wait = {first.failsafe_wait}",
        f"run.ttl = {cfg.ttl}",
        f"run.total_steps = {cfg.total_steps}",
        f"adversary.placement = {cfg.placement.value}",
        f"adversary.policy = {cfg.policy.value}",
    ]
    return "\n".join(lines) + "\n"


def fingerprint(cfg: ExperimentConfig) -> str:
    """Stable hash of the full normalized configuration."""
    return hashlib.sha256(dump_config(cfg).encode("ascii")).hexdigest()
