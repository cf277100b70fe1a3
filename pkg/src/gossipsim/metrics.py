"""Coverage computation, sweep aggregation, CSV output, and plot emission.

Coverage is the fraction of honest nodes that received the message by
epoch end, victim included; the denominator is the honest population at
that sweep point, which shrinks as the attacker fraction grows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CoveragePoint",
    "SweepResult",
    "coverage",
    "aggregate",
    "write_csv",
    "read_csv",
    "csv_filename",
    "emit_plot_script",
]

CSV_HEADER = "protocol,topology,fraction,mean_coverage,std_dev,min,max,epochs,seed"


@dataclass(frozen=True)
class CoveragePoint:
    attacker_fraction: float
    mean_coverage: float
    std_dev: float
    epoch_count: int
    min_coverage: float
    max_coverage: float
    sybil_count: int = 0


@dataclass(frozen=True)
class SweepResult:
    protocol: str
    topology: str
    points: tuple[CoveragePoint, ...]
    fingerprint: str = ""
    seed: int = 0

    def __post_init__(self):
        fractions = [p.attacker_fraction for p in self.points]
        if sorted(set(fractions)) != fractions:
            raise ValueError("sweep points must be ordered by strictly increasing fraction")

    def fractions(self) -> tuple[float, ...]:
        return tuple(p.attacker_fraction for p in self.points)


def coverage(result, honest_count: int) -> float:
    """|reached| / honest nodes for one epoch; victim counts as reached."""
    if honest_count < 1:
        raise ValueError("coverage is undefined without honest nodes")
    k = len(result.reached)
    if k > honest_count:
        raise ValueError(f"reached {k} nodes but only {honest_count} are honest")
    return k / honest_count


def aggregate(results, honest_count: int, *, fraction: float = 0.0, sybil_count: int = 0) -> CoveragePoint:
    """Mean, population std-dev, min, and max coverage over epochs."""
    if not results:
        raise ValueError("cannot aggregate an empty list of epoch results")
    covs = np.asarray([coverage(r, honest_count) for r in results])
    return CoveragePoint(
        attacker_fraction=fraction,
        mean_coverage=float(covs.mean()),
        std_dev=float(covs.std()),
        epoch_count=len(covs),
        min_coverage=float(covs.min()),
        max_coverage=float(covs.max()),
        sybil_count=sybil_count,
    )


def write_csv(sweep: SweepResult, sink) -> None:
    """Write one sweep as CSV: fixed header, 6 fractional digits, rows by fraction."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="ascii", newline="\n") as fh:
            write_csv(sweep, fh)
        return
    sink.write(CSV_HEADER + "\n")
    for p in sweep.points:
        sink.write(
            f"{sweep.protocol},{sweep.topology},"
            f"{p.attacker_fraction:.6f},{p.mean_coverage:.6f},{p.std_dev:.6f},"
            f"{p.min_coverage:.6f},{p.max_coverage:.6f},{p.epoch_count},{sweep.seed}\n"
        )


def read_csv(source) -> SweepResult:
    """Parse a sweep CSV written by :func:`write_csv`."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="ascii") as fh:
            return read_csv(fh)
    rows = list(csv.reader(source))
    if not rows or ",".join(rows[0]) != CSV_HEADER:
        raise ValueError(f"unrecognized CSV header: {rows[0] if rows else 'empty file'}")
    body = rows[1:]
    if not body:
        raise ValueError("sweep CSV has no data rows")
    protocols = {r[0] for r in body}
    topologies = {r[1] for r in body}
    seeds = {r[8] for r in body}
    if len(protocols) != 1 or len(topologies) != 1 or len(seeds) != 1:
        raise ValueError("sweep CSV must describe a single (protocol, topology, seed)")
    points = tuple(
        CoveragePoint(
            attacker_fraction=float(r[2]),
            mean_coverage=float(r[3]),
            std_dev=float(r[4]),
            epoch_count=int(r[7]),
            min_coverage=float(r[5]),
            max_coverage=float(r[6]),
        )
        for r in body
    )
    return SweepResult(
        protocol=body[0][0],
        topology=body[0][1],
        points=points,
        seed=int(body[0][8]),
    )


def csv_filename(protocol: str, topology: str) -> str:
    """Canonical CSV file name shared by the writer and the plot script."""
    return f"{protocol}__{topology}.csv"


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Render coverage-vs-attacker-percentage curves from the sweep CSVs.

Generated file; expects the CSVs listed in SERIES next to this script.
Run with --bands to overlay per-point min/max envelopes.
"""

import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

# (csv file, topology, protocol)
SERIES = [
{series}
]


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = [float(r["fraction"]) * 100.0 for r in rows]
    mean = [float(r["mean_coverage"]) * 100.0 for r in rows]
    lo = [float(r["min"]) * 100.0 for r in rows]
    hi = [float(r["max"]) * 100.0 for r in rows]
    return xs, mean, lo, hi


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bands", action="store_true", help="overlay min/max envelopes")
    ap.add_argument("--out-dir", default=None, help="where to write the figures")
    args = ap.parse_args()

    here = os.path.dirname(os.path.abspath(__file__))
    out_dir = args.out_dir or here

    by_topology = {{}}
    for fname, topology, protocol in SERIES:
        by_topology.setdefault(topology, []).append((fname, protocol))

    for topology, entries in by_topology.items():
        fig, ax = plt.subplots(figsize=(8, 5))
        for fname, protocol in entries:
            xs, mean, lo, hi = load(os.path.join(here, fname))
            ax.plot(xs, mean, marker="o", markersize=3, label=protocol)
            if args.bands:
                ax.fill_between(xs, lo, hi, alpha=0.15)
        ax.set_xlim(1, 99)
        ax.set_ylim(0, 100)
        ax.set_xlabel("Malicious nodes (%)")
        ax.set_ylabel("Honest nodes reached (%)")
        ax.set_title(topology)
        ax.grid(True, alpha=0.3)
        ax.legend()
        target = os.path.join(out_dir, "coverage_" + topology + ".png")
        fig.savefig(target, dpi=150, bbox_inches="tight")
        plt.close(fig)
        print(target)


if __name__ == "__main__":
    main()
'''


def emit_plot_script(sweeps, sink) -> None:
    """Write a self-contained script that plots the given sweeps' CSVs.

    One figure per topology, one labeled curve per protocol.  All sweeps
    must share the same fraction grid.
    """
    sweeps = list(sweeps)
    if not sweeps:
        raise ValueError("no sweeps to plot")
    grid = sweeps[0].fractions()
    for s in sweeps[1:]:
        if s.fractions() != grid:
            raise ValueError(
                f"sweep {s.protocol}/{s.topology} uses a different fraction grid"
            )
    lines = []
    for s in sweeps:
        fname = csv_filename(s.protocol, s.topology)
        lines.append(f'    ("{fname}", "{s.topology}", "{s.protocol}"),')
    text = _PLOT_TEMPLATE.format(series="\n".join(lines))
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        return
    sink.write(text)
