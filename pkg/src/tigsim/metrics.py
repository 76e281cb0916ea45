"""Per-master latency/bandwidth aggregation and CSV reports.

Latency of a transaction is complete_cycle - request_cycle.  Percentiles
use the nearest-rank method (value at 1-based index ceil(q/100 * n) of
the sorted samples), which keeps results integral and reproducible.
Bandwidth divides a master's transferred bytes by its own active
interval, last completion minus first request, so masters that start at
different cycles remain comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .interconnect import BUS_WIDTH_BYTES, Transaction

CSV_HEADER = ("scenario,master,role,txn_count,bytes,avg_latency,"
              "p50,p95,max_latency,bandwidth,completion_cycle,slowdown")

TXN_CSV_HEADER = "scenario,master,txn_id,kind,address,beats,request,grant,complete"


class EmptySamples(ValueError):
    """Percentile of an empty sample series is undefined."""


def percentile(samples, q) -> int:
    """Nearest-rank percentile; q in [0, 100], samples non-empty."""
    if not samples:
        raise EmptySamples("no samples")
    if not 0 <= q <= 100:
        raise ValueError(f"q must lie in [0, 100], got {q}")
    ordered = sorted(samples)
    rank = math.ceil(q / 100 * len(ordered))
    return ordered[max(rank, 1) - 1]


@dataclass
class MasterMetrics:
    """Aggregated timing for one master in one run."""

    master: str
    role: str
    txn_count: int = 0
    total_bytes: int = 0
    latencies: list[int] = field(default_factory=list)
    first_request: int | None = None
    completion_cycle: int | None = None
    slowdown: float | None = None

    def record(self, txn: Transaction):
        if txn.complete_cycle is None:
            raise ValueError(f"transaction {txn.txn_id} has not completed")
        self.txn_count += 1
        self.total_bytes += txn.beats * BUS_WIDTH_BYTES
        self.latencies.append(txn.complete_cycle - txn.request_cycle)
        if self.first_request is None or txn.request_cycle < self.first_request:
            self.first_request = txn.request_cycle
        if self.completion_cycle is None or txn.complete_cycle > self.completion_cycle:
            self.completion_cycle = txn.complete_cycle

    @property
    def avg_latency(self) -> float | None:
        if not self.latencies:
            return None
        return sum(self.latencies) / len(self.latencies)

    @property
    def p50(self) -> int | None:
        return percentile(self.latencies, 50) if self.latencies else None

    @property
    def p95(self) -> int | None:
        return percentile(self.latencies, 95) if self.latencies else None

    @property
    def max_latency(self) -> int | None:
        return max(self.latencies) if self.latencies else None

    @property
    def bandwidth(self) -> float | None:
        """Bytes per cycle over this master's own active interval."""
        if not self.latencies:
            return None
        span = self.completion_cycle - self.first_request
        if span <= 0:
            return None
        return self.total_bytes / span


@dataclass
class MetricsRecord:
    """All per-master metrics for one run plus run metadata."""

    scenario: str
    masters: dict[str, MasterMetrics]
    topology_hash: str = ""
    seed: int = 0
    cycles: int = 0
    partial: bool = False

    @property
    def label(self) -> str:
        # Partial (cycle-limited) runs are flagged in the scenario column.
        return f"{self.scenario}:partial" if self.partial else self.scenario


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def emit_csv(records) -> str:
    """Exact-column CSV, rows sorted by (scenario, master)."""
    rows = []
    for rec in records:
        for name, m in rec.masters.items():
            rows.append((rec.label, name, m))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = [CSV_HEADER]
    for scenario, name, m in rows:
        lines.append(",".join([
            scenario,
            name,
            m.role,
            str(m.txn_count),
            str(m.total_bytes),
            _fmt(m.avg_latency),
            _fmt(m.p50),
            _fmt(m.p95),
            _fmt(m.max_latency),
            _fmt(m.bandwidth),
            _fmt(m.completion_cycle),
            _fmt(m.slowdown),
        ]))
    return "\n".join(lines) + "\n"


def emit_transactions_csv(rows) -> str:
    """Per-transaction dump; rows are (scenario, master, Transaction)."""
    ordered = sorted(rows, key=lambda r: (r[0], r[1], r[2].txn_id))
    lines = [TXN_CSV_HEADER]
    for scenario, master, t in ordered:
        lines.append(",".join([
            scenario, master, str(t.txn_id), t.kind, f"{t.address:#010x}",
            str(t.beats), str(t.request_cycle), _fmt(t.grant_cycle),
            _fmt(t.complete_cycle),
        ]))
    return "\n".join(lines) + "\n"
