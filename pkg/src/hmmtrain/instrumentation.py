"""Deterministic memory and step accounting for the expectation engines.

Memory is measured in *cells*: entries of the dynamic-programming state
vectors an engine keeps alive (forward/backward columns and strips, and
the per-parameter estimator slices).  The model, the input sequence,
per-position scalar scale factors and the fixed-size output accumulators
are excluded, as is transient arithmetic scratch inside vectorized
operations; what remains is a platform-independent number that can be
compared directly across engines and sequence lengths.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field


@dataclass
class CellMeter:
    """Counts live and peak DP cells; engines call alloc/release explicitly."""

    live_cells: int = 0
    peak_cells: int = 0
    allocations: int = 0

    def alloc(self, n: int) -> None:
        if n < 0:
            raise ValueError("cannot allocate a negative number of cells")
        self.live_cells += n
        self.allocations += 1
        if self.live_cells > self.peak_cells:
            self.peak_cells = self.live_cells

    def release(self, n: int) -> None:
        if n > self.live_cells:
            raise RuntimeError(
                f"released {n} cells with only {self.live_cells} live; "
                f"engine accounting is broken"
            )
        self.live_cells -= n


@dataclass
class EngineCounters:
    """Counts DP column constructions, split by sweep direction."""

    fwd_steps: int = 0
    bwd_steps: int = 0

    def sweeps(self, length: int) -> int:
        """Full-sequence-equivalent passes: ceil(total steps / length)."""
        return math.ceil((self.fwd_steps + self.bwd_steps) / length)


@dataclass
class MeteredResult:
    result: object
    peak_cells: int
    wall_time: float
    counters: EngineCounters = field(default_factory=EngineCounters)


def metered_run(fn, /, *args, **kwargs) -> MeteredResult:
    """Run an engine callable with a fresh meter and step counters.

    ``fn`` must accept ``meter`` and ``counters`` keyword arguments, which
    every engine entry point in this package does.
    """
    meter = CellMeter()
    counters = EngineCounters()
    start = time.perf_counter()
    result = fn(*args, meter=meter, counters=counters, **kwargs)
    elapsed = time.perf_counter() - start
    return MeteredResult(result, meter.peak_cells, elapsed, counters)
