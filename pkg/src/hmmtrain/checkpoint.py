"""Checkpointing expectation engine with embedded checkpoint levels.

A level-k plan partitions the sequence into nested fields whose widths
shrink toward ~L^(1/k).  The forward sweep stores only the slice entering
each field; the backward sweep then walks fields right to left, asks the
forward recursion to rebuild each leaf field from its entering slice, and
pairs the rebuilt forward strip with a backward strip of the same width
to accumulate the expectation terms.  Level 1 degenerates to the
full-table strategy; higher levels trade recomputation time for live
columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instrumentation import CellMeter
from .kernels import (
    SeqExpectations,
    accumulate_pair,
    check_sequence,
    compile_hmm,
    forward_init,
    forward_step,
    raise_zero_prob,
)
from .model import START, Hmm


@dataclass(frozen=True)
class Field:
    """A contiguous run of sequence positions, 1-based inclusive."""

    start: int
    end: int
    children: tuple["Field", ...] = ()

    @property
    def width(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class CheckpointPlan:
    level: int
    length: int
    fields: tuple[Field, ...]

    def depth_widths(self) -> dict[int, list[int]]:
        """Field widths per materialized depth (1 = top level)."""
        out: dict[int, list[int]] = {}

        def walk(fields, depth):
            for f in fields:
                out.setdefault(depth, []).append(f.width)
                walk(f.children, depth + 1)

        walk(self.fields, 1)
        return out


def default_level(length: int) -> int:
    """Memory-optimal default: one level per factor e of the length."""
    return max(1, round(math.log(length)))


def max_level(length: int) -> int:
    return math.ceil(math.log(length)) + 1 if length > 1 else 1


def _partition(start: int, end: int, target: float) -> list[tuple[int, int]]:
    width = end - start + 1
    n = min(width, max(1, round(width / target)))
    base = width // n
    bounds = []
    lo = start
    for i in range(n):
        hi = lo + base - 1 if i < n - 1 else end  # remainder goes to the last field
        bounds.append((lo, hi))
        lo = hi + 1
    return bounds


def plan_checkpoints(length: int, level: int) -> CheckpointPlan:
    """Deterministic nested partition of 1..length for the given level."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if not 1 <= level <= max_level(length):
        raise ValueError(f"level must be in 1..{max_level(length)} for length {length}")
    if level == 1:
        return CheckpointPlan(1, length, (Field(1, length),))

    targets = {d: length ** ((level - d) / level) for d in range(1, level)}
    leaf_cap = (level - 1) * math.ceil(length ** (1 / level))

    def build(start, end, depth):
        fields = []
        for lo, hi in _partition(start, end, targets[depth]):
            width = hi - lo + 1
            if depth >= level - 1 or width <= leaf_cap:
                fields.append(Field(lo, hi))
            else:
                fields.append(Field(lo, hi, build(lo, hi, depth + 1)))
        return tuple(fields)

    return CheckpointPlan(level, length, build(1, length, 1))


class _Run:
    """Mutable state shared by one expectation computation."""

    def __init__(self, comp, x, meter, counters):
        self.comp = comp
        self.x = x
        self.meter = meter
        self.counters = counters
        self.m = comp.m
        n_states = len(comp.hmm.states)
        self.t = np.zeros((n_states, n_states))
        self.e = np.zeros((n_states, comp.n_symbols))
        self.s_hat = 0.0

    def fwd_at(self, pos: int, entering: np.ndarray | None):
        """Scaled forward slice and scale at ``pos`` given the slice at pos-1."""
        if entering is None:
            c, f = forward_init(self.comp, self.x[0])
        else:
            c, f = forward_step(self.comp, entering, self.x[pos - 1])
        if self.counters:
            self.counters.fwd_steps += 1
        if c == 0.0:
            raise_zero_prob()
        return c, f


def expectations(hmm: Hmm, x, level: int | None = None,
                 meter=None, counters=None) -> SeqExpectations:
    """Expected usage counts over P(x) using the checkpointing strategy."""
    comp = compile_hmm(hmm)
    x = check_sequence(comp, x)
    length = len(x)
    if level is None:
        level = default_level(length)
    plan = plan_checkpoints(length, level)
    meter = meter or CellMeter()
    run = _Run(comp, x, meter, counters)
    m = comp.m

    # Pass 1: one forward sweep; keep only the slice entering each top field.
    entries: list[np.ndarray | None] = [None]
    log_c = 0.0
    f = None
    for pos in range(1, length + 1):
        c, f_new = run.fwd_at(pos, f)
        meter.alloc(m)
        if f is not None:
            meter.release(m)
        f = f_new
        log_c += math.log(c)
        starts = {fld.start for fld in plan.fields[1:]}
        if pos + 1 in starts:
            entries.append(f)
            meter.alloc(m)  # retained checkpoint column
    run.s_hat = float(f @ comp.to_end)
    meter.release(m)
    if run.s_hat == 0.0:
        for col in entries[1:]:
            meter.release(m)
        raise_zero_prob()
    log_prob = log_c + math.log(run.s_hat)

    # Pass 2: fields right to left; each returns the handoff for its left
    # neighbour, the backward slice and scale at its first position.
    handoff = None
    for idx in range(len(plan.fields) - 1, -1, -1):
        fld = plan.fields[idx]
        handoff = _process(run, fld, entries[idx], handoff, plan.level, depth=1)
        if idx >= 1:
            meter.release(m)  # checkpoint column consumed
    meter.release(m)  # final handoff column
    return SeqExpectations(run.t, run.e, log_prob)


def _process(run: _Run, fld: Field, entering, handoff, level: int, depth: int):
    if fld.children:
        return _process_split(run, fld, entering, handoff, level, depth)
    return _process_leaf(run, fld, entering, handoff)


def _process_split(run: _Run, fld: Field, entering, handoff, level, depth):
    m, meter = run.m, run.meter
    entries: list[np.ndarray | None] = [entering]
    f = entering
    held = 0
    for child in fld.children[:-1]:
        for pos in range(child.start, child.end + 1):
            _, f_new = run.fwd_at(pos, f)
            meter.alloc(m)
            if f is not entering and f is not entries[-1]:
                meter.release(m)
            f = f_new
        entries.append(f)
        held += 1
    # the running slice is the last stored entry; nothing extra to drop
    for idx in range(len(fld.children) - 1, -1, -1):
        handoff = _process(run, fld.children[idx], entries[idx], handoff, level, depth + 1)
        if idx >= 1:
            meter.release(m)
            held -= 1
    return handoff


def _process_leaf(run: _Run, fld: Field, entering, handoff):
    comp, x, meter = run.comp, run.x, run.meter
    m, end = run.m, comp.hmm.end
    width = fld.width
    length = len(x)

    # Rebuild the forward strip for the field from its entering slice.
    fhat = np.zeros((width, m))
    meter.alloc(width * m)
    scales = np.zeros(width)
    prev = entering
    for offset, pos in enumerate(range(fld.start, fld.end + 1)):
        c, f = run.fwd_at(pos, prev)
        fhat[offset] = f
        scales[offset] = c
        prev = fhat[offset]

    # Fill the backward strip right to left, seeded by the right handoff.
    bhat = np.zeros((width, m))
    meter.alloc(width * m)
    if handoff is None:
        bhat[-1] = comp.to_end
        run.t[1:end, end] += fhat[-1] * comp.to_end / run.s_hat
    else:
        b_right, c_right = handoff
        bhat[-1] = (comp.step[x[fld.end]] @ b_right) / c_right
    if run.counters:
        run.counters.bwd_steps += 1
    for offset in range(width - 2, -1, -1):
        pos = fld.start + offset
        bhat[offset] = (comp.step[x[pos]] @ bhat[offset + 1]) / scales[offset + 1]
        if run.counters:
            run.counters.bwd_steps += 1

    # Expectation terms owned by this field: emissions at its positions and
    # the transition pairs whose right end lies inside it.
    for offset, pos in enumerate(range(fld.start, fld.end + 1)):
        run.e[1:end, x[pos - 1]] += fhat[offset] * bhat[offset] / run.s_hat
    for offset in range(1, width):
        pos = fld.start + offset
        accumulate_pair(run.t[1:end, 1:end], fhat[offset - 1], bhat[offset],
                        comp.step[x[pos - 1]], 1.0 / (scales[offset] * run.s_hat))
    first_pos = fld.start
    if entering is None:
        run.t[START, 1:end] += comp.start[x[0]] * bhat[0] / (scales[0] * run.s_hat)
    else:
        accumulate_pair(run.t[1:end, 1:end], entering, bhat[0],
                        comp.step[x[first_pos - 1]], 1.0 / (scales[0] * run.s_hat))

    out_b = bhat[0].copy()
    out_c = scales[0]
    meter.alloc(m)
    if handoff is not None:
        meter.release(m)  # right handoff column no longer needed
    meter.release(2 * width * m)
    return out_b, out_c
