"""Single-sweep expectation engine with length-independent memory.

For each free parameter the engine carries, next to the scaled forward
slice, one auxiliary slice holding the path-weighted usage mass of that
parameter among paths that currently end in each state.  Both slices
propagate with the same per-symbol operator; the auxiliary slice
additionally receives an injection term whenever the tracked transition
or emission can be the step just taken.  At termination the auxiliary
mass routed into End divided by the terminal forward mass is exactly
the expected usage count over P(x), so one left-to-right sweep replaces
the forward-plus-backward pair and no full table ever exists.

A sweep can batch several estimator slices against one shared forward
slice; the ``batch`` parameter trades sweeps for live slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instrumentation import CellMeter
from .kernels import (
    SeqExpectations,
    check_sequence,
    compile_hmm,
    forward_init,
    forward_step,
    forward_logprob,
    raise_zero_prob,
)
from .model import START, Hmm, free_parameter_counts


@dataclass(frozen=True)
class Estimator:
    """One tracked free parameter: a transition (i, j) or an emission (i, y)."""

    kind: str  # "trans" | "emit"
    src: int   # full state index
    dst: int   # full state index for "trans", symbol index for "emit"


def estimator_order(hmm: Hmm) -> list[Estimator]:
    """Deterministic sweep order: transitions row-major, then emissions."""
    ests = [Estimator("trans", int(i), int(j)) for i, j in np.argwhere(hmm.trans_mask)]
    ests += [Estimator("emit", int(i), int(y)) for i, y in np.argwhere(hmm.emit_mask)]
    return ests


class _BatchPlan:
    """Precomputed injection index arrays for one batch of estimators."""

    def __init__(self, hmm: Hmm, batch: list[Estimator]):
        end = hmm.end
        self.n = len(batch)
        start_rows, start_dst = [], []
        step_rows, step_src, step_dst = [], [], []
        end_rows, end_src = [], []
        emit_by_symbol: dict[int, tuple[list[int], list[int]]] = {}
        for row, est in enumerate(batch):
            if est.kind == "trans":
                if est.src == START and est.dst != end:
                    start_rows.append(row)
                    start_dst.append(est.dst - 1)
                elif est.src != START and est.dst != end:
                    step_rows.append(row)
                    step_src.append(est.src - 1)
                    step_dst.append(est.dst - 1)
                elif est.src != START and est.dst == end:
                    end_rows.append(row)
                    end_src.append(est.src - 1)
                # Start -> End tracks nothing on non-empty sequences.
            else:
                rows, states = emit_by_symbol.setdefault(est.dst, ([], []))
                rows.append(row)
                states.append(est.src - 1)
        self.start_rows = np.asarray(start_rows, dtype=np.int64)
        self.start_dst = np.asarray(start_dst, dtype=np.int64)
        self.step_rows = np.asarray(step_rows, dtype=np.int64)
        self.step_src = np.asarray(step_src, dtype=np.int64)
        self.step_dst = np.asarray(step_dst, dtype=np.int64)
        self.end_rows = np.asarray(end_rows, dtype=np.int64)
        self.end_src = np.asarray(end_src, dtype=np.int64)
        self.emit_by_symbol = {
            sym: (np.asarray(rows, dtype=np.int64), np.asarray(states, dtype=np.int64))
            for sym, (rows, states) in emit_by_symbol.items()
        }


def _sweep(comp, plan: _BatchPlan, x: np.ndarray, meter: CellMeter,
           counters) -> tuple[np.ndarray, float]:
    """One pass over ``x`` carrying the batch; returns (ratios, log_prob)."""
    m = comp.m
    c, f = forward_init(comp, x[0])
    meter.alloc(m)
    if counters:
        counters.fwd_steps += 1
    if c == 0.0:
        meter.release(m)
        raise_zero_prob()
    log_prob = math.log(c)

    slab = np.zeros((plan.n, m))
    meter.alloc(plan.n * m)
    if len(plan.start_rows):
        slab[plan.start_rows, plan.start_dst] = f[plan.start_dst]
    hit = plan.emit_by_symbol.get(int(x[0]))
    if hit is not None:
        slab[hit[0], hit[1]] = f[hit[1]]

    for sym in x[1:]:
        sym = int(sym)
        w = comp.step[sym]
        c = float(f @ comp.step_rowsum[sym])
        if c == 0.0:
            meter.release(m + plan.n * m)
            raise_zero_prob()
        new_slab = slab @ w
        meter.alloc(plan.n * m)
        if len(plan.step_rows):
            new_slab[plan.step_rows, plan.step_dst] += (
                f[plan.step_src] * w[plan.step_src, plan.step_dst]
            )
        new_slab /= c
        meter.release(plan.n * m)
        slab = new_slab

        f_new = f @ w
        meter.alloc(m)
        f_new /= c
        meter.release(m)
        f = f_new

        hit = plan.emit_by_symbol.get(sym)
        if hit is not None:
            slab[hit[0], hit[1]] += f[hit[1]]
        log_prob += math.log(c)
        if counters:
            counters.fwd_steps += 1

    s_hat = float(f @ comp.to_end)
    if s_hat == 0.0:
        meter.release(m + plan.n * m)
        raise_zero_prob()
    totals = slab @ comp.to_end
    if len(plan.end_rows):
        totals[plan.end_rows] += f[plan.end_src] * comp.to_end[plan.end_src]
    meter.release(m + plan.n * m)
    return totals / s_hat, log_prob + math.log(s_hat)


def transition_expectation(hmm: Hmm, x, src: str, dst: str,
                           meter=None, counters=None) -> tuple[float, float]:
    """(expected src -> dst steps over P(x), log P(x)) in O(M) memory."""
    comp = compile_hmm(hmm)
    x = check_sequence(comp, x)
    meter = meter or CellMeter()
    i, j = hmm.state_index(src), hmm.state_index(dst)
    if not hmm.trans_mask[i, j]:
        log_prob = forward_logprob(comp, x, meter=meter, counters=counters)
        if log_prob == -math.inf:
            raise_zero_prob()
        return 0.0, log_prob
    plan = _BatchPlan(hmm, [Estimator("trans", i, j)])
    ratios, log_prob = _sweep(comp, plan, x, meter, counters)
    return float(ratios[0]), log_prob


def emission_expectation(hmm: Hmm, x, state: str, symbol: str,
                         meter=None, counters=None) -> tuple[float, float]:
    """(expected times ``state`` reads ``symbol`` over P(x), log P(x))."""
    comp = compile_hmm(hmm)
    x = check_sequence(comp, x)
    meter = meter or CellMeter()
    i, y = hmm.state_index(state), hmm.symbol_index(symbol)
    if not hmm.emit_mask[i, y]:
        log_prob = forward_logprob(comp, x, meter=meter, counters=counters)
        if log_prob == -math.inf:
            raise_zero_prob()
        return 0.0, log_prob
    plan = _BatchPlan(hmm, [Estimator("emit", i, y)])
    ratios, log_prob = _sweep(comp, plan, x, meter, counters)
    return float(ratios[0]), log_prob


def expectations(hmm: Hmm, x, batch: int = 1, meter=None, counters=None) -> SeqExpectations:
    """All expected usage counts over P(x) in ceil((T+E)/batch) sweeps."""
    comp = compile_hmm(hmm)
    x = check_sequence(comp, x)
    meter = meter or CellMeter()
    ests = estimator_order(hmm)
    n_free = len(ests)
    if not 1 <= batch <= n_free:
        raise ValueError(f"batch must be in 1..{n_free} (the free parameter count)")

    n_states = len(hmm.states)
    t = np.zeros((n_states, n_states))
    e = np.zeros((n_states, hmm.n_symbols))
    log_prob = None
    for lo in range(0, n_free, batch):
        chunk = ests[lo:lo + batch]
        ratios, lp = _sweep(comp, _BatchPlan(hmm, chunk), x, meter, counters)
        log_prob = lp if log_prob is None else log_prob
        for est, value in zip(chunk, ratios):
            if est.kind == "trans":
                t[est.src, est.dst] = value
            else:
                e[est.src, est.dst] = value
    return SeqExpectations(t, e, log_prob)


def sweep_count(hmm: Hmm, batch: int) -> int:
    """Number of sweeps ``expectations`` performs for this batch size."""
    total = sum(free_parameter_counts(hmm))
    return math.ceil(total / batch)
