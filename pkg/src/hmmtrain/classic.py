"""Full-table forward-backward engine and Viterbi decoding.

Underflow is handled by per-position scaling: each forward column is
divided by its mass and the backward columns reuse the same factors, so
every ratio that feeds the re-estimation step is scale-free and the
log-probability is recovered from the scale logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instrumentation import CellMeter
from .kernels import (
    CompiledHmm,
    SeqExpectations,
    check_sequence,
    compile_hmm,
    forward_init,
    forward_step,
    raise_zero_prob,
)
from .model import START, Hmm


@dataclass
class ScaledTable:
    """A full DP table of scaled values plus its scale factors.

    For a forward table, the true probability at position k (0-based row
    k) is ``values[k] * prod(scales[:k + 1])``; for a backward table it
    is ``values[k] * prod(scales[k:])``.  ``log_prob`` is the sequence
    log-probability reconstructed from this table alone.
    """

    kind: str
    values: np.ndarray
    scales: np.ndarray
    log_prob: float


def forward_table(hmm: Hmm, x, meter=None, counters=None) -> ScaledTable:
    """Scaled forward table; a zero-probability sequence yields log_prob=-inf."""
    comp = compile_hmm(hmm)
    return _forward_table(comp, x, meter or CellMeter(), counters)


def _forward_table(comp: CompiledHmm, x, meter, counters) -> ScaledTable:
    x = check_sequence(comp, x)
    length, m = len(x), comp.m
    values = np.zeros((length, m))
    meter.alloc(length * m)
    scales = np.ones(length)
    dead = False

    c, f = forward_init(comp, x[0])
    values[0] = f
    if counters:
        counters.fwd_steps += 1
    if c == 0.0:
        dead = True
    else:
        scales[0] = c
    for k in range(1, length):
        if not dead:
            c, f = forward_step(comp, values[k - 1], x[k])
            values[k] = f
            if c == 0.0:
                dead = True
            else:
                scales[k] = c
        if counters:
            counters.fwd_steps += 1

    s_hat = float(values[-1] @ comp.to_end)
    if dead or s_hat == 0.0:
        log_prob = -math.inf
    else:
        log_prob = float(np.log(scales).sum()) + math.log(s_hat)
    return ScaledTable("forward", values, scales, log_prob)


def backward_table(hmm: Hmm, x, meter=None, counters=None) -> ScaledTable:
    """Scaled backward table with its own per-column scale factors."""
    comp = compile_hmm(hmm)
    x = check_sequence(comp, x)
    length, m = len(x), comp.m
    meter = meter or CellMeter()
    values = np.zeros((length, m))
    meter.alloc(length * m)
    scales = np.ones(length)
    dead = False

    raw = comp.to_end.copy()
    for k in range(length - 1, -1, -1):
        if k < length - 1:
            raw = comp.step[x[k + 1]] @ values[k + 1]
        if counters:
            counters.bwd_steps += 1
        if dead:
            continue
        d = float(raw.sum())
        if d == 0.0:
            dead = True
            continue
        scales[k] = d
        values[k] = raw / d

    p_hat = float(comp.start[x[0]] @ values[0])
    if dead or p_hat == 0.0:
        log_prob = -math.inf
    else:
        log_prob = float(np.log(scales).sum()) + math.log(p_hat)
    return ScaledTable("backward", values, scales, log_prob)


def expectations(hmm: Hmm, x, meter=None, counters=None) -> SeqExpectations:
    """Expected usage counts divided by P(x), from the two full tables."""
    comp = compile_hmm(hmm)
    meter = meter or CellMeter()
    x = check_sequence(comp, x)
    length, m, end = len(x), comp.m, hmm.end

    fwd = _forward_table(comp, x, meter, counters)
    if fwd.log_prob == -math.inf:
        meter.release(length * m)
        raise_zero_prob()
    fhat, scales = fwd.values, fwd.scales

    # Backward columns share the forward scale factors, so fhat[k] * bhat[k]
    # sums to the same terminal mass s_hat at every position.
    bhat = np.zeros((length, m))
    meter.alloc(length * m)
    bhat[length - 1] = comp.to_end
    if counters:
        counters.bwd_steps += 1
    for k in range(length - 2, -1, -1):
        bhat[k] = (comp.step[x[k + 1]] @ bhat[k + 1]) / scales[k + 1]
        if counters:
            counters.bwd_steps += 1
    s_hat = float(fhat[-1] @ comp.to_end)

    n_states = len(hmm.states)
    t = np.zeros((n_states, n_states))
    e = np.zeros((n_states, hmm.n_symbols))
    t_inner = t[1:end, 1:end]

    t[START, 1:end] = comp.start[x[0]] * bhat[0] / (scales[0] * s_hat)
    for y in range(comp.n_symbols):
        pos = np.flatnonzero(x == y)
        e[1:end, y] = np.einsum("ki,ki->i", fhat[pos], bhat[pos]) / s_hat
        pairs = pos[pos >= 1] - 1  # pair (k, k+1) indexed by k with x[k+1] == y
        if len(pairs):
            weighted_f = fhat[pairs] / (scales[pairs + 1] * s_hat)[:, None]
            t_inner += comp.step[y] * (weighted_f.T @ bhat[pairs + 1])
    t[1:end, end] = fhat[-1] * comp.to_end / s_hat

    meter.release(2 * length * m)
    return SeqExpectations(t, e, fwd.log_prob)


def viterbi(hmm: Hmm, x) -> tuple[list[str] | None, float]:
    """Most probable state path in log space.

    Ties are broken toward the lowest state index at every argmax, which
    makes the result deterministic.  A zero-probability sequence returns
    (None, -inf).
    """
    comp = compile_hmm(hmm)
    x = check_sequence(comp, x)
    length, m, end = len(x), comp.m, hmm.end
    with np.errstate(divide="ignore"):
        log_inner = np.log(hmm.trans[1:end, 1:end])
        log_emit = np.log(hmm.emit[1:end])
        log_start = np.log(hmm.trans[START, 1:end])
        log_end = np.log(hmm.trans[1:end, end])

    back = np.zeros((length, m), dtype=np.int64)
    score = log_start + log_emit[:, x[0]]
    for k in range(1, length):
        cand = score[:, None] + log_inner
        back[k] = np.argmax(cand, axis=0)  # first max = lowest predecessor index
        score = cand[back[k], np.arange(m)] + log_emit[:, x[k]]
    final = score + log_end
    best = int(np.argmax(final))
    if final[best] == -math.inf:
        return None, -math.inf

    path = np.zeros(length, dtype=np.int64)
    path[-1] = best
    for k in range(length - 1, 0, -1):
        path[k - 1] = back[k, path[k]]
    return [hmm.states[s + 1] for s in path], float(final[best])
