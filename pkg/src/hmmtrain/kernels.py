"""Shared dynamic-programming primitives used by every expectation engine.

All engines propagate scaled forward slices with the same per-symbol
operators and the same scalar arithmetic, so log-probabilities are
bit-identical across engines.  A slice holds one value per emitting
state; the silent Start/End states enter only through the initial and
terminal operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroProbabilityError
from .model import Hmm


@dataclass(frozen=True)
class CompiledHmm:
    """Dense per-symbol update operators derived from a model.

    step[y][n, m] propagates mass from emitting state n to emitting state
    m while reading symbol y; start[y][m] injects the Start -> m step and
    to_end[m] closes a path.  step_rowsum pre-aggregates step over the
    target axis so scale factors cost one dot product.
    """

    hmm: Hmm
    step: np.ndarray          # (A, M, M)
    step_rowsum: np.ndarray   # (A, M)
    start: np.ndarray         # (A, M)
    start_sum: np.ndarray     # (A,)
    to_end: np.ndarray        # (M,)

    @property
    def m(self) -> int:
        return self.hmm.m

    @property
    def n_symbols(self) -> int:
        return self.hmm.n_symbols


def compile_hmm(hmm: Hmm) -> CompiledHmm:
    m, end = hmm.m, hmm.end
    inner = hmm.trans[1:end, 1:end]
    emit = hmm.emit[1:end]                        # (M, A)
    step = emit.T[:, None, :] * inner[None, :, :]  # (A, M, M)
    start = emit.T * hmm.trans[0, 1:end][None, :]  # (A, M)
    return CompiledHmm(
        hmm=hmm,
        step=np.ascontiguousarray(step),
        step_rowsum=np.ascontiguousarray(step.sum(axis=2)),
        start=np.ascontiguousarray(start),
        start_sum=start.sum(axis=1),
        to_end=hmm.trans[1:end, end].copy(),
    )


def check_sequence(comp: CompiledHmm, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("sequence must be a non-empty 1-d array of symbol indices")
    if x.min() < 0 or x.max() >= comp.n_symbols:
        raise ValueError("sequence contains a symbol outside the model alphabet")
    return x


def forward_init(comp: CompiledHmm, sym: int) -> tuple[float, np.ndarray]:
    """First scaled forward slice and its scale factor (0 means dead)."""
    c = float(comp.start_sum[sym])
    if c == 0.0:
        return 0.0, np.zeros(comp.m)
    return c, comp.start[sym] / c


def forward_step(comp: CompiledHmm, f: np.ndarray, sym: int) -> tuple[float, np.ndarray]:
    """Propagate a scaled forward slice by one position."""
    c = float(f @ comp.step_rowsum[sym])
    if c == 0.0:
        return 0.0, np.zeros(comp.m)
    out = f @ comp.step[sym]
    out /= c
    return c, out


def forward_logprob(comp: CompiledHmm, x: np.ndarray, meter=None, counters=None) -> float:
    """Log P(x) from a slice-only forward sweep; -inf for dead sequences."""
    x = check_sequence(comp, x)
    m = comp.m
    dead = False
    log_c = 0.0
    c, f = forward_init(comp, x[0])
    if meter:
        meter.alloc(m)
    if counters:
        counters.fwd_steps += 1
    if c == 0.0:
        dead = True
    else:
        log_c += math.log(c)
    for sym in x[1:]:
        if not dead:
            c, f_new = forward_step(comp, f, sym)
            if meter:
                meter.alloc(m)
                meter.release(m)
            if c == 0.0:
                dead = True
            else:
                log_c += math.log(c)
                f = f_new
        if counters:
            counters.fwd_steps += 1
    s_hat = float(f @ comp.to_end)
    if meter:
        meter.release(m)
    if dead or s_hat == 0.0:
        return -math.inf
    return log_c + math.log(s_hat)


@dataclass
class SeqExpectations:
    """Per-sequence expected usage counts, already divided by P(x).

    ``trans[i, j]`` is the expected number of i -> j steps on a random
    path explaining the sequence (boundary Start -> j and i -> End steps
    included), ``emit[i, y]`` the expected number of times state i reads
    symbol y, and ``log_prob`` the sequence log-probability.
    """

    trans: np.ndarray
    emit: np.ndarray
    log_prob: float


def raise_zero_prob(sequence_id=None):
    raise ZeroProbabilityError(sequence_id)


def accumulate_pair(t_inner: np.ndarray, f_col: np.ndarray, b_next: np.ndarray,
                    step_y: np.ndarray, inv_scale: float) -> None:
    """Add one position's transition mass: f[i] * step[i, j] * b[j] / scale."""
    t_inner += (f_col[:, None] * step_y) * (b_next * inv_scale)[None, :]
