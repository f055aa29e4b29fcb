"""Exhaustive path enumeration on tiny instances.

Every quantity the expectation engines produce is, by definition, a
weighted sum over complete Start -> ... -> End state paths.  This module
computes those sums literally, path by path, and is the ground truth the
fast engines are tested against.  It is a test fixture, not a production
path: instances above the enumeration guard are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationLimitError
from .kernels import SeqExpectations, raise_zero_prob
from .model import START, Hmm

PATH_LIMIT = 10 ** 7


@dataclass(frozen=True)
class PathWeight:
    """One complete state path (emitting-state indices) and its probability."""

    path: tuple[int, ...]
    prob: float


def _guard(hmm: Hmm, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("sequence must be a non-empty 1-d array of symbol indices")
    if hmm.m ** x.size > PATH_LIMIT:
        raise EnumerationLimitError(
            f"{hmm.m}^{x.size} state paths exceed the enumeration guard of {PATH_LIMIT}"
        )
    return x


def _paths_and_probs(hmm: Hmm, x: np.ndarray):
    """All mask-supported paths as an (N, L) index matrix plus probabilities."""
    m, end, length = hmm.m, hmm.end, len(x)
    grids = np.meshgrid(*([np.arange(1, m + 1)] * length), indexing="ij")
    paths = np.stack([g.ravel() for g in grids], axis=1) if length else np.empty((1, 0), int)

    support = hmm.trans_mask[START, paths[:, 0]] & hmm.emit_mask[paths[:, 0], x[0]]
    for k in range(1, length):
        support &= hmm.trans_mask[paths[:, k - 1], paths[:, k]]
        support &= hmm.emit_mask[paths[:, k], x[k]]
    support &= hmm.trans_mask[paths[:, -1], end]
    paths = paths[support]

    probs = hmm.trans[START, paths[:, 0]] * hmm.emit[paths[:, 0], x[0]]
    for k in range(1, length):
        probs = probs * hmm.trans[paths[:, k - 1], paths[:, k]] * hmm.emit[paths[:, k], x[k]]
    probs = probs * hmm.trans[paths[:, -1], end]
    return paths, probs


def enumerate_paths(hmm: Hmm, x) -> list[PathWeight]:
    """Every structurally possible state path for ``x`` with its probability."""
    x = _guard(hmm, x)
    paths, probs = _paths_and_probs(hmm, x)
    return [PathWeight(tuple(int(s) for s in p), float(w)) for p, w in zip(paths, probs)]


def total_probability(hmm: Hmm, x) -> float:
    """P(x): the plain sum of all path probabilities."""
    x = _guard(hmm, x)
    _, probs = _paths_and_probs(hmm, x)
    return float(probs.sum())


def _padded(hmm: Hmm, paths: np.ndarray) -> np.ndarray:
    n = len(paths)
    cols = [np.full((n, 1), START), paths, np.full((n, 1), hmm.end)]
    return np.concatenate(cols, axis=1)


def transition_mass(hmm: Hmm, x, src: str, dst: str) -> float:
    """Sum over paths of prob times the number of src -> dst steps taken.

    The Start -> first and last -> End steps count, so summing over all
    state pairs yields (L + 1) * P(x).
    """
    x = _guard(hmm, x)
    paths, probs = _paths_and_probs(hmm, x)
    if not len(paths):
        return 0.0
    full = _padded(hmm, paths)
    i, j = hmm.state_index(src), hmm.state_index(dst)
    counts = ((full[:, :-1] == i) & (full[:, 1:] == j)).sum(axis=1)
    return float(counts @ probs)


def emission_mass(hmm: Hmm, x, state: str, symbol: str) -> float:
    """Sum over paths of prob times the number of times ``state`` reads ``symbol``."""
    x = _guard(hmm, x)
    paths, probs = _paths_and_probs(hmm, x)
    if not len(paths):
        return 0.0
    i, y = hmm.state_index(state), hmm.symbol_index(symbol)
    counts = ((paths == i) & (x[None, :] == y)).sum(axis=1)
    return float(counts @ probs)


def expectations(hmm: Hmm, x, meter=None, counters=None) -> SeqExpectations:
    """All expected usage counts divided by P(x), via literal enumeration."""
    x = _guard(hmm, x)
    paths, probs = _paths_and_probs(hmm, x)
    total = float(probs.sum())
    if total == 0.0:
        raise_zero_prob()
    n_states = len(hmm.states)
    t = np.zeros((n_states, n_states))
    e = np.zeros((n_states, hmm.n_symbols))
    full = _padded(hmm, paths)
    for i, j in np.argwhere(hmm.trans_mask):
        counts = ((full[:, :-1] == i) & (full[:, 1:] == j)).sum(axis=1)
        t[i, j] = float(counts @ probs) / total
    for i, y in np.argwhere(hmm.emit_mask):
        counts = ((paths == i) & (x[None, :] == y)).sum(axis=1)
        e[i, y] = float(counts @ probs) / total
    return SeqExpectations(t, e, math.log(total))
