"""Data model for discrete hidden Markov models with silent Start/End states.

States are indexed 0..M+1: index 0 is the silent start state, indices 1..M
are the emitting states and index M+1 is the silent end state.  A transition
or emission entry is a *free parameter* when its boolean mask entry is set;
entries outside the mask are structural zeros that stay zero through
training.  Keeping the mask separate from the current probabilities makes
structure-derived quantities (out-degree, free-parameter counts) stable
while probabilities move.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError

START = 0
ROW_SUM_TOL = 1e-9
RESERVED_STATE_NAMES = ("Start", "End")


@dataclass(frozen=True)
class Hmm:
    """An immutable discrete HMM.

    Attributes:
        states: all state names, "Start" first and "End" last.
        alphabet: emission symbols, one string each.
        trans: (M+2, M+2) transition probabilities, trans[i, j] = P(i -> j).
        emit: (M+2, A) emission probabilities for the emitting rows 1..M.
        trans_mask / emit_mask: boolean structural support of the entries.
    """

    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    trans: np.ndarray
    emit: np.ndarray
    trans_mask: np.ndarray
    emit_mask: np.ndarray

    def __post_init__(self):
        for arr in (self.trans, self.emit, self.trans_mask, self.emit_mask):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        """Number of emitting states."""
        return len(self.states) - 2

    @property
    def end(self) -> int:
        """Index of the silent end state."""
        return len(self.states) - 1

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)

    def state_index(self, name: str) -> int:
        return self.states.index(name)

    def symbol_index(self, symbol: str) -> int:
        return self.alphabet.index(symbol)

    @classmethod
    def from_entries(cls, state_names, alphabet, transitions, emissions) -> "Hmm":
        """Build a model from sparse entry lists.

        ``transitions`` is an iterable of (from_name, to_name, p) with
        from in states + "Start" and to in states + "End"; ``emissions``
        is an iterable of (state_name, symbol, p).  Entries that are
        absent are structural zeros; entries present with p = 0 are free
        parameters currently at zero.
        """
        state_names = list(state_names)
        alphabet = list(alphabet)
        for reserved in RESERVED_STATE_NAMES:
            if reserved in state_names:
                raise ValueError(f"state name {reserved!r} is reserved")
        if len(set(state_names)) != len(state_names):
            raise ValueError("duplicate state names")
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("duplicate alphabet symbols")
        if not state_names:
            raise ValueError("model needs at least one emitting state")
        if not alphabet:
            raise ValueError("model needs a non-empty alphabet")

        states = ("Start", *state_names, "End")
        n = len(states)
        a = len(alphabet)
        end = n - 1
        from_ok = {name: i for i, name in enumerate(states) if i != end}
        to_ok = {name: i for i, name in enumerate(states) if i != START}
        sym_ok = {s: y for y, s in enumerate(alphabet)}
        emit_ok = {name: i for i, name in enumerate(states) if i not in (START, end)}

        trans = np.zeros((n, n))
        trans_mask = np.zeros((n, n), dtype=bool)
        for src, dst, p in transitions:
            if src not in from_ok:
                raise ValueError(f"unknown or forbidden transition source {src!r}")
            if dst not in to_ok:
                raise ValueError(f"unknown or forbidden transition target {dst!r}")
            i, j = from_ok[src], to_ok[dst]
            if trans_mask[i, j]:
                raise ValueError(f"duplicate transition entry {src!r} -> {dst!r}")
            trans[i, j] = float(p)
            trans_mask[i, j] = True

        emit = np.zeros((n, a))
        emit_mask = np.zeros((n, a), dtype=bool)
        for name, symbol, p in emissions:
            if name not in emit_ok:
                raise ValueError(f"unknown or non-emitting state {name!r} in emissions")
            if symbol not in sym_ok:
                raise ValueError(f"unknown symbol {symbol!r} in emissions")
            i, y = emit_ok[name], sym_ok[symbol]
            if emit_mask[i, y]:
                raise ValueError(f"duplicate emission entry ({name!r}, {symbol!r})")
            emit[i, y] = float(p)
            emit_mask[i, y] = True

        return cls(states, tuple(alphabet), trans, emit, trans_mask, emit_mask)


@dataclass(frozen=True)
class SequenceSet:
    """Named training sequences, already encoded as alphabet indices."""

    entries: tuple[tuple[str, np.ndarray], ...]

    @property
    def total_length(self) -> int:
        return sum(len(sym) for _, sym in self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class Violation:
    """One failed model invariant; ``rule`` is a stable identifier."""

    state: str
    rule: str
    detail: str

    def __str__(self):
        return f"{self.state}: {self.rule}: {self.detail}"


def validate(hmm: Hmm) -> list[Violation]:
    """Check every model invariant; an empty report means the model is valid."""
    out = []
    end = hmm.end

    if not np.all(np.isfinite(hmm.trans)) or not np.all(np.isfinite(hmm.emit)):
        out.append(Violation("*", "non-finite", "probabilities must be finite"))
    for i, name in enumerate(hmm.states):
        if np.any(hmm.trans[i] < 0) or np.any(hmm.emit[i] < 0):
            out.append(Violation(name, "negative", "probabilities must be >= 0"))
        if np.any(hmm.trans[i][~hmm.trans_mask[i]] != 0):
            out.append(Violation(name, "off-support", "probability mass outside the structural mask"))
        if np.any(hmm.emit[i][~hmm.emit_mask[i]] != 0):
            out.append(Violation(name, "off-support", "emission mass outside the structural mask"))

    for i, name in enumerate(hmm.states):
        if hmm.trans_mask[i].any():
            total = float(hmm.trans[i].sum())
            if abs(total - 1.0) > ROW_SUM_TOL:
                out.append(Violation(name, "row-stochastic", f"outgoing transitions sum to {total!r}"))
    if hmm.trans_mask[:, START].any():
        out.append(Violation("Start", "start-incoming", "Start has no incoming transitions"))
    if hmm.trans_mask[end].any():
        out.append(Violation("End", "end-outgoing", "End has no outgoing transitions"))
    for i in (START, end):
        if hmm.emit_mask[i].any() or np.any(hmm.emit[i] != 0):
            out.append(Violation(hmm.states[i], "silent-emission", "Start/End emit nothing"))

    for i in range(1, end):
        name = hmm.states[i]
        total = float(hmm.emit[i].sum())
        if not hmm.emit_mask[i].any():
            out.append(Violation(name, "emission-stochastic", "emitting state has no emission support"))
        elif abs(total - 1.0) > ROW_SUM_TOL:
            out.append(Violation(name, "emission-stochastic", f"emissions sum to {total!r}"))
    return out


def require_valid(hmm: Hmm) -> None:
    violations = validate(hmm)
    if violations:
        raise InvalidModelError(violations)


def max_out_degree(hmm: Hmm) -> int:
    """Largest number of structurally present outgoing transitions of any state."""
    require_valid(hmm)
    return int(hmm.trans_mask.sum(axis=1).max())


def free_parameter_counts(hmm: Hmm) -> tuple[int, int]:
    """(free transition parameters, free emission parameters)."""
    require_valid(hmm)
    return int(hmm.trans_mask.sum()), int(hmm.emit_mask.sum())


def _row_cdf(matrix: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(matrix, axis=1)
    totals = cdf[:, -1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        cdf = np.where(totals > 0, cdf / totals, cdf)
    return cdf


def _draw(cdf_row: np.ndarray, rng) -> int:
    return int(np.searchsorted(cdf_row, rng.random(), side="right"))


def sample_sequence(hmm: Hmm, seed: int, max_len: int):
    """Draw one Start -> ... -> End walk, emitting one symbol per emitting state.

    Returns the emitted symbol indices, or None if End was not reached
    within ``max_len`` emissions (a reportable rejection, not an error).
    Deterministic for a fixed seed.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    rng = np.random.default_rng(seed)
    trans_cdf = _row_cdf(hmm.trans)
    emit_cdf = _row_cdf(hmm.emit)
    out: list[int] = []
    state = START
    while True:
        if not hmm.trans_mask[state].any():
            raise ValueError(f"state {hmm.states[state]!r} has no outgoing transitions")
        state = _draw(trans_cdf[state], rng)
        if state == hmm.end:
            return out
        if len(out) == max_len:
            return None
        out.append(_draw(emit_cdf[state], rng))


def sample_with_length(hmm: Hmm, length: int, seed: int) -> np.ndarray:
    """Emit exactly ``length`` symbols, restarting the walk whenever End is hit.

    Used to synthesize benchmark inputs of a requested length; for models
    whose states all link to End the result has positive probability.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    trans_cdf = _row_cdf(hmm.trans)
    emit_cdf = _row_cdf(hmm.emit)
    out = np.empty(length, dtype=np.int64)
    filled = 0
    state = START
    while filled < length:
        state = _draw(trans_cdf[state], rng)
        if state == hmm.end:
            state = START
            continue
        out[filled] = _draw(emit_cdf[state], rng)
        filled += 1
    return out


def _closure(seed_mask: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    reach = seed_mask.copy()
    frontier = list(np.flatnonzero(reach))
    while frontier:
        nxt = np.flatnonzero(adjacency[frontier].any(axis=0) & ~reach)
        reach[nxt] = True
        frontier = list(nxt)
    return reach


def _connected(start_row: np.ndarray, inner: np.ndarray, end_col: np.ndarray) -> bool:
    if not start_row.any() or not end_col.any():
        return False
    if not _closure(start_row, inner).all():
        return False
    return bool(_closure(end_col, inner.T).all())


def random_hmm(m_emitting: int, alphabet_size: int, density: float, seed: int,
               max_tries: int = 64) -> Hmm:
    """Generate a valid random model of the requested shape.

    Each candidate transition edge (Start->emitting, emitting->emitting,
    emitting->End) is kept with probability ``density``; emission support
    is the full alphabet.  Structures where some emitting state is not
    reachable from Start or cannot reach End are re-drawn; after
    ``max_tries`` failures a ValueError is raised.
    """
    if m_emitting < 1:
        raise ValueError("m_emitting must be >= 1")
    if not 1 <= alphabet_size <= 26:
        raise ValueError("alphabet_size must be in 1..26")
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    names = [f"s{i + 1}" for i in range(m_emitting)]
    alphabet = list(string.ascii_lowercase[:alphabet_size])

    for _ in range(max_tries):
        start_row = rng.random(m_emitting) < density
        inner = rng.random((m_emitting, m_emitting)) < density
        end_col = rng.random(m_emitting) < density
        if not _connected(start_row, inner, end_col):
            continue
        transitions = []
        weights = rng.uniform(0.1, 1.0, size=m_emitting)
        total = weights[start_row].sum()
        for i in np.flatnonzero(start_row):
            transitions.append(("Start", names[i], weights[i] / total))
        for i in range(m_emitting):
            support = list(np.flatnonzero(inner[i]))
            targets = [names[j] for j in support]
            if end_col[i]:
                targets.append("End")
            weights = rng.uniform(0.1, 1.0, size=len(targets))
            weights /= weights.sum()
            for name, w in zip(targets, weights):
                transitions.append((names[i], name, w))
        emissions = []
        for i in range(m_emitting):
            weights = rng.uniform(0.1, 1.0, size=alphabet_size)
            weights /= weights.sum()
            emissions.extend((names[i], alphabet[y], weights[y]) for y in range(alphabet_size))
        return Hmm.from_entries(names, alphabet, transitions, emissions)

    raise ValueError(
        f"density {density} too low to connect Start to End over "
        f"{m_emitting} emitting states (tried {max_tries} structures)"
    )
