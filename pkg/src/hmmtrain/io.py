"""Model and sequence file formats.

A model file is JSON with keys ``alphabet`` (list of 1-character strings),
``states`` (names, excluding the implicit Start/End), ``transitions``
(list of {from, to, p}) and ``emissions`` (list of {state, symbol, p});
absent entries are structural zeros.  Sequence files are FASTA-like:
'>' lines open a named record, following non-empty lines hold symbols,
whitespace is ignored and any symbol outside the alphabet is a load
error naming line and column.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, SequenceFormatError
from .model import Hmm, SequenceSet


def _reject_constant(name):
    raise ModelFormatError(f"non-finite number {name!r} is not allowed in model files")


def load_model(path) -> Hmm:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(), parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    missing = {"alphabet", "states", "transitions", "emissions"} - doc.keys()
    if missing:
        raise ModelFormatError(f"{path}: missing keys {sorted(missing)}")

    alphabet = doc["alphabet"]
    if not isinstance(alphabet, list) or not all(
        isinstance(s, str) and len(s) == 1 for s in alphabet
    ):
        raise ModelFormatError(f"{path}: alphabet must be a list of 1-character strings")
    states = doc["states"]
    if not isinstance(states, list) or not all(isinstance(s, str) and s for s in states):
        raise ModelFormatError(f"{path}: states must be a list of non-empty names")

    def entries(key, fields):
        rows = doc[key]
        if not isinstance(rows, list):
            raise ModelFormatError(f"{path}: {key} must be a list")
        out = []
        for row in rows:
            if not isinstance(row, dict) or set(row) != set(fields):
                raise ModelFormatError(f"{path}: each {key} entry needs keys {fields}")
            if not isinstance(row["p"], (int, float)) or isinstance(row["p"], bool):
                raise ModelFormatError(f"{path}: {key} probability must be a number")
            out.append(tuple(row[f] for f in fields))
        return out

    transitions = entries("transitions", ("from", "to", "p"))
    emissions = entries("emissions", ("state", "symbol", "p"))
    try:
        return Hmm.from_entries(states, alphabet, transitions, emissions)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc


def save_model(hmm: Hmm, path) -> None:
    transitions = [
        {"from": hmm.states[i], "to": hmm.states[j], "p": float(hmm.trans[i, j])}
        for i, j in np.argwhere(hmm.trans_mask)
    ]
    emissions = [
        {"state": hmm.states[i], "symbol": hmm.alphabet[y], "p": float(hmm.emit[i, y])}
        for i, y in np.argwhere(hmm.emit_mask)
    ]
    doc = {
        "alphabet": list(hmm.alphabet),
        "states": list(hmm.states[1:-1]),
        "transitions": transitions,
        "emissions": emissions,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_fasta(path, alphabet) -> SequenceSet:
    """Parse a FASTA-like file against ``alphabet``; symbols become indices."""
    sym_index = {s: y for y, s in enumerate(alphabet)}
    entries: list[tuple[str, np.ndarray]] = []
    name = None
    symbols: list[int] = []
    opened_at = 0

    def close():
        if name is None:
            return
        if not symbols:
            raise SequenceFormatError(f"record {name!r} has no symbols", line=opened_at)
        entries.append((name, np.asarray(symbols, dtype=np.int64)))

    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith(">"):
                close()
                name = stripped[1:].strip()
                symbols = []
                opened_at = lineno
                if not name:
                    raise SequenceFormatError("record header has no name", line=lineno)
                continue
            if name is None:
                raise SequenceFormatError("sequence data before any '>' header", line=lineno)
            for col, ch in enumerate(line, 1):
                if ch.isspace():
                    continue
                if ch not in sym_index:
                    raise SequenceFormatError(
                        f"symbol {ch!r} is not in the model alphabet", line=lineno, column=col
                    )
                symbols.append(sym_index[ch])
    close()
    return SequenceSet(tuple(entries))


def save_fasta(seqs: SequenceSet, alphabet, path, width: int = 60) -> None:
    with open(path, "w") as fh:
        for name, symbols in seqs:
            fh.write(f">{name}\n")
            text = "".join(alphabet[y] for y in symbols)
            for k in range(0, len(text), width):
                fh.write(text[k:k + width] + "\n")
