"""Exception types shared across the package."""


class HmmError(Exception):
    """Base class for domain errors raised by this package."""


class ModelFormatError(HmmError):
    """A model file could not be parsed into a model."""


class SequenceFormatError(HmmError):
    """A sequence file could not be parsed against the model alphabet."""

    def __init__(self, message, line=None, column=None):
        if line is not None and column is not None:
            message = f"line {line}, column {column}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class InvalidModelError(HmmError):
    """An operation requiring a valid model was given one with violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"model fails validation: {lines}")


class ZeroProbabilityError(HmmError):
    """A sequence has probability zero under the model."""

    def __init__(self, sequence_id=None):
        self.sequence_id = sequence_id
        what = f"sequence {sequence_id!r}" if sequence_id else "sequence"
        super().__init__(f"{what} has probability zero under the model")


class DegenerateRowError(HmmError):
    """A re-estimation row has no expected mass and no pseudocount."""

    def __init__(self, kind, state):
        self.kind = kind
        self.state = state
        super().__init__(
            f"{kind} row for state {state!r} has zero expected mass and "
            f"pseudocount is zero; pass a pseudocount or keep_degenerate=True"
        )


class EnumerationLimitError(HmmError):
    """Exhaustive path enumeration was asked for too large an instance."""


class TrainError(HmmError):
    """Training aborted; carries the iteration and the partial report."""

    def __init__(self, message, iteration, report=None):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.report = report
