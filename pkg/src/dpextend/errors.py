"""Exception types raised across the package."""

from __future__ import annotations

from typing import Any, Optional


class DPExtendError(Exception):
    """Base class for all package errors."""


class MetricError(DPExtendError):
    """A distance table violates a metric axiom.

    Attributes:
      kind: name of the violated axiom, e.g. ``"TriangleViolation"``.
      witness: tuple of dataset indices exhibiting the violation.
    """

    def __init__(self, kind: str, witness: tuple[int, ...], message: str = ""):
        self.kind = kind
        self.witness = witness
        super().__init__(message or f"{kind} at {witness}")


class LengthMismatch(DPExtendError):
    pass


class SizeMismatch(DPExtendError):
    pass


class TooLarge(DPExtendError):
    pass


class BadParameters(DPExtendError):
    pass


class InvalidSpace(DPExtendError):
    pass


class InvalidMechanism(DPExtendError):
    """A probability table is malformed (bad shape, negative entry, bad row sum)."""

    def __init__(self, message: str, row: Optional[str] = None):
        self.row = row
        super().__init__(message)


class InvalidHypothesis(DPExtendError):
    pass


class UnknownDataset(DPExtendError):
    pass


class AbsoluteContinuityViolation(DPExtendError):
    """A row puts mass on an output the base row gives probability zero."""

    def __init__(self, dataset: int, output: int, message: str = ""):
        self.dataset = dataset
        self.output = output
        super().__init__(
            message or f"dataset {dataset} has mass on output {output} outside the base support"
        )


class NotPrivateOnH(DPExtendError):
    """The input mechanism fails the privacy precondition on its hypothesis set."""

    def __init__(self, report: Any, message: str = ""):
        self.report = report
        super().__init__(message or f"mechanism is not eps-DP on H: {report.summary()}")


class EmptyHypothesis(DPExtendError):
    pass


class TooManyOutputs(DPExtendError):
    pass
