"""Exception types shared across the package."""

from __future__ import annotations


class CsmatchError(Exception):
    """Base class for all package errors."""


class ValidationError(CsmatchError):
    """An instance failed validation; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NotLaminar(CsmatchError):
    """Two classes of one institute intersect without containment."""

    def __init__(self, institute: str, first: frozenset, second: frozenset):
        self.institute = institute
        self.first = first
        self.second = second
        super().__init__(
            f"institute {institute!r}: classes {sorted(first)} and "
            f"{sorted(second)} intersect without containment"
        )


class SizeCapExceeded(CsmatchError):
    """A search space exceeded the configured cap."""

    def __init__(self, what: str, size, cap: int):
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: search space {size} exceeds cap {cap}")


class ParseError(CsmatchError):
    """A document could not be parsed; message carries field context."""


class HNotEqualE(CsmatchError):
    """Greedy prefix and top-choice set sizes differ: point is outside the polytope."""


class PackingError(CsmatchError):
    """A packing invariant failed, signalling the input point is not a polytope member."""


class MedianMismatch(CsmatchError):
    """Per-applicant median and packing cut disagree (internal error)."""


class MalformedClause(CsmatchError):
    """A clause is not made of exactly three distinct positive literals."""


class InfeasibleConfig(CsmatchError):
    """A generator configuration cannot produce an instance."""
