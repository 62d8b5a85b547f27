"""Error taxonomy shared across the toolkit."""

from __future__ import annotations


class MobitraceError(Exception):
    """Base class for all mobitrace data and usage errors."""


class ParseError(MobitraceError):
    """A rejected input line; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no

    @property
    def reason(self) -> str:
        return type(self).__name__


class MalformedLine(ParseError):
    """Wrong field count or structurally unusable row."""


class BadTimestamp(ParseError):
    """Timestamp is not strict ISO-8601 UTC (YYYY-MM-DDThh:mm:ssZ)."""


class BadCoordinate(ParseError):
    """Latitude or longitude non-numeric, non-finite, or out of range."""


class OutOfProjectionRange(ParseError):
    """Point farther than the local-projection guard allows from the reference."""


class EmptyInput(MobitraceError):
    """No record survived parsing and filtering."""


class BadPrefix(MobitraceError):
    """Prefix length outside 1..n."""


class TooShort(MobitraceError):
    """Trajectory has too few points for the requested statistic."""


class BadBinning(MobitraceError):
    """Histogram bin parameters violate their preconditions."""


class EmptyPopulation(MobitraceError):
    """A population-level aggregate was asked of zero users."""


class BadArgument(MobitraceError):
    """Scalar argument outside the operation's domain."""


class TooFewSamples(MobitraceError):
    """Not enough in-range samples to attempt a fit."""


class NoConvergence(MobitraceError):
    """Simplex refinement failed to meet tolerance within its iteration budget."""


class DegenerateTrajectory(MobitraceError):
    """All points coincide; the intrinsic frame is undefined."""


class UsageError(MobitraceError):
    """Bad command line or config; maps to exit code 1."""
