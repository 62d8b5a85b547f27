"""Number formatting for tabular output."""

from __future__ import annotations


def sig9(value: float) -> str:
    """9-significant-digit rendering; negative zero collapses to "0"."""
    text = "%.9g" % value
    return "0" if text == "-0" else text
