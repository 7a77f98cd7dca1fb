"""Deterministic number formatting for emitted files."""


def fmt17(x) -> str:
    """Format a float with 17 significant digits (round-trippable, reproducible)."""
    return format(float(x), ".17g")


def fmt6(x) -> str:
    """Format a float with 6 significant digits for human-readable summaries."""
    return format(float(x), ".6g")
