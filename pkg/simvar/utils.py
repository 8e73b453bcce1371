"""
Utility functions shared by the codec, the reports and the CLI.
"""
from __future__ import annotations

import logging
import math

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """
    Shortest round-trip decimal for a float.

    Integral values drop the trailing ".0" so ``0.0`` is written as ``0``
    and ``-0.0`` as ``-0``.

    Args:
        value: Finite float to serialize.

    Returns:
        str: Text that parses back to the identical double.
    """
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def format_sci(value: float | None, digits: int = 2) -> str:
    """
    Scientific notation with ``digits`` significant figures, as used in report tables.

    Args:
        value: Number to format. ``None`` renders as "-".
        digits: Significant figures.

    Returns:
        str: e.g. "5.6e-13", "0" for an exact zero.
    """
    if value is None:
        return "-"
    if value == 0:
        return "0"
    if not math.isfinite(value):
        return str(value)
    return f"{value:.{max(digits - 1, 0)}e}"


def parse_float_list(text: str) -> list[float]:
    """Parses "0,25,50" into [0.0, 25.0, 50.0]; blanks are skipped."""
    values: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(float(part))
        except ValueError as e:
            raise ValueError(f"not a number: {part!r}") from e
    return values


def parse_int_list(text: str) -> list[int]:
    """Parses "-20,0,19" into integers."""
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(int(part))
        except ValueError as e:
            raise ValueError(f"not an integer: {part!r}") from e
    return values


def parse_core_list(text: str) -> list[int]:
    """
    Parses a core list such as "0,2-3" into [0, 2, 3].

    Raises:
        ValueError: on empty input, negative cores or inverted ranges.
    """
    cores: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo_text, hi_text = part.split("-", 1)
            lo, hi = int(lo_text), int(hi_text)
            if lo > hi:
                raise ValueError(f"inverted core range: {part}")
            cores.update(range(lo, hi + 1))
        else:
            cores.add(int(part))
    if not cores:
        raise ValueError("empty core list")
    if min(cores) < 0:
        raise ValueError("core ids must be non-negative")
    return sorted(cores)


def format_core_list(cores: list[int] | None) -> str:
    """Inverse of parse_core_list for metadata ("none" when unpinned)."""
    if not cores:
        return "none"
    return ",".join(str(c) for c in sorted(cores))
