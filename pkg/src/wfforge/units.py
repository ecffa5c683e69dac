"""Parsing of byte quantities with decimal SI suffixes (K, M, G, T)."""

from __future__ import annotations

import re

_SUFFIXES = {"": 1, "K": 10**3, "M": 10**6, "G": 10**9, "T": 10**12}
_PATTERN = re.compile(r"^\s*(\d+(?:\.\d*)?|\.\d+)\s*([KMGT]?)B?\s*$", re.IGNORECASE)


def parse_bytes(text: str | int) -> int:
    """Parse ``"100M"`` -> 100_000_000. Suffixes are powers of ten.

    Fractional mantissas are allowed as long as the result is a whole
    number of bytes (``"1.5K"`` is fine, ``"1.5"`` is not).
    """
    if isinstance(text, int):
        if text < 0:
            raise ValueError(f"negative byte quantity: {text}")
        return text
    m = _PATTERN.match(str(text))
    if not m:
        raise ValueError(f"not a byte quantity: {text!r}")
    mantissa, suffix = m.groups()
    scale = _SUFFIXES[suffix.upper()]
    if "." in mantissa:
        whole, frac = mantissa.split(".")
        digits = len(frac)
        numer = int(whole or "0") * 10**digits + int(frac or "0")
        value, rem = divmod(numer * scale, 10**digits)
        if rem:
            raise ValueError(f"{text!r} is not a whole number of bytes")
        return value
    return int(mantissa) * scale


def parse_rate(text: str | float) -> float:
    """Parse a bandwidth such as ``"466M"`` (bytes/sec) into a float."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(text)
    except ValueError:
        return float(parse_bytes(text))
