"""Byte-size constants and parsing helpers."""

import re

from .errors import ConfigError

KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB

# Decimal units, used for device capacities and rates.
KB = 1000
MB = 1000 * KB
GB = 1000 * MB

_SUFFIXES = {
    "": 1,
    "b": 1,
    "kib": KIB,
    "mib": MIB,
    "gib": GIB,
    "kb": KB,
    "mb": MB,
    "gb": GB,
}

_SIZE_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*([a-zA-Z]*)\s*$")


def parse_size(text: str | int) -> int:
    """Parse a byte count like ``4MiB``, ``64kb`` or ``65536``.

    Binary suffixes (KiB/MiB/GiB) are powers of 1024, decimal ones
    (KB/MB/GB) powers of 1000. Bare numbers are bytes.
    """
    if isinstance(text, int):
        return text
    m = _SIZE_RE.match(text)
    if not m:
        raise ConfigError(f"unparseable size {text!r}")
    value, suffix = m.groups()
    factor = _SUFFIXES.get(suffix.lower())
    if factor is None:
        raise ConfigError(f"unknown size suffix {suffix!r} in {text!r}")
    result = float(value) * factor
    if result != int(result):
        raise ConfigError(f"size {text!r} is not a whole number of bytes")
    return int(result)


def format_bytes(n: int) -> str:
    """Human-readable binary rendering, used in log output only."""
    for unit, factor in (("GiB", GIB), ("MiB", MIB), ("KiB", KIB)):
        if n >= factor and n % factor == 0:
            return f"{n // factor}{unit}"
    return f"{n}B"
