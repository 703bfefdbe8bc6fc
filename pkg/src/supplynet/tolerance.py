"""Snap-to-integer and sign helpers.

Closed forms in this package take floors and fractional parts of quantities
that are exactly integral at analytically meaningful boundaries (v(K*) = c,
{z} = 0). Plain float arithmetic lands on either side of those boundaries, so
every floor, fractional part and sign test goes through these helpers.
"""

import math

REL_TOL = 1e-9


def snap(x: float, rel: float = REL_TOL) -> float:
    """Return the nearest integer if ``x`` is within ``rel`` of it, else ``x``."""
    r = round(x)
    if abs(x - r) <= rel * max(1.0, abs(x)):
        return float(r)
    return x


def floor(x: float) -> int:
    return math.floor(snap(x))


def ceil(x: float) -> int:
    return math.ceil(snap(x))


def frac(x: float) -> float:
    s = snap(x)
    return s - math.floor(s)


def sign(x: float, scale: float = 1.0, rel: float = REL_TOL) -> int:
    """Sign of ``x`` treating |x| <= rel * max(1, scale) as zero.

    ``scale`` should be the magnitude of the terms whose difference ``x`` is.
    """
    if abs(x) <= rel * max(1.0, abs(scale)):
        return 0
    return 1 if x > 0 else -1


def close(a: float, b: float, rel: float = REL_TOL) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))
