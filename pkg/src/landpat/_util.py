"""Small shared helpers for deterministic text output."""

import math


def num_token(v) -> str:
    """Format a number for CSV/header output.

    Integers (and integral floats) print without a decimal point; other
    floats use Python's shortest round-trip repr, so output is stable
    across runs and platforms. NaN/None become "NA".
    """
    if v is None:
        return "NA"
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        if v.is_integer() and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    return str(int(v))
