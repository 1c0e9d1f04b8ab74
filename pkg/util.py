from fractions import Fraction
from typing import Iterable


def parse_int_list(val: str) -> list[int]:
    """Parse "1,2,5-7" into [1, 2, 5, 6, 7]; ranges are inclusive."""
    if val is None or not str(val).strip():
        raise ValueError("Missing integer list")
    values: list[int] = []
    for part in str(val).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            lo_i, hi_i = int(lo), int(hi)
            if lo_i > hi_i:
                raise ValueError(f"Empty range: {part}")
            values.extend(range(lo_i, hi_i + 1))
        else:
            values.append(int(part))
    return dedupe_sorted(values)


def parse_fraction(val: str) -> float:
    """Parse "0.25", "1/4" or "1" into a float."""
    try:
        return float(Fraction(str(val).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"Not a number or fraction: {val!r}") from exc


def parse_fraction_list(val: str) -> list[float]:
    """Parse "0,1/4,1/2,3/4,1" into floats, sorted and without repeats."""
    if val is None or not str(val).strip():
        raise ValueError("Missing list of fractions")
    return dedupe_sorted(parse_fraction(part) for part in str(val).split(",") if part.strip())


def parse_members(val: str) -> list[int]:
    """Company indices such as "3,4,7"."""
    return parse_int_list(val)


def dedupe_sorted(items: Iterable) -> list:
    return sorted(set(items))
