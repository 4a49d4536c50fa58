"""One shared float formatter so every report/payload agrees digit-for-digit."""


def sig9(x: float) -> str:
    """Format with 9 significant digits (report/payload convention)."""
    return format(float(x), ".9g")


def round9(x: float) -> float:
    """The float actually written by :func:`sig9`, as a value."""
    return float(sig9(x))
