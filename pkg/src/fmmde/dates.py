"""Monthly date handling.

Dates are stored internally as integer month ordinals (year*12 + month-1),
which makes window arithmetic on monthly panels exact. Parsing accepts the
``M/D/YYYY`` style used by FRED-MD CSV files as well as ISO ``YYYY-MM`` /
``YYYY-MM-DD``.
"""

from __future__ import annotations

import re

_MDY_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$")
_ISO_RE = re.compile(r"^(\d{4})-(\d{1,2})(?:-(\d{1,2}))?$")


def month_ordinal(year: int, month: int) -> int:
    """Return the month ordinal for (year, month), month in 1..12."""
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range: {month}")
    return year * 12 + (month - 1)


def ordinal_to_ym(ordinal: int) -> tuple[int, int]:
    """Inverse of :func:`month_ordinal`."""
    return ordinal // 12, ordinal % 12 + 1


def parse_month(text: str) -> int:
    """Parse ``M/D/YYYY``, ``YYYY-MM`` or ``YYYY-MM-DD`` into a month ordinal."""
    s = text.strip()
    m = _MDY_RE.match(s)
    if m:
        month, _day, year = (int(g) for g in m.groups())
        return month_ordinal(year, month)
    m = _ISO_RE.match(s)
    if m:
        year, month = int(m.group(1)), int(m.group(2))
        return month_ordinal(year, month)
    raise ValueError(f"malformed date: {text!r}")


def format_month(ordinal: int) -> str:
    """Format a month ordinal as ISO ``YYYY-MM``."""
    year, month = ordinal_to_ym(int(ordinal))
    return f"{year:04d}-{month:02d}"
