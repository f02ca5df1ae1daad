"""Calendar year-month values with integer arithmetic."""

from __future__ import annotations

import re
from dataclasses import dataclass

_PATTERN = re.compile(r"^(\d{4})-?(\d{2})$")


@dataclass(frozen=True, order=True)
class Month:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month component out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "Month":
        """Accepts ``YYYY-MM`` or ``YYYYMM``."""
        m = _PATTERN.match(text.strip())
        if m is None:
            raise ValueError(f"not a year-month: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, n: int) -> "Month":
        return cls(n // 12, n % 12 + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def __add__(self, k: int) -> "Month":
        if not isinstance(k, int):
            return NotImplemented
        return Month.from_ordinal(self.ordinal + k)

    def __sub__(self, other):
        if isinstance(other, Month):
            return self.ordinal - other.ordinal
        if isinstance(other, int):
            return Month.from_ordinal(self.ordinal - other)
        return NotImplemented

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: Month, end: Month) -> list[Month]:
    """Inclusive range of months; empty if ``end < start``."""
    return [start + i for i in range(end - start + 1)]
