"""Signed quantities carried as natural logarithms of their magnitude.

Quantities such as b**(p**m) or sigma**(n - m) leave the double range for
moderate m; they are only ever combined multiplicatively, so logs suffice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LogMagnitude:
    log_value: float
    sign: int = 1

    def __post_init__(self):
        if not math.isfinite(self.log_value):
            raise ValueError("log magnitude must be finite")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def of(cls, x: float) -> "LogMagnitude":
        if x == 0 or not math.isfinite(x):
            raise ValueError(f"cannot take log magnitude of {x!r}")
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def __mul__(self, other):
        if isinstance(other, LogMagnitude):
            return LogMagnitude(self.log_value + other.log_value, self.sign * other.sign)
        return self * LogMagnitude.of(other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, LogMagnitude):
            return LogMagnitude(self.log_value - other.log_value, self.sign * other.sign)
        return self / LogMagnitude.of(other)

    def __pow__(self, k: float):
        if self.sign < 0 and float(k) != int(k):
            raise ValueError("fractional power of a negative quantity")
        sign = self.sign if int(k) % 2 else 1
        return LogMagnitude(self.log_value * k, sign)

    def value(self) -> float:
        """Plain float; 0.0 or inf when out of range."""
        if self.log_value < -745:
            return 0.0 * self.sign
        if self.log_value > 709:
            return math.inf * self.sign
        return self.sign * math.exp(self.log_value)

    def __lt__(self, other: "LogMagnitude") -> bool:
        if self.sign != other.sign:
            return self.sign < other.sign
        return (self.log_value < other.log_value) if self.sign > 0 else (self.log_value > other.log_value)

    def __float__(self):
        return self.value()
