"""Transmission-mode tables and the exponential BER approximation.

Each positive mode ``n`` carries a rate ``R_n`` and a BER fit
``A_n * exp(-A'_n * gamma)``. Inverting the fit at a target BER gives the
minimum SNIR a mode needs; those thresholds drive every other module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


class InvalidModeError(ValueError):
    """Raised when a BER quantity is requested for the outage mode."""


class NegativeThresholdError(ValueError):
    """Raised when a BER target exceeds a mode's fit amplitude."""


@dataclass(frozen=True)
class AmcMode:
    index: int
    rate: float
    fit_a: float = 0.0
    fit_slope: float = 0.0

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"mode index must be >= 0, got {self.index}")
        if self.index == 0:
            if self.rate != 0.0:
                raise ValueError("mode 0 is the outage mode and must have rate 0")
            return
        if not (self.rate > 0 and self.fit_a > 0 and self.fit_slope > 0):
            raise ValueError(
                f"mode {self.index}: rate, fit_a and fit_slope must be positive"
            )


@dataclass(frozen=True)
class AmcTable:
    """Ordered mode table; ``modes[0]`` is always the outage mode."""

    modes: tuple[AmcMode, ...]

    def __post_init__(self) -> None:
        if len(self.modes) < 2:
            raise ValueError("an AMC table needs at least one positive mode")
        for i, mode in enumerate(self.modes):
            if mode.index != i:
                raise ValueError(f"mode at position {i} has index {mode.index}")
        rates = [m.rate for m in self.modes]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError(f"rates must be strictly increasing, got {rates}")

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> "AmcTable":
        """Build a table from ``(rate, fit_a, fit_slope)`` for modes 1..N."""
        modes = [AmcMode(0, 0.0)]
        for n, (rate, fit_a, fit_slope) in enumerate(triples, start=1):
            modes.append(AmcMode(n, float(rate), float(fit_a), float(fit_slope)))
        return cls(tuple(modes))

    @property
    def n_modes(self) -> int:
        """Number of positive modes N."""
        return len(self.modes) - 1

    @property
    def rates(self) -> np.ndarray:
        return np.array([m.rate for m in self.modes])

    @property
    def max_rate(self) -> float:
        return self.modes[-1].rate

    def thresholds(self, target: float) -> np.ndarray:
        """SNIR thresholds for modes 0..N at BER ``target``; entry 0 is 0.

        Results are memoized per (table, target) pair.
        """
        return _thresholds_cached(self, float(target)).copy()


# 802.11a rates. A_n = 0.2 for every mode (the usual MQAM amplitude); each
# slope puts the 1e-5 threshold at a nominal coded-QAM AWGN operating point
# (5, 7, 8.5, 11.5, 14, 18, 22 dB).
_DEFAULT_RATES = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)
_DEFAULT_DB_AT_1E5 = (5.0, 7.0, 8.5, 11.5, 14.0, 18.0, 22.0)
_DEFAULT_FIT_A = 0.2


def default_table() -> AmcTable:
    """Eight-mode 802.11a-style table with offline-fitted constants."""
    triples = []
    for rate, db in zip(_DEFAULT_RATES, _DEFAULT_DB_AT_1E5):
        g = 10.0 ** (db / 10.0)
        slope = math.log(_DEFAULT_FIT_A / 1e-5) / g
        triples.append((rate, _DEFAULT_FIT_A, slope))
    return AmcTable.from_triples(triples)


def ber_probability(gamma: float, mode: AmcMode) -> float:
    """Fitted BER of ``mode`` at linear SNIR ``gamma``."""
    if mode.index == 0:
        raise InvalidModeError("mode 0 does not transmit; BER is undefined")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return mode.fit_a * math.exp(-mode.fit_slope * gamma)


def snir_threshold(mode: AmcMode, target: float) -> float:
    """Smallest linear SNIR at which ``mode`` meets BER ``target``."""
    if mode.index == 0:
        raise InvalidModeError("mode 0 has no SNIR threshold")
    if not 0.0 < target < 1.0:
        raise ValueError(f"BER target must lie in (0, 1), got {target}")
    if target > mode.fit_a:
        raise NegativeThresholdError(
            f"target {target} exceeds fit amplitude {mode.fit_a} of mode {mode.index}"
        )
    return -math.log(target / mode.fit_a) / mode.fit_slope


@lru_cache(maxsize=256)
def _thresholds_cached(table: AmcTable, target: float) -> np.ndarray:
    g = np.zeros(len(table.modes))
    for mode in table.modes[1:]:
        g[mode.index] = snir_threshold(mode, target)
    g.setflags(write=False)
    return g


@dataclass(frozen=True)
class ConvexityResult:
    passed: bool
    violation: tuple[int, int, int] | None = None

    def __bool__(self) -> bool:
        return self.passed


def check_threshold_convexity(
    rates: Sequence[float], thresholds: Sequence[float], rtol: float = 1e-12
) -> ConvexityResult:
    """Check that threshold increments per unit rate never shrink.

    ``rates`` and ``thresholds`` are indexed by mode with ``thresholds[0]``
    ignored and taken as 0 (no power in outage). Every ``(n, b, c)`` with
    ``n - b - c >= 0`` is tested; the first violation in ``(n, b, c)``
    lexicographic order is reported.
    """
    r = np.asarray(rates, dtype=float)
    g = np.asarray(thresholds, dtype=float).copy()
    g[0] = 0.0
    n_max = len(r) - 1
    for n in range(2, n_max + 1):
        for b in range(1, n):
            upper = (g[n] - g[n - b]) / (r[n] - r[n - b])
            for c in range(1, n - b + 1):
                lower = (g[n - b] - g[n - b - c]) / (r[n - b] - r[n - b - c])
                if upper < lower - rtol * abs(lower):
                    return ConvexityResult(False, (n, b, c))
    return ConvexityResult(True)


def threshold_convexity_check(table: AmcTable, target: float) -> ConvexityResult:
    return check_threshold_convexity(table.rates, table.thresholds(target))
