"""Idealized interweave baselines: the two links split the spectrum.

The primary is active on a fraction ``lam`` of the band with power boosted to
``P1/lam``; the cognitive radio uses the rest with budget ``P2max/(1-lam)``.
Neither link sees interference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .amc import AmcTable
from .fading import GainModel, rate_average_exponential

NEGLIGIBLE_RATE = 1e-15  # relative to R_N; below this the link is treated as off


@dataclass(frozen=True)
class InterweaveResult:
    activity_fraction: float
    primary_rate: float
    cognitive_rate: float
    scheme: str
    thresholds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        if not 0.0 <= self.activity_fraction <= 1.0:
            raise ValueError("activity fraction must lie in [0, 1]")


def primary_interweave_rate(lam: float, model: GainModel, table: AmcTable, b1: float, p1: float) -> float:
    """Primary average rate when active on a fraction ``lam`` of the band."""
    if lam <= 0:
        return 0.0
    mean_snr = p1 * model.mean_s11 / (lam * model.noise_power)
    return lam * rate_average_exponential(table.rates, table.thresholds(b1), mean_snr)


def solve_activity_fraction(
    model: GainModel,
    table: AmcTable,
    b1: float,
    p1: float,
    e1: float,
    grid_points: int = 1000,
    tol: float = 1e-9,
) -> float | None:
    """Smallest primary activity fraction meeting ``e1``; ``None`` if unreachable.

    The primary rate need not be monotone in the fraction (less airtime but
    more power per use), so the first sign change on a dense grid is bracketed
    before bisecting.
    """
    if e1 < 0:
        raise ValueError("e1 must be nonnegative")
    if e1 == 0:
        return 0.0
    rate = lambda lam: primary_interweave_rate(lam, model, table, b1, p1)
    lams = np.linspace(0.0, 1.0, grid_points + 1)
    values = np.array([rate(x) for x in lams])
    hit = np.flatnonzero(values >= e1)
    if hit.size == 0:
        return None
    j = int(hit[0])
    lo, hi = lams[j - 1], lams[j]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate(mid) >= e1:
            hi = mid
        else:
            lo = mid
    return float(hi)


def interweave_constant_power(model: GainModel, table: AmcTable, b2: float, lam: float, p2max: float) -> float:
    """Cognitive average rate at constant power in the ``1 - lam`` share."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    share = 1.0 - lam
    if share <= 0:
        return 0.0
    mean_snr = p2max * model.mean_s22 / (share * model.noise_power)
    return share * rate_average_exponential(table.rates, table.thresholds(b2), mean_snr)


def _inverse_snr_mass(lo, hi, mean):
    """``E[1/x ; lo <= x < hi]`` for exponential ``x`` with mean ``mean``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = np.where(np.isinf(hi), 0.0, special.exp1(np.minimum(hi, 1e300) / mean))
    with np.errstate(invalid="ignore"):
        out = (special.exp1(lo / mean) - upper) / mean
    # empty cells (lo == hi, possibly both 0) carry no mass
    return np.where(lo >= hi, 0.0, out)


def _convex_hull_modes(rates, g):
    """Modes on the lower convex hull of ``(rate, threshold)`` starting at the origin."""
    hull = [0]
    for n in range(1, len(rates)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (g[b] - g[a]) * (rates[n] - rates[b]) >= (g[n] - g[b]) * (rates[b] - rates[a]):
                hull.pop()
            else:
                break
        hull.append(n)
    return hull


@dataclass(frozen=True)
class PowerAdaptation:
    """Single-link discrete-rate power adaptation on ``x = s/N0``."""

    rates: np.ndarray
    thresholds: np.ndarray  # switching points v'_1..v'_N on x, inf for skipped modes
    multiplier: float
    average_rate: float
    average_power: float


def single_link_power_adaptation(rates, g, mean_x: float, budget: float, rtol: float = 1e-12) -> PowerAdaptation:
    """Maximize ``sum R_n P(v'_n <= x < v'_{n+1})`` with mode-n power ``g_n / x``
    and ``E[power] <= budget``.

    For a multiplier ``mu`` the Lagrangian picks, at each ``x``, the mode
    maximizing ``R_n - mu g_n / x``; on the convex hull of ``(R_n, g_n)`` the
    switch from mode a to b sits at ``mu (g_b - g_a)/(R_b - R_a)``. ``mu`` is
    found by bisection so the power constraint is tight.
    """
    rates = np.asarray(rates, dtype=float)
    g = np.asarray(g, dtype=float)
    hull = _convex_hull_modes(rates, g)
    slopes = np.array([(g[b] - g[a]) / (rates[b] - rates[a]) for a, b in zip(hull, hull[1:])])

    def evaluate(mu):
        v = np.full(rates.size, np.inf)
        v[hull[1:]] = mu * slopes
        edges = np.append(v[hull[1:]], np.inf)
        lo, hi = edges[:-1], edges[1:]
        prob = np.exp(-lo / mean_x) - np.where(np.isinf(hi), 0.0, np.exp(-np.minimum(hi, 1e300) / mean_x))
        rate = float(np.dot(rates[hull[1:]], prob))
        power = float(np.dot(g[hull[1:]], _inverse_snr_mass(lo, hi, mean_x)))
        return v, rate, power

    if budget <= 0:
        return PowerAdaptation(rates, np.full(rates.size, np.inf), np.inf, 0.0, 0.0)
    # power(mu) is decreasing; bracket the root in log space
    lo, hi = 1e-12, 1.0
    while evaluate(hi)[2] > budget:
        lo, hi = hi, hi * 10.0
        if hi > 1e300:
            return PowerAdaptation(rates, np.full(rates.size, np.inf), np.inf, 0.0, 0.0)
    while evaluate(lo)[2] < budget and lo > 1e-300:
        lo *= 1e-3
    for _ in range(400):
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi)))
        if evaluate(mid)[2] > budget:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < rtol:
            break
    v, rate, power = evaluate(hi)
    return PowerAdaptation(rates, v[1:], hi, rate, power)


def interweave_adaptive_power(
    model: GainModel, table: AmcTable, b2: float, lam: float, p2max: float
) -> tuple[float, np.ndarray]:
    """Cognitive average rate and switching thresholds with power adaptation."""
    if not 0.0 <= lam < 1.0:
        raise ValueError("lam must lie in [0, 1)")
    share = 1.0 - lam
    mean_x = model.mean_s22 / model.noise_power
    result = single_link_power_adaptation(table.rates, table.thresholds(b2), mean_x, p2max / share)
    if result.average_rate <= NEGLIGIBLE_RATE * table.max_rate:
        return 0.0, np.zeros(0)
    return share * result.average_rate, result.thresholds


def interweave(
    model: GainModel, table: AmcTable, b1: float, b2: float, p1: float, e1: float, p2max: float, adaptive: bool
) -> InterweaveResult | None:
    """Full interweave baseline at one operating point (``None`` if ``e1`` is unreachable)."""
    lam = solve_activity_fraction(model, table, b1, p1, e1)
    if lam is None:
        return None
    k1 = primary_interweave_rate(lam, model, table, b1, p1)
    if adaptive:
        if lam >= 1.0:
            k2, thr = 0.0, np.zeros(0)
        else:
            k2, thr = interweave_adaptive_power(model, table, b2, lam, p2max)
        return InterweaveResult(lam, k1, k2, "interweave-adaptive", thr)
    k2 = interweave_constant_power(model, table, b2, lam, p2max)
    return InterweaveResult(lam, k1, k2, "interweave-constant")
