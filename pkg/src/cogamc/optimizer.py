"""Cognitive rate/power assignment over the region grid.

The variable-power scheme assigns a cognitive mode ``k2(i)`` to every region;
power follows from channel inversion on ``beta`` and the primary mode from the
remaining SNIR product. :func:`greedy_optimize` starts from the top mode
everywhere and removes rate where it buys the most primary rate or the most
power per unit of cognitive rate lost. :func:`exhaustive_optimize` is the
brute-force reference for small instances.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .amc import AmcTable, check_threshold_convexity
from .fading import GainModel, ratio_sf
from .regions import IDLE, RegionGrid, ResourceError

log = logging.getLogger(__name__)

CONSTRAINT_TOL = 1e-9
ACCOUNTING_TOL = 1e-9


class ConsistencyError(RuntimeError):
    """Incremental averages drifted away from a full recomputation."""


class ContractViolation(RuntimeError):
    pass


class OptimalityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    required_primary_rate: float
    primary_power: float = 1.0
    cognitive_power_budget: float = 2.0
    b1: float = 1e-5
    b2: float = 1e-5
    margin: float = 2.0

    def __post_init__(self) -> None:
        if self.required_primary_rate < 0:
            raise ValueError("required_primary_rate must be >= 0")
        if not (self.primary_power > 0 and self.cognitive_power_budget > 0):
            raise ValueError("powers must be positive")
        if not (0 < self.b1 < 1 and 0 < self.b2 < 1):
            raise ValueError("BER targets must lie in (0, 1)")
        if self.margin < 1:
            raise ValueError("margin must be >= 1")


@dataclass(frozen=True)
class GreedyStep:
    part: int
    region: int
    from_mode: int
    to_mode: int
    score: float
    k1avg: float
    k2avg: float
    p2avg: float


@dataclass
class PolicyAssignment:
    k2_mode: np.ndarray
    k1_mode: np.ndarray
    k1_rate: np.ndarray
    k1avg: float
    k2avg: float
    p2avg: float
    feasible: bool
    iterations: int = 0
    trace: list[GreedyStep] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.k2avg if self.feasible else float("-inf")


class _Instance:
    """Per-region rate and power tables shared by the greedy and exhaustive solvers."""

    def __init__(self, grid: RegionGrid, p1: float):
        self.grid = grid
        self.rates = grid.rates
        self.g2 = grid.cognitive_thresholds
        self.max_rate = float(self.rates[-1])
        self.mass = grid.mass
        self.norm_power = grid.norm_power
        self.divergent = grid.divergent
        self.k1 = grid.primary_rate_table()  # (V0, N+1)
        with np.errstate(invalid="ignore"):
            cost = p1 * self.g2[None, :] * (self.norm_power * self.mass)[:, None]
        cost[:, 0] = 0.0
        cost[self.divergent, 1:] = np.inf
        self.cost = cost
        self.p1 = p1

    def averages(self, k2) -> tuple[float, float, float]:
        idx = np.arange(k2.size)
        if np.any(self.divergent & (k2 > 0)):
            raise ContractViolation("divergent-power region assigned a positive cognitive mode")
        k1avg = float(np.dot(self.k1[idx, k2], self.mass))
        k2avg = float(np.dot(self.rates[k2], self.mass))
        p2avg = float(self.cost[idx, k2].sum())
        return k1avg, k2avg, p2avg

    def step_to_raise_k1(self, i: int, n: int) -> int | None:
        """Smallest decrement ``t`` that strictly raises the primary rate."""
        for x in range(1, n + 1):
            if self.k1[i, n - x] > self.k1[i, n] + 1e-12:
                return x
        return None

    def d1(self, i: int, n: int) -> float:
        if n == 0 or self.k1[i, n] >= self.max_rate:
            return 0.0
        t = self.step_to_raise_k1(i, n)
        if t is None:
            return 0.0
        return (self.k1[i, n - t] - self.k1[i, n]) / (self.rates[n] - self.rates[n - t])

    def d2(self, i: int, n: int, x: int = 1) -> float:
        if n == 0:
            return 0.0
        if self.divergent[i]:
            raise ContractViolation(f"decision variable queried on divergent region {i}")
        return (self.g2[n] - self.g2[n - x]) * self.norm_power[i] / (self.rates[n] - self.rates[n - x])

    def d3(self, i: int, n: int) -> float:
        if n == 0 or self.k1[i, n] >= self.max_rate:
            return 0.0
        t = self.step_to_raise_k1(i, n)
        return 0.0 if t is None else self.d2(i, n, t)

    def policy(self, k2, feasible: bool, iterations: int = 0, trace=None) -> PolicyAssignment:
        k1avg, k2avg, p2avg = self.averages(k2)
        idx = np.arange(k2.size)
        k1_mode = self.grid.primary_mode[idx, k2].copy()
        return PolicyAssignment(
            k2_mode=k2.copy(),
            k1_mode=k1_mode,
            k1_rate=self.k1[idx, k2].copy(),
            k1avg=k1avg,
            k2avg=k2avg,
            p2avg=p2avg,
            feasible=feasible,
            iterations=iterations,
            trace=trace or [],
        )


def decision_variables(grid: RegionGrid, region: int, k2_mode: int, primary_power: float = 1.0):
    """``(d1, d2(., 1), d3, t)`` for one region at cognitive mode ``k2_mode``."""
    inst = _Instance(grid, primary_power)
    if k2_mode == 0:
        return 0.0, 0.0, 0.0, None
    return (
        inst.d1(region, k2_mode),
        inst.d2(region, k2_mode, 1),
        inst.d3(region, k2_mode),
        inst.step_to_raise_k1(region, k2_mode),
    )


def policy_averages(k2_mode, grid: RegionGrid, primary_power: float) -> tuple[float, float, float]:
    """``(k1avg, k2avg, p2avg)`` of a per-region cognitive mode assignment."""
    return _Instance(grid, primary_power).averages(np.asarray(k2_mode, dtype=int))


def greedy_optimize(
    grid: RegionGrid,
    spec: ProblemSpec,
    check_consistency: bool = True,
    record_trace: bool = True,
) -> PolicyAssignment:
    """Greedy cognitive-mode reduction from the all-top-mode start.

    Part 1 runs while both constraints fail and takes rate-effective
    changes ranked by power saved per rate lost. Part 2 (only the primary
    constraint fails) ranks them by primary rate gained per rate lost.
    Part 3 (only the power constraint fails) takes single-mode steps ranked
    by power saved per rate lost. Ties go to the lowest region index.
    """
    if not check_threshold_convexity(grid.rates, grid.cognitive_thresholds):
        warnings.warn("cognitive thresholds are not convex in rate; greedy optimality unproven", OptimalityWarning)
    inst = _Instance(grid, spec.primary_power)
    e1, pmax = spec.required_primary_rate, spec.cognitive_power_budget
    v0, top = grid.total, grid.n_modes
    k2 = np.full(v0, top, dtype=int)
    k2[grid.divergent] = 0
    k1avg, k2avg, p2avg = inst.averages(k2)
    trace: list[GreedyStep] = []
    iterations = 0

    def low_k1():
        return k1avg < e1 - CONSTRAINT_TOL

    def high_p2():
        return p2avg > pmax + CONSTRAINT_TOL

    def apply(part: int, i: int, x: int, score: float) -> None:
        nonlocal k1avg, k2avg, p2avg, iterations
        n = k2[i]
        k1avg -= (inst.k1[i, n] - inst.k1[i, n - x]) * inst.mass[i]
        p2avg -= inst.cost[i, n] - inst.cost[i, n - x]
        k2avg -= (inst.rates[n] - inst.rates[n - x]) * inst.mass[i]
        k2[i] = n - x
        iterations += 1
        if check_consistency:
            exact = inst.averages(k2)
            for got, want in zip((k1avg, k2avg, p2avg), exact):
                if abs(got - want) > ACCOUNTING_TOL * max(1.0, abs(want)):
                    raise ConsistencyError(f"running averages {(k1avg, k2avg, p2avg)} vs recomputed {exact}")
        if record_trace:
            trace.append(GreedyStep(part, i, int(n), int(n - x), score, k1avg, k2avg, p2avg))

    def infeasible() -> PolicyAssignment:
        log.debug("greedy: constraints cannot be met after %d iterations", iterations)
        return inst.policy(k2, False, iterations, trace)

    while True:
        c1, c2 = low_k1(), high_p2()
        if c1 and c2:
            d3 = np.array([inst.d3(i, k2[i]) for i in range(v0)])
            while True:
                i = int(np.argmax(d3))
                if d3[i] <= 0:
                    return infeasible()
                apply(1, i, inst.step_to_raise_k1(i, k2[i]), float(d3[i]))
                d3[i] = inst.d3(i, k2[i])
                if not (low_k1() and high_p2()):
                    break
        elif c1:
            d1 = np.array([inst.d1(i, k2[i]) for i in range(v0)])
            while True:
                i = int(np.argmax(d1))
                if d1[i] <= 0:
                    return infeasible()
                apply(2, i, inst.step_to_raise_k1(i, k2[i]), float(d1[i]))
                d1[i] = inst.d1(i, k2[i])
                if not low_k1():
                    break
        elif c2:
            d2 = np.array([0.0 if grid.divergent[i] else inst.d2(i, k2[i], 1) for i in range(v0)])
            while True:
                i = int(np.argmax(d2))
                if d2[i] <= 0:
                    return infeasible()
                apply(3, i, 1, float(d2[i]))
                d2[i] = inst.d2(i, k2[i], 1)
                if not high_p2():
                    break
        else:
            return inst.policy(k2, True, iterations, trace)


def exhaustive_optimize(grid: RegionGrid, spec: ProblemSpec, cap: int = 10_000_000, chunk: int = 1 << 16) -> PolicyAssignment:
    """Best feasible assignment by full enumeration (ties: lexicographically smallest)."""
    inst = _Instance(grid, spec.primary_power)
    base = grid.n_modes + 1
    free = np.flatnonzero(~grid.divergent)
    total = base ** free.size
    if total > cap:
        raise ResourceError(f"exhaustive search needs {base}^{free.size} = {total} assignments (cap {cap})")
    e1, pmax = spec.required_primary_rate, spec.cognitive_power_budget
    powers = base ** np.arange(free.size - 1, -1, -1)
    best_code, best_val = -1, -np.inf
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        digits = (codes[:, None] // powers[None, :]) % base
        k1avg = (inst.k1[free[None, :], digits] * inst.mass[free]).sum(axis=1)
        k2avg = (inst.rates[digits] * inst.mass[free]).sum(axis=1)
        p2avg = inst.cost[free[None, :], digits].sum(axis=1)
        # divergent regions sit at mode 0 and add their idle rate
        k1avg = k1avg + float(np.dot(inst.k1[grid.divergent, 0], inst.mass[grid.divergent]))
        ok = (k1avg >= e1 - CONSTRAINT_TOL) & (p2avg <= pmax + CONSTRAINT_TOL)
        if not ok.any():
            continue
        vals = np.where(ok, k2avg, -np.inf)
        j = int(np.argmax(vals))
        if vals[j] > best_val + 1e-12:
            best_val, best_code = float(vals[j]), int(codes[j])
    k2 = np.zeros(grid.total, dtype=int)
    if best_code < 0:
        return inst.policy(k2, False)
    k2[free] = (best_code // powers) % base
    return inst.policy(k2, True)


def d1_spread(grid: RegionGrid, primary_power: float = 1.0) -> tuple[float, float]:
    """Min and max of the rate-effective ratio over every region and positive mode
    whose implied primary rate is below the top rate (``nan`` if none)."""
    inst = _Instance(grid, primary_power)
    vals = [
        inst.d1(i, n)
        for i in range(grid.total)
        if not grid.divergent[i] and grid.mass[i] > 0
        for n in range(1, grid.n_modes + 1)
        if inst.k1[i, n] < inst.max_rate
    ]
    if not vals:
        return float("nan"), float("nan")
    return float(min(vals)), float(max(vals))


def constant_d1_condition(grid: RegionGrid, primary_power: float = 1.0, rtol: float = 1e-9) -> bool:
    """True when every rate-effective ratio is the same constant (vacuously true if none)."""
    lo, hi = d1_spread(grid, primary_power)
    if np.isnan(lo):
        return True
    return hi - lo <= rtol * max(abs(hi), 1e-300)


# -- constant-power scheme -------------------------------------------------------


@dataclass(frozen=True)
class ConstantPowerResult:
    power: float
    k1avg: float
    k2avg: float
    feasible: bool


def _sf_rate(rates, thresholds, q1, q2, q3, mean1, mean2) -> float:
    steps = np.diff(np.asarray(rates, dtype=float))
    return float(np.sum(steps * ratio_sf(np.asarray(thresholds)[1:], q1, q2, q3, mean1, mean2)))


def constant_power_averages(model: GainModel, table: AmcTable, spec: ProblemSpec, power: float) -> tuple[float, float]:
    """``(k1avg, k2avg)`` with the cognitive radio at constant ``power``.

    Both links see the exact interference-plus-noise SNIR; each adapts on its
    own thresholds at its true BER target.
    """
    rates = table.rates
    p1, n0 = spec.primary_power, model.noise_power
    k1 = _sf_rate(rates, table.thresholds(spec.b1), p1, power, n0, model.mean_s11, model.mean_s21)
    if power <= 0:
        return k1, 0.0
    k2 = _sf_rate(rates, table.thresholds(spec.b2), power, p1, n0, model.mean_s22, model.mean_s12)
    return k1, k2


def constant_power_optimize(model: GainModel, table: AmcTable, spec: ProblemSpec, rtol: float = 1e-9) -> ConstantPowerResult:
    """Largest constant cognitive power in ``[0, P2max]`` that keeps ``k1avg >= E1``."""
    e1, pmax = spec.required_primary_rate, spec.cognitive_power_budget
    k1_at = lambda p: constant_power_averages(model, table, spec, p)[0]
    if k1_at(0.0) < e1 - CONSTRAINT_TOL:
        return ConstantPowerResult(0.0, k1_at(0.0), 0.0, False)
    if k1_at(pmax) >= e1 - CONSTRAINT_TOL:
        power = pmax
    else:
        lo, hi = 0.0, pmax
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if k1_at(mid) >= e1 - CONSTRAINT_TOL:
                lo = mid
            else:
                hi = mid
        power = lo
    k1, k2 = constant_power_averages(model, table, spec, power)
    return ConstantPowerResult(power, k1, k2, True)



# -- random instances for oracle comparisons ---------------------------------------


def _convex_thresholds(rng: np.random.Generator, rates: np.ndarray) -> np.ndarray:
    slopes = np.sort(rng.uniform(0.5, 5.0, rates.size - 1))
    return np.concatenate(([0.0], np.cumsum(slopes * np.diff(rates))))


def random_instance(
    rng: np.random.Generator, n_modes: int = 3, regions: int = 6, structured: bool = False
) -> tuple[RegionGrid, ProblemSpec]:
    """Synthetic grid and constraints with convex cognitive thresholds.

    ``structured`` instances use unit rate steps, geometric thresholds
    ``c**n`` on both links, band edges at ``c**K`` with ``K >= N`` and idle
    rate ``R_N``: every rate-effective ratio then equals 1.
    """
    mass = rng.dirichlet(np.ones(regions))
    norm_power = rng.lognormal(0.0, 1.0, regions)
    if structured:
        rates = np.arange(n_modes + 1, dtype=float)
        c = rng.uniform(2.0, 4.0)  # convex for c >= 2
        g = np.concatenate(([0.0], c ** np.arange(1, n_modes + 1)))
        g1, g2 = g, g.copy()
        t_low = c ** rng.integers(n_modes + 1, 2 * n_modes + 1, regions).astype(float)
        idle = np.full(regions, rates[-1])
    else:
        rates = np.concatenate(([0.0], np.cumsum(rng.uniform(0.25, 1.0, n_modes))))
        g1 = _convex_thresholds(rng, rates)
        g2 = _convex_thresholds(rng, rates)
        products = np.outer(g1[1:], g2[1:]).ravel()
        t_low = rng.choice(np.concatenate(([0.0], products)), regions)
        idle = rng.uniform(0.0, rates[-1], regions)
    grid = RegionGrid.from_arrays(rates, g1, g2, t_low, mass, norm_power, idle)
    k1_best = grid.primary_rate_table().max(axis=1)
    e1 = rng.uniform(0.0, 1.0) * float(np.dot(k1_best, mass))
    top_power = float(np.sum(g2[-1] * norm_power * mass))
    spec = ProblemSpec(e1, cognitive_power_budget=rng.uniform(0.2, 1.2) * top_power, margin=1.0)
    return grid, spec
