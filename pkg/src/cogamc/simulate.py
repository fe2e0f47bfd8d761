"""Monte Carlo evaluation of a cognitive policy or baseline over fading blocks.

Every block draws the four gains, applies the scheme's decision, computes the
exact SNIRs including noise and records rates, power and whether the fitted
BER at the realized SNIR exceeds the true target.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .amc import AmcTable
from .baselines import InterweaveResult
from .fading import GainModel, GainStreams, sample_block_gains
from .optimizer import ConstantPowerResult, PolicyAssignment, ProblemSpec
from .regions import RegionGrid

SCHEMES = ("variable", "constant", "interweave-constant", "interweave-adaptive")
Z95 = 1.959963984540054
METRICS = ("k1", "k2", "p2")
_BER_SLACK = 1e-9


class ConfigurationError(ValueError):
    pass


class MergeError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int
    blocks: int = 1_000_000
    scheme: str = "variable"
    margin: float = 2.0
    power_cap_factor: float = 1e6
    noise_override: float | None = None  # SNIR noise only; 0 reproduces the noise-free design model
    chunk: int = 1 << 18
    workers: int = 1
    worker: int = 0

    def __post_init__(self) -> None:
        if self.blocks < 1:
            raise ConfigurationError("blocks must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.power_cap_factor <= 0:
            raise ConfigurationError("power_cap_factor must be positive")
        if self.noise_override is not None and self.noise_override < 0:
            raise ConfigurationError("noise_override must be >= 0")
        if self.chunk < 1 or self.workers < 1:
            raise ConfigurationError("chunk and workers must be >= 1")


@dataclass
class SimReport:
    config: SimConfig
    blocks: int
    mean: dict[str, float]
    m2: dict[str, float]  # sum of squared deviations, for pooling
    region_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    primary_violations: int = 0
    cognitive_violations: int = 0
    primary_outages: int = 0
    cap_events: int = 0

    def _half_width(self, key: str) -> float:
        if self.blocks < 2:
            return float("inf")
        var = self.m2[key] / (self.blocks - 1)
        return Z95 * math.sqrt(var / self.blocks)

    def std_error(self, key: str) -> float:
        return self._half_width(key) / Z95

    @property
    def k1avg(self) -> float:
        return self.mean["k1"]

    @property
    def k2avg(self) -> float:
        return self.mean["k2"]

    @property
    def p2avg(self) -> float:
        return self.mean["p2"]

    @property
    def k1_halfwidth(self) -> float:
        return self._half_width("k1")

    @property
    def k2_halfwidth(self) -> float:
        return self._half_width("k2")

    @property
    def p2_halfwidth(self) -> float:
        return self._half_width("p2")

    @property
    def frequencies(self) -> np.ndarray:
        return self.region_counts / self.blocks

    @property
    def primary_violation_rate(self) -> float:
        return self.primary_violations / self.blocks

    @property
    def cognitive_violation_rate(self) -> float:
        return self.cognitive_violations / self.blocks

    @property
    def outage_fraction(self) -> float:
        return self.primary_outages / self.blocks

    def row(self) -> dict[str, float | int | str]:
        return {
            "scheme": self.config.scheme,
            "seed": self.config.seed,
            "blocks": self.blocks,
            "margin": self.config.margin,
            "k1avg": self.k1avg,
            "k1_ci95": self.k1_halfwidth,
            "k2avg": self.k2avg,
            "k2_ci95": self.k2_halfwidth,
            "p2avg": self.p2avg,
            "p2_ci95": self.p2_halfwidth,
            "primary_violation_rate": self.primary_violation_rate,
            "cognitive_violation_rate": self.cognitive_violation_rate,
            "primary_outage_fraction": self.outage_fraction,
            "cap_events": self.cap_events,
        }


# -- per-block decisions -----------------------------------------------------------


def _largest_mode(snr, thresholds):
    """Largest mode whose threshold is met (0 if none); ``thresholds[0]`` is ignored."""
    v = np.asarray(thresholds, dtype=float)[1:]
    return np.searchsorted(v, snr, side="right")


def _fit_arrays(table: AmcTable):
    a = np.array([m.fit_a for m in table.modes])
    s = np.array([m.fit_slope for m in table.modes])
    return a, s


def _violations(snr, mode, table: AmcTable, target: float) -> int:
    a, s = _fit_arrays(table)
    active = mode > 0
    if not active.any():
        return 0
    ber = a[mode[active]] * np.exp(-s[mode[active]] * snr[active])
    return int(np.count_nonzero(ber > target * (1.0 + _BER_SLACK)))


def _check_inputs(config: SimConfig, plan, grid: RegionGrid | None, table: AmcTable) -> None:
    expected = {
        "variable": PolicyAssignment,
        "constant": ConstantPowerResult,
        "interweave-constant": InterweaveResult,
        "interweave-adaptive": InterweaveResult,
    }[config.scheme]
    if not isinstance(plan, expected):
        raise ConfigurationError(f"scheme {config.scheme!r} needs a {expected.__name__}")
    if grid is not None and not np.array_equal(grid.rates, table.rates):
        raise ConfigurationError("grid and table disagree on rates")
    if config.scheme == "variable":
        if grid is None:
            raise ConfigurationError("the variable-power scheme needs its region grid")
        if plan.k2_mode.shape != (grid.total,):
            raise ConfigurationError(f"policy covers {plan.k2_mode.size} regions, grid has {grid.total}")
        if grid.idle_thresholds is None or grid.band_edges is None:
            raise ConfigurationError("grid lacks geometry or idle thresholds")
    if isinstance(plan, InterweaveResult) and plan.scheme != config.scheme:
        raise ConfigurationError(f"baseline result is {plan.scheme!r}, config asks for {config.scheme!r}")


def _chunk_values(config, plan, grid, model, table, spec, g):
    """Per-block (k1 rate, k2 rate, p2) plus counters for one chunk of gains."""
    n0 = model.noise_power if config.noise_override is None else config.noise_override
    p1 = spec.primary_power
    rates = table.rates
    g1_true = table.thresholds(spec.b1)
    g2_true = table.thresholds(spec.b2)
    counts = dict(primary_violations=0, cognitive_violations=0, primary_outages=0, cap_events=0)
    region = None

    with np.errstate(divide="ignore", over="ignore"):
        if grid is not None and grid.band_edges is not None:
            region = grid.locate(g.alpha, g.beta)

        if config.scheme == "variable":
            k2_mode = plan.k2_mode[region]
            cap = config.power_cap_factor * spec.cognitive_power_budget
            raw = np.where(k2_mode > 0, p1 * grid.cognitive_thresholds[k2_mode] / g.beta, 0.0)
            capped = raw > cap
            counts["cap_events"] = int(np.count_nonzero(capped))
            p2 = np.where(capped, cap, raw)
            idle_mode = _largest_mode(p1 * g.s11 / n0, grid.idle_thresholds)
            k1_mode = np.where(k2_mode > 0, plan.k1_mode[region], idle_mode)
            gamma1 = p1 * g.s11 / (p2 * g.s21 + n0)
            gamma2 = p2 * g.s22 / (p1 * g.s12 + n0)
            counts["primary_outages"] = int(np.count_nonzero((k2_mode > 0) & (k1_mode == 0)))
            counts["primary_violations"] = _violations(gamma1, k1_mode, table, spec.b1)
            counts["cognitive_violations"] = _violations(gamma2, k2_mode, table, spec.b2)
            return rates[k1_mode], rates[k2_mode], p2, region, counts

        if config.scheme == "constant":
            p2 = np.full(g.s11.shape, plan.power)
            gamma1 = p1 * g.s11 / (p2 * g.s21 + n0)
            gamma2 = p2 * g.s22 / (p1 * g.s12 + n0)
            k1_mode = _largest_mode(gamma1, g1_true)
            k2_mode = np.where(p2 > 0, _largest_mode(gamma2, g2_true), 0)
            counts["primary_outages"] = int(np.count_nonzero((k2_mode > 0) & (k1_mode == 0)))
            return rates[k1_mode], rates[k2_mode], p2, region, counts

        # interweave: the primary owns a share lam of every block, the cognitive the rest
        lam = plan.activity_fraction
        share = 1.0 - lam
        k1_rate = np.zeros(g.s11.shape)
        if lam > 0:
            k1_rate = lam * rates[_largest_mode(p1 * g.s11 / (lam * n0), g1_true)]
        if share <= 0:
            return k1_rate, np.zeros(g.s11.shape), np.zeros(g.s11.shape), region, counts
        x = g.s22 / n0
        if config.scheme == "interweave-constant":
            k2_mode = _largest_mode(spec.cognitive_power_budget * x / share, g2_true)
            p2 = np.full(g.s11.shape, spec.cognitive_power_budget)
        else:
            if plan.thresholds.size == 0:
                return k1_rate, np.zeros(g.s11.shape), np.zeros(g.s11.shape), region, counts
            v = np.concatenate(([0.0], plan.thresholds))
            # skipped modes carry inf and are never selected
            k2_mode = np.zeros(x.shape, dtype=int)
            for n in range(1, v.size):
                k2_mode = np.where(x >= v[n], n, k2_mode)
            p2 = np.where(k2_mode > 0, share * g2_true[k2_mode] / x, 0.0)
        return k1_rate, share * rates[k2_mode], p2, region, counts


def _run_worker(config: SimConfig, plan, grid, model, table, spec) -> SimReport:
    streams = GainStreams(config.seed, config.worker)
    size = grid.total if grid is not None and grid.band_edges is not None else 0
    region_counts = np.zeros(size, dtype=np.int64)
    counters = dict(primary_violations=0, cognitive_violations=0, primary_outages=0, cap_events=0)
    values = {k: [] for k in METRICS}
    done = 0
    while done < config.blocks:
        n = min(config.chunk, config.blocks - done)
        gains = sample_block_gains(model, streams, n)
        k1, k2, p2, region, counts = _chunk_values(config, plan, grid, model, table, spec, gains)
        for key, arr in zip(METRICS, (k1, k2, p2)):
            values[key].append(np.asarray(arr, dtype=float))
        if region is not None and size:
            region_counts += np.bincount(region, minlength=size)
        for key, val in counts.items():
            counters[key] += val
        done += n
    mean, m2 = {}, {}
    for key in METRICS:
        arr = np.concatenate(values[key])
        mean[key] = float(arr.mean())
        m2[key] = float(np.sum((arr - mean[key]) ** 2))
    return SimReport(config, config.blocks, mean, m2, region_counts, **counters)


def simulate_scheme(
    config: SimConfig,
    plan,
    grid: RegionGrid | None,
    model: GainModel,
    table: AmcTable,
    spec: ProblemSpec,
) -> SimReport:
    """Run ``plan`` over ``config.blocks`` sampled blocks.

    With ``workers > 1`` the blocks are split evenly across processes, each on
    its own random substream, and the partial reports are pooled.
    """
    _check_inputs(config, plan, grid, table)
    if config.workers == 1:
        return _run_worker(config, plan, grid, model, table, spec)
    per, extra = divmod(config.blocks, config.workers)
    parts = [
        replace(config, blocks=per + (w < extra), worker=w, workers=1)
        for w in range(config.workers)
        if per + (w < extra) > 0
    ]
    with ProcessPoolExecutor(max_workers=len(parts)) as pool:
        reports = list(pool.map(_run_worker, parts, *[[x] * len(parts) for x in (plan, grid, model, table, spec)]))
    merged = summarize(reports)
    merged.config = config
    return merged


def _merge_key(config: SimConfig):
    return (config.scheme, config.margin, config.power_cap_factor, config.noise_override)


def summarize(reports) -> SimReport:
    """Pool reports that differ only in seed, worker or block count."""
    reports = list(reports)
    if not reports:
        raise MergeError("nothing to merge")
    key = _merge_key(reports[0].config)
    if any(_merge_key(r.config) != key for r in reports):
        raise MergeError("reports come from different configurations")
    if len({r.region_counts.size for r in reports}) != 1:
        raise MergeError("reports cover different region grids")
    if len(reports) == 1:
        return reports[0]
    total = sum(r.blocks for r in reports)
    mean, m2 = {}, {}
    for k in METRICS:
        mu = sum(r.blocks * r.mean[k] for r in reports) / total
        mean[k] = mu
        m2[k] = sum(r.m2[k] + r.blocks * (r.mean[k] - mu) ** 2 for r in reports)
    counters = {
        name: sum(getattr(r, name) for r in reports)
        for name in ("primary_violations", "cognitive_violations", "primary_outages", "cap_events")
    }
    config = replace(reports[0].config, blocks=total)
    counts = np.sum([r.region_counts for r in reports], axis=0)
    return SimReport(config, total, mean, m2, counts, **counters)
