"""Partition of the modified-SNIR plane into common rate regions.

The plane of ``alpha = s11/s21`` and ``beta = s22/s12`` is cut by product
curves ``alpha*beta = T`` (bands) and radial lines ``beta/alpha = W``. Region
``i = band * L + radial`` is the half-open cell
``T_low <= alpha*beta < T_high, W_low <= beta/alpha < W_high``.

For each region we need its probability ``pr``, the normalized power weight
``p = E[1/beta | region]`` and the average primary rate when the cognitive
link is silent. All three are reduced to one-dimensional integrals over
``alpha``: given ``alpha = a`` the region is a ``beta`` interval, ``beta`` is
independent of ``(alpha, s11)`` with a closed-form law, and ``s11`` given
``alpha = a`` is Gamma(2) with rate ``1/mean_s11 + 1/(mean_s21*a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .amc import AmcTable
from .fading import GainModel, alpha_beta_product_cdf, beta_over_alpha_cdf

IDLE = -1  # primary-mode marker for "cognitive silent, primary adapts on its own SNR"

DIVERGENCE_GUARD = 1e12
MASS_FLOOR = 1e-300
DEFAULT_MAX_REGIONS = 100_000


class ResourceError(RuntimeError):
    pass


class NumericalError(RuntimeError):
    pass


class UnreachableRegionError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    index: int
    band: int
    radial: int
    product_range: tuple[float, float]
    radial_range: tuple[float, float]
    mass: float
    norm_power: float
    divergent: bool
    rate_set: frozenset
    idle_primary_rate: float


@dataclass
class RegionGrid:
    """Immutable-by-convention region table plus the thresholds it was built for.

    ``primary_thresholds`` and ``cognitive_thresholds`` are the design
    thresholds used for rate sets and power; ``idle_thresholds`` are the
    primary's own thresholds used when the cognitive link is silent.
    """

    rates: np.ndarray
    primary_thresholds: np.ndarray
    cognitive_thresholds: np.ndarray
    t_low: np.ndarray
    t_high: np.ndarray
    w_low: np.ndarray
    w_high: np.ndarray
    mass: np.ndarray
    norm_power: np.ndarray
    divergent: np.ndarray
    idle_rate: np.ndarray
    product_boundaries: np.ndarray | None = None
    auxiliary_products: np.ndarray | None = None
    band_edges: np.ndarray | None = None
    radial_boundaries: np.ndarray | None = None
    idle_thresholds: np.ndarray | None = None
    reachable: np.ndarray | None = None
    primary_mode: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        arrays = ("t_low", "t_high", "w_low", "w_high", "mass", "norm_power", "divergent", "idle_rate")
        for name in arrays:
            setattr(self, name, np.asarray(getattr(self, name)))
        self.rates = np.asarray(self.rates, dtype=float)
        self.primary_thresholds = np.asarray(self.primary_thresholds, dtype=float)
        self.cognitive_thresholds = np.asarray(self.cognitive_thresholds, dtype=float)
        self.divergent = self.divergent.astype(bool)
        if self.reachable is None:
            self.reachable = self.mass > MASS_FLOOR
        sizes = {getattr(self, n).shape for n in arrays}
        if len(sizes) != 1:
            raise ValueError(f"region arrays disagree in shape: {sizes}")
        self.primary_mode = implied_primary_modes(
            self.t_low, self.primary_thresholds, self.cognitive_thresholds
        )

    @classmethod
    def from_arrays(
        cls,
        rates,
        primary_thresholds,
        cognitive_thresholds,
        t_low,
        mass,
        norm_power,
        idle_rate,
    ) -> "RegionGrid":
        """Grid without geometry, for synthetic optimizer instances."""
        t_low = np.asarray(t_low, dtype=float)
        v0 = t_low.size
        norm_power = np.asarray(norm_power, dtype=float)
        return cls(
            rates=rates,
            primary_thresholds=primary_thresholds,
            cognitive_thresholds=cognitive_thresholds,
            t_low=t_low,
            t_high=np.full(v0, np.inf),
            w_low=np.zeros(v0),
            w_high=np.full(v0, np.inf),
            mass=np.asarray(mass, dtype=float),
            norm_power=norm_power,
            divergent=~np.isfinite(norm_power),
            idle_rate=np.asarray(idle_rate, dtype=float),
        )

    @property
    def total(self) -> int:
        return int(self.mass.size)

    @property
    def n_modes(self) -> int:
        return int(self.rates.size - 1)

    @property
    def radial_count(self) -> int:
        return 1 if self.radial_boundaries is None else self.radial_boundaries.size - 1

    @property
    def band_count(self) -> int:
        return self.total // self.radial_count

    def primary_rate_table(self) -> np.ndarray:
        """``k1(i, m)`` in bits/s/Hz for every region and cognitive mode ``m``."""
        table = self.rates[np.maximum(self.primary_mode, 0)]
        table[:, 0] = self.idle_rate
        return table

    def region(self, i: int) -> Region:
        band, radial = divmod(i, self.radial_count)
        return Region(
            index=i,
            band=band,
            radial=radial,
            product_range=(float(self.t_low[i]), float(self.t_high[i])),
            radial_range=(float(self.w_low[i]), float(self.w_high[i])),
            mass=float(self.mass[i]),
            norm_power=float(self.norm_power[i]),
            divergent=bool(self.divergent[i]),
            rate_set=permissible_rate_set(
                self.t_low[i], self.primary_thresholds, self.cognitive_thresholds
            ),
            idle_primary_rate=float(self.idle_rate[i]),
        )

    def __iter__(self):
        return (self.region(i) for i in range(self.total))

    def locate(self, alpha, beta):
        """Region index of each ``(alpha, beta)`` point; boundaries go to the upper cell."""
        if self.band_edges is None or self.radial_boundaries is None:
            raise ValueError("grid has no geometry to locate points in")
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        band = np.searchsorted(self.band_edges, alpha * beta, side="right") - 1
        radial = np.searchsorted(self.radial_boundaries, beta / alpha, side="right") - 1
        idx = band * self.radial_count + radial
        return idx if idx.ndim else int(idx)


def locate_region(alpha, beta, grid: RegionGrid):
    return grid.locate(alpha, beta)


def product_boundaries(primary_thresholds, cognitive_thresholds, rtol: float = 1e-12) -> np.ndarray:
    """Sorted distinct ``g1(R_n) * g2(R_m)`` for n, m >= 1, framed by 0 and inf."""
    g1 = np.asarray(primary_thresholds, dtype=float)[1:]
    g2 = np.asarray(cognitive_thresholds, dtype=float)[1:]
    products = np.sort(np.outer(g1, g2).ravel())
    distinct = [products[0]]
    for z in products[1:]:
        if z > distinct[-1] * (1.0 + rtol):
            distinct.append(z)
    return np.concatenate(([0.0], distinct, [np.inf]))


def implied_primary_modes(t_low, primary_thresholds, cognitive_thresholds, rtol: float = 1e-12):
    """Largest primary mode supportable next to each cognitive mode.

    Returns an integer array of shape ``t_low.shape + (N+1,)``; column 0 is
    :data:`IDLE` and a 0 entry means primary outage.
    """
    t = np.asarray(t_low, dtype=float)[..., None, None]
    g1 = np.asarray(primary_thresholds, dtype=float)[1:]
    g2 = np.asarray(cognitive_thresholds, dtype=float)[1:]
    ok = g1[None, :] * g2[:, None] <= t * (1.0 + rtol)  # (..., m, n)
    # modes are sorted by threshold, so the count of admissible n is the best n
    best = ok.sum(axis=-1)
    idle = np.full(best.shape[:-1] + (1,), IDLE)
    return np.concatenate((idle, best), axis=-1)


def implied_primary_mode(t_low: float, k2_mode: int, primary_thresholds, cognitive_thresholds) -> int:
    if k2_mode < 1:
        raise ValueError("implied primary mode is defined for cognitive modes >= 1")
    return int(implied_primary_modes(t_low, primary_thresholds, cognitive_thresholds)[k2_mode])


def permissible_rate_set(t_low: float, primary_thresholds, cognitive_thresholds, rtol: float = 1e-12) -> frozenset:
    """Admissible ``(primary mode, cognitive mode)`` pairs on a band.

    Always contains ``(IDLE, 0)`` and the primary-outage pairs ``(0, m)``.
    """
    g1 = np.asarray(primary_thresholds, dtype=float)
    g2 = np.asarray(cognitive_thresholds, dtype=float)
    n_modes = g1.size - 1
    pairs = {(IDLE, 0)}
    pairs.update((0, m) for m in range(1, n_modes + 1))
    for n in range(1, n_modes + 1):
        for m in range(1, n_modes + 1):
            if g1[n] * g2[m] <= t_low * (1.0 + rtol):
                pairs.add((n, m))
    return frozenset(pairs)


# -- auxiliary boundaries -----------------------------------------------------


def _invert_cdf(cdf, target: float, lo: float, hi: float) -> float:
    """Solve ``cdf(x) = target`` on ``(lo, hi)`` in log space."""
    lo = max(lo, 1e-150)
    hi = min(hi, 1e150)
    f = lambda u: cdf(math.exp(u)) - target
    return math.exp(optimize.brentq(f, math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-14))


def radial_boundaries(radial_count: int, model: GainModel) -> np.ndarray:
    """``W_0 = 0 < ... < W_L = inf`` at equal quantiles of ``beta/alpha``."""
    A, B = model.alpha_scale, model.beta_scale
    cdf = lambda w: beta_over_alpha_cdf(w, A, B)
    inner = [_invert_cdf(cdf, j / radial_count, 0.0, np.inf) for j in range(1, radial_count)]
    return np.array([0.0, *inner, np.inf])


def allocate_subdivisions(band_masses, budget: int) -> np.ndarray:
    """Split ``budget`` extra curves over bands, each going to the band with the
    largest mass per resulting sub-band (ties to the lower band)."""
    masses = np.asarray(band_masses, dtype=float)
    counts = np.zeros(masses.size, dtype=int)
    for _ in range(budget):
        counts[int(np.argmax(masses / (counts + 1)))] += 1
    return counts


def auxiliary_products(z_boundaries, budget: int, model: GainModel) -> np.ndarray:
    """Curves ``alpha*beta = Z'`` at equal conditional quantiles within each band."""
    A, B = model.alpha_scale, model.beta_scale
    cdf = lambda z: alpha_beta_product_cdf(z, A, B)
    edges_p = np.array([cdf(z) for z in z_boundaries])
    counts = allocate_subdivisions(np.diff(edges_p), budget)
    extra = []
    for h, k in enumerate(counts):
        lo_p, hi_p = edges_p[h], edges_p[h + 1]
        for j in range(1, k + 1):
            target = lo_p + j * (hi_p - lo_p) / (k + 1)
            extra.append(_invert_cdf(cdf, target, z_boundaries[h], z_boundaries[h + 1]))
    return np.sort(np.array(extra))


# -- region integrals ---------------------------------------------------------


def _sqrt_ratio(num, den):
    """``sqrt(num/den)`` with 0/0 -> nan, x/0 -> inf, inf/inf -> nan."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sqrt(np.asarray(num, dtype=float) / np.asarray(den, dtype=float))


def _alpha_pieces(t_lo, t_hi, w_lo, w_hi):
    """Split each region's alpha-range at the kinks of its beta interval."""
    a_min = np.nan_to_num(_sqrt_ratio(t_lo, w_hi), nan=0.0)
    a_max = np.nan_to_num(_sqrt_ratio(t_hi, w_lo), nan=np.inf, posinf=np.inf)
    k_lo = _sqrt_ratio(t_lo, w_lo)
    k_hi = _sqrt_ratio(t_hi, w_hi)
    owner, starts, ends = [], [], []
    for i in range(a_min.size):
        pts = [a_min[i]]
        for k in (k_lo[i], k_hi[i]):
            if np.isfinite(k) and a_min[i] < k < a_max[i]:
                pts.append(k)
        pts = sorted(pts) + [a_max[i]]
        for a0, a1 in zip(pts, pts[1:]):
            if a1 > a0:
                owner.append(i)
                starts.append(a0)
                ends.append(a1)
    return np.array(owner, dtype=int), np.array(starts), np.array(ends)


def _beta_tail_power(b, B):
    """``-int_b^inf f_beta(x)/x dx`` for beta with CDF x/(x+B)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.log1p(B / b) / B + 1.0 / (b + B)
    return np.where(np.isinf(b), 0.0, out)


def region_integrals(
    t_lo,
    t_hi,
    w_lo,
    w_hi,
    model: GainModel,
    idle_steps=None,
    idle_levels=None,
    tol: float = 1e-10,
):
    """Mass, ``mass * p`` and the idle-rate numerator of many regions.

    ``idle_steps[n]`` is ``R_n - R_{n-1}`` and ``idle_levels[n]`` the matching
    ``s11`` threshold ``v_n * N0 / P1`` (n = 1..N). Cells touching the origin
    (``t_lo = w_lo = 0``) have an infinite power integral, reported as ``inf``.
    """
    t_lo, t_hi, w_lo, w_hi = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (t_lo, t_hi, w_lo, w_hi))
    n_regions = t_lo.size
    A, B = model.alpha_scale, model.beta_scale
    inv_s11, inv_s21 = 1.0 / model.mean_s11, 1.0 / model.mean_s21
    owner, a0, a1 = _alpha_pieces(t_lo, t_hi, w_lo, w_hi)
    divergent_cell = (t_lo == 0) & (w_lo == 0)
    power_mask = ~divergent_cell[owner]
    infinite = np.isinf(a1)
    width = np.where(infinite, np.maximum(a0, A), a1 - a0)
    pt_lo, pt_hi = t_lo[owner], t_hi[owner]
    pw_lo, pw_hi = w_lo[owner], w_hi[owner]
    with_idle = idle_steps is not None
    if with_idle:
        steps = np.asarray(idle_steps, dtype=float)[:, None]
        levels = np.asarray(idle_levels, dtype=float)[:, None]

    def integrand(t):
        if infinite.any():
            a = np.where(infinite, a0 + width * t / (1.0 - t), a0 + width * t)
            jac = np.where(infinite, width / (1.0 - t) ** 2, width)
        else:
            a = a0 + width * t
            jac = width
        with np.errstate(divide="ignore", invalid="ignore"):
            b_lo = np.maximum(pt_lo / a, pw_lo * a)
            b_hi = np.minimum(np.where(np.isinf(pt_hi), np.inf, pt_hi / a), pw_hi * a)
        b_lo = np.nan_to_num(b_lo, nan=0.0)
        b_hi = np.nan_to_num(b_hi, nan=np.inf)
        f_alpha = A / (a + A) ** 2 * jac
        mass = f_alpha * (B / (b_lo + B) - B / (b_hi + B))
        power = np.zeros_like(mass)
        power[power_mask] = f_alpha[power_mask] * (
            _beta_tail_power(b_hi[power_mask], B) - _beta_tail_power(b_lo[power_mask], B)
        )
        rows = [mass, power]
        if with_idle:
            z = (inv_s11 + inv_s21 / a)[None, :] * levels
            survival = np.exp(-z) * (1.0 + z)
            rows.append(mass * (steps * survival).sum(axis=0))
        return np.stack(rows)

    res, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=tol, epsrel=1e-10, norm="max", limit=20000)
    if not np.all(np.isfinite(res)) or err > 100 * max(tol, 1e-10 * np.abs(res).max()):
        raise NumericalError(f"region quadrature did not converge (error estimate {err:.3g})")
    out = np.zeros((res.shape[0], n_regions))
    for row in range(res.shape[0]):
        np.add.at(out[row], owner, res[row])
    out[1, divergent_cell] = np.inf
    return out


def region_mass_and_power(t_low, t_high, w_low, w_high, model: GainModel, tol: float = 1e-10):
    """``(pr, p)`` for one cell; ``p`` is ``E[1/beta | cell]`` (``inf`` if divergent)."""
    mass, weight = region_integrals(t_low, t_high, w_low, w_high, model, tol=tol)[:2, 0]
    norm = weight / mass if mass > MASS_FLOOR else 0.0
    return float(mass), float(norm)


def idle_primary_rate(t_low, t_high, w_low, w_high, model: GainModel, rates, idle_thresholds, primary_power: float, tol: float = 1e-10) -> float:
    """Average primary rate on a cell when the cognitive link is silent."""
    steps, levels = _idle_terms(rates, idle_thresholds, model, primary_power)
    mass, _, num = region_integrals(t_low, t_high, w_low, w_high, model, steps, levels, tol=tol)[:, 0]
    if mass <= MASS_FLOOR:
        raise UnreachableRegionError("region mass below floor; conditional rate undefined")
    return float(num / mass)


def _idle_terms(rates, idle_thresholds, model: GainModel, primary_power: float):
    rates = np.asarray(rates, dtype=float)
    v = np.asarray(idle_thresholds, dtype=float)
    return np.diff(rates), v[1:] * model.noise_power / primary_power


def unconditional_idle_rate(rates, idle_thresholds, model: GainModel, primary_power: float) -> float:
    """Primary rate over the whole plane: exponential ``P1*s11/N0``."""
    mean_snr = primary_power * model.mean_s11 / model.noise_power
    steps = np.diff(np.asarray(rates, dtype=float))
    return float(np.sum(steps * np.exp(-np.asarray(idle_thresholds)[1:] / mean_snr)))


# -- grid construction ----------------------------------------------------------


def build_grid_from_thresholds(
    rates,
    primary_thresholds,
    cognitive_thresholds,
    idle_thresholds,
    model: GainModel,
    radial_count: int,
    band_subdivisions: int = 0,
    primary_power: float = 1.0,
    tol: float = 1e-10,
    max_regions: int = DEFAULT_MAX_REGIONS,
) -> RegionGrid:
    if radial_count < 1:
        raise ValueError("radial_count must be >= 1")
    if band_subdivisions < 0:
        raise ValueError("band_subdivisions must be >= 0")
    z = product_boundaries(primary_thresholds, cognitive_thresholds)
    bands = z.size - 1 + band_subdivisions
    if bands * radial_count > max_regions:
        raise ResourceError(f"{bands} x {radial_count} regions exceed the cap of {max_regions}")
    aux = auxiliary_products(z, band_subdivisions, model)
    edges = np.sort(np.concatenate((z, aux)))
    w = radial_boundaries(radial_count, model)

    band_idx, radial_idx = np.divmod(np.arange(bands * radial_count), radial_count)
    t_lo, t_hi = edges[band_idx], edges[band_idx + 1]
    w_lo, w_hi = w[radial_idx], w[radial_idx + 1]
    steps, levels = _idle_terms(rates, idle_thresholds, model, primary_power)
    mass, weight, idle_num = region_integrals(t_lo, t_hi, w_lo, w_hi, model, steps, levels, tol=tol)

    reachable = mass > MASS_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = np.where(reachable, weight / mass, 0.0)
        idle = np.where(reachable, idle_num / mass, 0.0)
    divergent = ~np.isfinite(norm) | (norm > DIVERGENCE_GUARD)
    norm = np.where(divergent, np.inf, norm)
    return RegionGrid(
        rates=rates,
        primary_thresholds=primary_thresholds,
        cognitive_thresholds=cognitive_thresholds,
        t_low=t_lo,
        t_high=t_hi,
        w_low=w_lo,
        w_high=w_hi,
        mass=mass,
        norm_power=norm,
        divergent=divergent,
        idle_rate=np.clip(idle, 0.0, float(np.asarray(rates)[-1])),
        product_boundaries=z,
        auxiliary_products=aux,
        band_edges=edges,
        radial_boundaries=w,
        idle_thresholds=np.asarray(idle_thresholds, dtype=float),
        reachable=reachable,
    )


def build_grid(
    table: AmcTable,
    b1: float,
    b2: float,
    model: GainModel,
    radial_count: int,
    band_subdivisions: int = 0,
    primary_power: float = 1.0,
    margin: float = 1.0,
    tol: float = 1e-10,
    max_regions: int = DEFAULT_MAX_REGIONS,
) -> RegionGrid:
    """Grid for the design targets ``b1/margin`` and ``b2/margin``.

    The idle primary keeps its own thresholds at ``b1``.
    """
    return build_grid_from_thresholds(
        table.rates,
        table.thresholds(b1 / margin),
        table.thresholds(b2 / margin),
        table.thresholds(b1),
        model,
        radial_count,
        band_subdivisions,
        primary_power=primary_power,
        tol=tol,
        max_regions=max_regions,
    )


def grid_shape_for(total_regions: int, radial_count: int, band_count_min: int) -> tuple[int, int]:
    """``(L, budget)`` giving exactly ``total_regions`` cells with ``L = radial_count``."""
    if total_regions % radial_count:
        raise ValueError(f"{total_regions} regions do not split into {radial_count} radial cells")
    bands = total_regions // radial_count
    if bands < band_count_min:
        raise ValueError(f"need at least {band_count_min} bands, got {bands}")
    return radial_count, bands - band_count_min
