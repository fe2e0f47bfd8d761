"""Rayleigh block-fading statistics and seeded gain sampling.

Power gains ``s_ij = |h_ij|^2`` are exponential. The ratio law below covers
``y = q1*x1 / (q2*x2 + q3)`` for independent exponentials, which is the
distribution of every SNIR and of the modified SNIRs ``alpha = s11/s21`` and
``beta = s22/s12``.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

GAIN_NAMES = ("s11", "s12", "s21", "s22")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class GainModel:
    """Mean power gains of the four links and the receiver noise power."""

    mean_s11: float
    mean_s22: float
    mean_s12: float
    mean_s21: float
    noise_power: float
    alpha_scale: float = field(init=False)
    beta_scale: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("mean_s11", "mean_s22", "mean_s12", "mean_s21", "noise_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        object.__setattr__(self, "alpha_scale", self.mean_s11 / self.mean_s21)
        object.__setattr__(self, "beta_scale", self.mean_s22 / self.mean_s12)

    def mean(self, name: str) -> float:
        return getattr(self, "mean_" + name)

    def replace(self, **changes) -> "GainModel":
        kw = dict(
            mean_s11=self.mean_s11,
            mean_s22=self.mean_s22,
            mean_s12=self.mean_s12,
            mean_s21=self.mean_s21,
            noise_power=self.noise_power,
        )
        kw.update(changes)
        return GainModel(**kw)


@dataclass(frozen=True)
class PathLossGeometry:
    """Transceivers on a unit rectangle; ``tx_separation`` is d."""

    s0: float = 1.0
    exponent: float = 3.0
    tx_separation: float = 1.0

    def __post_init__(self) -> None:
        if not (self.s0 > 0 and self.exponent > 0 and self.tx_separation >= 0):
            raise ValueError("need s0 > 0, exponent > 0, tx_separation >= 0")


@dataclass(frozen=True)
class BlockGains:
    s11: np.ndarray | float
    s12: np.ndarray | float
    s21: np.ndarray | float
    s22: np.ndarray | float

    @property
    def alpha(self):
        return self.s11 / self.s21

    @property
    def beta(self):
        return self.s22 / self.s12


def pathloss_means(geometry: PathLossGeometry) -> dict[str, float]:
    """Mean gains ``s0 / d_ij^U`` with unit direct links."""
    direct = geometry.s0
    cross = geometry.s0 / (1.0 + geometry.tx_separation**2) ** (geometry.exponent / 2.0)
    return {"mean_s11": direct, "mean_s22": direct, "mean_s12": cross, "mean_s21": cross}


def gain_model_from_geometry(geometry: PathLossGeometry, noise_power: float) -> GainModel:
    return GainModel(noise_power=noise_power, **pathloss_means(geometry))


def _check_ratio_args(q1, q2, q3, mean1, mean2) -> None:
    if not (q1 > 0 and q2 > 0 and mean1 > 0 and mean2 > 0):
        raise DomainError("q1, q2, mean1 and mean2 must be positive")
    if q3 < 0:
        raise DomainError("q3 must be nonnegative")


def ratio_pdf(y0, q1, q2, q3, mean1, mean2):
    """Density of ``q1*x1/(q2*x2 + q3)`` with ``x_i`` exponential of mean ``mean_i``."""
    _check_ratio_args(q1, q2, q3, mean1, mean2)
    y0 = np.asarray(y0, dtype=float)
    if np.any(y0 < 0):
        raise DomainError("y0 must be nonnegative")
    l1, l2 = 1.0 / mean1, 1.0 / mean2
    denom = l2 + l1 * y0 * q2 / q1
    out = (l1 * l2 * q3 / (l2 * q1 + l1 * y0 * q2) + (q2 / q1) * l2 * l1 / denom**2) * np.exp(
        -l1 * y0 * q3 / q1
    )
    return out if out.ndim else float(out)


def ratio_sf(y0, q1, q2, q3, mean1, mean2):
    """Unchecked survival function ``P(y > y0)``; ``q2 = 0`` is allowed."""
    y0 = np.asarray(y0, dtype=float)
    l1, l2 = 1.0 / mean1, 1.0 / mean2
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.exp(-l1 * y0 * q3 / q1) * l2 / (l2 + l1 * y0 * q2 / q1)
    out = np.where(np.isinf(y0), 0.0, out)
    return out if out.ndim else float(out)


def ratio_cdf(y0, q1, q2, q3, mean1, mean2):
    """CDF matching :func:`ratio_pdf`."""
    _check_ratio_args(q1, q2, q3, mean1, mean2)
    if np.any(np.asarray(y0) < 0):
        raise DomainError("y0 must be nonnegative")
    out = 1.0 - np.asarray(ratio_sf(y0, q1, q2, q3, mean1, mean2))
    return out if out.ndim else float(out)


# Closed-form laws of the noise-free modified SNIRs. With alpha = A*u and
# beta = B*v (u, v iid with CDF x/(1+x)), rho = B/(wA) for the ratio and
# rho = z/(AB) for the product.


def _near_one(rho, series, exact):
    eps = rho - 1.0
    small = np.abs(eps) < 1e-3
    safe = np.where(small, 2.0, rho)
    return np.where(small, series(eps), exact(safe))


def beta_over_alpha_cdf(w, alpha_scale: float, beta_scale: float):
    """``P(beta/alpha <= w)``."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = beta_scale / (w * alpha_scale)
        out = _near_one(
            rho,
            lambda e: 0.5 - e / 6.0 + e * e / 12.0,
            lambda r: (1.0 - r + r * np.log(r)) / (1.0 - r) ** 2,
        )
    out = np.where(w <= 0, 0.0, np.where(np.isinf(w), 1.0, out))
    return out if out.ndim else float(out)


def alpha_beta_product_cdf(z, alpha_scale: float, beta_scale: float):
    """``P(alpha*beta <= z)``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = z / (alpha_scale * beta_scale)
        out = _near_one(
            rho,
            lambda e: 0.5 + e / 6.0 - e * e / 12.0,
            lambda r: r * (r - 1.0 - np.log(r)) / (1.0 - r) ** 2,
        )
    out = np.where(z <= 0, 0.0, np.where(np.isinf(z), 1.0, out))
    return out if out.ndim else float(out)


def _stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, name: str, worker: int = 0) -> np.random.Generator:
    """Independent generator for one named consumer (and worker chunk)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(worker, _stream_key(name)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class GainStreams:
    """One named random stream per gain, so extra consumers never shift draws."""

    seed: int
    worker: int = 0

    def __post_init__(self) -> None:
        self._gens = {n: substream(self.seed, "gain:" + n, self.worker) for n in GAIN_NAMES}

    def draw(self, name: str, scale: float, size=None):
        return self._gens[name].exponential(scale, size)


def sample_block_gains(model: GainModel, streams: GainStreams, size: int | None = None) -> BlockGains:
    """Draw the four gains for ``size`` independent blocks (scalar if ``None``)."""
    return BlockGains(**{n: streams.draw(n, model.mean(n), size) for n in GAIN_NAMES})


def exp_interval_prob(lo, hi, mean: float):
    """``P(lo <= x < hi)`` for exponential ``x``; ``hi`` may be ``inf``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.exp(-lo / mean) - np.where(np.isinf(hi), 0.0, np.exp(-np.minimum(hi, 1e300) / mean))


def rate_average_exponential(rates, thresholds, mean_snr: float) -> float:
    """Average rate when SNR is exponential with ``mean_snr`` and mode n covers [v_n, v_{n+1})."""
    rates = np.asarray(rates, dtype=float)
    v = np.asarray(thresholds, dtype=float)
    if mean_snr <= 0:
        return 0.0
    # sum_n (R_n - R_{n-1}) * P(snr >= v_n)
    steps = np.diff(rates)
    return float(np.sum(steps * np.exp(-v[1:] / mean_snr)))

