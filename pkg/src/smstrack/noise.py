"""Measurement noise for simulated locators.

Horizontal GPS error is a two-component Rayleigh mixture (a tight "good fix"
component plus a heavy tail); a single Rayleigh fitted to the 5 m quantile
would put ~99.6% of samples inside 10 m, far above the measured 93.1%, so
two components are the minimal shape that hits both quantiles. Response
latency is a clamped normal around the midpoint of the measured mean range.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Tuple

from scipy.optimize import brentq

# Stationary accuracy targets: 75.6% of fixes within 5 m, 93.1% within 10 m.
ACCURACY_NEAR_M = 5.0
ACCURACY_NEAR_P = 0.756
ACCURACY_FAR_M = 10.0
ACCURACY_FAR_P = 0.931

# Measured mean response time range is 30.5-42.8 s; the model centres on the
# midpoint and clamps to keep samples physical.
LATENCY_MEAN_S = 36.65
LATENCY_SPREAD_S = 10.0
LATENCY_MIN_S = 10.0
LATENCY_MAX_S = 170.0

METERS_PER_DEG_LAT = 111_320.0


@dataclass(frozen=True)
class RadialErrorModel:
    sigma_near_m: float
    sigma_far_m: float
    near_weight: float  # probability of drawing the tight component

    def cdf(self, radius_m: float) -> float:
        def component(sigma: float) -> float:
            if sigma == 0.0:
                return 1.0 if radius_m >= 0 else 0.0
            return 1.0 - math.exp(-(radius_m ** 2) / (2.0 * sigma ** 2))

        return (self.near_weight * component(self.sigma_near_m)
                + (1.0 - self.near_weight) * component(self.sigma_far_m))


@dataclass(frozen=True)
class LatencyModel:
    mean_s: float = LATENCY_MEAN_S
    spread_s: float = LATENCY_SPREAD_S
    min_s: float = LATENCY_MIN_S
    max_s: float = LATENCY_MAX_S

    def sample(self, rng: random.Random) -> float:
        return min(self.max_s, max(self.min_s, rng.gauss(self.mean_s, self.spread_s)))


def _rayleigh_cdf(radius: float, sigma: float) -> float:
    return 1.0 - math.exp(-(radius ** 2) / (2.0 * sigma ** 2))


def calibrate_error_mixture(near_m: float = ACCURACY_NEAR_M,
                            near_p: float = ACCURACY_NEAR_P,
                            far_m: float = ACCURACY_FAR_M,
                            far_p: float = ACCURACY_FAR_P) -> RadialErrorModel:
    """Solve (sigma_near, sigma_far, weight) so the mixture CDF passes through
    both accuracy quantiles.

    The weight is found by a 1-D root search: for a candidate weight p the
    near sigma is pinned by the near quantile (assuming the tail contributes
    nothing there) and the far sigma by the far quantile (assuming the near
    component is fully inside it); the root makes the combined residual of
    the exact mixture vanish. A short fixed-point pass then re-solves both
    sigmas against the exact two-quantile system.
    """

    def sigma_near_for(p: float) -> float:
        return near_m / math.sqrt(2.0 * math.log(p / (p - near_p)))

    def sigma_far_for(p: float) -> float:
        return far_m / math.sqrt(2.0 * math.log((1.0 - p) / (1.0 - far_p)))

    def residual(p: float) -> float:
        s1, s2 = sigma_near_for(p), sigma_far_for(p)
        err_near = p * _rayleigh_cdf(near_m, s1) + (1 - p) * _rayleigh_cdf(near_m, s2) - near_p
        err_far = p * _rayleigh_cdf(far_m, s1) + (1 - p) * _rayleigh_cdf(far_m, s2) - far_p
        return err_near + err_far

    lo = near_p + 1e-4
    hi = far_p - 1e-4
    weight = brentq(residual, lo, hi, xtol=1e-12)

    s1, s2 = sigma_near_for(weight), sigma_far_for(weight)
    for _ in range(60):
        head_share = (near_p - (1 - weight) * _rayleigh_cdf(near_m, s2)) / weight
        s1 = near_m / math.sqrt(-2.0 * math.log(1.0 - head_share))
        tail_share = (far_p - weight * _rayleigh_cdf(far_m, s1)) / (1 - weight)
        s2 = far_m / math.sqrt(-2.0 * math.log(1.0 - tail_share))
    return RadialErrorModel(sigma_near_m=s1, sigma_far_m=s2, near_weight=weight)


_DEFAULT_MODEL: RadialErrorModel | None = None


def default_error_model() -> RadialErrorModel:
    global _DEFAULT_MODEL
    if _DEFAULT_MODEL is None:
        _DEFAULT_MODEL = calibrate_error_mixture()
    return _DEFAULT_MODEL


def sample_radial_error(model: RadialErrorModel, rng: random.Random) -> Tuple[float, float]:
    """(east, north) offset in meters: isotropic direction, mixture radius."""
    sigma = model.sigma_near_m if rng.random() < model.near_weight else model.sigma_far_m
    radius = sigma * math.sqrt(-2.0 * math.log(1.0 - rng.random())) if sigma > 0 else 0.0
    theta = rng.random() * 2.0 * math.pi
    return (radius * math.cos(theta), radius * math.sin(theta))


def offset_position(latitude: float, longitude: float,
                    east_m: float, north_m: float) -> Tuple[float, float]:
    """Apply a meter offset as degree deltas at the given latitude."""
    dlat = north_m / METERS_PER_DEG_LAT
    meters_per_deg_lon = METERS_PER_DEG_LAT * max(0.01, math.cos(math.radians(latitude)))
    dlon = east_m / meters_per_deg_lon
    lat = max(-90.0, min(90.0, latitude + dlat))
    lon = longitude + dlon
    if lon > 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    return (lat, lon)
