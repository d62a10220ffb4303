"""Seeded Poisson-process generators and time warps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import Dataset, Realization, TimeDomain, as_domain
from .exceptions import DomainMismatch, InvalidIntensity, InvalidRate, ValidationError
from .rescale import IntensityModel

__all__ = [
    "WarpFunction",
    "sample_hpp",
    "sample_ipp",
    "simulate_hpp",
    "simulate_ipp",
    "hpp_batch",
    "apply_warp",
    "random_warp",
]

DEFAULT_WARP_NODES = 1024


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class WarpFunction:
    """Endpoint-preserving, strictly increasing piecewise-linear time warp."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64)
        g = np.array(self.values, dtype=np.float64)
        if t.shape != g.shape or t.ndim != 1 or t.size < 2:
            raise ValidationError("warp grid needs matching 1-d arrays of length >= 2")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(g) <= 0):
            raise ValidationError("warp must be strictly increasing")
        if g[0] != t[0] or g[-1] != t[-1]:
            raise ValidationError("warp must fix both endpoints of the domain")
        t.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", g)

    @property
    def domain(self) -> TimeDomain:
        return TimeDomain(self.t[0], self.t[-1])

    @classmethod
    def from_function(cls, fn, domain, n_nodes=DEFAULT_WARP_NODES):
        domain = as_domain(domain)
        t = np.linspace(domain.t1, domain.t2, int(n_nodes))
        g = np.asarray(fn(t), dtype=np.float64)
        g[0], g[-1] = domain.t1, domain.t2
        return cls(t, g)

    @classmethod
    def identity(cls, domain):
        domain = as_domain(domain)
        return cls([domain.t1, domain.t2], [domain.t1, domain.t2])

    def __call__(self, x):
        return np.interp(x, self.t, self.values)

    def inverse(self) -> "WarpFunction":
        return WarpFunction(self.values, self.t)


def random_warp(domain, seed=None, n_knots=6, n_nodes=DEFAULT_WARP_NODES):
    """Monotone cubic warp through random increasing interior knots."""
    domain = as_domain(domain)
    rng = _rng(seed)
    x = np.concatenate(([0.0], np.sort(rng.uniform(size=n_knots)), [1.0]))
    y = np.concatenate(([0.0], np.sort(rng.uniform(size=n_knots)), [1.0]))
    # keep knots distinct so the interpolant is strictly increasing
    x = np.unique(x)
    y = np.linspace(0, 1, x.size) if np.unique(y).size != x.size else y
    spline = PchipInterpolator(x, y)
    grid = np.linspace(0.0, 1.0, int(n_nodes))
    g = spline(grid)
    # pchip can be flat between equal knots; a tiny identity blend restores strictness
    g = 0.999 * g + 0.001 * grid
    g[0], g[-1] = 0.0, 1.0
    return WarpFunction(domain.t1 + domain.span * grid, domain.t1 + domain.span * g)


def apply_warp(s: Realization, warp: WarpFunction) -> Realization:
    if s.domain != warp.domain:
        raise DomainMismatch("realization and warp live on different domains")
    return Realization(s.domain, np.maximum.accumulate(warp(s.events)) if len(s) else s.events)


def sample_hpp(rate, domain, seed=None) -> Realization:
    """One homogeneous Poisson realization: Poisson count, sorted uniforms."""
    domain = as_domain(domain)
    rate = float(rate)
    if not rate > 0 or not np.isfinite(rate):
        raise InvalidRate(f"rate must be positive and finite, got {rate}")
    rng = _rng(seed)
    n = rng.poisson(rate * domain.span)
    return Realization(domain, np.sort(rng.uniform(domain.t1, domain.t2, size=n)))


def hpp_batch(rate, domain, n, seed=None):
    """Vectorised draw of ``n`` HPP realizations.

    Returns ``(counts, times)`` where ``times`` concatenates the sorted
    event times of each realization in order.
    """
    domain = as_domain(domain)
    rate = float(rate)
    if not rate > 0 or not np.isfinite(rate):
        raise InvalidRate(f"rate must be positive and finite, got {rate}")
    rng = _rng(seed)
    counts = rng.poisson(rate * domain.span, size=int(n))
    times = rng.uniform(domain.t1, domain.t2, size=int(counts.sum()))
    owner = np.repeat(np.arange(counts.size), counts)
    times = times[np.lexsort((times, owner))]
    return counts, times


def _split(domain, counts, times):
    bounds = np.cumsum(counts)[:-1]
    return Dataset(domain, tuple(Realization(domain, x) for x in np.split(times, bounds)))


def simulate_hpp(rate, domain, n, seed=None) -> Dataset:
    domain = as_domain(domain)
    counts, times = hpp_batch(rate, domain, n, seed)
    return _split(domain, counts, times)


def _check_intensity(intensity: IntensityModel):
    if np.any(intensity.rate < 0) or not intensity.max_rate > 0:
        raise InvalidIntensity("intensity must be nonnegative and positive somewhere")


def sample_ipp(intensity: IntensityModel, seed=None) -> Realization:
    """Inhomogeneous Poisson realization by Lewis-Shedler thinning."""
    _check_intensity(intensity)
    rng = _rng(seed)
    cand = sample_hpp(intensity.max_rate, intensity.domain, rng).events
    keep = rng.uniform(size=cand.size) * intensity.max_rate < intensity.intensity(cand)
    return Realization(intensity.domain, cand[keep])


def simulate_ipp(intensity: IntensityModel, n, seed=None) -> Dataset:
    _check_intensity(intensity)
    rng = _rng(seed)
    counts, times = hpp_batch(intensity.max_rate, intensity.domain, n, rng)
    keep = rng.uniform(size=times.size) * intensity.max_rate < intensity.intensity(times)
    owner = np.repeat(np.arange(counts.size), counts)
    new_counts = np.bincount(owner[keep], minlength=counts.size)
    return _split(intensity.domain, new_counts, times[keep])
