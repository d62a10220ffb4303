"""Intensity models, time rescaling and the rescaled-time Dirichlet depth."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ._kernels import equal_weight_depth
from .core import Dataset, Realization, TimeDomain, as_domain
from .exceptions import DomainMismatch, EmptyDataset, InvalidIntensity, ValidationError

__all__ = [
    "IntensityModel",
    "estimate_intensity",
    "rescale",
    "ts_conditional_depth",
    "ipp_log_likelihood",
    "read_intensity",
    "write_intensity",
]

DEFAULT_NODES = 2048


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IntensityModel:
    """History-free intensity on a grid with its cumulative integral.

    ``cumulative`` holds Lambda(t) at the grid nodes; both the intensity and
    Lambda are evaluated between nodes by linear interpolation.
    """

    domain: TimeDomain
    t: np.ndarray
    rate: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self):
        domain = as_domain(self.domain)
        t, rate, cum = (_readonly(x) for x in (self.t, self.rate, self.cumulative))
        if not (t.shape == rate.shape == cum.shape) or t.size < 2:
            raise InvalidIntensity("grid, rate and cumulative need equal length >= 2")
        if t[0] != domain.t1 or t[-1] != domain.t2:
            raise InvalidIntensity("grid must start at t1 and end at t2")
        if np.any(np.diff(t) <= 0):
            raise InvalidIntensity("grid nodes must be strictly increasing")
        if not np.all(np.isfinite(rate)) or np.any(rate < 0):
            raise InvalidIntensity("intensity values must be finite and nonnegative")
        if not np.all(np.isfinite(cum)) or cum[0] != 0.0 or np.any(np.diff(cum) < 0):
            raise InvalidIntensity("cumulative intensity must start at 0 and be nondecreasing")
        for name, val in (("domain", domain), ("t", t), ("rate", rate), ("cumulative", cum)):
            object.__setattr__(self, name, val)

    # constructors -----------------------------------------------------

    @classmethod
    def from_grid(cls, t, rate) -> "IntensityModel":
        """Intensity values at nodes; Lambda by the trapezoid rule."""
        t = np.asarray(t, dtype=np.float64)
        rate = np.asarray(rate, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise InvalidIntensity("need at least two grid nodes")
        if np.any(rate < 0) or not np.all(np.isfinite(rate)):
            raise InvalidIntensity("intensity values must be finite and nonnegative")
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))))
        return cls(TimeDomain(t[0], t[-1]), t, rate, cum)

    @classmethod
    def from_function(cls, fn, domain, n_nodes=DEFAULT_NODES, cumulative=None):
        """Sample ``fn`` on a uniform grid.

        ``cumulative``, when given, is the exact antiderivative with
        ``cumulative(t1) == 0`` and replaces the trapezoid sums.
        """
        domain = as_domain(domain)
        t = np.linspace(domain.t1, domain.t2, int(n_nodes))
        rate = np.asarray(fn(t), dtype=np.float64) * np.ones_like(t)
        if cumulative is None:
            return cls.from_grid(t, rate)
        cum = np.asarray(cumulative(t), dtype=np.float64) - float(cumulative(domain.t1))
        cum[0] = 0.0
        return cls(domain, t, rate, np.maximum.accumulate(cum))

    @classmethod
    def constant(cls, rate, domain) -> "IntensityModel":
        domain = as_domain(domain)
        rate = float(rate)
        return cls(domain, [domain.t1, domain.t2], [rate, rate], [0.0, rate * domain.span])

    @classmethod
    def from_cumulative(cls, t, cumulative) -> "IntensityModel":
        """Build from a user-supplied nondecreasing Lambda on a grid."""
        t = np.asarray(t, dtype=np.float64)
        cum = np.asarray(cumulative, dtype=np.float64)
        if cum.size and cum[0] != 0.0:
            cum = cum - cum[0]
        rate = np.clip(np.gradient(cum, t), 0.0, None) if t.size > 1 else np.zeros_like(t)
        return cls(TimeDomain(t[0], t[-1]), t, rate, cum)

    # evaluation -------------------------------------------------------

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    @property
    def max_rate(self) -> float:
        return float(np.max(self.rate))

    def intensity(self, t):
        return np.interp(t, self.t, self.rate)

    def cumulative_at(self, t):
        return np.interp(t, self.t, self.cumulative)

    def inverse_cumulative(self, y):
        """Smallest t with Lambda(t) = y; flat stretches resolve to their left end."""
        y = np.asarray(y, dtype=np.float64)
        cum, t = self.cumulative, self.t
        yc = np.clip(y, 0.0, self.total)
        hi = np.clip(np.searchsorted(cum, yc, side="left"), 1, cum.size - 1)
        lo = hi - 1
        denom = cum[hi] - cum[lo]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(denom > 0, (yc - cum[lo]) / denom, 0.0)
        out = t[lo] + frac * (t[hi] - t[lo])
        out = np.where(yc <= 0.0, t[0], out)
        return out if out.ndim else float(out)

    def require_positive(self):
        if not self.total > 0.0:
            raise InvalidIntensity("cumulative intensity is zero over the whole domain")

    # transports -------------------------------------------------------

    def warped(self, warp) -> "IntensityModel":
        """Lambda composed with the inverse warp, exact on the merged grid."""
        if warp.domain != self.domain:
            raise DomainMismatch("warp and intensity live on different domains")
        nodes = np.union1d(self.t, warp.t)
        u = warp(nodes)
        u[0], u[-1] = self.domain.t1, self.domain.t2
        keep = np.concatenate(([True], np.diff(u) > 0))
        return IntensityModel.from_cumulative(u[keep], self.cumulative_at(nodes)[keep])

    def affine(self, a: float, b: float) -> "IntensityModel":
        """Transport to the domain ``[a t1 + b, a t2 + b]`` (``a > 0``)."""
        if not a > 0:
            raise ValidationError("scale must be positive")
        return IntensityModel(self.domain.affine(a, b), a * self.t + b, self.rate / a, self.cumulative)

    def to_dict(self) -> dict:
        return {
            "domain": [self.domain.t1, self.domain.t2],
            "t": self.t.tolist(),
            "rate": self.rate.tolist(),
            "cumulative": self.cumulative.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "IntensityModel":
        return cls(TimeDomain(*d["domain"]), d["t"], d["rate"], d["cumulative"])


def _default_bins(total_events):
    return max(10, int(math.sqrt(total_events)))


def estimate_intensity(data: Dataset, bins=None, bandwidth=None, n_nodes=DEFAULT_NODES):
    """Histogram of pooled events per realization, smoothed by a Gaussian kernel.

    ``bins`` defaults to ``max(10, sqrt(total events))`` and ``bandwidth``
    (time units) to twice the bin width. Reflecting boundaries keep the
    integral equal to the mean event count.
    """
    if len(data) == 0:
        raise EmptyDataset("cannot estimate an intensity from no realizations")
    pooled = data.pooled_events()
    bins = _default_bins(pooled.size) if bins is None else int(bins)
    if bins < 2:
        raise ValidationError("need at least two bins")
    d = data.domain
    width = d.span / bins
    hist, edges = np.histogram(pooled, bins=bins, range=(d.t1, d.t2))
    rate = hist / (len(data) * width)
    bandwidth = 2.0 * width if bandwidth is None else float(bandwidth)
    if bandwidth > 0:
        rate = gaussian_filter1d(rate, bandwidth / width, mode="reflect")
    centers = 0.5 * (edges[1:] + edges[:-1])
    t = np.linspace(d.t1, d.t2, int(n_nodes))
    return IntensityModel.from_grid(t, np.interp(t, centers, rate))


def _check_domain(s: Realization, model: IntensityModel):
    if s.domain != model.domain:
        raise DomainMismatch(
            f"realization domain {tuple(s.domain)} differs from intensity domain {tuple(model.domain)}"
        )


def rescale(s: Realization, model: IntensityModel) -> Realization:
    """Map events through Lambda and normalise to ``[0, 1]``."""
    _check_domain(s, model)
    model.require_positive()
    events = np.clip(model.cumulative_at(s.events) / model.total, 0.0, 1.0)
    return Realization(TimeDomain(0.0, 1.0), np.maximum.accumulate(events) if events.size else events)


def ts_conditional_depth(s: Realization, model: IntensityModel) -> float:
    _check_domain(s, model)
    model.require_positive()
    total = model.total
    breaks = np.concatenate(([0.0], model.cumulative_at(s.events), [total]))
    return equal_weight_depth(np.diff(breaks), total)


def ipp_log_likelihood(s: Realization, model: IntensityModel) -> float:
    """Poisson-process log-likelihood ``sum(log lambda(s_i)) - Lambda(T2)``."""
    _check_domain(s, model)
    lam = model.intensity(s.events)
    if np.any(lam <= 0):
        return -math.inf
    return float(np.sum(np.log(lam)) - model.total)


def read_intensity(path) -> IntensityModel:
    with open(path, encoding="utf-8") as fh:
        return parse_intensity(fh)


def parse_intensity(stream) -> IntensityModel:
    rows = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValidationError(f"line {lineno}: expected two columns (t, intensity)")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric value") from None
    if len(rows) < 2:
        raise InvalidIntensity("intensity file needs at least two rows")
    t, rate = np.array(rows).T
    return IntensityModel.from_grid(t, rate)


def write_intensity(model: IntensityModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# t intensity\n")
        for ti, li in zip(model.t, model.rate):
            fh.write(f"{float(ti)!r} {float(li)!r}\n")
