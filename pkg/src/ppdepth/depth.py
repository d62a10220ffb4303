"""Dirichlet conditional depths, bootstrap conditional means and the combined depth."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.isotonic import isotonic_regression
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._kernels import equal_weight_depth, weighted_depth
from .cardinality import (
    CardinalityModel,
    default_cap,
    fit_empirical,
    fit_poisson_mixture_em,
    fit_poisson_mle,
    select_poisson_mixture,
    weight,
)
from .core import Dataset, Realization, TimeDomain, as_domain, check_realizations
from .exceptions import (
    CapExceeded,
    DimensionMismatch,
    DomainMismatch,
    EmptyDataset,
    MeanRepairWarning,
    MissingCardinality,
    NonMonotoneMeans,
    PoolEmpty,
    ValidationError,
    ZeroDepthWarning,
)
from .rescale import IntensityModel, estimate_intensity, ts_conditional_depth

__all__ = [
    "ConditionalMeanTable",
    "HppConditional",
    "SampleDirichletConditional",
    "TsDirichletConditional",
    "MahalanobisConditional",
    "DepthModel",
    "PointProcessDepth",
    "hpp_conditional_depth",
    "dirichlet_conditional_depth",
    "bootstrap_conditional_means",
    "mahalanobis_conditional_depth",
    "fit_mahalanobis_conditional",
    "combined_depth",
    "trimmed_region_member",
    "load_model",
    "save_model",
]

CONDITIONAL_KINDS = ("hpp", "sample-dirichlet", "ts-dirichlet", "mahalanobis")


def _check_same_domain(s: Realization, domain: TimeDomain):
    if s.domain != domain:
        raise DomainMismatch(
            f"realization domain {tuple(s.domain)} differs from model domain {tuple(domain)}"
        )


# --------------------------------------------------------------------------
# conditional mean table


class ConditionalMeanTable:
    """Per-cardinality conditional mean event times.

    Every row must be strictly increasing and strictly inside the domain.
    """

    def __init__(self, domain, means):
        self.domain = as_domain(domain)
        rows = {}
        for k, row in dict(means).items():
            k = int(k)
            row = np.array(row, dtype=np.float64).reshape(-1)
            if row.size != k:
                raise DimensionMismatch(f"row for k={k} has {row.size} entries")
            gaps = np.diff(np.concatenate(([self.domain.t1], row, [self.domain.t2])))
            if not np.all(gaps > 0):
                raise NonMonotoneMeans(f"conditional means for k={k} are not strictly increasing", k)
            row.setflags(write=False)
            rows[k] = row
        self._rows = dict(sorted(rows.items()))

    @classmethod
    def hpp_center(cls, domain, K) -> "ConditionalMeanTable":
        """Rows ``(i * span / (k+1))_i`` for ``k = 1..K``."""
        domain = as_domain(domain)
        return cls(domain, {
            k: domain.t1 + domain.span * np.arange(1, k + 1) / (k + 1) for k in range(1, K + 1)
        })

    def __contains__(self, k):
        return int(k) in self._rows or int(k) == 0

    def row(self, k) -> np.ndarray:
        k = int(k)
        if k == 0:
            return np.empty(0)
        try:
            return self._rows[k]
        except KeyError:
            raise MissingCardinality(k) from None

    def cardinalities(self):
        return list(self._rows)

    def items(self):
        return self._rows.items()

    def gaps(self, k) -> np.ndarray:
        return np.diff(np.concatenate(([self.domain.t1], self.row(k), [self.domain.t2])))

    def to_dict(self) -> dict:
        return {str(k): v.tolist() for k, v in self._rows.items()}

    @classmethod
    def from_dict(cls, domain, d) -> "ConditionalMeanTable":
        return cls(domain, {int(k): v for k, v in d.items()})

    def __eq__(self, other):
        if not isinstance(other, ConditionalMeanTable):
            return NotImplemented
        return (self.domain == other.domain and self._rows.keys() == other._rows.keys()
                and all(np.array_equal(v, other._rows[k]) for k, v in self._rows.items()))

    __hash__ = None

    def __repr__(self):
        return f"ConditionalMeanTable({tuple(self.domain)}, k={self.cardinalities()})"


# --------------------------------------------------------------------------
# conditional depths


def hpp_conditional_depth(s: Realization) -> float:
    """Dirichlet depth of ``s`` given its cardinality, for a homogeneous process."""
    d = s.domain
    breaks = np.concatenate(([d.t1], s.events, [d.t2]))
    return equal_weight_depth(np.diff(breaks), d.span)


def dirichlet_conditional_depth(s: Realization, means: ConditionalMeanTable) -> float:
    """Dirichlet depth centred at the conditional mean row for ``|s|``.

    Raises :class:`MissingCardinality` when the table has no such row.
    """
    _check_same_domain(s, means.domain)
    k = s.cardinality()
    if k == 0:
        return 1.0
    d = s.domain
    gaps = np.diff(np.concatenate(([d.t1], s.events, [d.t2])))
    return weighted_depth(gaps, means.gaps(k), d.span)


def mahalanobis_conditional_depth(s: Realization, mean, covariance, ridge) -> float:
    """Baseline ``1 / (1 + d^2)`` with a ridge-regularised Mahalanobis distance."""
    x = s.events
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    cov = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
    if mean.size != x.size or cov.shape != (x.size, x.size):
        raise DimensionMismatch(
            f"mean/covariance of size {mean.size}/{cov.shape} for a realization of size {x.size}"
        )
    if x.size == 0:
        return 1.0
    if not ridge > 0:
        raise ValidationError("ridge must be positive")
    diff = x - mean
    if not np.any(diff):
        return 1.0
    sol = np.linalg.solve(cov + ridge * np.eye(x.size), diff)
    return float(1.0 / (1.0 + diff @ sol))


# --------------------------------------------------------------------------
# bootstrap resampling


def _padded(data: Dataset):
    counts = data.counts()
    width = max(1, int(counts.max()) if counts.size else 1)
    mat = np.full((len(data), width), np.nan)
    for i, r in enumerate(data.realizations):
        mat[i, : r.cardinality()] = r.events
    return mat, counts


def _resample_to_k(mat, counts, pool, k, rng):
    """One pass of the resampling step: every realization brought to ``k`` events."""
    n, width = mat.shape
    out = np.empty((n, k))
    big = counts >= k
    if np.any(big):
        sub = mat[big]
        keys = rng.random(sub.shape)
        keys[np.arange(width)[None, :] >= counts[big][:, None]] = 2.0
        idx = np.argsort(keys, axis=1)[:, :k]
        out[big] = np.take_along_axis(sub, idx, axis=1)
    small = ~big
    if np.any(small):
        if pool.size == 0:
            raise PoolEmpty("padding needs pooled events but every realization is empty")
        fill = pool[rng.integers(0, pool.size, size=(int(small.sum()), k))]
        own = mat[small][:, :k] if width >= k else np.pad(mat[small], ((0, 0), (0, k - width)),
                                                            constant_values=np.nan)
        mask = np.arange(k)[None, :] < counts[small][:, None]
        fill[mask] = own[mask]
        out[small] = fill
    out.sort(axis=1)
    return out


def _resamples(data: Dataset, K, B, rng):
    """Yield ``(k, [B arrays of shape (n, k)])`` for ``k = 1..K``."""
    mat, counts = _padded(data)
    pool = data.pooled_events()
    for k in range(1, K + 1):
        yield k, [_resample_to_k(mat, counts, pool, k, rng) for _ in range(B)]


def _repair_row(row, domain, eps):
    k = row.size
    offs = eps * np.arange(1, k + 1)
    nu = isotonic_regression(row - offs, increasing=True)
    nu = np.clip(nu, domain.t1, domain.t2 - (k + 1) * eps)
    return nu + offs


def bootstrap_conditional_means(data: Dataset, K=None, B=10, seed=None, repair=False):
    """Estimate conditional mean event times for every cardinality ``1..K``.

    Each realization is resampled to exactly ``k`` events (random deletion,
    or padding with draws from the pooled events), sorted, and averaged;
    the whole pass is repeated ``B`` times and averaged again.

    With ``repair=True`` rows that are not strictly increasing are pushed
    apart by at least ``1e-6 * span`` (with a :class:`MeanRepairWarning`)
    instead of raising :class:`NonMonotoneMeans`.
    """
    if len(data) == 0:
        raise EmptyDataset("cannot bootstrap conditional means from no realizations")
    counts = data.counts()
    K = int(counts.max()) if K is None else int(K)
    B = int(B)
    if B < 1:
        raise ValidationError("B must be at least 1")
    rng = np.random.default_rng(seed)
    domain = data.domain
    eps = 1e-6 * domain.span
    rows = {}
    for k, reps in _resamples(data, K, B, rng):
        row = np.mean([rep.mean(axis=0) for rep in reps], axis=0)
        gaps = np.diff(np.concatenate(([domain.t1], row, [domain.t2])))
        if not np.all(gaps > 0):
            if not repair:
                raise NonMonotoneMeans(
                    f"bootstrapped means for k={k} are not strictly increasing", k
                )
            warnings.warn(f"repaired non-monotone conditional means for k={k}",
                          MeanRepairWarning, stacklevel=2)
            row = _repair_row(row, domain, eps)
        rows[k] = row
    return ConditionalMeanTable(domain, rows)


# --------------------------------------------------------------------------
# conditional models


@dataclass(frozen=True)
class HppConditional:
    domain: TimeDomain
    kind = "hpp"

    def depth(self, s):
        _check_same_domain(s, self.domain)
        return hpp_conditional_depth(s)

    def payload(self):
        return {"domain": list(self.domain)}

    @classmethod
    def from_payload(cls, p):
        return cls(TimeDomain(*p["domain"]))


@dataclass(frozen=True, eq=False)
class SampleDirichletConditional:
    table: ConditionalMeanTable
    kind = "sample-dirichlet"

    @property
    def domain(self):
        return self.table.domain

    def depth(self, s):
        return dirichlet_conditional_depth(s, self.table)

    def payload(self):
        return {"domain": list(self.domain), "means": self.table.to_dict()}

    @classmethod
    def from_payload(cls, p):
        return cls(ConditionalMeanTable.from_dict(TimeDomain(*p["domain"]), p["means"]))


@dataclass(frozen=True, eq=False)
class TsDirichletConditional:
    intensity: IntensityModel
    kind = "ts-dirichlet"

    @property
    def domain(self):
        return self.intensity.domain

    def depth(self, s):
        return ts_conditional_depth(s, self.intensity)

    def payload(self):
        return self.intensity.to_dict()

    @classmethod
    def from_payload(cls, p):
        return cls(IntensityModel.from_dict(p))


@dataclass(frozen=True, eq=False)
class MahalanobisConditional:
    domain: TimeDomain
    means: dict
    covariances: dict
    ridges: dict
    kind = "mahalanobis"

    def depth(self, s):
        _check_same_domain(s, self.domain)
        k = s.cardinality()
        if k == 0:
            return 1.0
        if k not in self.means:
            raise MissingCardinality(k)
        return mahalanobis_conditional_depth(s, self.means[k], self.covariances[k], self.ridges[k])

    def payload(self):
        return {
            "domain": list(self.domain),
            "means": {str(k): np.asarray(v).tolist() for k, v in self.means.items()},
            "covariances": {str(k): np.asarray(v).tolist() for k, v in self.covariances.items()},
            "ridges": {str(k): float(v) for k, v in self.ridges.items()},
        }

    @classmethod
    def from_payload(cls, p):
        return cls(
            TimeDomain(*p["domain"]),
            {int(k): np.asarray(v) for k, v in p["means"].items()},
            {int(k): np.atleast_2d(np.asarray(v)) for k, v in p["covariances"].items()},
            {int(k): float(v) for k, v in p["ridges"].items()},
        )


_CONDITIONALS = {
    c.kind: c for c in
    (HppConditional, SampleDirichletConditional, TsDirichletConditional, MahalanobisConditional)
}


def fit_mahalanobis_conditional(data: Dataset, K=None, B=10, seed=None, ridge=None):
    """Per-cardinality mean and covariance of bootstrap-resampled event vectors.

    ``ridge`` defaults to ``1e-6 * trace(cov) / k`` per cardinality.
    """
    if len(data) == 0:
        raise EmptyDataset("cannot fit a Mahalanobis baseline from no realizations")
    K = int(data.counts().max()) if K is None else int(K)
    rng = np.random.default_rng(seed)
    means, covs, ridges = {}, {}, {}
    for k, reps in _resamples(data, K, int(B), rng):
        stacked = np.vstack(reps)
        means[k] = stacked.mean(axis=0)
        cov = np.atleast_2d(np.cov(stacked, rowvar=False)) if stacked.shape[0] > 1 else np.zeros((k, k))
        covs[k] = cov
        if ridge is not None:
            ridges[k] = float(ridge)
        else:
            tr = float(np.trace(cov))
            ridges[k] = 1e-6 * tr / k if tr > 0 else 1e-12 * data.domain.span ** 2
    return MahalanobisConditional(data.domain, means, covs, ridges)


# --------------------------------------------------------------------------
# combined depth


@dataclass(frozen=True, eq=False)
class DepthModel:
    """Cardinality weight raised to ``r`` times a conditional depth."""

    cardinality: CardinalityModel
    r: float
    conditional: object

    def __post_init__(self):
        if not float(self.r) >= 0:
            raise ValidationError("r must be nonnegative")
        object.__setattr__(self, "r", float(self.r))

    @property
    def domain(self) -> TimeDomain:
        return self.conditional.domain

    @property
    def kind(self) -> str:
        return self.conditional.kind

    def components(self, s: Realization):
        """``(weight, conditional depth, depth)`` for one realization."""
        _check_same_domain(s, self.domain)
        k = s.cardinality()
        w = weight(self.cardinality, k, self.r)
        if w == 0.0:
            return 0.0, 0.0, 0.0
        try:
            c = self.conditional.depth(s)
        except MissingCardinality:
            warnings.warn(f"no conditional model for cardinality {k}; depth set to 0",
                          ZeroDepthWarning, stacklevel=3)
            return w, 0.0, 0.0
        return w, c, w * c

    def depth(self, s: Realization) -> float:
        return self.components(s)[2]

    def with_r(self, r) -> "DepthModel":
        return DepthModel(self.cardinality, r, self.conditional)

    def to_dict(self) -> dict:
        return {
            "cardinality": self.cardinality.to_dict(),
            "r": self.r,
            "conditional": {"type": self.kind, "payload": self.conditional.payload()},
        }

    @classmethod
    def from_dict(cls, d) -> "DepthModel":
        cond = d["conditional"]
        try:
            ctype = _CONDITIONALS[cond["type"]]
        except KeyError:
            raise ValidationError(f"unknown conditional type {cond['type']!r}") from None
        return cls(CardinalityModel.from_dict(d["cardinality"]), float(d["r"]),
                   ctype.from_payload(cond["payload"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "DepthModel":
        return cls.from_dict(json.loads(text))


def combined_depth(model: DepthModel, s: Realization) -> float:
    return model.depth(s)


def trimmed_region_member(model: DepthModel, s: Realization, alpha: float) -> bool:
    """Membership of ``s`` in the region ``{depth >= alpha}``, ``alpha in (0, 1]``."""
    if not 0.0 < alpha <= 1.0:
        raise ValidationError("alpha must lie in (0, 1]")
    return model.depth(s) >= alpha


def save_model(model: DepthModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model.to_json())
        fh.write("\n")


def load_model(path) -> DepthModel:
    with open(path, encoding="utf-8") as fh:
        return DepthModel.from_json(fh.read())


# --------------------------------------------------------------------------
# estimator


def fit_cardinality(counts, kind="poisson", K=None, n_components=None, seed=None):
    counts = np.asarray(counts)
    K = default_cap(counts) if K is None else int(K)
    if counts.max() > K:
        raise CapExceeded(f"observed count {counts.max()} exceeds cap K={K}")
    if kind == "empirical":
        return fit_empirical(counts, K)
    if kind == "poisson":
        return fit_poisson_mle(counts, K)
    if kind == "poisson-mixture":
        if n_components is None:
            return select_poisson_mixture(counts, seed=seed, K=K)
        return fit_poisson_mixture_em(counts, m=n_components, seed=seed, K=K)
    raise ValidationError(f"unknown cardinality kind {kind!r}")


def _score_chunk(model, reals):
    return [model.components(s) for s in reals]


class PointProcessDepth(TransformerMixin, BaseEstimator):
    """Depth of point-process realizations fitted from a training sample.

    Parameters
    ----------
    kind : {"sample-dirichlet", "ts-dirichlet", "hpp", "mahalanobis"}
        Conditional depth. ``sample-dirichlet`` centres on bootstrapped
        conditional means, ``ts-dirichlet`` rescales time by an estimated
        intensity, ``hpp`` uses the homogeneous centre and ``mahalanobis``
        is the ridge-regularised Gaussian baseline.
    r : float
        Exponent on the cardinality weight.
    cardinality : {"poisson", "empirical", "poisson-mixture"}
    n_components : int or None
        Mixture size; ``None`` selects it by BIC over 1..5.
    K : int or None
        Count cap; defaults to the largest training count plus 5.
    n_bootstrap : int
        Repetitions of the resampling pass for conditional means.
    bins, bandwidth : intensity histogram settings for ``ts-dirichlet``.
    ridge : float or None
        Mahalanobis ridge; ``None`` uses ``1e-6 * trace / k``.
    repair_means : bool
        Repair non-monotone bootstrap means instead of raising.
    domain : (t1, t2) or None
        Needed only when realizations are passed as raw arrays.
    random_state : int or None
    n_jobs : int or None
        Workers for scoring; results do not depend on it.
    """

    def __init__(self, kind="sample-dirichlet", r=1.0, cardinality="poisson", n_components=None,
                 K=None, n_bootstrap=10, bins=None, bandwidth=None, ridge=None,
                 repair_means=False, domain=None, random_state=None, n_jobs=None):
        self.kind = kind
        self.r = r
        self.cardinality = cardinality
        self.n_components = n_components
        self.K = K
        self.n_bootstrap = n_bootstrap
        self.bins = bins
        self.bandwidth = bandwidth
        self.ridge = ridge
        self.repair_means = repair_means
        self.domain = domain
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        data = check_realizations(X, self.domain)
        if self.kind not in CONDITIONAL_KINDS:
            raise ValidationError(f"unknown conditional kind {self.kind!r}")
        counts = data.counts()
        K = default_cap(counts) if self.K is None else int(self.K)
        rs = check_random_state(self.random_state)
        card_seed, cond_seed = rs.randint(0, 2**31 - 1, size=2)
        card = fit_cardinality(counts, self.cardinality, K, self.n_components, int(card_seed))
        if self.kind == "hpp":
            cond = HppConditional(data.domain)
        elif self.kind == "sample-dirichlet":
            table = bootstrap_conditional_means(data, K, self.n_bootstrap, int(cond_seed),
                                                repair=self.repair_means)
            cond = SampleDirichletConditional(table)
        elif self.kind == "ts-dirichlet":
            cond = TsDirichletConditional(estimate_intensity(data, self.bins, self.bandwidth))
        else:
            cond = fit_mahalanobis_conditional(data, K, self.n_bootstrap, int(cond_seed), self.ridge)
        self.model_ = DepthModel(card, self.r, cond)
        self.domain_ = data.domain
        self.K_ = K
        return self

    @classmethod
    def from_model(cls, model: DepthModel) -> "PointProcessDepth":
        est = cls(kind=model.kind, r=model.r, domain=tuple(model.domain))
        est.model_ = model
        est.domain_ = model.domain
        est.K_ = model.cardinality.K
        return est

    def _components(self, X):
        check_is_fitted(self, "model_")
        data = check_realizations(X, self.domain_)
        model = self.model_ if self.model_.r == float(self.r) else self.model_.with_r(self.r)
        reals = data.realizations
        n_jobs = self.n_jobs or 1
        if n_jobs == 1 or len(reals) < 2:
            rows = _score_chunk(model, reals)
        else:
            chunks = np.array_split(np.arange(len(reals)), min(len(reals), 4 * abs(n_jobs)))
            parts = Parallel(n_jobs=n_jobs)(
                delayed(_score_chunk)(model, [reals[i] for i in c]) for c in chunks
            )
            rows = [row for part in parts for row in part]
        return np.asarray(rows, dtype=np.float64).reshape(-1, 3)

    def transform(self, X):
        """Columns ``weight, conditional_depth, depth``."""
        return self._components(X)

    def score_samples(self, X):
        return self._components(X)[:, 2]

    def conditional_depth(self, X):
        return self._components(X)[:, 1]
