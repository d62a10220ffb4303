"""Ranking, maximum-depth classification, goodness of fit and contour grids."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import kolmogorov
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .core import Dataset, Realization, TimeDomain, _label_key, as_domain, check_realizations
from .depth import (
    ConditionalMeanTable,
    DepthModel,
    PointProcessDepth,
    dirichlet_conditional_depth,
    hpp_conditional_depth,
    mahalanobis_conditional_depth,
)
from .exceptions import DomainMismatch, EmptyRealization, InsufficientData, ValidationError
from .rescale import IntensityModel, estimate_intensity, ipp_log_likelihood

__all__ = [
    "RankEntry",
    "RankReport",
    "rank",
    "MaxDepthClassifier",
    "LikelihoodClassifier",
    "ClassifyResult",
    "train_classifier",
    "classify",
    "likelihood_classify",
    "KSResult",
    "ks_uniformity",
    "gof_table",
    "contour_grid",
    "loo_r_search",
    "ABSTAIN",
]

ABSTAIN = "abstain"


# --------------------------------------------------------------------------
# ranking


class RankEntry(NamedTuple):
    index: int
    cardinality: int
    weight: float
    conditional_depth: float
    depth: float


@dataclass(frozen=True)
class RankReport:
    """Realizations ordered by depth (descending), ties by index."""

    entries: tuple

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def top(self, n=5):
        return self.entries[:n]

    def bottom(self, n=5):
        return self.entries[-n:] if n else ()

    def order(self):
        return [e.index for e in self.entries]

    def depth_by_index(self):
        return {e.index: e.depth for e in self.entries}

    def to_csv(self, top=None) -> str:
        rows = self.entries if top is None else self.entries[:top]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "index", "cardinality", "weight", "conditional_depth", "depth"])
        for pos, e in enumerate(rows, start=1):
            w.writerow([pos, e.index, e.cardinality, repr(e.weight), repr(e.conditional_depth),
                        repr(e.depth)])
        return buf.getvalue()


def rank(data, model: DepthModel) -> RankReport:
    data = check_realizations(data, model.domain)
    entries = []
    for i, s in enumerate(data.realizations):
        w, c, d = model.components(s)
        entries.append(RankEntry(i, s.cardinality(), w, c, d))
    entries.sort(key=lambda e: (-e.depth, e.index))
    return RankReport(tuple(entries))


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifyResult:
    label: object
    depths: dict
    tie: bool = False
    abstained: bool = False


def _argmax_label(classes, scores):
    """Largest score wins, exact ties go to the earliest (smallest) label."""
    scores = np.asarray(scores, dtype=np.float64)
    best = int(np.argmax(scores))
    tie = int(np.sum(scores == scores[best])) > 1
    return classes[best], best, tie


def _sorted_classes(labels):
    return sorted(set(labels), key=_label_key)


def _check_labels(data: Dataset, y):
    if y is None:
        if data.labels is None:
            raise InsufficientData("training data carries no class labels")
        y = data.labels
    y = list(y)
    if len(y) != len(data):
        raise ValidationError("labels and realizations differ in length")
    classes = _sorted_classes(y)
    if len(classes) < 2:
        raise InsufficientData("need at least two classes to train a classifier")
    return y, classes


class MaxDepthClassifier(ClassifierMixin, BaseEstimator):
    """Assign each realization to the class whose depth model scores it highest.

    One :class:`PointProcessDepth` is fitted per class, all sharing ``r``,
    the conditional kind and the count cap. If every class scores zero the
    prediction is ``abstain_label``, unless ``force`` is set, in which case
    the class whose cardinality model gives ``|s|`` the highest probability
    is chosen.
    """

    def __init__(self, kind="ts-dirichlet", r=1.0, cardinality="poisson-mixture",
                 n_components=None, K=None, n_bootstrap=10, bins=None, bandwidth=None,
                 ridge=None, repair_means=False, force=False, abstain_label=ABSTAIN,
                 domain=None, random_state=None):
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
        self.force = force
        self.abstain_label = abstain_label
        self.domain = domain
        self.random_state = random_state

    def fit(self, X, y=None):
        data = check_realizations(X, self.domain)
        y, classes = _check_labels(data, y if y is not None else getattr(X, "labels", None))
        K = int(data.counts().max()) + 5 if self.K is None else int(self.K)
        rs = check_random_state(self.random_state)
        seeds = rs.randint(0, 2**31 - 1, size=len(classes))
        self.estimators_ = []
        for label, seed in zip(classes, seeds):
            members = [r for r, lab in zip(data.realizations, y) if lab == label]
            if not members:
                raise InsufficientData(f"class {label!r} has no realizations")
            est = PointProcessDepth(
                kind=self.kind, r=self.r, cardinality=self.cardinality,
                n_components=self.n_components, K=K, n_bootstrap=self.n_bootstrap,
                bins=self.bins, bandwidth=self.bandwidth, ridge=self.ridge,
                repair_means=self.repair_means, random_state=int(seed),
            )
            self.estimators_.append(est.fit(Dataset(data.domain, tuple(members))))
        self.classes_ = np.array(classes, dtype=object)
        self.domain_ = data.domain
        self.K_ = K
        return self

    @property
    def models_(self):
        return [e.model_ for e in self.estimators_]

    def predict_depths(self, X):
        """Combined depth of every realization under every class, shape (n, n_classes)."""
        check_is_fitted(self, "estimators_")
        data = check_realizations(X, self.domain_)
        cols = []
        for est in self.estimators_:
            est.set_params(r=self.r)
            cols.append(est.score_samples(data))
        return np.column_stack(cols)

    def classify(self, s: Realization) -> ClassifyResult:
        check_is_fitted(self, "estimators_")
        if s.domain != self.domain_:
            raise DomainMismatch("realization domain differs from the classifier domain")
        depths = self.predict_depths([s])[0]
        classes = list(self.classes_)
        by_label = dict(zip(classes, depths.tolist()))
        if np.all(depths == 0.0):
            if not self.force:
                return ClassifyResult(self.abstain_label, by_label, tie=False, abstained=True)
            probs = [m.cardinality.pmf(s.cardinality()) for m in self.models_]
            label, _, tie = _argmax_label(classes, probs)
            return ClassifyResult(label, by_label, tie=tie)
        label, _, tie = _argmax_label(classes, depths)
        return ClassifyResult(label, by_label, tie=tie)

    def predict(self, X):
        data = check_realizations(X, getattr(self, "domain_", self.domain))
        return np.array([self.classify(s).label for s in data.realizations], dtype=object)

    def score(self, X, y=None, sample_weight=None):
        """Accuracy; abstentions count as errors."""
        data = check_realizations(X, self.domain_)
        y = data.labels if y is None else y
        pred = self.predict(data)
        return float(np.mean([p == t for p, t in zip(pred, y)]))


def train_classifier(data: Dataset, kind="ts-dirichlet", r=1.0, K=None, B=10, bins=None,
                     bandwidth=None, seed=None, **kwargs) -> MaxDepthClassifier:
    clf = MaxDepthClassifier(kind=kind, r=r, K=K, n_bootstrap=B, bins=bins,
                             bandwidth=bandwidth, random_state=seed, **kwargs)
    return clf.fit(data)


def classify(clf: MaxDepthClassifier, s: Realization) -> ClassifyResult:
    return clf.classify(s)


def likelihood_classify(intensities, s: Realization):
    """Class with the largest Poisson-process log-likelihood.

    ``intensities`` maps labels to :class:`IntensityModel` (or is a
    sequence, labelled by position). Ties go to the smallest label.
    """
    if not isinstance(intensities, dict):
        intensities = dict(enumerate(intensities))
    classes = _sorted_classes(intensities)
    for lab in classes:
        intensities[lab].require_positive()
    ll = [ipp_log_likelihood(s, intensities[lab]) for lab in classes]
    return _argmax_label(classes, ll)[0]


class LikelihoodClassifier(ClassifierMixin, BaseEstimator):
    """Baseline: per-class estimated intensity, largest Poisson log-likelihood wins."""

    def __init__(self, bins=None, bandwidth=None, domain=None):
        self.bins = bins
        self.bandwidth = bandwidth
        self.domain = domain

    def fit(self, X, y=None):
        data = check_realizations(X, self.domain)
        y, classes = _check_labels(data, y if y is not None else getattr(X, "labels", None))
        self.intensities_ = {}
        for label in classes:
            members = Dataset(data.domain, tuple(r for r, lab in zip(data.realizations, y) if lab == label))
            self.intensities_[label] = estimate_intensity(members, self.bins, self.bandwidth)
        self.classes_ = np.array(classes, dtype=object)
        self.domain_ = data.domain
        return self

    def predict(self, X):
        check_is_fitted(self, "intensities_")
        data = check_realizations(X, self.domain_)
        return np.array([likelihood_classify(dict(self.intensities_), s) for s in data.realizations],
                        dtype=object)

    def score(self, X, y=None, sample_weight=None):
        data = check_realizations(X, self.domain_)
        y = data.labels if y is None else y
        return float(np.mean([p == t for p, t in zip(self.predict(data), y)]))


def loo_r_search(data: Dataset, r_grid, **params):
    """Leave-one-out accuracy of a :class:`MaxDepthClassifier` for each ``r``.

    Convenience only: the returned table is reported, nothing is selected.
    """
    y = list(data.labels)
    r_grid = [float(r) for r in r_grid]
    hits = np.zeros(len(r_grid))
    for i in range(len(data)):
        keep = [j for j in range(len(data)) if j != i]
        train = Dataset(data.domain, tuple(data[j] for j in keep), tuple(y[j] for j in keep))
        clf = MaxDepthClassifier(r=r_grid[0], **params).fit(train)
        for g, r in enumerate(r_grid):
            clf.set_params(r=r)
            hits[g] += clf.classify(data[i]).label == y[i]
    return dict(zip(r_grid, (hits / len(data)).tolist()))


# --------------------------------------------------------------------------
# goodness of fit


class KSResult(NamedTuple):
    statistic: float
    pvalue: float


def ks_uniformity(s: Realization, model: IntensityModel) -> KSResult:
    """One-sample KS test of rescaled event times against Uniform[0, 1].

    The p-value is the asymptotic Kolmogorov tail evaluated at
    ``(sqrt(n) + 0.12 + 0.11 / sqrt(n)) * D``.
    """
    if s.cardinality() == 0:
        raise EmptyRealization("KS test needs at least one event")
    if s.domain != model.domain:
        raise DomainMismatch("realization and intensity live on different domains")
    model.require_positive()
    x = np.sort(np.clip(model.cumulative_at(s.events) / model.total, 0.0, 1.0))
    n = x.size
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
    en = math.sqrt(n)
    return KSResult(d, float(kolmogorov((en + 0.12 + 0.11 / en) * d)))


def gof_table(data, model: DepthModel, intensity: IntensityModel):
    """Per-realization depth next to its KS p-value under ``intensity``."""
    data = check_realizations(data, model.domain)
    rows = []
    for i, s in enumerate(data.realizations):
        w, c, d = model.components(s)
        if s.cardinality():
            ks = ks_uniformity(s, intensity)
        else:
            ks = KSResult(math.nan, math.nan)
        rows.append((i, s.cardinality(), c, d, ks.statistic, ks.pvalue))
    return rows


# --------------------------------------------------------------------------
# contours


def _uniform_order_stat_cov(k, domain):
    """Covariance of the k uniform order statistics on ``domain``."""
    i = np.arange(1, k + 1)
    lo, hi = np.minimum.outer(i, i), np.maximum.outer(i, i)
    return domain.span ** 2 * lo * (k + 1 - hi) / ((k + 1) ** 2 * (k + 2))


def contour_grid(kind="hpp", resolution=50, domain=(0.0, 1.0), means=None, covariance=None,
                 ridge=None):
    """Conditional depth for two events over the IET simplex.

    Returns an ``(m, 3)`` array of ``(u1, u2, depth)`` on the grid
    ``u_i = j * span / resolution`` with ``u1 + u2 <= span``. ``kind`` is
    ``"hpp"``, ``"sample-dirichlet"`` (``means`` is a length-2 centre or a
    table with a k=2 row) or ``"mahalanobis"`` (defaults: homogeneous
    centre and uniform order-statistic covariance).
    """
    domain = as_domain(domain)
    resolution = int(resolution)
    if resolution < 1:
        raise ValidationError("resolution must be positive")
    h = domain.span / resolution
    center = domain.t1 + domain.span * np.array([1.0, 2.0]) / 3.0

    if kind == "hpp":
        fn = hpp_conditional_depth
    elif kind == "sample-dirichlet":
        if isinstance(means, ConditionalMeanTable):
            table = means
        else:
            row = center if means is None else np.asarray(means, dtype=float)
            table = ConditionalMeanTable(domain, {2: row})
        fn = lambda s: dirichlet_conditional_depth(s, table)  # noqa: E731
    elif kind == "mahalanobis":
        mean = center if means is None else np.asarray(means, dtype=float)
        cov = _uniform_order_stat_cov(2, domain) if covariance is None else np.asarray(covariance)
        rg = 1e-6 * np.trace(cov) / 2 if ridge is None else float(ridge)
        fn = lambda s: mahalanobis_conditional_depth(s, mean, cov, rg)  # noqa: E731
    else:
        raise ValidationError(f"unknown contour kind {kind!r}")

    rows = []
    for i in range(resolution + 1):
        for j in range(resolution + 1 - i):
            s1 = domain.t1 + i * h
            s2 = domain.t2 if i + j == resolution else domain.t1 + (i + j) * h
            s = Realization(domain, [s1, min(s2, domain.t2)])
            rows.append((i * h, j * h, fn(s)))
    return np.asarray(rows)
