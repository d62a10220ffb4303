"""Event-count models and the normalised cardinality weight."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state

from .exceptions import CapExceeded, DegenerateComponentWarning, EmptyDataset, ValidationError

__all__ = [
    "CardinalityModel",
    "PoissonMixture",
    "fit_empirical",
    "fit_poisson_mle",
    "fit_poisson_mixture_em",
    "select_poisson_mixture",
    "weight",
    "default_cap",
]

KINDS = ("empirical", "poisson", "poisson-mixture")


def default_cap(counts) -> int:
    return int(np.max(counts)) + 5


def _poisson_logpmf(k, lam):
    k = np.asarray(k, dtype=np.float64)
    if lam == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(lam) - lam - gammaln(k + 1)


@dataclass(frozen=True)
class CardinalityModel:
    """Distribution of event counts supported on ``0..K``.

    ``params`` depends on ``kind``: ``{"pmf": [...]}`` for empirical,
    ``{"mean": lam}`` for poisson, ``{"weights": [...], "means": [...]}``
    for poisson-mixture.
    """

    kind: str
    K: int
    params: dict

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown cardinality kind {self.kind!r}")
        if int(self.K) < 0:
            raise ValidationError("cap K must be nonnegative")
        object.__setattr__(self, "K", int(self.K))
        p = self.params
        if self.kind == "empirical":
            pmf = np.asarray(p["pmf"], dtype=np.float64)
            if pmf.size != self.K + 1 or np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
                raise ValidationError("empirical pmf must be nonnegative over 0..K and sum to 1")
        elif self.kind == "poisson":
            if not float(p["mean"]) >= 0:
                raise ValidationError("poisson mean must be nonnegative")
        else:
            w = np.asarray(p["weights"], dtype=np.float64)
            mu = np.asarray(p["means"], dtype=np.float64)
            if w.shape != mu.shape or w.size == 0:
                raise ValidationError("mixture weights and means must match")
            if np.any(w <= 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-9:
                raise ValidationError("mixture weights must lie in (0, 1] and sum to 1")
            if np.any(mu <= 0):
                raise ValidationError("mixture component means must be positive")
        logp = self.log_pmf_table()
        if not np.isfinite(np.max(logp)):
            raise ValidationError("cardinality model puts no mass on 0..K")
        object.__setattr__(self, "_logp", logp)

    def log_pmf_table(self) -> np.ndarray:
        k = np.arange(self.K + 1)
        p = self.params
        if self.kind == "empirical":
            with np.errstate(divide="ignore"):
                return np.log(np.asarray(p["pmf"], dtype=np.float64))
        if self.kind == "poisson":
            return _poisson_logpmf(k, float(p["mean"]))
        comps = [math.log(w) + _poisson_logpmf(k, float(m))
                 for w, m in zip(p["weights"], p["means"])]
        return logsumexp(np.vstack(comps), axis=0)

    def pmf(self, k) -> float:
        k = int(k)
        if k < 0 or k > self.K:
            return 0.0
        return float(np.exp(self._logp[k]))

    def weight(self, k, r=1.0) -> float:
        return weight(self, k, r)

    def mode(self) -> int:
        return int(np.argmax(self._logp))

    def to_dict(self) -> dict:
        params = {key: (np.asarray(v).tolist() if not np.isscalar(v) else float(v))
                  for key, v in self.params.items()}
        return {"kind": self.kind, "K": self.K, "params": params}

    @classmethod
    def from_dict(cls, d) -> "CardinalityModel":
        return cls(d["kind"], int(d["K"]), dict(d["params"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "CardinalityModel":
        return cls.from_dict(json.loads(text))


def weight(model: CardinalityModel, k, r=1.0) -> float:
    """``(P(k) / max_j P(j)) ** r`` with the maximum over ``0..K``; 0 when P(k) = 0."""
    r = float(r)
    if r < 0:
        raise ValidationError("weight exponent r must be nonnegative")
    k = int(k)
    if k < 0 or k > model.K:
        return 0.0
    logp = model._logp
    if not np.isfinite(logp[k]):
        return 0.0
    return float(np.exp(r * (logp[k] - np.max(logp))))


def _as_counts(counts) -> np.ndarray:
    x = np.asarray(counts)
    if x.size == 0:
        raise EmptyDataset("no counts given")
    if np.any(x < 0) or np.any(x != np.round(x)):
        raise ValidationError("counts must be nonnegative integers")
    return x.astype(np.int64).reshape(-1)


def fit_empirical(counts, K=None) -> CardinalityModel:
    x = _as_counts(counts)
    K = default_cap(x) if K is None else int(K)
    if x.max() > K:
        raise CapExceeded(f"observed count {x.max()} exceeds cap K={K}")
    pmf = np.bincount(x, minlength=K + 1) / x.size
    return CardinalityModel("empirical", K, {"pmf": pmf.tolist()})


def fit_poisson_mle(counts, K=None) -> CardinalityModel:
    x = _as_counts(counts)
    K = default_cap(x) if K is None else int(K)
    return CardinalityModel("poisson", K, {"mean": float(np.mean(x))})


def _mixture_loglik(x, weights, means):
    comps = np.log(weights)[None, :] + _log_pois_matrix(x, means)
    return logsumexp(comps, axis=1)


def _log_pois_matrix(x, means):
    xf = x.astype(np.float64)[:, None]
    return xf * np.log(means)[None, :] - means[None, :] - gammaln(xf + 1)


class PoissonMixture(BaseEstimator):
    """Finite mixture of Poisson distributions fitted by EM.

    Component means are seeded k-means++ style on the counts, weights
    start uniform. Iteration stops once the per-datum log-likelihood
    improves by less than ``tol`` or after ``max_iter`` iterations.

    Attributes
    ----------
    weights_, means_ : ndarray
        Mixing proportions and component means after fitting.
    loglik_history_ : list of float
        Total log-likelihood after initialisation and after every EM step.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, n_components=2, tol=1e-8, max_iter=500, min_weight=1e-6,
                 random_state=None):
        self.n_components = n_components
        self.tol = tol
        self.max_iter = max_iter
        self.min_weight = min_weight
        self.random_state = random_state

    def _init_means(self, x, rng):
        m = self.n_components
        xf = x.astype(np.float64)
        centers = [xf[rng.randint(x.size)]]
        for _ in range(1, m):
            d2 = np.min((xf[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
            if d2.sum() > 0:
                centers.append(xf[rng.choice(x.size, p=d2 / d2.sum())])
            else:
                centers.append(xf[rng.randint(x.size)])
        means = np.asarray(centers, dtype=np.float64)
        # separate duplicated seeds and keep every mean strictly positive
        means = means + 1e-3 * np.arange(m)
        return np.maximum(means, 0.5)

    def fit(self, counts, y=None):
        x = _as_counts(counts)
        m = int(self.n_components)
        if m < 1:
            raise ValidationError("need at least one mixture component")
        n = x.size
        if m == 1:
            lam = float(np.mean(x))
            self.weights_ = np.array([1.0])
            self.means_ = np.array([lam])
            ll = float(np.sum(_poisson_logpmf(x, lam)))
            self.loglik_history_ = [ll]
            self.n_iter_ = 0
            self.converged_ = True
            return self

        rng = check_random_state(self.random_state)
        weights = np.full(m, 1.0 / m)
        means = self._init_means(x, rng)
        # EM on distinct counts weighted by multiplicity
        vals, mult = np.unique(x, return_counts=True)
        vf = vals.astype(np.float64)
        history = []
        converged = False
        it = 0
        while True:
            comps = np.log(weights)[None, :] + _log_pois_matrix(vals, means)
            lse = logsumexp(comps, axis=1, keepdims=True)
            history.append(float(mult @ lse[:, 0]))
            if it and (history[-1] - history[-2]) / n < self.tol:
                converged = True
                break
            if it == int(self.max_iter):
                break
            it += 1
            resp = np.exp(comps - lse) * mult[:, None]
            nk = resp.sum(axis=0)
            alive = nk > 0
            weights = np.where(alive, nk / n, 1e-300)
            means = np.where(alive, (resp * vf[:, None]).sum(axis=0) / np.where(alive, nk, 1.0), means)
            means = np.maximum(means, 1e-12)

        keep = weights >= self.min_weight
        if not np.all(keep):
            warnings.warn(
                f"dropped {int((~keep).sum())} mixture component(s) with weight < {self.min_weight}",
                DegenerateComponentWarning,
                stacklevel=2,
            )
            weights, means = weights[keep], means[keep]
            weights = weights / weights.sum()
        order = np.argsort(means, kind="stable")
        self.weights_ = weights[order]
        self.means_ = means[order]
        self.loglik_history_ = history
        self.n_iter_ = it
        self.converged_ = converged
        return self

    def score(self, counts, y=None):
        """Total log-likelihood of ``counts``."""
        x = _as_counts(counts)
        return float(np.sum(_mixture_loglik(x, self.weights_, self.means_)))

    def bic(self, counts):
        x = _as_counts(counts)
        n_params = 2 * self.means_.size - 1
        return -2.0 * self.score(x) + n_params * math.log(x.size)

    def to_model(self, K) -> CardinalityModel:
        if self.means_.size == 1 and self.means_[0] == 0.0:
            return CardinalityModel("poisson", K, {"mean": 0.0})
        return CardinalityModel(
            "poisson-mixture", K,
            {"weights": self.weights_.tolist(), "means": self.means_.tolist()},
        )


def fit_poisson_mixture_em(counts, m=2, tol=1e-8, max_iter=500, seed=None, K=None):
    x = _as_counts(counts)
    K = default_cap(x) if K is None else int(K)
    est = PoissonMixture(n_components=m, tol=tol, max_iter=max_iter, random_state=seed).fit(x)
    return est.to_model(K)


def select_poisson_mixture(counts, max_components=5, tol=1e-8, max_iter=500, seed=None, K=None):
    """Pick the component count in ``1..max_components`` with the lowest BIC."""
    x = _as_counts(counts)
    K = default_cap(x) if K is None else int(K)
    best, best_bic = None, math.inf
    for m in range(1, int(max_components) + 1):
        if m > np.unique(x).size:
            break
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateComponentWarning)
            est = PoissonMixture(m, tol=tol, max_iter=max_iter, random_state=seed).fit(x)
        b = est.bic(x)
        if b < best_bic - 1e-12:
            best, best_bic = est, b
    return best.to_model(K)
