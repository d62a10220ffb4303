import sys
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from ppdepth import (
    CardinalityModel,
    Dataset,
    DepthModel,
    IntensityModel,
    LikelihoodClassifier,
    MaxDepthClassifier,
    PointProcessDepth,
    Realization,
    TimeDomain,
    classify,
    contour_grid,
    ks_uniformity,
    likelihood_classify,
    rank,
    simulate_hpp,
    simulate_ipp,
    train_classifier,
)
from ppdepth.analysis import gof_table, loo_r_search
from ppdepth.depth import HppConditional
from ppdepth.exceptions import DomainMismatch, EmptyRealization, InsufficientData, InvalidIntensity

sys.path.insert(0, str(Path(__file__).parent))
from _cases import two_class_ipp  # noqa: E402


@pytest.fixture(scope="module")
def hpp_data():
    return simulate_hpp(0.4, TimeDomain(0, 10), 100, seed=0)


@pytest.fixture(scope="module")
def ipp_split():
    return two_class_ipp(seed=0)


def _hpp_model(data, r=1.0):
    card = PointProcessDepth(kind="hpp").fit(data).model_.cardinality
    return DepthModel(card, r, HppConditional(data.domain))


# --------------------------------------------------------------------------
# ranking


def test_rank_single(unit):
    data = Dataset(unit, ([0.5],))
    model = DepthModel(CardinalityModel("poisson", 5, {"mean": 1.0}), 1.0, HppConditional(unit))
    report = rank(data, model)
    assert len(report) == 1 and report.order() == [0]


def test_rank_sorted_with_index_ties(unit):
    data = Dataset(unit, ([0.5], [0.2], [0.5], [0.8]))
    model = DepthModel(CardinalityModel("poisson", 5, {"mean": 1.0}), 1.0, HppConditional(unit))
    report = rank(data, model)
    assert report.order() == [0, 2, 1, 3]
    depths = [e.depth for e in report]
    assert depths == sorted(depths, reverse=True)


def test_rank_top_is_deepest(hpp_data):
    report = rank(hpp_data, _hpp_model(hpp_data))
    best = report.top(1)[0]
    assert all(best.depth >= e.depth for e in report)
    assert abs(best.cardinality - 4) <= 1


def test_rank_r10_concentrates_on_mode(hpp_data):
    base = _hpp_model(hpp_data)
    mode = base.cardinality.mode()
    devs = [sum(abs(e.cardinality - mode) for e in rank(hpp_data, base.with_r(r)).top(5)) for r in (1, 10)]
    assert devs[1] < devs[0]


def test_rank_permutation_invariant(hpp_data):
    model = _hpp_model(hpp_data)
    perm = np.random.default_rng(0).permutation(len(hpp_data))
    shuffled = Dataset(hpp_data.domain, tuple(hpp_data[i] for i in perm))
    a = rank(hpp_data, model).depth_by_index()
    b = rank(shuffled, model).depth_by_index()
    assert all(b[j] == a[int(perm[j])] for j in range(len(perm)))


def test_rank_monotone_transform_invariant(hpp_data):
    model = _hpp_model(hpp_data)
    report = rank(hpp_data, model)
    d = np.array([report.depth_by_index()[i] for i in range(len(hpp_data))])
    for f in (np.sqrt, lambda x: 3 * x + 1, np.exp):
        assert np.argsort(-f(d), kind="stable").tolist() == report.order()


def test_rank_csv(hpp_data):
    text = rank(hpp_data, _hpp_model(hpp_data)).to_csv(top=3)
    lines = text.splitlines()
    assert lines[0] == "rank,index,cardinality,weight,conditional_depth,depth"
    assert len(lines) == 4 and text.endswith("\n")


# --------------------------------------------------------------------------
# classification


def test_ts_classifier_accuracy(ipp_split):
    train, test, _ = ipp_split
    clf = train_classifier(train, kind="ts-dirichlet", seed=0)
    lik = LikelihoodClassifier().fit(train)
    acc = clf.score(test)
    assert acc >= 0.75
    assert acc >= lik.score(test) - 0.05


@pytest.mark.parametrize("kind", ["sample-dirichlet", "mahalanobis"])
def test_other_classifiers_beat_chance(ipp_split, kind):
    train, test, _ = ipp_split
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        clf = MaxDepthClassifier(kind=kind, repair_means=True, random_state=0).fit(train)
    assert clf.score(test) > 0.6


def test_training_member_classified(ipp_split):
    train, _, _ = ipp_split
    clf = MaxDepthClassifier(random_state=0).fit(train)
    hits = np.mean(clf.predict(train) == np.array(train.labels, dtype=object))
    assert hits > 0.8


def test_coincident_outlier(ipp_split):
    train, _, _ = ipp_split
    d = train.domain
    outlier = Realization(d, [1.0, 2.0, 2.0, 4.0, 5.0])
    for kind in ("ts-dirichlet", "sample-dirichlet"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            clf = MaxDepthClassifier(kind=kind, repair_means=True, random_state=0).fit(train)
        res = classify(clf, outlier)
        assert res.abstained and res.label == "abstain"
        assert all(v == 0.0 for v in res.depths.values())
    maha = MaxDepthClassifier(kind="mahalanobis", random_state=0).fit(train)
    assert all(v > 0 for v in maha.classify(outlier).depths.values())


def test_unseen_cardinality_abstains_or_forces(unit):
    train = Dataset(unit, ([0.3], [0.6], [0.2, 0.7], [0.4, 0.8]), ("a", "a", "b", "b"))
    clf = MaxDepthClassifier(kind="hpp", cardinality="empirical", K=9).fit(train)
    s = Realization(unit, [0.1, 0.2, 0.3, 0.4, 0.5])
    assert clf.classify(s).abstained
    forced = clf.set_params(force=True).classify(s)
    assert not forced.abstained and forced.label in ("a", "b")


def test_identical_classes_tie_to_smallest_label(unit):
    rng = np.random.default_rng(1)
    reals = tuple(np.sort(rng.uniform(0, 1, 3)) for _ in range(20))
    train = Dataset(unit, reals + reals, ("y",) * 20 + ("x",) * 20)
    clf = MaxDepthClassifier(cardinality="poisson").fit(train)
    res = clf.classify(Realization(unit, [0.2, 0.5, 0.7]))
    assert res.label == "x" and res.tie
    assert res.depths["x"] == res.depths["y"]


def test_single_class_rejected(unit):
    with pytest.raises(InsufficientData):
        MaxDepthClassifier().fit(Dataset(unit, ([0.5], [0.3]), ("a", "a")))
    with pytest.raises(InsufficientData):
        MaxDepthClassifier().fit(Dataset(unit, ([0.5], [0.3])))


def test_classify_domain_mismatch(ipp_split, unit):
    clf = MaxDepthClassifier(random_state=0).fit(ipp_split[0])
    with pytest.raises(DomainMismatch):
        clf.classify(Realization(unit, [0.5]))


def test_predict_order_independent(ipp_split):
    train, test, _ = ipp_split
    clf = MaxDepthClassifier(random_state=0).fit(train)
    pred = clf.predict(test)
    perm = np.random.default_rng(2).permutation(len(test))
    shuffled = Dataset(test.domain, tuple(test[i] for i in perm))
    assert clf.predict(shuffled).tolist() == pred[perm].tolist()


def test_classifier_sklearn_params():
    clf = MaxDepthClassifier(kind="hpp", r=0.3)
    assert clf.get_params()["r"] == 0.3
    assert clf.set_params(r=1.2).r == 1.2


def test_loo_r_search(unit):
    rng = np.random.default_rng(3)
    a = [np.sort(rng.uniform(0, 0.5, 2)) for _ in range(6)]
    b = [np.sort(rng.uniform(0.5, 1, 2)) for _ in range(6)]
    train = Dataset(unit, tuple(a + b), ("a",) * 6 + ("b",) * 6)
    table = loo_r_search(train, [0.3, 1.0], kind="sample-dirichlet", cardinality="poisson",
                         random_state=0, repair_means=True)
    assert list(table) == [0.3, 1.0]
    assert all(0 <= v <= 1 for v in table.values())


# --------------------------------------------------------------------------
# likelihood baseline


def test_likelihood_constant_rates(unit):
    s = Realization(unit, np.linspace(0.05, 0.95, 10))
    lams = {"slow": IntensityModel.constant(1.0, unit), "fast": IntensityModel.constant(10.0, unit)}
    assert likelihood_classify(lams, s) == "fast"


def test_likelihood_tie(unit):
    lam = IntensityModel.constant(3.0, unit)
    assert likelihood_classify({"b": lam, "a": lam}, Realization(unit, [0.5])) == "a"


def test_likelihood_zero_intensity_never_chosen(unit):
    holes = IntensityModel.from_grid([0, 0.5, 0.5 + 1e-9, 1], [1, 1, 0, 0])
    flat = IntensityModel.constant(0.01, unit)
    assert likelihood_classify({"a": holes, "b": flat}, Realization(unit, [0.9])) == "b"


def test_likelihood_requires_positive(unit):
    with pytest.raises(InvalidIntensity):
        likelihood_classify([IntensityModel.constant(0.0, unit)], Realization(unit, [0.5]))


def test_likelihood_classifier_with_true_intensities(ipp_split):
    _, test, lams = ipp_split
    pred = [likelihood_classify(lams, s) for s in test]
    assert np.mean(np.array(pred) == np.array(test.labels)) > 0.85


# --------------------------------------------------------------------------
# goodness of fit


def test_ks_single_event(unit):
    res = ks_uniformity(Realization(unit, [0.5]), IntensityModel.constant(1.0, unit))
    assert res.statistic == pytest.approx(0.5)


@pytest.mark.parametrize("k", [1, 3, 10])
def test_ks_uniform_quantiles(unit, k):
    s = Realization(unit, np.arange(1, k + 1) / (k + 1))
    assert ks_uniformity(s, IntensityModel.constant(1.0, unit)).statistic == pytest.approx(1 / (k + 1))


def test_ks_pvalue_close_to_scipy(unit):
    rng = np.random.default_rng(0)
    for k in (20, 50):
        s = Realization(unit, np.sort(rng.uniform(0, 1, k)))
        ours = ks_uniformity(s, IntensityModel.constant(1.0, unit))
        ref = stats.kstest(s.events, "uniform")
        assert ours.statistic == pytest.approx(ref.statistic)
        assert abs(ours.pvalue - ref.pvalue) < 0.05


def test_ks_empty(unit):
    with pytest.raises(EmptyRealization):
        ks_uniformity(Realization(unit, []), IntensityModel.constant(1.0, unit))


def test_depth_tracks_ks_pvalue(ipp_intensity):
    data = simulate_ipp(ipp_intensity, 100, seed=0)
    est = PointProcessDepth(kind="ts-dirichlet").fit(data)
    rows = [r for r in gof_table(data, est.model_, ipp_intensity) if r[1] > 0]
    cond, p = np.array([r[2] for r in rows]), np.array([r[5] for r in rows])
    assert stats.spearmanr(p, cond)[0] > 0


def test_gof_table_empty_row(unit):
    data = Dataset(unit, ([], [0.5]))
    model = DepthModel(CardinalityModel("poisson", 5, {"mean": 1.0}), 1.0, HppConditional(unit))
    rows = gof_table(data, model, IntensityModel.constant(1.0, unit))
    assert np.isnan(rows[0][5]) and rows[1][4] == pytest.approx(0.5)


# --------------------------------------------------------------------------
# contours


def _lookup(grid, u1, u2):
    hit = np.flatnonzero(np.isclose(grid[:, 0], u1) & np.isclose(grid[:, 1], u2))
    return grid[hit[0], 2]


def test_contour_dirichlet_values():
    grid = contour_grid("hpp", 30)
    assert _lookup(grid, 1 / 3, 1 / 3) == pytest.approx(1.0)
    assert _lookup(grid, 0.5, 0.5) == 0.0
    edge = (grid[:, 0] == 0) | (grid[:, 1] == 0) | np.isclose(grid[:, 0] + grid[:, 1], 1.0)
    assert np.all(grid[edge, 2] == 0.0) and np.all(grid[~edge, 2] > 0)


def test_contour_mahalanobis_positive_on_edges():
    grid = contour_grid("mahalanobis", 30)
    assert np.all(grid[:, 2] > 0)


def test_contour_grid_size():
    assert contour_grid("hpp", 10).shape == (66, 3)


def test_contour_level_sets():
    from scipy import ndimage

    n = 60
    grid = contour_grid("sample-dirichlet", n, means=[0.3, 0.7])
    img = np.full((n + 1, n + 1), -1.0)
    idx = np.rint(grid[:, :2] * n).astype(int)
    img[idx[:, 0], idx[:, 1]] = grid[:, 2]
    top = img >= 0.99
    labels, count = ndimage.label(top)
    assert count == 1
    c = np.rint(np.array([0.3, 0.4]) * n).astype(int)
    assert top[c[0], c[1]]
    assert np.all((img >= 0.2)[img >= 0.9])
