import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppdepth import Dataset, IetVector, Realization, TimeDomain, from_iet, parse_dataset, to_iet
from ppdepth.core import check_realizations, read_dataset, render_dataset, write_dataset
from ppdepth.exceptions import DomainMismatch, ParseError, ValidationError


def test_domain_requires_order():
    with pytest.raises(ValidationError):
        TimeDomain(1.0, 1.0)
    with pytest.raises(ValidationError):
        TimeDomain(2.0, 1.0)


def test_realization_accepts_ties_and_endpoints(unit):
    s = Realization(unit, [0.0, 0.3, 0.3, 1.0])
    assert s.cardinality() == 4
    assert to_iet(s).is_boundary()


def test_realization_rejects_bad_events(unit):
    with pytest.raises(ValidationError):
        Realization(unit, [0.5, 0.2])
    with pytest.raises(DomainMismatch):
        Realization(unit, [0.5, 1.5])


@pytest.mark.parametrize(
    "domain, events, gaps",
    [
        ((0, 1), [0.5], [0.5, 0.5]),
        ((0, 10), [], [10.0]),
        ((0, 10), [1, 4, 9], [1, 3, 5, 1]),
    ],
)
def test_to_iet_examples(domain, events, gaps):
    u = to_iet(Realization(TimeDomain(*domain), events))
    np.testing.assert_array_equal(u.gaps, gaps)
    assert len(u) == len(events) + 1


@pytest.mark.parametrize(
    "domain, gaps, events",
    [
        ((0, 10), [10.0], []),
        ((0, 10), [1, 3, 5, 1], [1, 4, 9]),
        ((0, 1), [0.5, 0.5], [0.5]),
    ],
)
def test_from_iet_examples(domain, gaps, events):
    s = from_iet(IetVector.from_gaps(TimeDomain(*domain), gaps))
    np.testing.assert_array_equal(s.events, events)


def test_iet_gap_validation(unit):
    with pytest.raises(ValidationError):
        IetVector.from_gaps(unit, [0.5, 0.6])
    with pytest.raises(ValidationError):
        IetVector.from_gaps(unit, [-0.1, 1.1])


def test_boundary_only_on_exact_zero(unit):
    assert not to_iet(Realization(unit, [1e-300, 0.5])).is_boundary()
    assert to_iet(Realization(unit, [0.0, 0.5])).is_boundary()
    assert not to_iet(Realization(unit, [])).is_boundary()


domains = st.tuples(
    st.floats(-100, 100, allow_nan=False), st.floats(1e-3, 100, allow_nan=False)
).map(lambda p: TimeDomain(p[0], p[0] + p[1]))


@st.composite
def realizations(draw):
    d = draw(domains)
    k = draw(st.integers(0, 25))
    xs = draw(st.lists(st.floats(0, 1), min_size=k, max_size=k))
    return Realization(d, np.sort(d.t1 + d.span * np.asarray(xs, dtype=float)).clip(d.t1, d.t2))


@settings(max_examples=300, deadline=None)
@given(realizations())
def test_iet_round_trip_is_exact(s):
    assert from_iet(to_iet(s)) == s
    u = to_iet(s)
    assert abs(u.gaps.sum() - s.domain.span) <= 1e-9 * s.domain.span
    assert np.all(u.gaps >= 0)


@settings(max_examples=300, deadline=None)
@given(domains, st.integers(0, 25), st.integers(0, 2**32 - 1))
def test_gap_round_trip(d, k, seed):
    gaps = np.random.default_rng(seed).dirichlet(np.ones(k + 1)) * d.span
    u = IetVector.from_gaps(d, gaps)
    back = to_iet(from_iet(u)).gaps
    assert np.max(np.abs(back - gaps)) <= 1e-12 * d.span + 1e-12 * max(abs(d.t1), abs(d.t2))


# --------------------------------------------------------------------------
# dataset format


def test_parse_single_line(unit):
    ds = parse_dataset("0.5\n", unit)
    assert len(ds) == 1 and ds.labels is None
    np.testing.assert_array_equal(ds[0].events, [0.5])


def test_parse_labelled(ten):
    ds = parse_dataset("A: 1 4 9\nB: 2 3\n", ten)
    assert ds.labels == ("A", "B")
    np.testing.assert_array_equal(ds[0].events, [1, 4, 9])
    np.testing.assert_array_equal(ds[1].events, [2, 3])


def test_parse_rejects_decreasing(unit):
    with pytest.raises(ParseError) as exc:
        parse_dataset("0.5 0.2\n", unit)
    assert exc.value.line == 1


@pytest.mark.parametrize(
    "text, line",
    [("0.1\n0.2 x\n", 2), ("0.1\n\n# c\n2.0\n", 4), ("A: 0.1\n0.2\n", 2)],
)
def test_parse_errors_carry_line_numbers(unit, text, line):
    with pytest.raises(ParseError) as exc:
        parse_dataset(text, unit)
    assert exc.value.line == line


def test_parse_comments_and_empty_realizations(ten):
    text = "# header\nA: 1 2 # trailing\nB:\nA: 3\n\n"
    ds = parse_dataset(text, ten)
    assert ds.labels == ("A", "B", "A")
    assert [len(r) for r in ds] == [2, 0, 1]


def test_domain_header():
    ds = parse_dataset("# domain: 0 10\n1 2\n")
    assert ds.domain == TimeDomain(0, 10)


def test_parse_without_domain_fails():
    with pytest.raises(ParseError):
        parse_dataset("1 2\n")


@pytest.mark.parametrize("labels", [None, ("x", "y", "x", "z")])
def test_render_round_trip(labels, ten):
    rng = np.random.default_rng(3)
    reals = [np.sort(rng.uniform(0, 10, size=k)) for k in (3, 0, 5, 1)]
    ds = Dataset(ten, tuple(reals), labels)
    assert parse_dataset(render_dataset(ds), ten) == ds
    assert parse_dataset(io.StringIO(render_dataset(ds))) == ds


def test_file_round_trip(tmp_path, ten):
    ds = Dataset(ten, ([0.1, 2.0 / 3.0], [9.999999999999998]), ("a", "b"))
    path = tmp_path / "d.txt"
    write_dataset(ds, path)
    assert read_dataset(path) == ds


def test_dataset_domain_consistency(unit, ten):
    with pytest.raises(DomainMismatch):
        Dataset(unit, (Realization(ten, [1.0]),))


def test_check_realizations_needs_domain_for_arrays(unit):
    with pytest.raises(ValidationError):
        check_realizations([[0.1, 0.2]])
    ds = check_realizations([[0.1, 0.2], []], domain=(0, 1))
    assert ds.domain == unit and len(ds) == 2
