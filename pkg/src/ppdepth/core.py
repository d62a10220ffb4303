"""Point-process realizations, inter-event-time vectors and dataset I/O."""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DomainMismatch, EmptyDataset, ParseError, ValidationError

__all__ = [
    "TimeDomain",
    "Realization",
    "IetVector",
    "Dataset",
    "to_iet",
    "from_iet",
    "parse_dataset",
    "render_dataset",
    "read_dataset",
    "write_dataset",
    "check_realizations",
]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeDomain:
    """Closed observation window ``[t1, t2]``."""

    t1: float
    t2: float

    def __post_init__(self):
        t1, t2 = float(self.t1), float(self.t2)
        if not (np.isfinite(t1) and np.isfinite(t2)) or not t1 < t2:
            raise ValidationError(f"time domain requires finite t1 < t2, got [{t1}, {t2}]")
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)

    @property
    def span(self) -> float:
        return self.t2 - self.t1

    def affine(self, a: float, b: float) -> "TimeDomain":
        return TimeDomain(a * self.t1 + b, a * self.t2 + b)

    def __iter__(self):
        yield self.t1
        yield self.t2


def as_domain(domain) -> TimeDomain:
    if isinstance(domain, TimeDomain):
        return domain
    t1, t2 = domain
    return TimeDomain(t1, t2)


@dataclass(frozen=True, eq=False)
class Realization:
    """One observed point process: nondecreasing event times inside a domain.

    Ties and events on the domain endpoints are accepted; they sit on the
    simplex boundary and score depth 0.
    """

    domain: TimeDomain
    events: np.ndarray = field(default_factory=lambda: _frozen(()))

    def __post_init__(self):
        domain = as_domain(self.domain)
        events = _frozen(self.events)
        if events.size:
            if not np.all(np.isfinite(events)):
                raise ValidationError("event times must be finite")
            if events[0] < domain.t1 or events[-1] > domain.t2:
                raise DomainMismatch(
                    f"events must lie in [{domain.t1}, {domain.t2}]"
                )
            if np.any(np.diff(events) < 0):
                raise ValidationError("event times must be nondecreasing")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "events", events)

    def cardinality(self) -> int:
        return int(self.events.size)

    def __len__(self):
        return self.cardinality()

    def __eq__(self, other):
        if not isinstance(other, Realization):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.events, other.events)

    def __hash__(self):
        return hash((self.domain, self.events.tobytes()))

    def __repr__(self):
        return f"Realization([{self.domain.t1}, {self.domain.t2}], {self.events.tolist()})"


@dataclass(frozen=True, eq=False)
class IetVector:
    """Inter-event times ``(s1 - t1, s2 - s1, ..., t2 - sk)``.

    The cumulative breakpoints ``(t1, s1, ..., sk, t2)`` are kept alongside
    the gaps so that converting back to event times is exact.
    """

    domain: TimeDomain
    breaks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "domain", as_domain(self.domain))
        object.__setattr__(self, "breaks", _frozen(self.breaks))
        gaps = np.diff(self.breaks)
        gaps.setflags(write=False)
        object.__setattr__(self, "_gaps", gaps)

    @classmethod
    def from_gaps(cls, domain, gaps) -> "IetVector":
        domain = as_domain(domain)
        gaps = np.asarray(gaps, dtype=np.float64).reshape(-1)
        if gaps.size == 0:
            raise ValidationError("an IET vector has at least one gap")
        if np.any(gaps < 0) or not np.all(np.isfinite(gaps)):
            raise ValidationError("gaps must be finite and nonnegative")
        total = float(np.sum(gaps))
        if abs(total - domain.span) > 1e-9 * domain.span:
            raise ValidationError(
                f"gaps sum to {total}, expected domain length {domain.span}"
            )
        inner = domain.t1 + np.cumsum(gaps[:-1])
        # accumulated rounding must not push events out of the window
        inner = np.clip(inner, domain.t1, domain.t2)
        return cls(domain, np.concatenate(([domain.t1], inner, [domain.t2])))

    @property
    def gaps(self) -> np.ndarray:
        return self._gaps

    def is_boundary(self) -> bool:
        return bool(np.any(self._gaps == 0.0))

    def __len__(self):
        return self._gaps.size

    def __eq__(self, other):
        if not isinstance(other, IetVector):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.breaks, other.breaks)

    __hash__ = None


def to_iet(s: Realization) -> IetVector:
    d = s.domain
    return IetVector(d, np.concatenate(([d.t1], s.events, [d.t2])))


def from_iet(u: IetVector) -> Realization:
    return Realization(u.domain, u.breaks[1:-1])


@dataclass(frozen=True, eq=False)
class Dataset:
    """A collection of realizations on one domain, optionally labelled."""

    domain: TimeDomain
    realizations: tuple
    labels: Optional[tuple] = None

    def __post_init__(self):
        domain = as_domain(self.domain)
        reals = []
        for r in self.realizations:
            if not isinstance(r, Realization):
                r = Realization(domain, r)
            elif r.domain != domain:
                raise DomainMismatch("all realizations must share the dataset domain")
            reals.append(r)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "realizations", tuple(reals))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(reals):
                raise ValidationError("labels and realizations differ in length")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.realizations)

    def __iter__(self):
        return iter(self.realizations)

    def __getitem__(self, idx):
        return self.realizations[idx]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.labels == other.labels
            and self.realizations == other.realizations
        )

    __hash__ = None

    def counts(self) -> np.ndarray:
        return np.array([r.cardinality() for r in self.realizations], dtype=np.int64)

    def pooled_events(self) -> np.ndarray:
        if not self.realizations:
            return np.empty(0)
        return np.concatenate([r.events for r in self.realizations])

    def classes(self) -> list:
        if self.labels is None:
            return []
        return sorted(set(self.labels), key=_label_key)

    def subset(self, label) -> "Dataset":
        if self.labels is None:
            raise ValidationError("dataset carries no labels")
        picked = [r for r, lab in zip(self.realizations, self.labels) if lab == label]
        return Dataset(self.domain, tuple(picked))


def _label_key(label):
    # numbers before strings; numeric labels compare numerically
    if isinstance(label, (int, float, np.integer, np.floating)):
        return (0, float(label), "")
    return (1, 0.0, str(label))


_DOMAIN_RE = re.compile(r"^#\s*domain\s*:?\s*(\S+)\s+(\S+)\s*$", re.IGNORECASE)


def parse_dataset(stream, domain=None) -> Dataset:
    """Parse the line-oriented realization format.

    One realization per line, whitespace-separated ascending times, an
    optional leading ``label:`` token and ``#`` comments. A line holding
    only ``label:`` (or a bare ``:`` in unlabelled files) is an empty
    realization; fully blank lines are skipped. A ``# domain: t1 t2``
    comment supplies the domain when none is passed.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header_domain = None
    rows = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if header_domain is None:
            m = _DOMAIN_RE.match(line.strip())
            if m:
                try:
                    header_domain = TimeDomain(float(m.group(1)), float(m.group(2)))
                except (ValueError, ValidationError) as exc:
                    raise ParseError(f"bad domain header: {exc}", lineno) from None
                continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        label = None
        if ":" in line:
            label, line = line.split(":", 1)
            label = label.strip()
            if not label:
                label = None
            elif len(label.split()) != 1:
                raise ParseError(f"malformed label {label!r}", lineno)
        tokens = line.split()
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            bad = next(t for t in tokens if not _is_float(t))
            raise ParseError(f"non-numeric token {bad!r}", lineno) from None
        rows.append((lineno, label, values))

    if domain is None:
        domain = header_domain
    if domain is None:
        raise ParseError("no time domain given and no '# domain:' header found")
    domain = as_domain(domain)

    labelled = [lab is not None for _, lab, _ in rows]
    if any(labelled) and not all(labelled):
        first = next(ln for (ln, lab, _) in rows if lab is None)
        raise ParseError("mixed labelled and unlabelled lines", first)

    reals = []
    for lineno, _, values in rows:
        arr = np.asarray(values, dtype=np.float64)
        if arr.size and not np.all(np.isfinite(arr)):
            raise ParseError("event times must be finite", lineno)
        if np.any((arr < domain.t1) | (arr > domain.t2)):
            raise ParseError(f"event outside domain [{domain.t1}, {domain.t2}]", lineno)
        if np.any(np.diff(arr) < 0):
            raise ParseError("event times must be in ascending order", lineno)
        reals.append(Realization(domain, arr))
    labels = tuple(lab for _, lab, _ in rows) if rows and all(labelled) else None
    return Dataset(domain, tuple(reals), labels)


def _is_float(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def render_dataset(data: Dataset, header: bool = True) -> str:
    """Inverse of :func:`parse_dataset`; floats use shortest round-trip repr."""
    out = []
    if header:
        out.append(f"# domain: {data.domain.t1!r} {data.domain.t2!r}")
    labels = data.labels
    for i, r in enumerate(data.realizations):
        body = " ".join(repr(float(x)) for x in r.events)
        if labels is not None:
            out.append(f"{labels[i]}: {body}".rstrip())
        elif body:
            out.append(body)
        else:
            out.append(":")
    return "\n".join(out) + "\n"


def read_dataset(path, domain=None) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh, domain)


def write_dataset(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_dataset(data))


def check_realizations(X, domain=None) -> Dataset:
    """Coerce estimator input into a :class:`Dataset`.

    Accepts a Dataset, a sequence of Realizations, or a sequence of
    array-likes (which then needs ``domain``).
    """
    if isinstance(X, Dataset):
        if domain is not None and as_domain(domain) != X.domain:
            raise DomainMismatch("dataset domain differs from the estimator domain")
        return X
    if isinstance(X, Realization):
        X = [X]
    items = list(X)
    if not items:
        raise EmptyDataset("no realizations given")
    if domain is None:
        first = next((r for r in items if isinstance(r, Realization)), None)
        if first is None:
            raise ValidationError("raw event arrays need an explicit domain")
        domain = first.domain
    domain = as_domain(domain)
    reals = []
    for r in items:
        if isinstance(r, Realization):
            if r.domain != domain:
                raise DomainMismatch("realization domain differs from the estimator domain")
            reals.append(r)
        else:
            reals.append(Realization(domain, r))
    return Dataset(domain, tuple(reals))
