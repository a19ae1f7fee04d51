"""Typed tabular datasets, the four benchmark problems, and label cleaning.

Values are held in a float matrix; a categorical value is stored as the
index of its symbol in the attribute's domain. :class:`Pattern` gives the
decoded view (symbols for categorical attributes, floats otherwise).
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError, UsageError

logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING = "?"


class RexWarning(UserWarning):
    """Recoverable oddities: constant attributes, empty evaluation sets."""


@dataclass(frozen=True)
class AttributeSchema:
    """One input attribute.

    ``domain`` lists the admissible symbols of a categorical attribute.
    ``lo``/``hi`` bound a continuous attribute; they are filled with the
    observed range at load time when left unset. ``scale`` marks an
    integer-coded attribute (e.g. 1..10) that normalizes by division.
    """

    name: str
    kind: str = CONTINUOUS
    domain: tuple = ()
    lo: float | None = None
    hi: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if not self.domain:
                raise UsageError(f"categorical attribute {self.name!r} has an empty domain")
            if len(set(self.domain)) != len(self.domain):
                raise UsageError(f"categorical attribute {self.name!r} has duplicate symbols")
            object.__setattr__(self, "domain", tuple(str(s) for s in self.domain))
        elif self.kind == CONTINUOUS:
            if self.lo is not None and self.hi is not None and self.lo > self.hi:
                raise UsageError(f"attribute {self.name!r}: min {self.lo} > max {self.hi}")
        else:
            raise UsageError(f"unknown attribute kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def code(self, symbol) -> int:
        try:
            return self.domain.index(str(symbol))
        except ValueError:
            raise DomainError(
                f"{symbol!r} is not in the domain of {self.name!r} {list(self.domain)}"
            ) from None


def categorical(name: str, domain: Iterable[str]) -> AttributeSchema:
    return AttributeSchema(name, CATEGORICAL, tuple(domain))


def continuous(name: str, lo=None, hi=None, scale=None) -> AttributeSchema:
    return AttributeSchema(name, CONTINUOUS, (), lo, hi, scale)


@dataclass(frozen=True)
class Pattern:
    values: tuple
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of labelled patterns in a fixed order."""

    schema: tuple[AttributeSchema, ...]
    classes: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        schema = tuple(self.schema)
        classes = tuple(str(c) for c in self.classes)
        if len(set(classes)) != len(classes):
            raise UsageError(f"duplicate class names in {classes}")
        X = np.array(self.X, dtype=float).reshape(-1, len(schema))
        y = np.array(self.y, dtype=np.int64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise UsageError("value matrix and label vector differ in length")
        if y.size and (y.min() < 0 or y.max() >= len(classes)):
            raise DomainError("label index outside the class list")
        for a, attr in enumerate(schema):
            col = X[:, a]
            if attr.is_categorical:
                if col.size and (np.any(col != np.round(col)) or col.min() < 0
                                 or col.max() >= len(attr.domain)):
                    raise DomainError(f"attribute {attr.name!r} holds a code outside its domain")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.X.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.schema == other.schema and self.classes == other.classes
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y))

    __hash__ = None

    @property
    def n_attributes(self) -> int:
        return len(self.schema)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def decode(self, a: int, value: float):
        attr = self.schema[a]
        return attr.domain[int(value)] if attr.is_categorical else float(value)

    def pattern(self, i: int) -> Pattern:
        row = self.X[i]
        return Pattern(tuple(self.decode(a, v) for a, v in enumerate(row)), int(self.y[i]))

    @property
    def patterns(self) -> list[Pattern]:
        return [self.pattern(i) for i in range(len(self))]

    def encode(self, values: Sequence) -> np.ndarray:
        """Map decoded attribute values onto a row of the value matrix."""
        if len(values) != self.n_attributes:
            raise UsageError(f"expected {self.n_attributes} values, got {len(values)}")
        return np.array([attr.code(v) if attr.is_categorical else float(v)
                         for attr, v in zip(self.schema, values)])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, X=self.X[idx], y=self.y[idx])

    def with_labels(self, y, classes: Sequence[str] | None = None) -> "Dataset":
        return replace(self, y=y, classes=self.classes if classes is None else tuple(classes))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    @classmethod
    def from_patterns(cls, schema, classes, patterns: Iterable[Pattern], name: str = ""):
        schema = tuple(schema)
        probe = cls(schema, classes, np.empty((0, len(schema))), np.empty(0, dtype=np.int64))
        rows = [probe.encode(p.values) for p in patterns]
        labels = [p.label for p in patterns]
        X = np.vstack(rows) if rows else np.empty((0, len(schema)))
        return cls(schema, classes, X, labels, name=name)

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow([a.name for a in self.schema] + ["class"])
        for p in self.patterns:
            writer.writerow([_fmt(v) for v in p.values] + [self.classes[p.label]])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(int(v)) if v.is_integer() else repr(v)
    return v


# --------------------------------------------------------------------------
# CSV loading
# --------------------------------------------------------------------------

def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    with path.open(newline="") as fh:
        return [[c.strip() for c in row] for row in csv.reader(fh)]


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def infer_schema(path, class_column: int = -1, header: bool = False,
                 ignore_columns: Sequence[int] = ()) -> list[AttributeSchema]:
    """Guess a schema: all-numeric columns are continuous, the rest categorical."""
    rows = [r for r in _read_rows(path) if any(r)]
    if header:
        names, rows = rows[0] if rows else [], rows[1:]
    if not rows:
        raise ParseError("file contains no data rows")
    width = len(rows[0])
    skip = {c % width for c in ignore_columns} | {class_column % width}
    if not header:
        names = [f"A_{i + 1}" for i in range(width - len(skip))]
        name_iter = iter(names)
        names = [None if c in skip else next(name_iter) for c in range(width)]
    schema = []
    for c in range(width):
        if c in skip:
            continue
        column = [r[c] for r in rows if len(r) == width and r[c] != MISSING]
        if column and all(_is_number(v) for v in column):
            schema.append(continuous(names[c]))
        else:
            schema.append(categorical(names[c], dict.fromkeys(column)))
    return schema


def load_csv(path, schema: Sequence[AttributeSchema], class_column: int = -1, *,
             header: bool = False, classes: Sequence[str] | None = None,
             class_aliases: Mapping[str, str] | None = None,
             ignore_columns: Sequence[int] = (), name: str = "") -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Rows keep their file order. ``"?"`` marks a missing value, which is
    replaced by the most frequent value of that attribute (smallest value
    on ties) so that the row count is preserved.

    Raises
    ------
    ParseError
        Empty file, wrong field count, or an unparseable number; the
        message names the 1-based file row.
    DomainError
        Unknown categorical symbol, class, or a value outside a declared
        continuous range.
    """
    schema = list(schema)
    rows = _read_rows(path)
    start = 1 if header else 0
    width = len(schema) + 1 + len(ignore_columns)
    class_column %= width
    skip = {c % width for c in ignore_columns}
    attr_cols = [c for c in range(width) if c != class_column and c not in skip]

    raw, raw_labels, row_numbers = [], [], []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not any(row):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", lineno)
        raw.append([row[c] for c in attr_cols])
        raw_labels.append(row[class_column])
        row_numbers.append(lineno)
    if not raw:
        raise ParseError(f"{path}: file contains no data rows")

    aliases = dict(class_aliases or {})
    labels = [aliases.get(v, v) for v in raw_labels]
    if classes is None:
        classes = list(dict.fromkeys(labels))
    classes = [str(c) for c in classes]
    index = {c: i for i, c in enumerate(classes)}
    y = []
    for lineno, lab in zip(row_numbers, labels):
        if lab == MISSING:
            raise ParseError("missing class label", lineno)
        if lab not in index:
            raise DomainError(f"row {lineno}: unknown class {lab!r}")
        y.append(index[lab])

    X = np.empty((len(raw), len(schema)))
    for a, attr in enumerate(schema):
        column = [r[a] for r in raw]
        missing = [i for i, v in enumerate(column) if v == MISSING]
        present = [v for v in column if v != MISSING]
        values = np.empty(len(column))
        for i, v in enumerate(column):
            if v == MISSING:
                continue
            if attr.is_categorical:
                try:
                    values[i] = attr.code(v)
                except DomainError as exc:
                    raise DomainError(f"row {row_numbers[i]}: {exc}") from None
            else:
                try:
                    values[i] = float(v)
                except ValueError:
                    raise ParseError(f"{attr.name}: {v!r} is not a number",
                                     row_numbers[i]) from None
        if missing:
            if not present:
                raise ParseError(f"attribute {attr.name!r} has no observed values")
            observed = np.delete(values, missing)
            uniq, counts = np.unique(observed, return_counts=True)
            values[missing] = uniq[np.argmax(counts)]
            logger.info("imputed %d missing value(s) of %s with %s",
                        len(missing), attr.name, uniq[np.argmax(counts)])
        if not attr.is_categorical:
            lo, hi = float(values.min()), float(values.max())
            if attr.lo is not None and lo < attr.lo or attr.hi is not None and hi > attr.hi:
                raise DomainError(f"attribute {attr.name!r} leaves its range "
                                  f"[{attr.lo}, {attr.hi}]")
            schema[a] = replace(attr, lo=lo if attr.lo is None else attr.lo,
                                hi=hi if attr.hi is None else attr.hi)
        X[:, a] = values
    return Dataset(tuple(schema), tuple(classes), X, np.array(y), name=name)


# --------------------------------------------------------------------------
# Benchmarks
# --------------------------------------------------------------------------

GOLF_ROWS = [
    ("sunny", 85, 85, "false", "don't play"),
    ("sunny", 80, 90, "true", "don't play"),
    ("overcast", 83, 86, "false", "play"),
    ("rainy", 70, 96, "false", "play"),
    ("rainy", 68, 80, "false", "play"),
    ("rainy", 65, 70, "true", "don't play"),
    ("overcast", 64, 65, "true", "play"),
    ("sunny", 72, 95, "false", "don't play"),
    ("sunny", 69, 70, "false", "play"),
    ("rainy", 75, 80, "false", "play"),
    ("sunny", 75, 70, "true", "play"),
    ("overcast", 72, 90, "true", "play"),
    ("overcast", 81, 75, "false", "play"),
    ("rainy", 71, 91, "true", "don't play"),
]

# Reconstructed table: the published season problem lists only its rules,
# not its rows. These 11 rows are built so that the published rule set
# (yellow/leafless tree -> autumn, low -> winter, high -> summer, default
# spring) is exact on them. The weather attribute name is also invented.
SEASON_ROWS = [
    ("sunny", "blossom", "medium", "spring"),
    ("rainy", "blossom", "medium", "spring"),
    ("cloudy", "green", "medium", "spring"),
    ("rainy", "green", "medium", "spring"),
    ("sunny", "green", "high", "summer"),
    ("cloudy", "green", "high", "summer"),
    ("rainy", "yellow", "medium", "autumn"),
    ("cloudy", "yellow", "medium", "autumn"),
    ("cloudy", "leafless", "medium", "autumn"),
    ("snowy", "green", "low", "winter"),
    ("cloudy", "green", "low", "winter"),
]

GOLF_SCHEMA = (
    categorical("Outlook", ["sunny", "overcast", "rainy"]),
    continuous("Temperature"),
    continuous("Humidity"),
    categorical("Wind", ["false", "true"]),
)
SEASON_SCHEMA = (
    categorical("Weather", ["sunny", "cloudy", "rainy", "snowy"]),
    categorical("Tree", ["green", "blossom", "yellow", "leafless"]),
    categorical("Temperature", ["low", "medium", "high"]),
)
IRIS_SCHEMA = tuple(continuous(n) for n in
                    ("Sepal-length", "Sepal-width", "Petal-length", "Petal-width"))
IRIS_CLASSES = ("Iris-setosa", "Iris-versicolor", "Iris-virginica")
BREAST_CANCER_SCHEMA = tuple(continuous(n, 1.0, 10.0, scale=10.0) for n in (
    "Clump thickness", "Uniformity of cell size", "Uniformity of cell shape",
    "Marginal adhesion", "Single epithelial cell size", "Bare nuclei",
    "Bland chromatin", "Normal nucleoli", "Mitoses"))
BREAST_CANCER_CLASSES = ("benign", "malignant")

FIXTURES = ("golf", "season")
BENCHMARKS = ("breast-cancer", "iris", "season", "golf")


def builtin_fixture(name: str) -> Dataset:
    """Return one of the two embedded toy problems, ``"golf"`` or ``"season"``."""
    if name == "golf":
        X = [[GOLF_SCHEMA[0].code(o), t, h, GOLF_SCHEMA[3].code(w)]
             for o, t, h, w, _ in GOLF_ROWS]
        classes = ("play", "don't play")
        y = [classes.index(r[-1]) for r in GOLF_ROWS]
        X = np.array(X, dtype=float)
        schema = tuple(replace(a, lo=float(X[:, i].min()), hi=float(X[:, i].max()))
                       if not a.is_categorical else a for i, a in enumerate(GOLF_SCHEMA))
        return Dataset(schema, classes, X, y, name="golf")
    if name == "season":
        classes = ("spring", "summer", "autumn", "winter")
        X = [[a.code(v) for a, v in zip(SEASON_SCHEMA, r[:3])] for r in SEASON_ROWS]
        y = [classes.index(r[-1]) for r in SEASON_ROWS]
        return Dataset(SEASON_SCHEMA, classes, X, y, name="season")
    raise UsageError(f"unknown fixture {name!r}; choose from {FIXTURES}")


def data_path(filename: str) -> Path:
    return Path(str(resources.files("rexkit") / "data" / filename))


def load_iris(path=None) -> Dataset:
    return load_csv(path or data_path("iris.data"), IRIS_SCHEMA, 4,
                    classes=IRIS_CLASSES, name="iris")


def load_breast_cancer(path=None) -> Dataset:
    """Wisconsin breast cancer in the UCI layout: id, nine 1..10 codes, class 2/4."""
    return load_csv(path or data_path("breast-cancer-wisconsin.data"),
                    BREAST_CANCER_SCHEMA, 10, classes=BREAST_CANCER_CLASSES,
                    class_aliases={"2": "benign", "4": "malignant"},
                    ignore_columns=(0,), name="breast-cancer")


def load_benchmark(name: str) -> Dataset:
    if name in FIXTURES:
        return builtin_fixture(name)
    if name == "iris":
        return load_iris()
    if name in ("breast-cancer", "breast_cancer"):
        return load_breast_cancer()
    raise UsageError(f"unknown dataset {name!r}; choose from {BENCHMARKS}")


# --------------------------------------------------------------------------
# Transformations
# --------------------------------------------------------------------------

def normalize(data: Dataset) -> Dataset:
    """Scale continuous attributes into [0, 1] using the schema's range.

    Integer-coded attributes (``scale`` set) are divided by their scale,
    others are min-max scaled. The schema range becomes [0, 1], so a second
    call is the identity. A constant attribute maps to 0.0 with a warning.
    """
    X = data.X.copy()
    schema = list(data.schema)
    for a, attr in enumerate(data.schema):
        if attr.is_categorical:
            continue
        if attr.scale is not None:
            X[:, a] = X[:, a] / attr.scale
            schema[a] = replace(attr, lo=0.0, hi=1.0, scale=None)
            continue
        lo = X[:, a].min() if attr.lo is None else attr.lo
        hi = X[:, a].max() if attr.hi is None else attr.hi
        if hi == lo:
            warnings.warn(f"attribute {attr.name!r} is constant; mapped to 0.0", RexWarning,
                          stacklevel=2)
            X[:, a] = 0.0
            schema[a] = replace(attr, lo=0.0, hi=0.0)
        else:
            X[:, a] = (X[:, a] - lo) / (hi - lo)
            schema[a] = replace(attr, lo=0.0, hi=1.0)
    return replace(data, schema=tuple(schema), X=X)


def input_matrix(data: Dataset) -> tuple[np.ndarray, list[str]]:
    """Network inputs: continuous columns as they are, categorical ones one-hot."""
    cols, names = [], []
    for a, attr in enumerate(data.schema):
        if attr.is_categorical:
            for k, sym in enumerate(attr.domain):
                cols.append((data.X[:, a] == k).astype(float))
                names.append(f"{attr.name}={sym}")
        else:
            cols.append(data.X[:, a])
            names.append(attr.name)
    matrix = np.column_stack(cols) if cols else np.empty((len(data), 0))
    return matrix, names


def stratified_split(data: Dataset, test_fraction: float, seed: int):
    """Split into (train, test) keeping per-class proportions.

    Each class contributes ``round(test_fraction * class_size)`` patterns to
    the test part, drawn by a generator seeded with ``seed``. Both parts keep
    the original pattern order.
    """
    if not 0 <= test_fraction < 1:
        raise UsageError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test = []
    for c in range(data.n_classes):
        members = np.flatnonzero(data.y == c)
        n_test = int(np.floor(test_fraction * members.size + 0.5))
        test.extend(rng.permutation(members)[:n_test])
    in_test = np.zeros(len(data), dtype=bool)
    in_test[np.asarray(test, dtype=np.int64)] = True
    return data.subset(np.flatnonzero(~in_test)), data.subset(np.flatnonzero(in_test))


def _duplicate_groups(data: Dataset) -> list[np.ndarray]:
    if len(data) == 0:
        return []
    _, inverse = np.unique(data.X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.flatnonzero(np.diff(inverse[order])) + 1
    return [g for g in np.split(order, bounds) if g.size > 1]


def inconsistency_rate(data: Dataset) -> float:
    """Share of patterns disagreeing with the majority label of their duplicates."""
    if len(data) == 0:
        return 0.0
    clashes = 0
    for group in _duplicate_groups(data):
        counts = np.bincount(data.y[group])
        clashes += group.size - counts.max()
    return clashes / len(data)


def clean_contradictions(data: Dataset) -> Dataset:
    """Relabel every duplicate group with its majority label (lowest index on ties)."""
    y = data.y.copy()
    changed = False
    for group in _duplicate_groups(data):
        majority = int(np.argmax(np.bincount(data.y[group])))
        if np.any(y[group] != majority):
            y[group] = majority
            changed = True
    return data.with_labels(y) if changed else data
