"""Labeled feature datasets: ARFF/CSV ingestion, stratified folds, synthetic generation.

The positive class ("violation", e.g. Wikipedia vandalism) is encoded as y=1,
the "regular" class as y=0.  Class tags are taken from the file header: of the
two declared values, exactly one must be "regular" (case-insensitive); the
other is the violation tag.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

REGULAR_TAG = "regular"


class DataError(ValueError):
    """Base class for dataset ingestion and validation failures."""


class MalformedHeader(DataError):
    pass


class NonNumericFeature(DataError):
    pass


class NonNumericCell(DataError):
    pass


class UnknownClassValue(DataError):
    pass


class ArityMismatch(DataError):
    pass


class MissingValue(DataError):
    pass


class HeaderMismatch(DataError):
    pass


class TooFewInstances(DataError):
    pass


class BadConfig(DataError):
    pass


class SchemaMismatch(DataError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered numeric feature names plus the binary label declaration."""

    feature_names: tuple[str, ...]
    label_name: str = "class"
    violation_tag: str = "vandalism"
    regular_tag: str = "regular"

    def __post_init__(self) -> None:
        if not self.feature_names:
            raise MalformedHeader("schema declares no features")
        if any(not n for n in self.feature_names):
            raise MalformedHeader("empty feature name")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise MalformedHeader("duplicate feature names")
        if self.violation_tag == self.regular_tag:
            raise MalformedHeader("label values must be distinct")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaMismatch(f"unknown feature {name!r}") from None

    def tag_of(self, y: int) -> str:
        return self.violation_tag if y == 1 else self.regular_tag

    def y_of(self, tag: str) -> int:
        if tag == self.violation_tag:
            return 1
        if tag == self.regular_tag:
            return 0
        raise UnknownClassValue(f"class value {tag!r} not in "
                                f"{{{self.violation_tag},{self.regular_tag}}}")

    def vector_from_mapping(self, values: dict[str, float]) -> np.ndarray:
        """Build a feature vector from a name→value mapping, validating coverage."""
        missing = [n for n in self.feature_names if n not in values]
        if missing:
            raise SchemaMismatch(f"missing features: {missing[:5]}")
        extra = [n for n in values if n not in self.feature_names]
        if extra:
            raise SchemaMismatch(f"unknown features: {extra[:5]}")
        x = np.array([float(values[n]) for n in self.feature_names], dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise SchemaMismatch("non-finite feature value")
        return x


def _resolve_tags(values: Sequence[str]) -> tuple[str, str]:
    """Of two class tags, the one spelled 'regular' (any case) is the negative class."""
    if len(values) != 2:
        raise MalformedHeader(f"class attribute must have exactly 2 values, got {len(values)}")
    regular = [v for v in values if v.lower() == REGULAR_TAG]
    if len(regular) != 1:
        raise MalformedHeader(f"exactly one class value must be 'regular', got {values!r}")
    violation = values[0] if values[1] == regular[0] else values[1]
    return violation, regular[0]


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled dataset: row-major feature matrix + 0/1 label vector."""

    schema: FeatureSchema
    X: np.ndarray  # (n, d) float64
    y: np.ndarray  # (n,) int8, violation=1 / regular=0

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int8)
        if X.ndim != 2 or X.shape[1] != self.schema.n_features:
            raise ArityMismatch(f"X shape {X.shape} vs {self.schema.n_features} features")
        if y.shape != (X.shape[0],):
            raise ArityMismatch("label vector length mismatch")
        if X.size and not np.all(np.isfinite(X)):
            raise MissingValue("non-finite feature value in dataset")
        if y.size and not np.isin(y, (0, 1)).all():
            raise UnknownClassValue("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        X.setflags(write=False)
        y.setflags(write=False)

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.X[indices], self.y[indices])


def class_stats(ds: Dataset) -> tuple[int, int, float]:
    """(violation count, regular count, violation ratio); ratio 0.0 when empty."""
    n_violation = int((ds.y == 1).sum())
    n_regular = int((ds.y == 0).sum())
    total = n_violation + n_regular
    return n_violation, n_regular, (n_violation / total if total else 0.0)


# --------------------------------------------------------------------------- ARFF

_NUMERIC_KINDS = {"numeric", "real", "integer"}


def _unquote(tok: str) -> str:
    tok = tok.strip()
    if len(tok) >= 2 and tok[0] == tok[-1] and tok[0] in "'\"":
        return tok[1:-1]
    return tok


def parse_arff(text: str) -> Dataset:
    """Parse the ARFF subset used by the corpus: numeric attributes and one
    trailing two-valued nominal class attribute, then CSV data rows.
    """
    lines = text.splitlines()
    i = 0
    n_lines = len(lines)

    def next_significant() -> str | None:
        nonlocal i
        while i < n_lines:
            line = lines[i].strip()
            i += 1
            if line and not line.startswith("%"):
                return line
        return None

    line = next_significant()
    if line is None or not line.lower().startswith("@relation"):
        raise MalformedHeader("expected @relation as first declaration")

    feature_names: list[str] = []
    class_decl: tuple[str, tuple[str, str]] | None = None
    while True:
        line = next_significant()
        if line is None:
            raise MalformedHeader("missing @data section")
        low = line.lower()
        if low.startswith("@data"):
            break
        if not low.startswith("@attribute"):
            raise MalformedHeader(f"unexpected declaration: {line!r}")
        body = line[len("@attribute"):].strip()
        if "{" in body:
            name, _, rest = body.partition("{")
            values_part, closed, _ = rest.partition("}")
            if not closed:
                raise MalformedHeader(f"unterminated nominal specification: {line!r}")
            if class_decl is not None:
                raise NonNumericFeature("only one nominal (class) attribute is supported")
            values = tuple(_unquote(v) for v in values_part.split(","))
            class_decl = (_unquote(name), _resolve_tags(values))
        else:
            parts = body.rsplit(None, 1)
            if len(parts) != 2:
                raise MalformedHeader(f"unparsable attribute: {line!r}")
            name, kind = _unquote(parts[0]), parts[1].lower()
            if kind not in _NUMERIC_KINDS:
                raise NonNumericFeature(f"attribute {name!r} has unsupported type {kind!r}")
            if class_decl is not None:
                raise NonNumericFeature("class attribute must be the final attribute")
            feature_names.append(name)

    if class_decl is None:
        raise MalformedHeader("no class attribute declared")
    label_name, (violation_tag, regular_tag) = class_decl
    schema = FeatureSchema(tuple(feature_names), label_name, violation_tag, regular_tag)

    rows: list[np.ndarray] = []
    labels: list[int] = []
    width = schema.n_features + 1
    while True:
        line = next_significant()
        if line is None:
            break
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != width:
            raise ArityMismatch(f"row has {len(cells)} cells, schema expects {width}")
        if "?" in cells:
            raise MissingValue(f"missing value ('?') in row: {line!r}")
        labels.append(schema.y_of(_unquote(cells[-1])))
        try:
            rows.append(np.array([float(c) for c in cells[:-1]], dtype=np.float64))
        except ValueError:
            bad = next(c for c in cells[:-1] if not _is_float(c))
            raise NonNumericCell(f"non-numeric cell {bad!r}") from None

    X = np.vstack(rows) if rows else np.empty((0, schema.n_features))
    return Dataset(schema, X, np.array(labels, dtype=np.int8))


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def serialize_arff(ds: Dataset, relation: str = "fnvd-export") -> str:
    out = [f"@relation {relation}", ""]
    for name in ds.schema.feature_names:
        out.append(f"@attribute {name} numeric")
    out.append(f"@attribute {ds.schema.label_name} "
               f"{{{ds.schema.violation_tag},{ds.schema.regular_tag}}}")
    out.append("")
    out.append("@data")
    for row, y in zip(ds.X, ds.y):
        cells = [repr(float(v)) for v in row]
        cells.append(ds.schema.tag_of(int(y)))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------- CSV

def parse_csv(text: str, schema: FeatureSchema) -> Dataset:
    """Parse a comma-separated export whose header must match the schema exactly
    (feature names in order, then the label column).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMismatch("empty CSV input") from None
    expected = list(schema.feature_names) + [schema.label_name]
    if [h.strip() for h in header] != expected:
        raise HeaderMismatch(f"CSV header does not match schema "
                             f"(got {len(header)} columns, expected {len(expected)})")
    rows: list[np.ndarray] = []
    labels: list[int] = []
    for cells in reader:
        if not cells:
            continue
        if len(cells) != len(expected):
            raise ArityMismatch(f"row has {len(cells)} cells, schema expects {len(expected)}")
        labels.append(schema.y_of(cells[-1].strip()))
        values = np.empty(schema.n_features, dtype=np.float64)
        for j, cell in enumerate(cells[:-1]):
            try:
                values[j] = float(cell)
            except ValueError:
                raise NonNumericCell(f"non-numeric cell {cell.strip()!r} "
                                     f"in column {schema.feature_names[j]!r}") from None
        rows.append(values)
    X = np.vstack(rows) if rows else np.empty((0, schema.n_features))
    return Dataset(schema, X, np.array(labels, dtype=np.int8))


def schema_from_csv(text: str) -> FeatureSchema:
    """Infer a schema from a labeled CSV: the last column is the label and its
    cells must contain exactly the two class tags (one of them 'regular')."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMismatch("empty CSV input") from None
    header = [h.strip() for h in header]
    if len(header) < 2:
        raise HeaderMismatch("need at least one feature column and a label column")
    tags: list[str] = []
    for row in reader:
        if not row:
            continue
        tag = row[-1].strip()
        if tag not in tags:
            tags.append(tag)
    if len(tags) != 2:
        raise MalformedHeader(f"cannot infer class tags: found {tags!r}, need exactly 2")
    violation, regular = _resolve_tags(tags)
    return FeatureSchema(tuple(header[:-1]), header[-1], violation, regular)


def serialize_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(ds.schema.feature_names) + [ds.schema.label_name])
    for row, y in zip(ds.X, ds.y):
        writer.writerow([repr(float(v)) for v in row] + [ds.schema.tag_of(int(y))])
    return buf.getvalue()


# --------------------------------------------------------------------------- folds

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray  # (n,) int32, values in [0, k)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def stratified_kfold(ds: Dataset, k: int, seed: int) -> FoldAssignment:
    """Deterministic stratified folds: shuffle each class by seed, deal round-robin.

    Per-fold class counts differ from perfect stratification by at most 1.
    """
    if k < 2:
        raise BadConfig(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    fold_of = np.full(len(ds), -1, dtype=np.int32)
    for cls in (1, 0):
        idx = np.flatnonzero(ds.y == cls)
        if len(idx) < k:
            raise TooFewInstances(f"class {cls} has {len(idx)} instances, need >= {k}")
        rng.shuffle(idx)
        fold_of[idx] = np.arange(len(idx)) % k
    return FoldAssignment(k, fold_of)


# ----------------------------------------------------------------------- synthetic

@dataclass(frozen=True)
class SynthConfig:
    """Logistic ground truth for generated datasets.

    Exactly one of `intercept` / `positive_rate` must be given; with
    `positive_rate`, the intercept is solved so the mean of σ(b0 + c·x) over
    the drawn feature matrix hits the target rate.
    """

    n: int
    d: int
    true_coeffs: tuple[float, ...]
    intercept: float | None = None
    positive_rate: float | None = None


def _sigmoid(f: np.ndarray) -> np.ndarray:
    out = np.empty_like(f, dtype=np.float64)
    pos = f >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-f[pos]))
    ef = np.exp(f[~pos])
    out[~pos] = ef / (1.0 + ef)
    return out


def solve_intercept(X: np.ndarray, coeffs: np.ndarray, rate: float) -> float:
    """Bisect b0 so that mean(σ(b0 + X·coeffs)) equals `rate` on this X."""
    base = X @ coeffs
    lo, hi = -1000.0, 1000.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if float(_sigmoid(mid + base).mean()) > rate:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2.0


def synth_generate(cfg: SynthConfig, seed: int) -> Dataset:
    """Features uniform in [0,1]^d, labels Bernoulli(σ(b0 + coeffs·x)); deterministic per seed."""
    if cfg.d != len(cfg.true_coeffs):
        raise BadConfig(f"d={cfg.d} but {len(cfg.true_coeffs)} coefficients")
    if cfg.n < 10:
        raise BadConfig(f"n must be >= 10, got {cfg.n}")
    if (cfg.intercept is None) == (cfg.positive_rate is None):
        raise BadConfig("exactly one of intercept / positive_rate must be set")
    if cfg.positive_rate is not None and not 0.0 < cfg.positive_rate < 1.0:
        raise BadConfig("positive_rate must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(cfg.n, cfg.d))
    coeffs = np.asarray(cfg.true_coeffs, dtype=np.float64)
    b0 = cfg.intercept if cfg.intercept is not None \
        else solve_intercept(X, coeffs, cfg.positive_rate)
    p = _sigmoid(b0 + X @ coeffs)
    y = (rng.uniform(size=cfg.n) < p).astype(np.int8)
    schema = FeatureSchema(tuple(f"SYNTH_{j}" for j in range(cfg.d)),
                           "class", "violation", "regular")
    return Dataset(schema, X, y)
