"""Variable schema, CSV input/output, validation, cleaning and min-max scaling.

Records are stored as rows of a float array with ``NaN`` marking a missing
field. All values are in original units unless ``Dataset.normalized`` is set.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import ConfigError, DataError, ParseError, RangeError

KINDS = ("categorical-int", "numeric", "binary")
MISSING_TOKENS = ("", "?")


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    lo: float
    hi: float
    integer: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown variable kind {self.kind!r} for {self.name}")
        if self.kind == "binary" and (self.lo, self.hi) != (0, 1):
            raise ConfigError(f"binary variable {self.name} must have bounds 0 1")
        if not self.lo < self.hi:
            raise ConfigError(f"variable {self.name}: lo must be below hi")


@dataclass(frozen=True)
class VariableSchema:
    variables: tuple[VariableSpec, ...]

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError("variable names must be unique")
        if not names:
            raise ConfigError("schema has no variables")

    def __len__(self):
        return len(self.variables)

    def __iter__(self):
        return iter(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def lo(self) -> np.ndarray:
        return np.array([v.lo for v in self.variables], dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.array([v.hi for v in self.variables], dtype=float)

    def index(self, name_or_index) -> int:
        """Resolve a variable name (or pass through an index)."""
        if isinstance(name_or_index, (int, np.integer)):
            i = int(name_or_index)
            if not 0 <= i < len(self):
                raise ConfigError(f"variable index {i} out of range")
            return i
        try:
            return self.names.index(name_or_index)
        except ValueError:
            raise ConfigError(f"unknown variable {name_or_index!r}") from None


# Province, Region and Race are integer codes; their ranges are not given with
# the survey description, so the codings below are ours.
SURVEY_SCHEMA = VariableSchema((
    VariableSpec("Province", "categorical-int", 1, 9),
    VariableSpec("Region", "categorical-int", 1, 52),
    VariableSpec("Age", "numeric", 15, 50),
    VariableSpec("Race", "categorical-int", 1, 4),
    VariableSpec("Education", "numeric", 0, 13),
    VariableSpec("Gravidity", "numeric", 0, 8),
    VariableSpec("Parity", "numeric", 0, 7),
    VariableSpec("FatherAge", "numeric", 16, 65),
    VariableSpec("HIV", "binary", 0, 1),
    VariableSpec("RPR", "binary", 0, 1),
))


def parse_schema(text: str) -> VariableSchema:
    """Parse the ``name kind lo hi [real]`` line format.

    Blank lines and ``#`` comments are ignored. A trailing ``real`` token
    marks a variable whose values are not rounded to integers.
    """
    specs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] not in ("int", "real")):
            raise ParseError("expected 'name kind lo hi [int|real]'", lineno)
        try:
            lo, hi = float(parts[2]), float(parts[3])
        except ValueError:
            raise ParseError("bounds must be numeric", lineno) from None
        integer = len(parts) == 4 or parts[4] == "int"
        try:
            specs.append(VariableSpec(parts[0], parts[1], lo, hi, integer))
        except ConfigError as exc:
            raise ParseError(str(exc), lineno) from None
    return VariableSchema(tuple(specs))


def format_schema(schema: VariableSchema) -> str:
    lines = []
    for v in schema:
        line = f"{v.name} {v.kind} {v.lo:g} {v.hi:g}"
        if not v.integer:
            line += " real"
        lines.append(line)
    return "\n".join(lines) + "\n"


def load_schema(path) -> VariableSchema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of records sharing one schema."""

    schema: VariableSchema
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(self.schema))
        if values.ndim != 2 or values.shape[1] != len(self.schema):
            raise DataError(
                f"records must have {len(self.schema)} values, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def complete_mask(self) -> np.ndarray:
        return ~self.missing_mask.any(axis=1)

    def subset(self, indices) -> "Dataset":
        return replace(self, values=self.values[np.asarray(indices, dtype=int)])

    def with_values(self, values, normalized=None) -> "Dataset":
        flag = self.normalized if normalized is None else normalized
        return Dataset(self.schema, values, flag)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-variable ``(x_min, x_max)`` for the affine map to [0, 1]."""

    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        x_min = np.asarray(self.x_min, dtype=float).copy()
        x_max = np.asarray(self.x_max, dtype=float).copy()
        if x_min.shape != x_max.shape or x_min.ndim != 1:
            raise ConfigError("x_min and x_max must be equal-length vectors")
        if not np.all(x_max > x_min):
            raise ConfigError("x_max must exceed x_min for every variable")
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)

    @classmethod
    def from_schema(cls, schema: VariableSchema) -> "NormalizationParams":
        return cls(schema.lo, schema.hi)

    @property
    def span(self) -> np.ndarray:
        return self.x_max - self.x_min

    def scale(self, x, columns=None):
        """Map original-unit values to [0, 1] (no range check)."""
        lo, span = self._cols(columns)
        return (np.asarray(x, dtype=float) - lo) / span

    def unscale(self, z, columns=None):
        lo, span = self._cols(columns)
        return np.asarray(z, dtype=float) * span + lo

    def _cols(self, columns):
        if columns is None:
            return self.x_min, self.span
        return self.x_min[columns], self.span[columns]

    def __eq__(self, other):
        if not isinstance(other, NormalizationParams):
            return NotImplemented
        return np.array_equal(self.x_min, other.x_min) and np.array_equal(self.x_max, other.x_max)

    def __hash__(self):
        return hash((self.x_min.tobytes(), self.x_max.tobytes()))


def load_csv(path, schema: VariableSchema = SURVEY_SCHEMA) -> Dataset:
    """Read a headed CSV file; empty fields and ``?`` are missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        return read_csv(fh, schema)


def read_csv(stream, schema: VariableSchema = SURVEY_SCHEMA) -> Dataset:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file, expected a header row", 1) from None
    header = [h.strip() for h in header]
    if header != schema.names:
        raise ParseError(f"header {header} does not match schema {schema.names}", 1)
    rows = []
    width = len(schema)
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"{len(row)} columns where {width} expected", lineno)
        values = []
        for name, cell in zip(schema.names, row):
            cell = cell.strip()
            if cell in MISSING_TOKENS:
                values.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r} for {name}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r} for {name}", lineno)
            values.append(v)
        rows.append(values)
    return Dataset(schema, np.array(rows, dtype=float).reshape(len(rows), width))


def _format_value(v: float) -> str:
    if math.isnan(v):
        return ""
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_csv(path, d: Dataset) -> None:
    Path(path).write_text(dataset_to_csv(d), encoding="utf-8")


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(d.schema.names)
    for row in d.values:
        writer.writerow([_format_value(v) for v in row])
    return buf.getvalue()


class Validation(NamedTuple):
    valid: bool
    reasons: tuple[str, ...]

    def __bool__(self):
        return self.valid


def validate_record(r, schema: VariableSchema = SURVEY_SCHEMA) -> Validation:
    """Check every present value against its bounds and parity <= gravidity."""
    r = np.asarray(r, dtype=float)
    if r.shape != (len(schema),):
        return Validation(False, (f"record has {r.size} values, expected {len(schema)}",))
    reasons = []
    for v, spec in zip(r, schema):
        if math.isnan(v):
            continue
        if v < spec.lo:
            reasons.append(f"{spec.name}={v:g} below lo={spec.lo:g}")
        elif v > spec.hi:
            reasons.append(f"{spec.name}={v:g} above hi={spec.hi:g}")
        elif spec.kind == "binary" and v not in (0.0, 1.0):
            reasons.append(f"{spec.name}={v:g} is not 0 or 1")
    names = schema.names
    if "Parity" in names and "Gravidity" in names:
        parity = r[names.index("Parity")]
        gravidity = r[names.index("Gravidity")]
        if not (math.isnan(parity) or math.isnan(gravidity)) and parity > gravidity:
            reasons.append(f"Parity={parity:g} exceeds Gravidity={gravidity:g}")
    return Validation(not reasons, tuple(reasons))


def valid_mask(d: Dataset) -> np.ndarray:
    return np.array([validate_record(r, d.schema).valid for r in d.values], dtype=bool)


def listwise_clean(d: Dataset) -> Dataset:
    """Keep only complete, valid records (listwise deletion)."""
    if d.normalized:
        raise DataError("listwise_clean expects un-normalized data")
    keep = d.complete_mask & valid_mask(d)
    if not keep.any():
        raise DataError("no complete records: training is impossible")
    return d.subset(np.flatnonzero(keep))


def normalize(d: Dataset, p: NormalizationParams | None = None) -> Dataset:
    if d.normalized:
        raise DataError("dataset is already normalized")
    p = p or NormalizationParams.from_schema(d.schema)
    if p.x_min.size != len(d.schema):
        raise ConfigError("normalization parameters do not cover the schema")
    x = d.values
    present = ~np.isnan(x)
    bad = present & ((x < p.x_min) | (x > p.x_max))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise RangeError(
            f"record {i}: {d.schema.names[j]}={x[i, j]:g} outside "
            f"[{p.x_min[j]:g}, {p.x_max[j]:g}]"
        )
    return d.with_values(p.scale(x), normalized=True)


def denormalize(d: Dataset, p: NormalizationParams | None = None) -> Dataset:
    if not d.normalized:
        raise DataError("dataset is not normalized")
    p = p or NormalizationParams.from_schema(d.schema)
    return d.with_values(p.unscale(d.values), normalized=False)


def split_dataset(d: Dataset, fractions: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0):
    """Seeded shuffle into (train, validation, test); remainder goes to train."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ConfigError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError("fractions must sum to 1")
    n = len(d)
    n_val = math.floor(fractions[1] * n + 1e-9)
    n_test = math.floor(fractions[2] * n + 1e-9)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(f"split of {n} records leaves an empty partition")
    order = np.random.default_rng(seed).permutation(n)
    return (
        d.subset(order[:n_train]),
        d.subset(order[n_train:n_train + n_val]),
        d.subset(order[n_train + n_val:]),
    )


def round_to_schema(values, schema: VariableSchema) -> np.ndarray:
    """Round integer-coded columns to the nearest integer inside their bounds."""
    out = np.array(values, dtype=float, copy=True)
    for j, spec in enumerate(schema):
        if spec.integer:
            col = out[..., j]
            out[..., j] = np.clip(np.round(col), math.ceil(spec.lo), math.floor(spec.hi))
        else:
            out[..., j] = np.clip(out[..., j], spec.lo, spec.hi)
    return out
