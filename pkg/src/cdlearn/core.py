"""Distribution types, validation and normalization shared across the package.

Label distributions are length-``c`` simplex vectors. Concentration
distributions append one extra entry, the background concentration, to a
(possibly deficient) label part so that the whole vector sums to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

SUM_TOL = 1e-9
INGEST_TOL = 1e-6


class ValidationError(ValueError):
    """Raised when an input violates a distribution or shape invariant."""


class DimensionError(ValidationError):
    """Raised when vector or matrix widths do not agree."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Violation:
    """First broken invariant found by :func:`validate_distribution`."""

    kind: Literal["shape", "finite", "negative", "range", "sum"]
    index: Optional[int]
    value: float
    message: str

    def __str__(self) -> str:
        return self.message


def validate_distribution(
    v, kind: Literal["label", "concentration"] = "label", tol: float = SUM_TOL
) -> Optional[Violation]:
    """Check a vector against the simplex invariants.

    Returns ``None`` when the vector is valid, otherwise the first
    :class:`Violation` encountered (non-finite, negative, above one, then sum).
    A concentration distribution needs at least two entries (one label plus
    the background); a label distribution needs at least two labels.
    """
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        return Violation("shape", None, float(arr.size),
                         f"{kind} distribution must be a vector of length >= 2, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        i = int(bad[0])
        return Violation("finite", i, float(arr[i]), f"non-finite entry at index {i}")
    neg = np.flatnonzero(arr < 0)
    if neg.size:
        i = int(neg[0])
        return Violation("negative", i, float(arr[i]), f"negative entry {arr[i]!r} at index {i}")
    big = np.flatnonzero(arr > 1 + tol)
    if big.size:
        i = int(big[0])
        return Violation("range", i, float(arr[i]), f"entry {arr[i]!r} at index {i} exceeds 1")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        return Violation("sum", None, total, f"entries sum to {total!r}, expected 1")
    return None


def normalize(raw) -> "LabelDistribution":
    """Divide a non-negative vector by its sum."""
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"expected a vector, got shape {arr.shape}")
    neg = np.flatnonzero(~(arr >= 0))
    if neg.size:
        i = int(neg[0])
        raise ValidationError(f"entry at index {i} is negative or not a number: {arr[i]!r}")
    total = arr.sum()
    if not total > 0:
        raise ValidationError("cannot normalize an all-zero vector (index 0 onwards are all zero)")
    return LabelDistribution(arr / total)


def normalize_rows(raw) -> np.ndarray:
    """Row-wise version of :func:`normalize` for ``(n, c)`` matrices."""
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"expected a matrix, got shape {arr.shape}")
    if np.any(~(arr >= 0)):
        r, c = np.argwhere(~(arr >= 0))[0]
        raise ValidationError(f"negative or missing entry at row {r}, index {c}")
    totals = arr.sum(axis=1, keepdims=True)
    zero = np.flatnonzero(totals[:, 0] <= 0)
    if zero.size:
        raise ValidationError(f"row {int(zero[0])} is all zero and cannot be normalized")
    return arr / totals


@dataclass(frozen=True)
class LabelDistribution:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        problem = validate_distribution(self.values, "label")
        if problem is not None:
            raise ValidationError(str(problem))

    @property
    def c(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ConcentrationDistribution:
    """A label part ``b`` plus a background concentration ``mu``."""

    label_part: np.ndarray
    background: float

    def __post_init__(self):
        object.__setattr__(self, "label_part", _frozen(self.label_part))
        object.__setattr__(self, "background", float(self.background))
        problem = validate_distribution(self.vector, "concentration")
        if problem is not None:
            raise ValidationError(str(problem))

    @classmethod
    def from_vector(cls, v) -> "ConcentrationDistribution":
        arr = np.asarray(v, dtype=float)
        return cls(arr[:-1], arr[-1])

    @property
    def c(self) -> int:
        return self.label_part.size

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.label_part, self.background)

    def __array__(self, dtype=None, copy=None):
        v = self.vector
        return v if dtype is None else v.astype(dtype)

    def to_label_distribution(self) -> LabelDistribution:
        """Renormalized label part; requires a positive label mass."""
        return normalize(self.label_part)


@dataclass(frozen=True)
class EvidenceVector:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValidationError(f"evidence must be a non-empty vector, got shape {self.values.shape}")
        bad = np.flatnonzero(~(self.values >= 0) | ~np.isfinite(self.values))
        if bad.size:
            i = int(bad[0])
            raise ValidationError(f"evidence must be finite and >= 0; index {i} is {self.values[i]!r}")

    @property
    def c(self) -> int:
        return self.values.size

    @property
    def alpha(self) -> np.ndarray:
        return self.values + 1.0

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def check_distribution_rows(
    Y,
    kind: Literal["label", "concentration"] = "label",
    tol: float = INGEST_TOL,
    renormalize: bool = True,
) -> np.ndarray:
    """Validate every row of ``Y`` as a distribution.

    Rows whose sum is off by at most ``tol`` are divided by their actual sum
    (when ``renormalize``) so downstream code sees exact simplex rows; any
    larger deviation, a negative entry or a non-finite entry is an error that
    names the row.
    """
    arr = np.array(Y, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValidationError(f"{kind} targets must be an (n, >=2) matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValidationError("need at least one row")
    for r, row in enumerate(arr):
        problem = validate_distribution(row, kind, tol=tol)
        if problem is not None:
            raise ValidationError(f"row {r}: {problem}")
    if renormalize:
        arr /= arr.sum(axis=1, keepdims=True)
    return arr


def check_same_width(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if np.shape(a)[-1] != np.shape(b)[-1]:
        raise DimensionError(f"{what} have different widths: {np.shape(a)[-1]} != {np.shape(b)[-1]}")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix paired with label- or concentration-distribution targets.

    ``kind`` is ``"ldl"`` when the targets are ``c``-wide label distributions
    and ``"cdl"`` when they are ``c + 1``-wide concentration distributions
    (last column is the background).
    """

    features: np.ndarray
    targets: np.ndarray
    kind: Literal["ldl", "cdl"] = "ldl"
    feature_names: Sequence[str] = field(default=())
    target_names: Sequence[str] = field(default=())
    name: str = ""

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"features must be an (n>=1, m>=1) matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise ValidationError(f"non-finite feature at row {r}, column {c}")
        if self.kind not in ("ldl", "cdl"):
            raise ValidationError(f"unknown dataset kind {self.kind!r}")
        Y = check_distribution_rows(self.targets, "label" if self.kind == "ldl" else "concentration")
        if Y.shape[0] != X.shape[0]:
            raise DimensionError(f"{X.shape[0]} feature rows but {Y.shape[0]} target rows")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", Y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names) or
                           tuple(f"f{j}" for j in range(X.shape[1])))
        object.__setattr__(self, "target_names", tuple(self.target_names) or
                           tuple(f"t{j}" for j in range(Y.shape[1])))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        """Number of named labels (the background column is not counted)."""
        return self.targets.shape[1] - (1 if self.kind == "cdl" else 0)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.targets[idx], self.kind,
                       self.feature_names, self.target_names, self.name)
