"""Dataset files, concentration-dataset construction and evaluation transforms.

File layout (UTF-8, comma separated, ``.`` decimals)::

    # ldl c=6                 or   # cdl c=6   (targets are c + 1 wide)
    f0,f1,...,f23,t0,...,t5
    0.12,...

Target columns may also be named ``l0, l1, ...``.

Ratings files use ``# ratings R=5`` and ``r0,...`` columns, optionally
preceded by ``f`` feature columns that are carried through.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (INGEST_TOL, ConcentrationDistribution, Dataset, DimensionError,
                   ValidationError, check_distribution_rows, normalize, normalize_rows)
from .recovery import apparent_rows, recover_rows

_HEADER_RE = re.compile(r"^#\s*(ldl|cdl)\s+c\s*=\s*(\d+)\s*$")
_RATINGS_RE = re.compile(r"^#\s*ratings\s+R\s*=\s*([0-9.eE+-]+)\s*$")


def format_float(x: float) -> str:
    return repr(float(x))


def _read_table(path) -> tuple[str, list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        reader = csv.reader(fh)
        try:
            names = [s.strip() for s in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: missing column-name line") from None
        rows = []
        for r, row in enumerate(reader):
            if not row or all(not s.strip() for s in row):
                continue
            if len(row) != len(names):
                raise ValidationError(f"{path}: data row {r} has {len(row)} cells, expected {len(names)}")
            vals = []
            for j, cell in enumerate(row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValidationError(
                        f"{path}: non-numeric cell {cell!r} at data row {r}, column {j} ({names[j]})"
                    ) from None
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return first, names, np.array(rows, dtype=float)


def _split_columns(names: list[str], prefix: str, path) -> tuple[list[int], list[int]]:
    feat = [j for j, s in enumerate(names) if re.fullmatch(r"f\d+", s)]
    targ = [j for j, s in enumerate(names) if re.fullmatch(f"(?:{prefix})" + r"\d+", s)]
    if len(feat) + len(targ) != len(names) or feat != list(range(len(feat))):
        raise ValidationError(f"{path}: malformed column names {names}; expected f0..,{prefix}0..")
    return feat, targ


def _parse_header(first: str, path) -> tuple[str, int]:
    match = _HEADER_RE.match(first)
    if not match:
        raise ValidationError(f"{path}: malformed header {first!r}; expected '# ldl c=<c>' or '# cdl c=<c>'")
    return match.group(1), int(match.group(2))


def load_targets(path) -> tuple[str, np.ndarray, Optional[np.ndarray]]:
    """Read a dataset or prediction file; features are optional.

    Returns ``(kind, targets, features_or_None)``.
    """
    first, names, data = _read_table(path)
    kind, c = _parse_header(first, path)
    feat, targ = _split_columns(names, "t|l", path)
    width = c + (1 if kind == "cdl" else 0)
    if len(targ) != width:
        raise ValidationError(f"{path}: header declares {kind} c={c} ({width} target columns), found {len(targ)}")
    Y = data[:, targ]
    Y = check_distribution_rows(Y, "label" if kind == "ldl" else "concentration", tol=INGEST_TOL)
    return kind, Y, (data[:, feat] if feat else None)


def load_dataset(path) -> Dataset:
    kind, Y, X = load_targets(path)
    if X is None:
        raise ValidationError(f"{path}: dataset file has no feature columns")
    return Dataset(X, Y, kind, name=Path(path).stem)


def write_dataset(path, features, targets, kind: str = "ldl") -> None:
    Y = np.asarray(targets, dtype=float)
    X = None if features is None else np.asarray(features, dtype=float)
    c = Y.shape[1] - (1 if kind == "cdl" else 0)
    names = ([f"f{j}" for j in range(X.shape[1])] if X is not None else []) + \
            [f"t{j}" for j in range(Y.shape[1])]
    buf = io.StringIO()
    buf.write(f"# {kind} c={c}\n")
    buf.write(",".join(names) + "\n")
    for i in range(Y.shape[0]):
        cells = ([format_float(v) for v in X[i]] if X is not None else []) + \
                [format_float(v) for v in Y[i]]
        buf.write(",".join(cells) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def save_dataset(path, dataset: Dataset) -> None:
    write_dataset(path, dataset.features, dataset.targets, dataset.kind)


@dataclass(frozen=True)
class RatingMatrix:
    ratings: np.ndarray
    scale_max: float
    features: Optional[np.ndarray] = None

    def __post_init__(self):
        S = np.array(self.ratings, dtype=float)
        if S.ndim != 2 or S.shape[1] < 1:
            raise ValidationError(f"ratings must be an (n, c) matrix, got shape {S.shape}")
        if not self.scale_max > 0:
            raise ValidationError(f"scale maximum must be > 0, got {self.scale_max}")
        bad = np.argwhere(~((S > 0) & (S <= self.scale_max)))
        if bad.size:
            r, j = bad[0]
            raise ValidationError(
                f"rating {S[r, j]!r} at row {r}, column {j} is outside (0, {self.scale_max}]")
        S.setflags(write=False)
        object.__setattr__(self, "ratings", S)


def load_ratings(path) -> RatingMatrix:
    first, names, data = _read_table(path)
    match = _RATINGS_RE.match(first)
    if not match:
        raise ValidationError(f"{path}: malformed header {first!r}; expected '# ratings R=<R>'")
    feat, cols = _split_columns(names, "r", path)
    return RatingMatrix(data[:, cols], float(match.group(1)),
                        data[:, feat] if feat else None)


def build_cdl_from_ratings(ratings: RatingMatrix) -> np.ndarray:
    """Append ``R * c - sum(s)`` to each rating row and normalize.

    The appended mass is the rating headroom left below the scale maximum on
    every label, which becomes the background concentration.
    """
    S = ratings.ratings
    c = S.shape[1]
    mu_raw = ratings.scale_max * c - S.sum(axis=1, keepdims=True)
    return normalize_rows(np.hstack([S, mu_raw]))


@dataclass(frozen=True)
class ProtocolPair:
    train_targets: np.ndarray
    eval_targets: np.ndarray


def hide_last_label(targets) -> ProtocolPair:
    """Treat the last column as a background concentration hidden from training.

    Training targets are the first ``c - 1`` columns divided by
    ``1 - last``; evaluation targets are the original rows read as
    concentration distributions.
    """
    T = np.asarray(targets, dtype=float)
    if T.ndim != 2 or T.shape[1] < 3:
        raise ValidationError(f"hiding the last label needs at least 3 columns, got shape {T.shape}")
    rest = 1.0 - T[:, -1]
    bad = np.flatnonzero(rest <= 0)
    if bad.size:
        raise ValidationError(f"row {int(bad[0])} puts all mass on the last label; nothing left to train on")
    return ProtocolPair(T[:, :-1] / rest[:, None], T.copy())


def apparent_from_cd(targets) -> ProtocolPair:
    """Training targets ``b_i + mu / c`` (background spread evenly) for CD rows."""
    T = np.asarray(targets, dtype=float)
    if T.ndim != 2 or T.shape[1] < 3:
        raise ValidationError(f"concentration rows need at least 3 columns, got shape {T.shape}")
    return ProtocolPair(apparent_rows(T), T.copy())


def noise_append_baseline(prediction, g: float, rng: np.random.Generator,
                          delta: Optional[float] = None) -> ConcentrationDistribution:
    """Append ``g + delta`` to an LD prediction and renormalize.

    ``delta`` is uniform on ``(-0.2 g, 0.2 g)`` unless given explicitly.
    """
    p = np.asarray(prediction, dtype=float)
    normalize(p)
    if not 0 <= g < 1:
        raise ValidationError(f"ground-truth background must lie in [0, 1), got {g}")
    if delta is None:
        delta = rng.uniform(-0.2 * g, 0.2 * g) if g > 0 else 0.0
    return ConcentrationDistribution.from_vector(normalize(np.append(p, g + delta)).values)


def noise_append_rows(P, g, rng: np.random.Generator, noise: float = 0.2) -> np.ndarray:
    """Row-wise :func:`noise_append_baseline`, one uniform draw per row."""
    P = np.asarray(P, dtype=float)
    g = np.asarray(g, dtype=float)
    if g.shape != (P.shape[0],):
        raise DimensionError(f"need one background per row: {g.shape} vs {P.shape[0]} rows")
    if np.any(g < 0) or np.any(g >= 1):
        raise ValidationError("ground-truth backgrounds must lie in [0, 1)")
    delta = rng.uniform(-noise, noise, size=g.shape) * g
    return normalize_rows(np.hstack([P, (g + delta)[:, None]]))


@dataclass(frozen=True)
class SyntheticData:
    dataset: Dataset
    apparent: np.ndarray
    evidence: np.ndarray
    weights: np.ndarray


def synth_generate(n: int, m: int, c: int, seed: int, density: float = 0.25,
                   scale: Optional[float] = None) -> SyntheticData:
    """Features and concentration targets produced by a known non-negative linear map.

    ``W`` has a random sparsity pattern (each entry kept with probability
    ``density``) and uniform magnitudes; ``x`` is uniform on ``[0, 1]^m``.
    Evidence ``e* = x W`` is turned into a concentration distribution and its
    apparent label distribution. The default ``scale`` makes the average
    total evidence about ``c``, putting typical backgrounds near one half.
    """
    if n < 10 or m < 1 or c < 2:
        raise ValidationError(f"need n >= 10, m >= 1, c >= 2; got n={n}, m={m}, c={c}")
    if not 0 < density <= 1:
        raise ValidationError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    if scale is None:
        scale = 4.0 / (m * density)
    W = rng.uniform(0.0, scale, size=(m, c)) * (rng.random((m, c)) < density)
    X = rng.random((n, m))
    E = X @ W
    cd = recover_rows(E)
    data = Dataset(X, cd, "cdl", name=f"synth-n{n}-m{m}-c{c}-s{seed}")
    return SyntheticData(data, apparent_rows(cd), E, W)
