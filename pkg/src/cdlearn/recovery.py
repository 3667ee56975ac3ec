"""Evidence to concentration distributions, and back to apparent label distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConcentrationDistribution, EvidenceVector, LabelDistribution, ValidationError


@dataclass(frozen=True)
class RecoveryResult:
    cd: ConcentrationDistribution
    evidence_total: float
    apparent: LabelDistribution


def recover(e) -> RecoveryResult:
    """Split evidence into a label part and a background concentration.

    With ``D = sum(e) + c``: ``b_i = e_i / D`` and ``mu = c / D``. The implied
    Dirichlet mean ``(e_i + 1) / D`` equals ``b_i + mu / c``.
    """
    ev = e if isinstance(e, EvidenceVector) else EvidenceVector(e)
    vals = ev.values
    c = vals.size
    total = float(vals.sum())
    denom = total + c
    cd = ConcentrationDistribution(vals / denom, c / denom)
    return RecoveryResult(cd, total, LabelDistribution((vals + 1.0) / denom))


def recover_rows(E) -> np.ndarray:
    """Vectorized :func:`recover` returning ``(n, c + 1)`` concentration rows."""
    E = np.asarray(E, dtype=float)
    if E.ndim != 2:
        raise ValidationError(f"evidence must be an (n, c) matrix, got shape {E.shape}")
    if np.any(~(E >= 0)):
        r, j = np.argwhere(~(E >= 0))[0]
        raise ValidationError(f"negative evidence at row {r}, index {j}")
    c = E.shape[1]
    denom = E.sum(axis=1, keepdims=True) + c
    return np.hstack([E / denom, c / denom])


def apparent_expectation(cd) -> LabelDistribution:
    """Spread the background evenly over the labels: ``b_i + mu / c``."""
    if not isinstance(cd, ConcentrationDistribution):
        cd = ConcentrationDistribution.from_vector(cd)
    return LabelDistribution(cd.label_part + cd.background / cd.c)


def apparent_rows(CD) -> np.ndarray:
    CD = np.asarray(CD, dtype=float)
    c = CD.shape[1] - 1
    return CD[:, :-1] + CD[:, -1:] / c


def bound_constant(c: int) -> float:
    """Excess-risk constant ``1 + 1 / (4 c (c + 1))`` of the generalization bound."""
    if c < 1:
        raise ValidationError(f"number of classes must be >= 1, got {c}")
    return 1.0 + 1.0 / (4.0 * c * (c + 1.0))
