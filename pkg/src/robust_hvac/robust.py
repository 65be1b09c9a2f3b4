"""Robust counterpart of box-bounded additive disturbances.

For a row ``e`` of the stacked disturbance operator, ``max e @ w`` over
``-sigma <= w <= sigma`` has the LP dual ``min sigma @ (l1 + l2)`` subject to
``l1 - l2 = e, l1, l2 >= 0``. The dual optimum is attained at
``l1 = max(e, 0), l2 = max(-e, 0)``, so the worst case is ``|e| @ sigma`` and no
dual variables need to enter the controller's program.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .prediction import PredictionMatrices

VERTEX_ORACLE_MAX_COLUMNS = 20


def _check_sigma(E: np.ndarray, sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if sigma.shape[0] != E.shape[1]:
        raise ValidationError(f"sigma has length {sigma.shape[0]}, operator has {E.shape[1]} columns")
    if (sigma < 0).any() or not np.all(np.isfinite(sigma)):
        raise ValidationError("sigma must be finite and nonnegative")
    return sigma


def dual_certificate(E) -> tuple[np.ndarray, np.ndarray]:
    """Optimal dual pair ``(l1, l2)`` with ``l1 - l2 = E`` and both nonnegative."""
    E = np.asarray(E, dtype=float)
    return np.maximum(E, 0.0), np.maximum(-E, 0.0)


def worst_case_disturbance_offset(E_stacked, sigma) -> np.ndarray:
    """Row-wise ``max E @ w`` over the box ``|w| <= sigma``, i.e. ``|E| @ sigma``."""
    E = np.atleast_2d(np.asarray(E_stacked, dtype=float))
    sigma = _check_sigma(E, sigma)
    return np.abs(E) @ sigma


def vertex_oracle_max(E_stacked, sigma) -> np.ndarray:
    """Exact row-wise maximum of ``E @ w`` by enumerating every box vertex."""
    E = np.atleast_2d(np.asarray(E_stacked, dtype=float))
    sigma = _check_sigma(E, sigma)
    cols = E.shape[1]
    if cols > VERTEX_ORACLE_MAX_COLUMNS:
        raise ValidationError(
            f"vertex enumeration needs 2^{cols} points; limit is {VERTEX_ORACLE_MAX_COLUMNS} columns"
        )
    best = np.full(E.shape[0], -np.inf)
    vertices = itertools.product((-1.0, 1.0), repeat=cols)
    # chunked so the 2^20 case stays within a few MB
    while chunk := list(itertools.islice(vertices, 1 << 14)):
        best = np.maximum(best, (E @ (np.array(chunk) * sigma).T).max(axis=1))
    return best


@dataclass(frozen=True)
class RobustifiedConstraints:
    """Worst-case shifts for the stacked trajectory.

    ``upper_offset`` is added to predictions checked against upper bounds and
    ``lower_offset`` (nonpositive) to predictions checked against lower bounds.
    Curtailed and not-curtailed trajectories share the same offsets.
    """

    worst_case_offset: np.ndarray
    dual_certificate: tuple[np.ndarray, np.ndarray]

    @property
    def upper_offset(self) -> np.ndarray:
        return self.worst_case_offset

    @property
    def lower_offset(self) -> np.ndarray:
        return -self.worst_case_offset


def robustify_dynamics(pm: PredictionMatrices, sigma) -> RobustifiedConstraints:
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    offset = worst_case_disturbance_offset(pm.E, sigma)
    return RobustifiedConstraints(offset, dual_certificate(pm.E))
