"""Stacked horizon operators mapping (x0, u, d, r) to the predicted trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .thermal import DiscreteStateSpace


@dataclass(frozen=True)
class PredictionMatrices:
    """Dense stacked operators; block row ``t`` holds the prediction ``t`` steps ahead.

    Trajectories have ``N + 1`` blocks of ``n`` states (block 0 is ``x0``);
    input-like sequences have ``N`` blocks, time-major.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    B_r: np.ndarray
    horizon: int
    n_states: int
    n_inputs: int
    n_disturbances: int

    def block(self, t: int) -> slice:
        return slice(t * self.n_states, (t + 1) * self.n_states)


def _stack_input(A_pows: list[np.ndarray], M: np.ndarray, N: int) -> np.ndarray:
    n, m = M.shape
    out = np.zeros((n * (N + 1), m * N))
    for t in range(1, N + 1):
        for s in range(t):
            out[t * n : (t + 1) * n, s * m : (s + 1) * m] = A_pows[t - 1 - s] @ M
    return out


def build_prediction_matrices(dss: DiscreteStateSpace, N: int) -> PredictionMatrices:
    if int(N) != N or N < 1:
        raise ValidationError(f"horizon must be a positive integer, got {N}")
    N = int(N)
    n = dss.n_states
    A_pows = [np.eye(n)]
    for _ in range(N):
        A_pows.append(A_pows[-1] @ dss.A)
    return PredictionMatrices(
        A=np.vstack(A_pows),
        B=_stack_input(A_pows, dss.B, N),
        E=_stack_input(A_pows, dss.E, N),
        B_r=_stack_input(A_pows, dss.B_r, N),
        horizon=N,
        n_states=n,
        n_inputs=dss.n_inputs,
        n_disturbances=dss.n_disturbances,
    )


def _as_stacked(name: str, v, block: int, N: int) -> np.ndarray:
    if v is None:
        return np.zeros(block * N)
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        if v.shape != (N, block):
            raise ValidationError(f"{name} has shape {v.shape}, expected ({N}, {block})")
        return v.reshape(-1)
    if v.shape != (block * N,):
        raise ValidationError(f"{name} has length {v.size}, expected {block * N}")
    return v


def predict_states(
    pm: PredictionMatrices,
    x0: np.ndarray,
    u=None,
    d=None,
    w=None,
    r=None,
) -> np.ndarray:
    """Stacked trajectory ``A x0 + B u + E (d + w) + B_r r``.

    Sequences may be given flat (time-major) or as ``(N, size)`` arrays;
    ``None`` means all zeros. Returns an ``(N + 1, n)`` array.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (pm.n_states,):
        raise ValidationError(f"x0 has shape {x0.shape}, expected ({pm.n_states},)")
    N = pm.horizon
    u = _as_stacked("u", u, pm.n_inputs, N)
    d = _as_stacked("d", d, pm.n_disturbances, N)
    w = _as_stacked("w", w, pm.n_disturbances, N)
    r = _as_stacked("r", r, pm.n_inputs, N)
    x = pm.A @ x0 + pm.B @ u + pm.E @ (d + w) + pm.B_r @ r
    return x.reshape(N + 1, pm.n_states)
