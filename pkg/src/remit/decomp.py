"""Signed decompositions of matrices into stochastic matrices.

A real square matrix M can be written as sum_a c_a S_a with stochastic S_a
and real c_a iff all its column sums are equal.  Among such decompositions
the minimum achievable 1-norm of the coefficient vector equals the maximum
column 1-norm of M; the greedy construction below attains it, peeling off one
deterministic stochastic matrix per step.

This is the small-n reference route for inverting noise matrices: the
production estimators sample the same quantity without ever forming a dense
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError

_ZERO = 1e-12  # entries below this magnitude count as exact zeros
_SUM_TOL = 1e-10

MAX_DENSE_DIM = 256


@dataclass(frozen=True, eq=False)
class StochasticDecomposition:
    """coeffs[a] * mats[a] summed reconstructs the source matrix."""

    coeffs: np.ndarray
    mats: list[np.ndarray]
    norm: float

    def reconstruct(self) -> np.ndarray:
        out = np.zeros_like(self.mats[0])
        for c, s in zip(self.coeffs, self.mats):
            out += c * s
        return out

    def to_json_dict(self) -> dict:
        return {
            "coeffs": [float(c) for c in self.coeffs],
            "mats": [m.tolist() for m in self.mats],
            "norm": float(self.norm),
        }


def column_sums_equal(m: np.ndarray) -> tuple[bool, float | None]:
    """Whether all column sums agree (within 1e-10); returns the common value."""
    m = np.asarray(m, dtype=float)
    sums = m.sum(axis=0)
    if sums.max() - sums.min() <= _SUM_TOL:
        return True, float(sums.mean())
    return False, None


def minimal_one_norm(m: np.ndarray) -> float:
    """Maximum column 1-norm: the smallest coefficient 1-norm any stochastic
    decomposition of m can achieve."""
    return float(np.abs(np.asarray(m, dtype=float)).sum(axis=0).max())


def _deterministic_stochastic(targets: np.ndarray, dim: int) -> np.ndarray:
    s = np.zeros((dim, dim))
    s[targets, np.arange(dim)] = 1.0
    return s


def decompose_min_norm(m: np.ndarray) -> StochasticDecomposition:
    """Greedy optimal decomposition of an equal-column-sum matrix.

    Each step picks the smallest-magnitude relevant entry omega and subtracts
    omega times a deterministic stochastic matrix that hits, in every column,
    a largest-magnitude entry of the sign being consumed.  Every step zeroes
    the omega entry, and the running coefficient norm telescopes to the
    maximum column 1-norm.
    """
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ModelError(f"need a square matrix, got {m.shape}")
    dim = m.shape[0]
    if dim > MAX_DENSE_DIM:
        raise ModelError(f"dense decomposition limited to {MAX_DENSE_DIM}x{MAX_DENSE_DIM}")
    ok, sigma = column_sums_equal(m)
    if not ok:
        raise ModelError("column sums differ; no stochastic decomposition exists")

    work = m.copy()
    work[np.abs(work) < _ZERO] = 0.0
    coeffs: list[float] = []
    mats: list[np.ndarray] = []
    target_norm = minimal_one_norm(work)

    while np.abs(work).max() > _ZERO:
        colsum = float(work.sum(axis=0).mean())
        gamma_before = minimal_one_norm(work)
        nnz_before = int((np.abs(work) > _ZERO).sum())
        if abs(colsum) > _SUM_TOL:
            # consume entries of the column-sum sign; every column has one
            sign = 1.0 if colsum > 0 else -1.0
            signed = work * sign
            pool = np.where(signed > _ZERO, signed, np.inf)
            i0, j0 = np.unravel_index(np.argmin(pool), work.shape)
        else:
            # zero column sums: consume the globally smallest entry's sign
            pool = np.abs(work)
            pool = np.where(pool > _ZERO, pool, np.inf)
            i0, j0 = np.unravel_index(np.argmin(pool), work.shape)
            sign = 1.0 if work[i0, j0] > 0 else -1.0
            signed = work * sign
        omega = float(signed[i0, j0])

        # deterministic matrix: omega's own position in its column, the
        # largest same-sign entry elsewhere (magnitude >= omega by choice)
        targets = np.empty(dim, dtype=np.intp)
        for j in range(dim):
            col = signed[:, j]
            if j == j0:
                targets[j] = i0
            elif (col > _ZERO).any():
                targets[j] = int(np.argmax(col))
            else:
                targets[j] = j  # zero column: any deterministic choice works
        s = _deterministic_stochastic(targets, dim)
        work = work - sign * omega * s
        work[np.abs(work) < _ZERO] = 0.0
        coeffs.append(sign * omega)
        mats.append(s)

        if abs(colsum) > _SUM_TOL:
            # the proof's per-step invariants, cheap enough to keep on
            assert minimal_one_norm(work) <= gamma_before - omega + 1e-9
            assert int((np.abs(work) > _ZERO).sum()) < nnz_before

    if not coeffs:  # the zero matrix
        coeffs, mats = [0.0], [np.eye(dim)]
    coeff_arr = np.array(coeffs)
    norm = float(np.abs(coeff_arr).sum())
    if norm > target_norm + 1e-9:
        raise ModelError(f"greedy decomposition overshot the optimum: {norm} > {target_norm}")
    return StochasticDecomposition(coeff_arr, mats, norm)
