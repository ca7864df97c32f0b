"""Calibration input sets, simulated calibration counts, and model fitting.

A calibration round prepares a known basis state x, performs a noisy readout
and records the outcome y; m(y, x) counts the rounds per (input, outcome)
pair.  The fitters below recover the dense matrix (all inputs calibrated),
the per-qubit rates of the tensor-product model (marginal error frequencies),
or the full set of CTMP rates (matrix logarithms of conditional two-qubit
noise matrices).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .core import BitString, ShotSet, bits_to_indices
from .errors import CalibrationError, ModelError
from .noise import (CTMPGeneratorTerm, CTMPModel, FullNoiseMatrix, NoiseModel,
                    TPNoise, corrupt_shots)
from .rng import derive_seed, stream

SET_KINDS = ("weight1", "weight2", "hadamard", "custom")


@dataclass(frozen=True, eq=False)
class CalibrationSet:
    """An ordered set of distinct calibration input states."""

    n: int
    inputs: tuple[BitString, ...]
    kind: str = "custom"

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise CalibrationError(f"unknown calibration-set kind {self.kind!r}")
        if any(x.n != self.n for x in self.inputs):
            raise CalibrationError("all inputs must have length n")
        if len(set(self.inputs)) != len(self.inputs):
            raise CalibrationError("calibration inputs must be distinct")

    def bits(self) -> np.ndarray:
        return np.stack([x.bits() for x in self.inputs])


def make_calibration_set(kind: str, n: int) -> CalibrationSet:
    """Standard complete input sets.

    weight1: Hamming weight 0, 1 and n (|C| = n + 2).
    weight2: Hamming weight 0, 1, 2 (|C| = 1 + n + n(n-1)/2).
    hadamard: rows x^a with x^a_b = popcount(a & b) mod 2 for b = 1..n and
      a = 0 .. 2^p - 1, p minimal with n < 2^p; every two-bit pattern on
      every qubit pair is probed by exactly 2^(p-2) inputs.
    """
    if n < 2:
        raise CalibrationError(f"calibration sets need n >= 2, got n={n}")
    if kind == "weight1":
        inputs = [BitString(n, 0), BitString(n, (1 << n) - 1)]
        inputs += [BitString.zeros(n).flip(j) for j in range(1, n + 1)]
    elif kind == "weight2":
        inputs = [BitString(n, 0)]
        inputs += [BitString.zeros(n).flip(j) for j in range(1, n + 1)]
        inputs += [BitString.zeros(n).flip(j, k) for j, k in combinations(range(1, n + 1), 2)]
    elif kind == "hadamard":
        p = 1
        while n >= (1 << p):
            p += 1
        inputs = [BitString.from_bits([bin(a & b).count("1") & 1 for b in range(1, n + 1)])
                  for a in range(1 << p)]
    else:
        raise CalibrationError(f"cannot construct a set of kind {kind!r}")
    return CalibrationSet(n, tuple(inputs), kind)


def is_complete(cal_set: CalibrationSet) -> bool:
    """True iff every pair of qubits sees all four patterns 00/01/10/11
    across the input states."""
    bits = cal_set.bits()
    n = cal_set.n
    for a in range(n):
        for b in range(a + 1, n):
            patterns = set((bits[:, a] * 2 + bits[:, b]).tolist())
            if len(patterns) < 4:
                return False
    return True


def first_uncovered_pair(cal_set: CalibrationSet) -> tuple[int, int, str] | None:
    """The first (qubit_a, qubit_b, pattern) with no probing input, if any."""
    bits = cal_set.bits()
    n = cal_set.n
    for a in range(n):
        for b in range(a + 1, n):
            present = set((bits[:, a] * 2 + bits[:, b]).tolist())
            for pat in range(4):
                if pat not in present:
                    return (a + 1, b + 1, format(pat, "02b"))
    return None


class CalibrationData:
    """Outcome counts m(y, x) from n_cal rounds per calibration input."""

    def __init__(self, n: int, n_cal: int,
                 records: dict[BitString, dict[BitString, int]]):
        if n_cal < 1:
            raise CalibrationError("n_cal must be >= 1")
        for x, counts in records.items():
            if x.n != n:
                raise CalibrationError(f"input {x} has wrong length")
            total = 0
            for y, c in counts.items():
                if y.n != n or c < 0 or c != int(c):
                    raise CalibrationError(f"bad count {c} for ({y}, {x})")
                total += c
            if total != n_cal:
                raise CalibrationError(
                    f"counts for input {x} sum to {total}, expected n_cal={n_cal}")
        self.n = n
        self.n_cal = n_cal
        self.records = {x: dict(c) for x, c in records.items()}
        self._flat: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def inputs(self) -> list[BitString]:
        return list(self.records.keys())

    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x_bits, y_bits, counts) arrays over all observed (x, y) pairs."""
        if self._flat is None:
            xs, ys, cs = [], [], []
            for x, counts in self.records.items():
                xb = x.bits()
                for y, c in counts.items():
                    xs.append(xb)
                    ys.append(y.bits())
                    cs.append(c)
            self._flat = (np.stack(xs), np.stack(ys), np.array(cs, dtype=float))
        return self._flat


def simulate_calibration(model: NoiseModel, cal_set: CalibrationSet, n_cal: int,
                         rng) -> CalibrationData:
    """Run n_cal noisy readouts per input state and tally the outcomes.

    Inputs use independent streams derived from (seed, input index), so the
    result does not depend on evaluation order.
    """
    if model.n != cal_set.n:
        raise CalibrationError(f"model size {model.n} != set size {cal_set.n}")
    seed = derive_seed(rng)
    records: dict[BitString, dict[BitString, int]] = {}
    for i, x in enumerate(cal_set.inputs):
        shots = ShotSet(cal_set.n, np.tile(x.bits(), (n_cal, 1)))
        noisy = corrupt_shots(model, shots, stream(seed, i))
        idx, counts = np.unique(noisy.indices(), return_counts=True)
        records[x] = {BitString(cal_set.n, int(v)): int(c) for v, c in zip(idx, counts)}
    return CalibrationData(cal_set.n, n_cal, records)


# ---------------------------------------------------------------------------
# fitters


def fit_full(data: CalibrationData) -> FullNoiseMatrix:
    """Empirical dense noise matrix; requires every basis state calibrated."""
    n = data.n
    if n > 12:
        raise CalibrationError(f"full fit limited to n <= 12, got {n}")
    d = 1 << n
    have = {x.index for x in data.records}
    missing = sorted(set(range(d)) - have)
    if missing:
        raise CalibrationError(
            f"full fit needs all {d} inputs; missing column {missing[0]:0{n}b} "
            f"and {len(missing) - 1} more")
    a = np.zeros((d, d))
    for x, counts in data.records.items():
        for y, c in counts.items():
            a[y.index, x.index] = c / data.n_cal
    return FullNoiseMatrix(n, a)


def fit_tp(data: CalibrationData) -> TPNoise:
    """Per-qubit marginal error frequencies over all calibration rounds."""
    xb, yb, c = data.flat()
    n = data.n
    eps = np.zeros(n)
    eta = np.zeros(n)
    for j in range(n):
        zero_rounds = c[xb[:, j] == 0].sum()
        one_rounds = c[xb[:, j] == 1].sum()
        if zero_rounds == 0 or one_rounds == 0:
            raise CalibrationError(
                f"qubit {j + 1} has no calibration input with bit "
                f"{'0' if zero_rounds == 0 else '1'}")
        eps[j] = c[(xb[:, j] == 0) & (yb[:, j] == 1)].sum() / zero_rounds
        eta[j] = c[(xb[:, j] == 1) & (yb[:, j] == 0)].sum() / one_rounds
    return TPNoise(n, eps, eta)


@dataclass(frozen=True, eq=False)
class LocalNoiseMatrix:
    """Conditional 4x4 noise matrix on a qubit pair, basis {00,01,10,11} on
    (x_j, x_k), given that no other qubit misread."""

    pair: tuple[int, int]
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (4, 4):
            raise ModelError(f"local noise matrix must be 4x4, got {a.shape}")
        colsums = a.sum(axis=0)
        if np.abs(colsums - 1).max() > 1e-9:
            raise ModelError("local noise matrix columns must sum to 1")
        object.__setattr__(self, "a", a)


def _pair_tally(data: CalibrationData, j: int, k: int) -> np.ndarray:
    """Raw 4x4 counts on (x_j, x_k) -> (y_j, y_k) over rounds with no
    readout change outside {j, k}."""
    xb, yb, c = data.flat()
    diff = xb ^ yb
    outside_ok = (diff.sum(axis=1) - diff[:, j - 1] - diff[:, k - 1]) == 0
    vin = xb[:, j - 1] * 2 + xb[:, k - 1]
    wout = yb[:, j - 1] * 2 + yb[:, k - 1]
    tally = np.zeros((4, 4))
    np.add.at(tally, (wout[outside_ok], vin[outside_ok]), c[outside_ok])
    return tally


def fit_local(data: CalibrationData, j: int, k: int) -> LocalNoiseMatrix:
    """Conditional two-qubit noise matrix A(j, k) from the counts."""
    if j == k or not (1 <= j <= data.n) or not (1 <= k <= data.n):
        raise CalibrationError(f"bad qubit pair ({j}, {k})")
    tally = _pair_tally(data, j, k)
    denom = tally.sum(axis=0)
    for v in range(4):
        if denom[v] == 0:
            raise CalibrationError(
                f"no eligible calibration rounds for pair ({j}, {k}) with "
                f"input pattern {v:02b}; calibration set incomplete or n_cal too small")
    return LocalNoiseMatrix((j, k), tally / denom)


def principal_log(a: np.ndarray | LocalNoiseMatrix) -> np.ndarray:
    """Principal real matrix logarithm (log I = 0 branch).

    Uses eigendecomposition; falls back to the inverse-scaling-and-squaring
    routine in scipy for defective matrices.  Raises on singular input, on an
    eigenvalue on the closed negative real axis, and on imaginary residue
    above 1e-8.
    """
    if isinstance(a, LocalNoiseMatrix):
        a = a.a
    a = np.asarray(a, dtype=float)
    if np.allclose(a, np.eye(a.shape[0]), atol=1e-15):
        return np.zeros_like(a)
    evals, evecs = np.linalg.eig(a)
    if np.abs(evals).min() < 1e-14:
        raise ModelError("matrix is singular; no logarithm")
    neg_axis = (np.abs(evals.imag) < 1e-14) & (evals.real <= 0)
    if neg_axis.any():
        raise ModelError(
            f"eigenvalue {evals[neg_axis][0]} on the closed negative real axis; "
            "principal logarithm undefined")
    cond = np.linalg.cond(evecs)
    if np.isfinite(cond) and cond < 1e8:
        logm = evecs @ np.diag(np.log(evals.astype(complex))) @ np.linalg.inv(evecs)
    else:
        logm = scipy.linalg.logm(a)
    resid = float(np.abs(np.imag(logm)).max())
    if resid > 1e-8:
        raise ModelError(f"matrix logarithm has imaginary residue {resid:.2e}")
    return np.real(logm)


def _clip_generator(g: np.ndarray) -> np.ndarray:
    """Zero out negative off-diagonal elements (rates must be nonnegative)."""
    gp = g.copy()
    off = ~np.eye(g.shape[0], dtype=bool)
    gp[off & (gp < 0)] = 0.0
    return gp


def fit_ctmp(data: CalibrationData) -> CTMPModel:
    """CTMP rates from conditional two-qubit matrix logarithms.

    For each pair j < k the clipped generator G'(j, k) supplies the four
    two-qubit rates directly; single-qubit rates average the matching matrix
    elements over all pairs containing the qubit (each qubit appears in
    2(n-1) ordered slots).
    """
    n = data.n
    cal_set = CalibrationSet(n, tuple(data.records.keys()), "custom")
    if not is_complete(cal_set):
        gap = first_uncovered_pair(cal_set)
        raise CalibrationError(
            f"calibration set is not complete: qubit pair ({gap[0]}, {gap[1]}) "
            f"never sees pattern {gap[2]}")
    r01 = np.zeros(n)  # 0->1 accumulators
    r10 = np.zeros(n)
    terms: list[CTMPGeneratorTerm] = []
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            g = _clip_generator(principal_log(fit_local(data, j, k)))
            # basis {00,01,10,11} on (x_j, x_k)
            terms.append(CTMPGeneratorTerm("01->10", (j, k), max(g[2, 1], 0.0)))
            terms.append(CTMPGeneratorTerm("01->10", (k, j), max(g[1, 2], 0.0)))
            terms.append(CTMPGeneratorTerm("00->11", (j, k), max(g[3, 0], 0.0)))
            terms.append(CTMPGeneratorTerm("11->00", (j, k), max(g[0, 3], 0.0)))
            # single-qubit flips of j (k fixed) and of k (j fixed)
            r01[j - 1] += g[2, 0] + g[3, 1]
            r10[j - 1] += g[0, 2] + g[1, 3]
            r01[k - 1] += g[1, 0] + g[3, 2]
            r10[k - 1] += g[0, 1] + g[2, 3]
    scale = 1.0 / (2 * (n - 1))
    for j in range(1, n + 1):
        terms.append(CTMPGeneratorTerm("0->1", (j,), max(r01[j - 1] * scale, 0.0)))
        terms.append(CTMPGeneratorTerm("1->0", (j,), max(r10[j - 1] * scale, 0.0)))
    return CTMPModel(n, terms)
