"""Classical readout-noise models and their forward simulation.

Three parameterizations of the column-stochastic transition matrix A
(``A[y, x]`` = probability of reading y when the true outcome is x):

* :class:`TPNoise` -- independent per-qubit errors, a Kronecker product of
  2x2 stochastic factors with rates ``eps`` (0->1) and ``eta`` (1->0);
* :class:`CTMPModel` -- A = exp(G) where G is a sum of single- and two-bit
  flip generators with nonnegative rates (a continuous-time Markov process
  observed at unit time; rates absorb the time convention);
* :class:`FullNoiseMatrix` -- an explicit dense matrix, small n only.

Forward sampling of the CTMP model uses exact exponential clocks (Gillespie
simulation of the generator, no first-order approximation), so simulated
noisy shots are distributed exactly as columns of exp(G).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import BitString, ShotSet, indices_to_bits
from .errors import ModelError
from .rng import as_generator, stream

TERM_KINDS = ("0->1", "1->0", "01->10", "00->11", "11->00")
_SINGLE_KINDS = ("0->1", "1->0")
_UNORDERED_KINDS = ("00->11", "11->00")


@dataclass(frozen=True)
class CTMPGeneratorTerm:
    """One single- or two-bit readout-error generator with its rate.

    ``01->10`` acts on an ordered pair (j, k): the pattern x_j=0, x_k=1 flips
    to 1, 0.  ``00->11`` and ``11->00`` act on unordered pairs (stored with
    j < k).  Single-qubit kinds act on one qubit.
    """

    kind: str
    qubits: tuple[int, ...]
    rate: float

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ModelError(f"unknown generator kind {self.kind!r}")
        qs = tuple(int(q) for q in self.qubits)
        if self.kind in _SINGLE_KINDS:
            if len(qs) != 1:
                raise ModelError(f"{self.kind} acts on exactly one qubit, got {qs}")
        else:
            if len(qs) != 2 or qs[0] == qs[1]:
                raise ModelError(f"{self.kind} needs two distinct qubits, got {qs}")
            if self.kind in _UNORDERED_KINDS:
                qs = tuple(sorted(qs))
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ModelError(f"rate must be finite and >= 0, got {self.rate}")
        object.__setattr__(self, "qubits", qs)
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def key(self) -> tuple:
        return (self.kind, self.qubits)


@dataclass(frozen=True, eq=False)
class TPNoise:
    """Independent per-qubit readout noise: eps[j] = P(read 1 | true 0)."""

    n: int
    eps: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if eps.shape != (self.n,) or eta.shape != (self.n,):
            raise ModelError(f"need {self.n} rates per direction")
        if (eps < 0).any() or (eta < 0).any():
            raise ModelError("error rates must be >= 0")
        if (eps + eta >= 1).any():
            bad = int(np.argmax(eps + eta >= 1)) + 1
            raise ModelError(f"eps + eta must stay below 1 (qubit {bad})")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def uniform(cls, n: int, eps: float, eta: float | None = None) -> "TPNoise":
        eta = eps if eta is None else eta
        return cls(n, np.full(n, eps), np.full(n, eta))

    def factor(self, j: int) -> np.ndarray:
        """The 2x2 stochastic factor for qubit j (1-based)."""
        e, h = self.eps[j - 1], self.eta[j - 1]
        return np.array([[1 - e, h], [e, 1 - h]])


class CTMPModel:
    """Correlated Markovian readout noise A = exp(G).

    Immutable after construction.  The noise strength (and other derived
    quantities) are computed lazily and cached before the model is shared.
    """

    def __init__(self, n: int, terms):
        if n < 1:
            raise ModelError("need at least one qubit")
        terms = tuple(terms)
        seen = set()
        for t in terms:
            if not isinstance(t, CTMPGeneratorTerm):
                raise ModelError(f"not a generator term: {t!r}")
            if any(q < 1 or q > n for q in t.qubits):
                raise ModelError(f"term {t.key} out of range for n={n}")
            if t.key in seen:
                raise ModelError(f"duplicate generator term {t.key}")
            seen.add(t.key)
        self.n = n
        self.terms = terms
        self._build_arrays()
        self._gamma_cache: dict[str, float] = {}

    def _build_arrays(self):
        """Flat per-term arrays used by the vectorized samplers."""
        nt = len(self.terms)
        self._q1 = np.zeros(nt, dtype=np.intp)
        self._q2 = np.zeros(nt, dtype=np.intp)
        self._s1 = np.zeros(nt, dtype=np.uint8)
        self._s2 = np.zeros(nt, dtype=np.uint8)
        self._pair = np.zeros(nt, dtype=bool)
        self._rates = np.zeros(nt, dtype=float)
        for i, t in enumerate(self.terms):
            self._rates[i] = t.rate
            if t.kind in _SINGLE_KINDS:
                j = t.qubits[0] - 1
                self._q1[i] = self._q2[i] = j
                self._s1[i] = self._s2[i] = 0 if t.kind == "0->1" else 1
            else:
                j, k = t.qubits[0] - 1, t.qubits[1] - 1
                self._q1[i], self._q2[i] = j, k
                self._pair[i] = True
                if t.kind == "01->10":
                    self._s1[i], self._s2[i] = 0, 1
                elif t.kind == "00->11":
                    self._s1[i], self._s2[i] = 0, 0
                else:  # 11->00
                    self._s1[i], self._s2[i] = 1, 1
        self._cum_rates = np.cumsum(self._rates)
        self._total_rate = float(self._cum_rates[-1]) if nt else 0.0
        # Exit rate R(x) = sum of matching rates as a quadratic pseudo-boolean
        # function c0 + l.z + z'Qz (Q strictly upper triangular, 0-based).
        c0 = 0.0
        lin = np.zeros(self.n)
        quad = np.zeros((self.n, self.n))
        for t in self.terms:
            r = t.rate
            if t.kind == "0->1":
                j = t.qubits[0] - 1
                c0 += r
                lin[j] -= r
            elif t.kind == "1->0":
                lin[t.qubits[0] - 1] += r
            elif t.kind == "01->10":
                j, k = t.qubits[0] - 1, t.qubits[1] - 1
                lin[k] += r
                a, b = min(j, k), max(j, k)
                quad[a, b] -= r
            elif t.kind == "00->11":
                j, k = t.qubits[0] - 1, t.qubits[1] - 1
                c0 += r
                lin[j] -= r
                lin[k] -= r
                quad[j, k] += r
            else:  # 11->00
                j, k = t.qubits[0] - 1, t.qubits[1] - 1
                quad[j, k] += r
        self._pb = (c0, lin, quad)

    def exit_rates(self, bits: np.ndarray) -> np.ndarray:
        """R(x) = total rate of generators whose source pattern matches x,
        for every row of an (M, n) bit matrix."""
        c0, lin, quad = self._pb
        z = bits.astype(float)
        return c0 + z @ lin + np.einsum("ij,ij->i", z @ quad, z)

    def exit_rate(self, x: BitString) -> float:
        return float(self.exit_rates(x.bits()[None, :])[0])


@dataclass(frozen=True, eq=False)
class FullNoiseMatrix:
    """Dense column-stochastic noise matrix; n <= 12 enforced."""

    n: int
    a: np.ndarray

    def __post_init__(self):
        if self.n > 12:
            raise ModelError(f"dense noise matrices are limited to n <= 12, got {self.n}")
        a = np.asarray(self.a, dtype=float)
        d = 1 << self.n
        if a.shape != (d, d):
            raise ModelError(f"matrix must be {d}x{d}, got {a.shape}")
        if a.min() < -1e-9 or a.max() > 1 + 1e-9:
            raise ModelError("entries must lie in [0, 1]")
        colsums = a.sum(axis=0)
        if np.abs(colsums - 1).max() > 1e-9:
            raise ModelError("columns must sum to 1 within 1e-9")
        object.__setattr__(self, "a", np.clip(a, 0.0, 1.0))

    @classmethod
    def identity(cls, n: int) -> "FullNoiseMatrix":
        return cls(n, np.eye(1 << n))


NoiseModel = TPNoise | CTMPModel | FullNoiseMatrix


# ---------------------------------------------------------------------------
# forward sampling


def _tp_corrupt_bits(model: TPNoise, bits: np.ndarray, rng) -> np.ndarray:
    p = np.where(bits == 0, model.eps[None, :], model.eta[None, :])
    flips = rng.random(bits.shape) < p
    return bits ^ flips.astype(np.uint8)


def _choose_matching_terms(model: CTMPModel, bits: np.ndarray, rows: np.ndarray,
                           rng) -> np.ndarray:
    """For each row (known to have exit rate > 0) pick a generator term with
    probability proportional to its rate among the terms matching the row's
    current state.

    Rejection from the fixed rate table: propose term t with probability
    rate_t / total_rate, accept iff its source pattern matches.  Rows that
    survive many rounds (possible only for near-zero exit rates) fall back to
    an explicit scan over the matching terms.
    """
    chosen = np.empty(rows.size, dtype=np.intp)
    pos = np.arange(rows.size)
    pending = rows
    for _ in range(64):
        if pending.size == 0:
            return chosen
        u = rng.random(pending.size) * model._total_rate
        cand = np.searchsorted(model._cum_rates, u, side="right")
        cand = np.minimum(cand, len(model.terms) - 1)
        ok = (bits[pending, model._q1[cand]] == model._s1[cand]) \
            & (bits[pending, model._q2[cand]] == model._s2[cand])
        chosen[pos[ok]] = cand[ok]
        pending = pending[~ok]
        pos = pos[~ok]
    # stragglers: exact cumulative scan over matching rates
    match = (bits[pending][:, model._q1] == model._s1[None, :]) \
        & (bits[pending][:, model._q2] == model._s2[None, :])
    w = match * model._rates[None, :]
    cum = np.cumsum(w, axis=1)
    u = rng.random(pending.size) * cum[:, -1]
    chosen[pos] = (cum <= u[:, None]).sum(axis=1)
    return chosen


def _apply_terms(model: CTMPModel, bits: np.ndarray, rows: np.ndarray,
                 terms: np.ndarray) -> None:
    bits[rows, model._q1[terms]] ^= 1
    pairs = model._pair[terms]
    if pairs.any():
        bits[rows[pairs], model._q2[terms[pairs]]] ^= 1


def _ctmp_corrupt_bits(model: CTMPModel, bits: np.ndarray, rng) -> np.ndarray:
    """Exact Gillespie evolution of every row from time 0 to 1 under the
    generator: exponential waiting times with the state's exit rate, firing a
    matching term chosen proportionally to its rate."""
    bits = bits.copy()
    if not model.terms:
        return bits
    t = np.zeros(bits.shape[0])
    rows = np.arange(bits.shape[0])
    while rows.size:
        r = model.exit_rates(bits[rows])
        alive = r > 0
        rows, r = rows[alive], r[alive]
        if not rows.size:
            break
        t[rows] += rng.exponential(1.0, rows.size) / r
        fired = t[rows] <= 1.0
        rows = rows[fired]
        if rows.size:
            terms = _choose_matching_terms(model, bits, rows, rng)
            _apply_terms(model, bits, rows, terms)
    return bits


def _full_corrupt_indices(model: FullNoiseMatrix, idx: np.ndarray, rng) -> np.ndarray:
    cdf = np.cumsum(model.a, axis=0)
    out = np.empty_like(idx)
    for x in np.unique(idx):
        sel = idx == x
        out[sel] = np.searchsorted(cdf[:, x], rng.random(int(sel.sum())), side="right")
    return np.minimum(out, (1 << model.n) - 1)


def corrupt_shots(model: NoiseModel, shots: ShotSet, rng) -> ShotSet:
    """Push every shot through the noise channel (vectorized)."""
    rng = as_generator(rng)
    if isinstance(model, TPNoise):
        return ShotSet(model.n, _tp_corrupt_bits(model, shots.bits, rng))
    if isinstance(model, CTMPModel):
        return ShotSet(model.n, _ctmp_corrupt_bits(model, shots.bits, rng))
    if isinstance(model, FullNoiseMatrix):
        idx = _full_corrupt_indices(model, shots.indices(), rng)
        return ShotSet(model.n, indices_to_bits(idx, model.n))
    raise ModelError(f"unknown noise model type {type(model).__name__}")


def sample_noisy(model: NoiseModel, x: BitString, rng) -> BitString:
    """One noisy readout of the true outcome x: y ~ column x of A."""
    n = model.n
    if x.n != n:
        raise ModelError(f"bit string length {x.n} != model size {n}")
    noisy = corrupt_shots(model, ShotSet(n, x.bits()[None, :]), rng)
    return noisy[0]


# ---------------------------------------------------------------------------
# exact matrices


def _kron_chain(factors) -> np.ndarray:
    out = np.array([[1.0]])
    for f in factors:
        out = np.kron(out, f)
    return out


def sparse_generator(model: CTMPModel) -> sp.csr_matrix:
    """The 2^n x 2^n generator G as a sparse matrix (zero column sums)."""
    n = model.n
    d = 1 << n
    idx = np.arange(d)
    rows, cols, data = [], [], []
    for i, t in enumerate(model.terms):
        if t.rate == 0.0:
            continue
        shift1 = n - 1 - model._q1[i]
        mask = ((idx >> shift1) & 1) == model._s1[i]
        flip = 1 << shift1
        if model._pair[i]:
            shift2 = n - 1 - model._q2[i]
            mask &= ((idx >> shift2) & 1) == model._s2[i]
            flip |= 1 << shift2
        src = idx[mask]
        rows.append(src ^ flip)
        cols.append(src)
        data.append(np.full(src.size, t.rate))
        rows.append(src)
        cols.append(src)
        data.append(np.full(src.size, -t.rate))
    if not rows:
        return sp.csr_matrix((d, d))
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(d, d))


def _expm_taylor(g: sp.spmatrix) -> np.ndarray:
    """Dense exp(G) by scaling-and-squaring with a truncated Taylor series.

    The scaled norm is kept <= 0.5, where 20 Taylor terms leave a remainder
    below 1e-18; squaring then amplifies it by at most 2^s * exp(|G|),
    comfortably below the 1e-12 target for the rates seen here.
    """
    d = g.shape[0]
    norm1 = float(abs(g).sum(axis=0).max()) if g.nnz else 0.0
    if norm1 == 0.0:
        return np.eye(d)
    s = max(0, int(math.ceil(math.log2(norm1 / 0.5))))
    gs = g / (2.0 ** s)
    out = np.eye(d)
    term = np.eye(d)
    for p in range(1, 21):
        term = gs @ term / p
        out += term
    for _ in range(s):
        out = out @ out
    return out


def build_full_matrix(model: TPNoise | CTMPModel) -> FullNoiseMatrix:
    """Exact dense A for a TP (Kronecker product) or CTMP (matrix
    exponential) model; n <= 12."""
    if model.n > 12:
        raise ModelError(f"n={model.n} too large for a dense matrix (limit 12)")
    if isinstance(model, TPNoise):
        a = _kron_chain(model.factor(j) for j in range(1, model.n + 1))
        return FullNoiseMatrix(model.n, a)
    if isinstance(model, CTMPModel):
        return FullNoiseMatrix(model.n, _expm_taylor(sparse_generator(model)))
    raise ModelError(f"cannot build a dense matrix from {type(model).__name__}")


def tp_to_ctmp(model: TPNoise) -> CTMPModel:
    """Embed a TP model as a CTMP model with single-qubit generators only.

    Uses the closed-form 2x2 logarithm: with L = -log(1-eps-eta)/(eps+eta),
    the 0->1 and 1->0 rates are eps*L and eta*L.  Requires eps+eta < 1.
    """
    terms = []
    for j in range(1, model.n + 1):
        e, h = float(model.eps[j - 1]), float(model.eta[j - 1])
        if e + h == 0.0:
            continue
        scale = -math.log1p(-(e + h)) / (e + h)
        if e > 0:
            terms.append(CTMPGeneratorTerm("0->1", (j,), e * scale))
        if h > 0:
            terms.append(CTMPGeneratorTerm("1->0", (j,), h * scale))
    return CTMPModel(model.n, terms)


def tvd(a: FullNoiseMatrix, b: FullNoiseMatrix) -> float:
    """Total variation distance: worst column, half L1."""
    if a.n != b.n:
        raise ModelError(f"dimension mismatch: n={a.n} vs n={b.n}")
    return float(0.5 * np.abs(a.a - b.a).sum(axis=0).max())


# ---------------------------------------------------------------------------
# noise strength


@dataclass
class AnnealConfig:
    """Schedule for the simulated-annealing maximizer of R(x)."""

    restarts: int = 8
    sweeps: int = 20000
    t_start: float | None = None
    t_end_factor: float = 1e-3
    seed: int | None = None


def _exhaustive_strength(model: CTMPModel) -> float:
    n = model.n
    shifts = np.arange(n - 1, -1, -1)
    best = 0.0
    chunk = 1 << min(n, 18)
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        best = max(best, float(model.exit_rates(bits).max()))
    return best


def _anneal_strength(model: CTMPModel, cfg: AnnealConfig) -> float:
    if cfg.seed is None:
        raise ModelError("annealing needs an explicit seed in its config")
    n = model.n
    c0, lin, quad = model._pb
    qs = quad + quad.T
    # largest possible |delta R| of a single flip bounds the useful temperature
    t0 = cfg.t_start
    if t0 is None:
        t0 = float(np.abs(lin).max(initial=0.0) + np.abs(qs).sum(axis=1).max(initial=0.0))
        t0 = max(t0, 1e-12)
    t_end = t0 * cfg.t_end_factor
    rng = stream(cfg.seed, 0)
    chains = cfg.restarts
    z = rng.integers(0, 2, size=(chains, n)).astype(float)
    r = model.exit_rates(z.astype(np.uint8))
    best = float(r.max())
    rows = np.arange(chains)
    temps = t0 * (t_end / t0) ** (np.arange(cfg.sweeps) / max(cfg.sweeps - 1, 1))
    for temp in temps:
        for _ in range(n):
            j = rng.integers(0, n, size=chains)
            fields = lin[j] + np.einsum("cn,cn->c", z, qs[:, j].T)
            delta = (1.0 - 2.0 * z[rows, j]) * fields
            accept = delta > 0
            cold = ~accept
            if cold.any():
                accept[cold] = rng.random(int(cold.sum())) < np.exp(delta[cold] / temp)
            if accept.any():
                z[rows[accept], j[accept]] = 1.0 - z[rows[accept], j[accept]]
                r[accept] += delta[accept]
                best = max(best, float(r[accept].max()))
    return best


def noise_strength(model: CTMPModel, method: str = "exact",
                   config: AnnealConfig | None = None) -> float:
    """The maximum over bit strings of the exit rate R(x).

    ``exact`` enumerates all 2^n states (n <= 24); ``annealing`` runs a
    seeded multi-restart single-flip annealer and returns a lower bound.
    The result is cached on the model per method.
    """
    if method not in ("exact", "annealing"):
        raise ModelError(f"unknown method {method!r}")
    if method in model._gamma_cache:
        return model._gamma_cache[method]
    if not model.terms or model._total_rate == 0.0:
        gamma = 0.0
    elif method == "exact":
        if model.n > 24:
            raise ModelError(f"exact enumeration is limited to n <= 24, got {model.n}")
        gamma = _exhaustive_strength(model)
    else:
        gamma = _anneal_strength(model, config or AnnealConfig(seed=0))
    model._gamma_cache[method] = gamma
    return gamma


# ---------------------------------------------------------------------------
# uniformized Markov chain (the stochastic matrix I + G/gamma)


def markov_step_bits(model: CTMPModel, gamma: float, bits: np.ndarray,
                     rows: np.ndarray, rng) -> None:
    """Advance the given rows of a bit matrix by one step of the uniformized
    chain, in place: stay with probability 1 - R(x)/gamma, otherwise fire a
    matching generator term with probability rate/gamma."""
    r = model.exit_rates(bits[rows])
    rmax = float(r.max(initial=0.0))
    if rmax > gamma * (1 + 1e-9):
        raise ModelError(
            f"exit rate {rmax} exceeds gamma={gamma}; the cached noise "
            "strength is stale or underestimated")
    fire = rng.random(rows.size) * gamma < r
    frows = rows[fire]
    if frows.size:
        terms = _choose_matching_terms(model, bits, frows, rng)
        _apply_terms(model, bits, frows, terms)


def markov_step(model: CTMPModel, gamma: float, x: BitString, rng) -> BitString:
    """One transition of the uniformized chain from state x.

    Scans the model's terms linearly for matches (O(#terms)); raises if the
    supplied gamma is below the state's exit rate rather than clamping.
    """
    if x.n != model.n:
        raise ModelError(f"bit string length {x.n} != model size {model.n}")
    if gamma <= 0:
        raise ModelError("gamma must be positive (a model with no noise has no chain)")
    rng = as_generator(rng)
    xb = x.bits()
    matching = [t for i, t in enumerate(model.terms)
                if xb[model._q1[i]] == model._s1[i] and xb[model._q2[i]] == model._s2[i]]
    total = sum(t.rate for t in matching)
    if total > gamma * (1 + 1e-9):
        raise ModelError(
            f"exit rate {total} at {x} exceeds gamma={gamma}; refusing to clamp")
    u = rng.random() * gamma
    if u >= total:
        return x
    acc = 0.0
    for t in matching:
        acc += t.rate
        if u < acc:
            return x.flip(*t.qubits)
    return x.flip(*matching[-1].qubits)  # unreachable save for rounding


def markov_chain_batch(model: CTMPModel, gamma: float, bits: np.ndarray,
                       steps: np.ndarray, rng) -> np.ndarray:
    """Apply ``steps[i]`` uniformized-chain transitions to row i."""
    bits = bits.copy()
    kmax = int(steps.max(initial=0))
    for k in range(kmax):
        rows = np.nonzero(steps > k)[0]
        markov_step_bits(model, gamma, bits, rows, rng)
    return bits
