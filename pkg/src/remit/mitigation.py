"""Error-mitigated mean values of diagonal observables.

Given noisy shots s^1..s^M and a noise model A, the mitigated mean

    xi = (1/M) sum_i sum_x O(x) <x|A^-1|s^i>

is an unbiased estimator of the ideal mean with standard deviation at most
Gamma / sqrt(M), where Gamma is the maximum column 1-norm of A^-1.  Three
routes are implemented:

* ``mitigate_exact`` -- solve the linear system against the empirical
  outcome histogram (small n reference);
* ``mitigate_tp`` -- tensor-product noise; parity observables evaluate the
  per-qubit inverse factors exactly in O(nM), general observables run the
  per-qubit quasi-probability sampler;
* ``mitigate_ctmp`` -- sample the Poisson series of exp(-G): draw a shot, a
  Poisson(gamma) step count, walk the uniformized Markov chain that many
  steps, and reweight by e^(2*gamma) with alternating signs.

All samplers draw from counter-based per-chunk streams derived from
(seed, chunk index) and reduce chunk sums in fixed order, so results are
bit-identical for a given seed regardless of thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .core import (DiagonalObservable, ObservableLike, ShotSet,
                   eval_observable_bits, indices_to_bits, raw_mean)
from .decomp import minimal_one_norm
from .errors import ModelError
from .noise import CTMPModel, FullNoiseMatrix, TPNoise, markov_chain_batch, noise_strength
from .rng import derive_seed, stream

_CHUNK = 1 << 16

METHODS = ("exact", "tp-alg2", "ctmp-alg1", "raw")


@dataclass(frozen=True)
class MitigationResult:
    """A mitigated (or raw) mean value with its diagnostics.

    ``Gamma`` is the quasi-probability norm used by the exact/TP routes;
    ``gamma`` is the Markov noise strength used by the CTMP route.
    """

    xi: float
    std_err: float
    samples_used: int
    method: str
    gamma: float | None = None
    Gamma: float | None = None
    cond: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ModelError(f"unknown method tag {self.method!r}")
        if self.std_err < 0:
            raise ModelError("std_err must be >= 0")

    def to_json_dict(self) -> dict:
        out = {"xi": self.xi, "std_err": self.std_err,
               "samples_used": self.samples_used, "method": self.method}
        for key in ("gamma", "Gamma", "cond", "seed"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        return out


@dataclass(frozen=True)
class SamplerPlan:
    """Inner-sample budget for a target precision delta."""

    delta: float
    t: int
    c_norm: float

    @classmethod
    def for_norm(cls, delta: float, c_norm: float, t_override: int | None = None) -> "SamplerPlan":
        if delta <= 0:
            raise ModelError("delta must be positive")
        t = t_override if t_override is not None else math.ceil(4.0 * c_norm ** 2 / delta ** 2)
        return cls(delta, int(t), float(c_norm))


def gamma_tp(model: TPNoise) -> float:
    """Quasi-probability norm of the inverse tensor-product noise matrix:
    prod_j (1 + |eps_j - eta_j|) / (1 - eps_j - eta_j)."""
    denom = 1.0 - model.eps - model.eta
    if (denom <= 0).any():
        raise ModelError("eps + eta >= 1 on some qubit; inverse factor is singular")
    return float(np.prod((1.0 + np.abs(model.eps - model.eta)) / denom))


def required_shots(delta: float, gamma_cap: float) -> int:
    """Measurement budget 4 * Gamma^2 / delta^2 for precision delta."""
    if delta <= 0:
        raise ModelError("delta must be positive")
    if gamma_cap < 1:
        raise ModelError("Gamma is at least 1 for any stochastic matrix")
    return math.ceil(4.0 * gamma_cap ** 2 / delta ** 2)


def mitigate_raw(shots: ShotSet, obs: ObservableLike) -> MitigationResult:
    """Empirical mean with no mitigation (for baselines)."""
    vals = eval_observable_bits(obs, shots.bits)
    return MitigationResult(
        xi=float(vals.mean()),
        std_err=float(vals.std() / math.sqrt(shots.m)),
        samples_used=shots.m,
        method="raw")


# ---------------------------------------------------------------------------
# exact inversion


def _observable_vector(obs: ObservableLike, n: int) -> np.ndarray:
    basis = indices_to_bits(np.arange(1 << n), n)
    return eval_observable_bits(obs, basis)


def mitigate_exact(shots: ShotSet, a: FullNoiseMatrix, obs: ObservableLike) -> MitigationResult:
    """Mitigated mean by solving A w = histogram (A is never inverted for
    the estimate itself; Gamma uses the explicit inverse only for n <= 8,
    a 1-norm estimate of the inverse above that)."""
    n = a.n
    if shots.n != n:
        raise ModelError(f"shots have n={shots.n}, matrix has n={n}")
    d = 1 << n
    hist = np.bincount(shots.indices(), minlength=d) / shots.m
    try:
        w = np.linalg.solve(a.a, hist)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"noise matrix is singular: {exc}") from exc
    resid = float(np.abs(a.a @ w - hist).max())
    if resid > 1e-10:
        raise ModelError(f"linear solve residual {resid:.2e} exceeds 1e-10; "
                         "matrix is numerically singular")
    xi = float(_observable_vector(obs, n) @ w)
    if n <= 8:
        gamma_cap = minimal_one_norm(np.linalg.inv(a.a))
    else:
        lu = scipy.linalg.lu_factor(a.a)
        op = scipy.sparse.linalg.LinearOperator(
            (d, d),
            matvec=lambda v: scipy.linalg.lu_solve(lu, v),
            rmatvec=lambda v: scipy.linalg.lu_solve(lu, v, trans=1))
        gamma_cap = float(scipy.sparse.linalg.onenormest(op))
    cond = float(np.abs(a.a).sum(axis=0).max() * gamma_cap)
    return MitigationResult(
        xi=xi,
        std_err=gamma_cap / math.sqrt(shots.m),
        samples_used=shots.m,
        method="exact",
        Gamma=float(gamma_cap),
        cond=cond)


# ---------------------------------------------------------------------------
# tensor-product noise


def _tp_coeffs(model: TPNoise) -> tuple[np.ndarray, np.ndarray]:
    """Per-qubit quasi-probability coefficients of the inverse 2x2 factor
    over the four single-bit update maps (keep, flip, set-0, set-1)."""
    e, h = model.eps, model.eta
    denom = 2.0 * (1.0 - e - h)
    if (denom <= 0).any():
        raise ModelError("eps + eta >= 1 on some qubit; inverse factor is singular")
    c = np.stack([(2.0 - e - h) / denom,
                  -(e + h) / denom,
                  (e - h) / denom,
                  (h - e) / denom], axis=1)  # (n, 4)
    return c, np.abs(c).sum(axis=1)


def _mitigate_tp_parity(shots: ShotSet, model: TPNoise, obs: DiagonalObservable) -> MitigationResult:
    """Exact per-shot evaluation of the product-form mitigated mean for a
    signed parity observable; deterministic, O(|support| * M)."""
    cap = gamma_tp(model)
    if not obs.support:
        return MitigationResult(xi=float(obs.sign), std_err=0.0, samples_used=shots.m,
                                method="tp-alg2", Gamma=cap)
    cols = np.array([j - 1 for j in obs.support])
    e, h = model.eps[cols], model.eta[cols]
    denom = 1.0 - e - h
    # <e| Z A_j^-1 |b> for b = 0, 1
    f0 = (1.0 - h + e) / denom
    f1 = -(1.0 + h - e) / denom
    b = shots.bits[:, cols]
    factors = np.where(b == 0, f0[None, :], f1[None, :])
    vals = obs.sign * factors.prod(axis=1)
    return MitigationResult(
        xi=float(vals.mean()),
        std_err=float(vals.std() / math.sqrt(shots.m)),
        samples_used=shots.m,
        method="tp-alg2",
        Gamma=cap)


def _chunk_ranges(total: int):
    return [(c, min(_CHUNK, total - c * _CHUNK))
            for c in range((total + _CHUNK - 1) // _CHUNK)]


def _reduce_chunks(chunk_fn, total: int, threads: int) -> tuple[float, float]:
    """Sum (sum, sumsq) over chunks in fixed chunk order."""
    ranges = _chunk_ranges(total)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda cb: chunk_fn(*cb), ranges))
    else:
        parts = [chunk_fn(c, b) for c, b in ranges]
    s = 0.0
    s2 = 0.0
    for ps, ps2 in parts:
        s += ps
        s2 += ps2
    return s, s2


def mitigate_tp(shots: ShotSet, model: TPNoise, obs: ObservableLike, delta: float = 0.05,
                rng=None, t_override: int | None = None, threads: int = 1) -> MitigationResult:
    """Mitigated mean under tensor-product noise.

    Signed parity observables evaluate the inverse factors exactly per shot
    (no inner sampling).  Other observables run the per-qubit
    quasi-probability sampler with T = 4 * Gamma^2 / delta^2 inner samples:
    |xi' - xi| <= delta with probability >= 2/3.
    """
    if shots.n != model.n:
        raise ModelError(f"shots have n={shots.n}, model has n={model.n}")
    cap = gamma_tp(model)
    if cap == 1.0:  # noiseless: the inverse is the identity
        res = mitigate_raw(shots, obs)
        return MitigationResult(xi=res.xi, std_err=res.std_err, samples_used=res.samples_used,
                                method="tp-alg2", Gamma=1.0)
    if isinstance(obs, DiagonalObservable):
        return _mitigate_tp_parity(shots, model, obs)

    seed = derive_seed(rng)
    plan = SamplerPlan.for_norm(delta, cap, t_override)
    coeffs, col_norms = _tp_coeffs(model)
    cdf = np.cumsum(np.abs(coeffs) / col_norms[:, None], axis=1)  # (n, 4)
    neg = coeffs < 0  # only the flip map can carry a negative weight
    n = model.n

    def chunk_fn(c: int, b: int) -> tuple[float, float]:
        g = stream(seed, c)
        rows = g.integers(0, shots.m, size=b)
        bits = shots.bits[rows]
        u = g.random((b, n))
        alpha = (u[:, :, None] > cdf[None, :, :]).sum(axis=2)
        out = np.where(alpha == 0, bits,
                       np.where(alpha == 1, 1 - bits,
                                np.where(alpha == 2, 0, 1))).astype(np.uint8)
        sign_par = neg[np.arange(n)[None, :], alpha].sum(axis=1) & 1
        vals = (1.0 - 2.0 * sign_par) * eval_observable_bits(obs, out)
        return float(vals.sum()), float((vals ** 2).sum())

    s, s2 = _reduce_chunks(chunk_fn, plan.t, threads)
    mean = s / plan.t
    var = max(s2 / plan.t - mean ** 2, 0.0)
    return MitigationResult(
        xi=float(cap * mean),
        std_err=float(cap * math.sqrt(var / plan.t)),
        samples_used=plan.t,
        method="tp-alg2",
        Gamma=cap,
        seed=seed)


# ---------------------------------------------------------------------------
# CTMP noise


def _poisson_cdf(lam: float) -> np.ndarray:
    """Exact CDF table for inversion sampling (no normal approximation)."""
    if lam > 64:
        raise ModelError(f"Poisson mean {lam} out of the supported range")
    terms = [math.exp(-lam)]
    k = 0
    while (terms[-1] > 1e-18 or k < lam) and k < 4096:
        k += 1
        terms.append(terms[-1] * lam / k)
    cdf = np.cumsum(terms)
    cdf[-1] = 1.0
    return cdf


def _resolve_gamma(model: CTMPModel, gamma: float | None, gamma_margin: float) -> float:
    if gamma is not None:
        if gamma < 0:
            raise ModelError("gamma must be >= 0")
        return float(gamma)
    if "exact" in model._gamma_cache:
        return model._gamma_cache["exact"]
    if "annealing" in model._gamma_cache:
        # annealing lower-bounds the strength; pad it before trusting it
        return model._gamma_cache["annealing"] * gamma_margin
    if model.n <= 24:
        return noise_strength(model, "exact")
    raise ModelError(
        "no cached noise strength for n > 24; run noise_strength(model, "
        "'annealing', config) first or pass gamma explicitly")


def mitigate_ctmp(shots: ShotSet, model: CTMPModel, obs: ObservableLike,
                  delta: float = 0.05, rng=None, t_override: int | None = None,
                  gamma: float | None = None, gamma_margin: float = 1.05,
                  threads: int = 1) -> MitigationResult:
    """Mitigated mean under CTMP noise via the Poisson series of exp(-G).

    Per inner sample: pick a shot uniformly, draw alpha ~ Poisson(gamma),
    advance the shot alpha steps of the uniformized Markov chain, accumulate
    (-1)^alpha O(x); the e^(2*gamma)-scaled mean estimates xi with
    |xi' - xi| <= delta with probability >= 2/3 (T = 4 e^(4*gamma) / delta^2).
    Any gamma >= the true noise strength is valid; annealing estimates are
    padded by ``gamma_margin``.
    """
    if shots.n != model.n:
        raise ModelError(f"shots have n={shots.n}, model has n={model.n}")
    g = _resolve_gamma(model, gamma, gamma_margin)
    if g == 0.0:
        res = mitigate_raw(shots, obs)
        return MitigationResult(xi=res.xi, std_err=res.std_err, samples_used=res.samples_used,
                                method="exact", gamma=0.0, Gamma=1.0)
    seed = derive_seed(rng)
    c_norm = math.exp(2.0 * g)
    plan = SamplerPlan.for_norm(delta, c_norm, t_override)
    cdf = _poisson_cdf(g)

    def chunk_fn(c: int, b: int) -> tuple[float, float]:
        gen = stream(seed, c)
        rows = gen.integers(0, shots.m, size=b)
        alpha = np.searchsorted(cdf, gen.random(b), side="right")
        bits = markov_chain_batch(model, g, shots.bits[rows], alpha, gen)
        vals = (1.0 - 2.0 * (alpha & 1)) * eval_observable_bits(obs, bits)
        return float(vals.sum()), float((vals ** 2).sum())

    s, s2 = _reduce_chunks(chunk_fn, plan.t, threads)
    mean = s / plan.t
    var = max(s2 / plan.t - mean ** 2, 0.0)
    return MitigationResult(
        xi=float(c_norm * mean),
        std_err=float(c_norm * math.sqrt(var / plan.t)),
        samples_used=plan.t,
        method="ctmp-alg1",
        gamma=g,
        seed=seed)


# ---------------------------------------------------------------------------
# planning


def overhead_report(model, delta: float = 0.1) -> dict:
    """Sampling-overhead diagnostics: the quasi-probability norm, the
    measurement budget M(delta) and the post-processing budget T(delta)."""
    if isinstance(model, TPNoise):
        cap = gamma_tp(model)
        out = {"kind": "tp", "Gamma": cap, "c_norm": cap}
    elif isinstance(model, CTMPModel):
        g = _resolve_gamma(model, None, 1.0)
        c_norm = math.exp(2.0 * g)
        out = {"kind": "ctmp", "gamma": g, "c_norm": c_norm, "Gamma": c_norm}
        cap = c_norm
    elif isinstance(model, FullNoiseMatrix):
        cap = minimal_one_norm(np.linalg.inv(model.a))
        out = {"kind": "full", "Gamma": cap, "c_norm": cap}
    else:
        raise ModelError(f"unknown model type {type(model).__name__}")
    out["overhead"] = out["c_norm"] ** 2
    out["delta"] = delta
    out["M"] = required_shots(delta, max(cap, 1.0))
    out["T"] = SamplerPlan.for_norm(delta, out["c_norm"]).t
    return out
