import math

import numpy as np
import pytest
import scipy.linalg

from remit.core import BitString, ShotSet
from remit.errors import ModelError
from remit.noise import (AnnealConfig, CTMPGeneratorTerm, CTMPModel,
                         FullNoiseMatrix, TPNoise, build_full_matrix,
                         corrupt_shots, markov_chain_batch, markov_step,
                         noise_strength, sample_noisy, sparse_generator,
                         tp_to_ctmp, tvd)


def random_ctmp(n, rng, max_single=0.08, max_pair=0.04, all_terms=True):
    terms = []
    for j in range(1, n + 1):
        terms.append(CTMPGeneratorTerm("0->1", (j,), rng.uniform(0, max_single)))
        terms.append(CTMPGeneratorTerm("1->0", (j,), rng.uniform(0, max_single)))
    if all_terms:
        for j in range(1, n + 1):
            for k in range(j + 1, n + 1):
                terms.append(CTMPGeneratorTerm("01->10", (j, k), rng.uniform(0, max_pair)))
                terms.append(CTMPGeneratorTerm("01->10", (k, j), rng.uniform(0, max_pair)))
                terms.append(CTMPGeneratorTerm("00->11", (j, k), rng.uniform(0, max_pair)))
                terms.append(CTMPGeneratorTerm("11->00", (j, k), rng.uniform(0, max_pair)))
    return CTMPModel(n, terms)


# ---------------------------------------------------------------------------
# model construction


def test_term_validation():
    with pytest.raises(ModelError):
        CTMPGeneratorTerm("0->1", (1, 2), 0.1)
    with pytest.raises(ModelError):
        CTMPGeneratorTerm("01->10", (2, 2), 0.1)
    with pytest.raises(ModelError):
        CTMPGeneratorTerm("0->1", (1,), -0.1)
    # unordered kinds canonicalize; duplicates are rejected, not merged
    a = CTMPGeneratorTerm("00->11", (3, 1), 0.1)
    assert a.qubits == (1, 3)
    with pytest.raises(ModelError):
        CTMPModel(3, [a, CTMPGeneratorTerm("00->11", (1, 3), 0.2)])
    # ordered pairs are distinct terms
    CTMPModel(3, [CTMPGeneratorTerm("01->10", (1, 3), 0.1),
                  CTMPGeneratorTerm("01->10", (3, 1), 0.2)])


def test_tp_validation():
    with pytest.raises(ModelError):
        TPNoise(2, np.array([0.6, 0.1]), np.array([0.5, 0.1]))
    TPNoise(2, np.array([0.6, 0.1]), np.array([0.39, 0.1]))


def test_full_matrix_validation():
    with pytest.raises(ModelError):
        FullNoiseMatrix(1, np.array([[0.9, 0.2], [0.2, 0.8]]))  # column sums
    with pytest.raises(ModelError):
        FullNoiseMatrix(13, np.eye(2))


# ---------------------------------------------------------------------------
# exact matrices


def test_build_full_tp_paper_matrix():
    a = build_full_matrix(TPNoise(1, np.array([0.1]), np.array([0.2])))
    assert np.allclose(a.a, [[0.9, 0.2], [0.1, 0.8]], atol=1e-15)


def test_build_full_ctmp_closed_forms():
    assert np.allclose(build_full_matrix(CTMPModel(2, [])).a, np.eye(4))
    r = 0.05
    a = build_full_matrix(CTMPModel(1, [CTMPGeneratorTerm("0->1", (1,), r)]))
    expected = np.array([[math.exp(-r), 0.0], [1 - math.exp(-r), 1.0]])
    assert np.abs(a.a - expected).max() < 1e-14
    # the derived transition probability 1 - e^(-0.05)
    assert a.a[1, 0] == pytest.approx(0.04877, abs=5e-6)


def test_column_sums_property():
    rng = np.random.default_rng(0)
    for trial in range(50):
        n = int(rng.integers(1, 6))
        model = random_ctmp(n, rng)
        a = build_full_matrix(model).a
        assert np.abs(a.sum(axis=0) - 1).max() < 1e-9
    for trial in range(50):
        n = int(rng.integers(1, 7))
        tp = TPNoise(n, rng.uniform(0, 0.4, n), rng.uniform(0, 0.4, n))
        a = build_full_matrix(tp).a
        assert np.abs(a.sum(axis=0) - 1).max() < 1e-9


def test_expm_matches_scipy():
    rng = np.random.default_rng(42)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        model = random_ctmp(n, rng)
        g = sparse_generator(model).toarray()
        assert np.abs(build_full_matrix(model).a - scipy.linalg.expm(g)).max() < 1e-12


def test_tp_embedding_matches_kron():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 7))
        eps, eta = rng.uniform(0, 0.3, n), rng.uniform(0, 0.3, n)
        tp = TPNoise(n, eps, eta)
        assert np.abs(build_full_matrix(tp_to_ctmp(tp)).a
                      - build_full_matrix(tp).a).max() < 1e-8


# ---------------------------------------------------------------------------
# forward sampling


def test_sample_noisy_identity_and_length_check():
    tp = TPNoise.uniform(3, 0.0)
    x = BitString.from_str("101")
    assert sample_noisy(tp, x, 1) == x
    with pytest.raises(ModelError):
        sample_noisy(tp, BitString.from_str("10"), 1)


def test_sample_noisy_full_matrix_column():
    a = FullNoiseMatrix(1, np.array([[0.9, 0.2], [0.1, 0.8]]))
    rng = np.random.default_rng(0)
    shots = corrupt_shots(a, ShotSet(1, np.zeros((50_000, 1), np.uint8)), rng)
    freq = shots.bits.mean()
    assert abs(freq - 0.1) < 4 * math.sqrt(0.1 * 0.9 / 50_000)


@pytest.mark.parametrize("seed", range(6))
def test_ctmp_sampling_matches_matrix_column(seed):
    """Empirical Gillespie frequencies against the independent matrix
    exponential, per entry, 4-sigma binomial bands."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    model = random_ctmp(n, rng)
    a = build_full_matrix(model).a
    x = int(rng.integers(0, 1 << n))
    m = 100_000
    col = np.zeros((m, n), dtype=np.uint8)
    col[:] = [(x >> (n - j)) & 1 for j in range(1, n + 1)]
    out = corrupt_shots(model, ShotSet(n, col), rng)
    freq = np.bincount(out.indices(), minlength=1 << n) / m
    band = 4 * np.sqrt(a[:, x] * (1 - a[:, x]) / m) + 1e-9
    assert (np.abs(freq - a[:, x]) <= band).all()


def test_tp_sampling_matches_matrix_column():
    tp = TPNoise(2, np.array([0.1, 0.05]), np.array([0.2, 0.15]))
    a = build_full_matrix(tp).a
    m = 100_000
    shots = corrupt_shots(tp, ShotSet(2, np.tile([0, 1], (m, 1)).astype(np.uint8)),
                          np.random.default_rng(3))
    freq = np.bincount(shots.indices(), minlength=4) / m
    band = 4 * np.sqrt(a[:, 1] * (1 - a[:, 1]) / m) + 1e-9
    assert (np.abs(freq - a[:, 1]) <= band).all()


# ---------------------------------------------------------------------------
# noise strength


def test_noise_strength_examples():
    assert noise_strength(CTMPModel(3, [])) == 0.0
    m = CTMPModel(1, [CTMPGeneratorTerm("0->1", (1,), 0.02),
                      CTMPGeneratorTerm("1->0", (1,), 0.05)])
    assert noise_strength(m) == pytest.approx(0.05)
    # per-qubit embedded TP rates: eps * (-log(1-eps-eta) / (eps+eta))
    tp10 = tp_to_ctmp(TPNoise.uniform(10, 0.05))
    assert noise_strength(tp10) == pytest.approx(0.52680, abs=1e-5)


def test_noise_strength_is_maximum():
    rng = np.random.default_rng(11)
    model = random_ctmp(5, rng)
    gamma = noise_strength(model)
    bits = rng.integers(0, 2, size=(1000, 5)).astype(np.uint8)
    assert (model.exit_rates(bits) <= gamma + 1e-12).all()


def test_annealing_matches_exact():
    rng = np.random.default_rng(5)
    for seed in range(5):
        n = int(rng.integers(4, 17))
        model = random_ctmp(n, rng, all_terms=n <= 10)
        exact = noise_strength(model, "exact")
        fresh = CTMPModel(model.n, model.terms)  # avoid the per-model cache
        ann = noise_strength(fresh, "annealing",
                             AnnealConfig(restarts=8, sweeps=400, seed=seed))
        assert ann == pytest.approx(exact, rel=1e-12)


def test_annealing_requires_seed():
    model = random_ctmp(3, np.random.default_rng(0))
    with pytest.raises(ModelError):
        noise_strength(model, "annealing", AnnealConfig(seed=None))


# ---------------------------------------------------------------------------
# uniformized chain


def test_markov_step_forced_and_stay():
    r = 0.05
    m = CTMPModel(1, [CTMPGeneratorTerm("0->1", (1,), r)])
    rng = np.random.default_rng(0)
    # from 0 the only column entry is the flip; from 1 nothing matches
    assert str(markov_step(m, r, BitString.from_str("0"), rng)) == "1"
    assert str(markov_step(m, r, BitString.from_str("1"), rng)) == "1"


def test_markov_step_pair_columns():
    r = 0.03
    m = CTMPModel(2, [CTMPGeneratorTerm("01->10", (1, 2), r)])
    rng = np.random.default_rng(1)
    assert str(markov_step(m, r, BitString.from_str("01"), rng)) == "10"
    assert str(markov_step(m, r, BitString.from_str("00"), rng)) == "00"


def test_markov_step_rejects_stale_gamma():
    m = CTMPModel(1, [CTMPGeneratorTerm("0->1", (1,), 0.4)])
    with pytest.raises(ModelError):
        markov_step(m, 0.2, BitString.from_str("0"), np.random.default_rng(0))
    with pytest.raises(ModelError):
        markov_chain_batch(m, 0.2, np.zeros((4, 1), np.uint8),
                           np.ones(4, dtype=int), np.random.default_rng(0))


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_markov_chain_matches_dense_power(alpha):
    """Histogram of alpha chained steps reproduces the corresponding column
    of the dense chain matrix power."""
    rng = np.random.default_rng(alpha)
    n = 4
    model = random_ctmp(n, rng)
    gamma = noise_strength(model)
    b = np.eye(1 << n) + sparse_generator(model).toarray() / gamma
    x = int(rng.integers(0, 1 << n))
    # clip away 1e-18-scale negative float dust before the binomial band
    target = np.clip(np.linalg.matrix_power(b, alpha)[:, x], 0.0, 1.0)
    m = 60_000
    bits = np.tile([(x >> (n - j)) & 1 for j in range(1, n + 1)], (m, 1)).astype(np.uint8)
    out = markov_chain_batch(model, gamma, bits, np.full(m, alpha), rng)
    freq = np.bincount(out @ (1 << np.arange(n - 1, -1, -1)), minlength=1 << n) / m
    band = 4 * np.sqrt(target * (1 - target) / m) + 1e-9
    assert (np.abs(freq - target) <= band).all()


def test_scalar_markov_step_distribution():
    rng = np.random.default_rng(9)
    model = random_ctmp(3, rng)
    gamma = noise_strength(model)
    b = np.eye(8) + sparse_generator(model).toarray() / gamma
    col = np.clip(b[:, int("011", 2)], 0.0, 1.0)
    x = BitString.from_str("011")
    m = 30_000
    counts = np.zeros(8)
    for _ in range(m):
        counts[markov_step(model, gamma, x, rng).index] += 1
    freq = counts / m
    band = 4 * np.sqrt(col * (1 - col) / m) + 1e-9
    assert (np.abs(freq - col) <= band).all()


# ---------------------------------------------------------------------------
# TVD


def test_tvd_examples():
    i2 = FullNoiseMatrix(1, np.eye(2))
    assert tvd(i2, i2) == 0.0
    leaky = FullNoiseMatrix(1, np.array([[0.9, 0.0], [0.1, 1.0]]))
    assert tvd(i2, leaky) == pytest.approx(0.1)
    swap = FullNoiseMatrix(1, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert tvd(i2, swap) == 1.0
    with pytest.raises(ModelError):
        tvd(i2, FullNoiseMatrix(2, np.eye(4)))
