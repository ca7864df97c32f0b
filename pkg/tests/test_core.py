import numpy as np
import pytest

from remit.core import (BitString, DiagonalObservable, ProbVector, ShotSet,
                        bits_to_indices, eval_observable, indices_to_bits,
                        raw_mean)


def test_bitstring_roundtrips():
    x = BitString.from_str("0101")
    assert x.n == 4 and x.value == 5 and str(x) == "0101"
    assert x.bit(1) == 0 and x.bit(2) == 1 and x.bit(4) == 1
    assert str(x.flip(1)) == "1101"
    assert x.weight() == 2
    assert BitString.from_bits([0, 1, 0, 1]) == x
    assert x.index == int("0101", 2)
    with pytest.raises(ValueError):
        BitString.from_str("012")
    with pytest.raises(IndexError):
        x.bit(5)


def test_index_bit_matrix_helpers():
    idx = np.array([0, 5, 7])
    bits = indices_to_bits(idx, 3)
    assert bits.tolist() == [[0, 0, 0], [1, 0, 1], [1, 1, 1]]
    assert bits_to_indices(bits).tolist() == [0, 5, 7]


def test_shotset_basics():
    shots = ShotSet.from_strings(["01", "11", "01"])
    assert shots.m == 3 and shots.n == 2
    assert [str(s) for s in shots] == ["01", "11", "01"]  # order preserved
    with pytest.raises(ValueError):
        ShotSet.from_strings([])
    with pytest.raises(ValueError):
        ShotSet.from_strings(["01", "011"])
    with pytest.raises(ValueError):
        shots.bits[0, 0] = 1  # frozen


def test_eval_observable_examples():
    z1 = DiagonalObservable((1,))
    assert eval_observable(z1, BitString.from_str("0")) == 1.0
    assert eval_observable(DiagonalObservable((1, 2)), BitString.from_str("01")) == -1.0
    assert eval_observable(DiagonalObservable((1,), sign=-1), BitString.from_str("1")) == 1.0
    with pytest.raises(IndexError):
        eval_observable(DiagonalObservable((3,)), BitString.from_str("01"))


def test_eval_bits_matches_scalar():
    rng = np.random.default_rng(0)
    obs = DiagonalObservable((1, 3, 4), sign=-1)
    bits = rng.integers(0, 2, size=(50, 5)).astype(np.uint8)
    batch = obs.eval_bits(bits)
    scalar = [obs.eval(BitString.from_bits(row)) for row in bits]
    assert np.array_equal(batch, scalar)


def test_raw_mean_examples():
    z1 = DiagonalObservable((1,))
    assert raw_mean(ShotSet.from_strings(["00"] * 4), z1) == 1.0
    assert raw_mean(ShotSet.from_strings(["0", "1"]), z1) == 0.0
    # uniform outcomes of the 2-qubit graph state: parity averages to zero
    shots = ShotSet.from_strings(["00", "01", "10", "11"])
    assert raw_mean(shots, DiagonalObservable((1, 2))) == 0.0


def test_raw_mean_permutation_invariant():
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, size=(200, 4)).astype(np.uint8)
    obs = DiagonalObservable((2, 4))
    base = raw_mean(ShotSet(4, bits), obs)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(200)
        assert raw_mean(ShotSet(4, bits[perm]), obs) == pytest.approx(base, abs=1e-12)


def test_probvector_validation_and_expectation():
    with pytest.raises(ValueError):
        ProbVector(1, {BitString.from_str("0"): 0.5})  # does not sum to 1
    with pytest.raises(ValueError):
        ProbVector(1, {BitString.from_str("0"): 1.5, BitString.from_str("1"): -0.5})
    p = ProbVector.from_dense(2, np.array([0.5, 0.25, 0.25, 0.0]))
    assert p.expectation(DiagonalObservable((2,))) == pytest.approx(0.5)
    # |sum p(x) O(x)| <= 1 for random distributions
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = ProbVector.from_dense(3, rng.dirichlet(np.ones(8)))
        obs = DiagonalObservable(tuple(np.nonzero(rng.integers(0, 2, 3))[0] + 1) or (1,))
        assert abs(q.expectation(obs)) <= 1.0 + 1e-12


def test_probvector_sampling_frequencies():
    p = ProbVector.from_dense(2, np.array([0.7, 0.1, 0.0, 0.2]))
    shots = p.sample(100_000, np.random.default_rng(5))
    freq = np.bincount(shots.indices(), minlength=4) / shots.m
    band = 4 * np.sqrt(p.dense() * (1 - p.dense()) / shots.m)
    assert (np.abs(freq - p.dense()) <= band + 1e-12).all()
