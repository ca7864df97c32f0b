import math

import numpy as np
import pytest

from remit.calibration import (CalibrationData, CalibrationSet, fit_ctmp,
                               fit_full, fit_local, fit_tp,
                               first_uncovered_pair, is_complete,
                               make_calibration_set, principal_log,
                               simulate_calibration)
from remit.core import BitString, ShotSet
from remit.errors import CalibrationError, ModelError
from remit.noise import (CTMPGeneratorTerm, CTMPModel, FullNoiseMatrix,
                         TPNoise, build_full_matrix, sparse_generator)


def bs(s):
    return BitString.from_str(s)


def all_inputs(n):
    return CalibrationSet(n, tuple(BitString(n, v) for v in range(1 << n)), "custom")


# ---------------------------------------------------------------------------
# input sets


def test_weight1_set_matches_construction():
    c = make_calibration_set("weight1", 4)
    assert [str(x) for x in c.inputs] == ["0000", "1111", "1000", "0100", "0010", "0001"]
    assert len(c.inputs) == 6


def test_weight2_set_size():
    c = make_calibration_set("weight2", 4)
    assert len(c.inputs) == 1 + 4 + 6
    assert sorted({x.weight() for x in c.inputs}) == [0, 1, 2]


def test_hadamard_set_size_and_coverage():
    c = make_calibration_set("hadamard", 4)  # p = 3
    assert len(c.inputs) == 8
    bits = c.bits()
    # every pair pattern probed by exactly 2^(p-2) inputs
    for a in range(4):
        for b in range(a + 1, 4):
            counts = np.bincount(bits[:, a] * 2 + bits[:, b], minlength=4)
            assert (counts == 2).all()


def test_constructed_sets_complete():
    for n in range(2, 31):
        for kind in ("weight1", "weight2", "hadamard"):
            assert is_complete(make_calibration_set(kind, n)), (kind, n)


def test_incomplete_set_detected():
    c = CalibrationSet(3, (bs("000"), bs("111")))
    assert not is_complete(c)
    assert first_uncovered_pair(c) == (1, 2, "01")
    with pytest.raises(CalibrationError):
        make_calibration_set("weight1", 1)


def test_set_validation():
    with pytest.raises(CalibrationError):
        CalibrationSet(2, (bs("00"), bs("00")))
    with pytest.raises(CalibrationError):
        CalibrationSet(2, (bs("00"), bs("000")))


# ---------------------------------------------------------------------------
# simulated calibration


def test_simulate_identity_model():
    tp = TPNoise.uniform(3, 0.0)
    data = simulate_calibration(tp, make_calibration_set("weight1", 3), 500, 1)
    for x, counts in data.records.items():
        assert counts == {x: 500}


def test_simulate_tp_binomial_band():
    tp = TPNoise(1, np.array([0.1]), np.array([0.0]))
    cal_set = CalibrationSet(1, (bs("0"),))
    data = simulate_calibration(tp, cal_set, 100_000, 7)
    frac = data.records[bs("0")].get(bs("1"), 0) / data.n_cal
    assert abs(frac - 0.1) < 4 * math.sqrt(0.1 * 0.9 / 100_000)


def test_simulate_ctmp_single_term():
    m = CTMPModel(1, [CTMPGeneratorTerm("0->1", (1,), 0.05)])
    data = simulate_calibration(m, CalibrationSet(1, (bs("0"),)), 100_000, 3)
    frac = data.records[bs("0")].get(bs("1"), 0) / data.n_cal
    p = 1 - math.exp(-0.05)
    assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / 100_000)


def test_calibration_data_validation():
    with pytest.raises(CalibrationError):
        CalibrationData(1, 10, {bs("0"): {bs("0"): 9}})  # wrong total
    with pytest.raises(CalibrationError):
        CalibrationData(1, 10, {bs("0"): {bs("0"): 11, bs("1"): -1}})


# ---------------------------------------------------------------------------
# fit_full


def test_fit_full_example_counts():
    data = CalibrationData(1, 1000, {
        bs("0"): {bs("0"): 900, bs("1"): 100},
        bs("1"): {bs("0"): 200, bs("1"): 800},
    })
    assert np.allclose(fit_full(data).a, [[0.9, 0.2], [0.1, 0.8]])


def test_fit_full_identity_and_uniform():
    ident = CalibrationData(1, 10, {bs("0"): {bs("0"): 10}, bs("1"): {bs("1"): 10}})
    assert np.allclose(fit_full(ident).a, np.eye(2))
    uni = CalibrationData(1, 10, {bs("0"): {bs("0"): 5, bs("1"): 5},
                                  bs("1"): {bs("0"): 5, bs("1"): 5}})
    assert np.allclose(fit_full(uni).a, 0.5 * np.ones((2, 2)))


def test_fit_full_missing_column():
    with pytest.raises(CalibrationError, match="missing column"):
        fit_full(CalibrationData(2, 5, {bs("00"): {bs("00"): 5}}))


# ---------------------------------------------------------------------------
# fit_tp


def test_fit_tp_perfect_counts():
    data = simulate_calibration(TPNoise.uniform(3, 0.0),
                                make_calibration_set("weight1", 3), 100, 1)
    fit = fit_tp(data)
    assert (fit.eps == 0).all() and (fit.eta == 0).all()


def test_fit_tp_example_rates():
    data = CalibrationData(1, 1000, {
        bs("0"): {bs("0"): 900, bs("1"): 100},
        bs("1"): {bs("0"): 200, bs("1"): 800},
    })
    fit = fit_tp(data)
    assert fit.eps[0] == pytest.approx(0.1)
    assert fit.eta[0] == pytest.approx(0.2)


def test_fit_tp_hand_tallied_two_qubits():
    # errors only on qubit 2: 00 -> 01 in 30/100, 11 -> 10 in 10/100
    data = CalibrationData(2, 100, {
        bs("00"): {bs("00"): 70, bs("01"): 30},
        bs("11"): {bs("11"): 90, bs("10"): 10},
    })
    fit = fit_tp(data)
    assert fit.eps[0] == 0.0 and fit.eta[0] == 0.0
    assert fit.eps[1] == pytest.approx(0.3)
    assert fit.eta[1] == pytest.approx(0.1)


def test_fit_tp_recovers_within_binomial_se():
    rng = np.random.default_rng(21)
    tp = TPNoise(4, rng.uniform(0.01, 0.1, 4), rng.uniform(0.01, 0.1, 4))
    n_cal = 50_000
    cal_set = make_calibration_set("weight1", 4)
    data = simulate_calibration(tp, cal_set, n_cal, 5)
    fit = fit_tp(data)
    zero_rounds = n_cal * sum(x.bit(j) == 0 for x in cal_set.inputs for j in [1])
    for j in range(4):
        n0 = n_cal * sum(x.bit(j + 1) == 0 for x in cal_set.inputs)
        n1 = n_cal * sum(x.bit(j + 1) == 1 for x in cal_set.inputs)
        se0 = math.sqrt(tp.eps[j] * (1 - tp.eps[j]) / n0)
        se1 = math.sqrt(tp.eta[j] * (1 - tp.eta[j]) / n1)
        assert abs(fit.eps[j] - tp.eps[j]) <= 4 * se0
        assert abs(fit.eta[j] - tp.eta[j]) <= 4 * se1


def test_fit_tp_uncovered_qubit_error():
    data = CalibrationData(2, 10, {bs("00"): {bs("00"): 10}, bs("01"): {bs("01"): 10}})
    with pytest.raises(CalibrationError, match="qubit 1"):
        fit_tp(data)


# ---------------------------------------------------------------------------
# fit_local and the matrix logarithm


def test_fit_local_identity_counts():
    data = simulate_calibration(TPNoise.uniform(3, 0.0), all_inputs(3), 100, 1)
    assert np.allclose(fit_local(data, 1, 2).a, np.eye(4))


def test_fit_local_equals_fit_full_for_n2():
    rng = np.random.default_rng(3)
    tp = TPNoise(2, np.array([0.08, 0.05]), np.array([0.04, 0.1]))
    data = simulate_calibration(tp, all_inputs(2), 20_000, 9)
    assert np.allclose(fit_local(data, 1, 2).a, fit_full(data).a, atol=1e-12)


def test_fit_local_synthetic_tally():
    # input pattern 01 on (1,2): 50 of 1000 eligible rounds flip to 10
    data = CalibrationData(2, 1000, {
        bs("00"): {bs("00"): 1000},
        bs("01"): {bs("01"): 950, bs("10"): 50},
        bs("10"): {bs("10"): 1000},
        bs("11"): {bs("11"): 1000},
    })
    a = fit_local(data, 1, 2).a
    assert a[2, 1] == pytest.approx(0.05)
    assert a[1, 1] == pytest.approx(0.95)


def test_fit_local_zero_denominator():
    # every round with input 01 misreads qubit 3, so no eligible rounds remain
    data = CalibrationData(3, 10, {
        bs("000"): {bs("000"): 10},
        bs("010"): {bs("011"): 10},
        bs("100"): {bs("100"): 10},
        bs("110"): {bs("110"): 10},
    })
    with pytest.raises(CalibrationError, match=r"\(1, 2\)"):
        fit_local(data, 1, 2)


def test_principal_log_identity_and_diagonal():
    assert np.allclose(principal_log(np.eye(4)), 0.0)
    d = np.diag([1.0, 1.0, 1.0, math.exp(-0.1)])
    assert np.allclose(principal_log(d), np.diag([0, 0, 0, -0.1]), atol=1e-12)


def test_principal_log_round_trip():
    g0 = sparse_generator(CTMPModel(2, [
        CTMPGeneratorTerm("0->1", (1,), 0.03),
        CTMPGeneratorTerm("1->0", (2,), 0.02),
        CTMPGeneratorTerm("01->10", (1, 2), 0.04),
        CTMPGeneratorTerm("11->00", (1, 2), 0.05)])).toarray()
    a = build_full_matrix(CTMPModel(2, [
        CTMPGeneratorTerm("0->1", (1,), 0.03),
        CTMPGeneratorTerm("1->0", (2,), 0.02),
        CTMPGeneratorTerm("01->10", (1, 2), 0.04),
        CTMPGeneratorTerm("11->00", (1, 2), 0.05)])).a
    assert np.abs(principal_log(a) - g0).max() < 1e-9


def test_principal_log_errors():
    with pytest.raises(ModelError):
        principal_log(np.diag([1.0, 1.0, 1.0, 0.0]))  # singular
    with pytest.raises(ModelError):
        principal_log(np.diag([1.0, 1.0, 1.0, -0.5]))  # negative real axis


# ---------------------------------------------------------------------------
# fit_ctmp


def test_fit_ctmp_identity_counts():
    data = simulate_calibration(TPNoise.uniform(3, 0.0),
                                make_calibration_set("weight2", 3), 200, 1)
    fitted = fit_ctmp(data)
    assert all(t.rate == 0.0 for t in fitted.terms)


def test_fit_ctmp_requires_complete_set():
    data = simulate_calibration(TPNoise.uniform(3, 0.01),
                                CalibrationSet(3, (bs("000"), bs("111"))), 200, 1)
    with pytest.raises(CalibrationError, match=r"\(1, 2\).*01"):
        fit_ctmp(data)


def test_fit_ctmp_pure_tp_pair_rates_near_zero():
    """Data from a TP model: fitted correlated rates statistically zero."""
    tp = TPNoise.uniform(4, 0.03)
    data = simulate_calibration(tp, make_calibration_set("weight2", 4), 100_000, 13)
    fitted = fit_ctmp(data)
    pair_rates = [t.rate for t in fitted.terms if len(t.qubits) == 2]
    # rates are clipped at zero; a generous cap on the residual sampling noise
    se = math.sqrt(0.03 / 100_000) * 4
    assert max(pair_rates) <= max(4 * se, 0.004)


def test_fit_ctmp_round_trip_small():
    truth = CTMPModel(3, [
        CTMPGeneratorTerm("0->1", (1,), 0.04),
        CTMPGeneratorTerm("1->0", (1,), 0.02),
        CTMPGeneratorTerm("0->1", (2,), 0.01),
        CTMPGeneratorTerm("1->0", (2,), 0.05),
        CTMPGeneratorTerm("0->1", (3,), 0.03),
        CTMPGeneratorTerm("1->0", (3,), 0.03),
        CTMPGeneratorTerm("01->10", (1, 2), 0.03),
        CTMPGeneratorTerm("00->11", (2, 3), 0.02),
    ])
    data = simulate_calibration(truth, make_calibration_set("weight2", 3), 200_000, 31)
    fitted = {t.key: t.rate for t in fit_ctmp(data).terms}
    for t in truth.terms:
        assert abs(fitted[t.key] - t.rate) < 0.01, t.key
