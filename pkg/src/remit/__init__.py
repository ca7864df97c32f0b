"""Readout-error mitigation for multi-qubit measurements.

Simulates noisy measurements under tensor-product and correlated Markovian
(CTMP) readout-noise models, fits those models from calibration counts, and
computes unbiased error-mitigated expectation values by quasi-probability
sampling, with a stabilizer-circuit simulator as the ideal-outcome source.
"""

from .core import (BitString, DiagonalObservable, ProbVector, ShotSet,
                   eval_observable, raw_mean)
from .noise import (AnnealConfig, CTMPGeneratorTerm, CTMPModel,
                    FullNoiseMatrix, TPNoise, build_full_matrix,
                    corrupt_shots, markov_step, noise_strength, sample_noisy,
                    sparse_generator, tp_to_ctmp, tvd)
from .calibration import (CalibrationData, CalibrationSet, fit_ctmp, fit_full,
                          fit_local, fit_tp, is_complete, LocalNoiseMatrix,
                          make_calibration_set, principal_log,
                          simulate_calibration)
from .decomp import (StochasticDecomposition, column_sums_equal,
                     decompose_min_norm, minimal_one_norm)
from .mitigation import (MitigationResult, SamplerPlan, gamma_tp,
                         mitigate_ctmp, mitigate_exact, mitigate_raw,
                         mitigate_tp, overhead_report, required_shots)
from .stabilizer import (CliffordCircuit, Gate, PauliOperator, Tableau,
                         enumerate_stabilizers, fidelity_estimate,
                         graph_state_circuit, grid_coupling, line_coupling,
                         pauli_to_measurement, random_clifford_circuit,
                         sample_ideal, stabilizer_sample)

__version__ = "0.1.0"
