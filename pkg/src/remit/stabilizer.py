"""Stabilizer-tableau simulation of Clifford circuits.

Generates ideal measurement outcomes for graph states and low-depth random
Clifford circuits, enumerates or samples elements of the stabilizer group,
and translates Pauli observables into single-qubit basis rotations plus a
signed parity observable on the rotated register.

Internals follow the standard binary-symplectic representation: a stabilizer
row is i^r * prod_j P_j with P_j encoded by bit pairs (x, z) and the phase
exponent r tracked mod 4 during products.  Rows of a valid tableau always
extract to Hermitian operators with phase +-1; the extraction asserts this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BitString, DiagonalObservable, ShotSet
from .errors import ModelError
from .rng import as_generator, derive_seed, stream

GATE_KINDS = ("H", "S", "CZ", "CNOT", "X", "Z", "C1")


@dataclass(frozen=True)
class Gate:
    g: str
    q: tuple[int, ...]
    idx: int | None = None  # Clifford index for C1 gates

    def __post_init__(self):
        if self.g not in GATE_KINDS:
            raise ModelError(f"unknown gate {self.g!r}")
        nq = 2 if self.g in ("CZ", "CNOT") else 1
        qs = tuple(int(x) for x in self.q)
        if len(qs) != nq or (nq == 2 and qs[0] == qs[1]):
            raise ModelError(f"gate {self.g} needs {nq} distinct qubit(s), got {qs}")
        if self.g == "C1":
            if self.idx is None or not 0 <= self.idx < 24:
                raise ModelError(f"C1 gate needs an index in 0..23, got {self.idx}")
        object.__setattr__(self, "q", qs)


@dataclass(frozen=True, eq=False)
class CliffordCircuit:
    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        for g in self.gates:
            if any(q < 1 or q > self.n for q in g.q):
                raise ModelError(f"gate {g} out of range for n={self.n}")

    def then(self, other: "CliffordCircuit") -> "CliffordCircuit":
        if other.n != self.n:
            raise ModelError("circuit sizes differ")
        return CliffordCircuit(self.n, self.gates + other.gates)


@dataclass(frozen=True)
class PauliOperator:
    """A signed Pauli string; phase is restricted to +-1."""

    n: int
    phase: int
    letters: str

    def __post_init__(self):
        if self.phase not in (1, -1):
            raise ModelError("PauliOperator phase must be +1 or -1")
        if len(self.letters) != self.n or set(self.letters) - set("IXYZ"):
            raise ModelError(f"bad Pauli letters {self.letters!r} for n={self.n}")

    @classmethod
    def from_str(cls, s: str) -> "PauliOperator":
        phase = 1
        if s and s[0] in "+-":
            phase = -1 if s[0] == "-" else 1
            s = s[1:]
        return cls(len(s), phase, s)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    def support(self) -> tuple[int, ...]:
        return tuple(j + 1 for j, c in enumerate(self.letters) if c != "I")

    def __str__(self) -> str:
        return ("-" if self.phase < 0 else "") + self.letters


# ---------------------------------------------------------------------------
# tableau


def _phase_exponents(x1, z1, x2, z2) -> np.ndarray:
    """Per-qubit i-exponents from multiplying Pauli letters (left * right)."""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    g = np.zeros_like(x1)
    m = (x1 == 1) & (z1 == 1)
    g[m] = z2[m] - x2[m]
    m = (x1 == 1) & (z1 == 0)
    g[m] = z2[m] * (2 * x2[m] - 1)
    m = (x1 == 0) & (z1 == 1)
    g[m] = x2[m] * (1 - 2 * z2[m])
    return g


class Tableau:
    """Stabilizer generators of an n-qubit state (n rows, no destabilizers:
    only terminal computational-basis sampling is supported)."""

    def __init__(self, n: int):
        if n < 1:
            raise ModelError("need at least one qubit")
        self.n = n
        self.x = np.zeros((n, n), dtype=np.uint8)
        self.z = np.eye(n, dtype=np.uint8)
        self.r = np.zeros(n, dtype=np.uint8)  # phase exponent of i, mod 4

    def copy(self) -> "Tableau":
        t = Tableau(self.n)
        t.x = self.x.copy()
        t.z = self.z.copy()
        t.r = self.r.copy()
        return t

    # gate conjugations; column indices are 0-based internally
    def _h(self, j: int):
        self.r = (self.r + 2 * (self.x[:, j] & self.z[:, j])) % 4
        self.x[:, j], self.z[:, j] = self.z[:, j].copy(), self.x[:, j].copy()

    def _s(self, j: int):
        self.r = (self.r + 2 * (self.x[:, j] & self.z[:, j])) % 4
        self.z[:, j] ^= self.x[:, j]

    def _x(self, j: int):
        self.r = (self.r + 2 * self.z[:, j]) % 4

    def _z(self, j: int):
        self.r = (self.r + 2 * self.x[:, j]) % 4

    def _cz(self, a: int, b: int):
        xa, za = self.x[:, a], self.z[:, a]
        xb, zb = self.x[:, b], self.z[:, b]
        self.r = (self.r + 2 * (xa & xb & (za ^ zb))) % 4
        self.z[:, a] ^= xb
        self.z[:, b] ^= xa

    def _cnot(self, a: int, b: int):
        xa, za = self.x[:, a], self.z[:, a]
        xb, zb = self.x[:, b], self.z[:, b]
        self.r = (self.r + 2 * (xa & zb & (xb ^ za ^ 1))) % 4
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb

    def apply_gate(self, gate: Gate):
        q = [i - 1 for i in gate.q]
        if gate.g == "H":
            self._h(q[0])
        elif gate.g == "S":
            self._s(q[0])
        elif gate.g == "X":
            self._x(q[0])
        elif gate.g == "Z":
            self._z(q[0])
        elif gate.g == "CZ":
            self._cz(q[0], q[1])
        elif gate.g == "CNOT":
            self._cnot(q[0], q[1])
        elif gate.g == "C1":
            for letter in CLIFFORD_1Q_WORDS[gate.idx]:
                if letter == "H":
                    self._h(q[0])
                else:
                    self._s(q[0])
        else:  # pragma: no cover
            raise ModelError(f"unknown gate {gate.g}")

    def apply(self, circuit: CliffordCircuit) -> "Tableau":
        if circuit.n != self.n:
            raise ModelError("circuit size does not match tableau")
        for gate in circuit.gates:
            self.apply_gate(gate)
        return self

    def generator(self, i: int) -> PauliOperator:
        return _extract_pauli(self.x[i], self.z[i], int(self.r[i]))

    def generators(self) -> list[PauliOperator]:
        return [self.generator(i) for i in range(self.n)]


def _extract_pauli(x: np.ndarray, z: np.ndarray, r: int) -> PauliOperator:
    letters = np.full(x.shape, "I", dtype="<U1")
    letters[(x == 1) & (z == 0)] = "X"
    letters[(x == 0) & (z == 1)] = "Z"
    letters[(x == 1) & (z == 1)] = "Y"
    if r % 2 != 0:
        raise ModelError("internal error: stabilizer extracted with imaginary phase")
    return PauliOperator(len(x), 1 if r % 4 == 0 else -1, "".join(letters))


def _product(x_rows: np.ndarray, z_rows: np.ndarray, r_rows: np.ndarray,
             subset: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Multiply out the selected rows (they commute, so order is free)."""
    n = x_rows.shape[1]
    xa = np.zeros(n, dtype=np.uint8)
    za = np.zeros(n, dtype=np.uint8)
    ra = 0
    for i in np.nonzero(subset)[0]:
        ra = (ra + int(r_rows[i]) + int(_phase_exponents(xa, za, x_rows[i], z_rows[i]).sum())) % 4
        xa ^= x_rows[i]
        za ^= z_rows[i]
    return xa, za, ra


# ---------------------------------------------------------------------------
# the 24 single-qubit Cliffords, enumerated as words over {H, S}

def _enumerate_cliffords() -> list[str]:
    def act(word: str):
        # track images of X and Z as (x, z, r) triples under the word
        paulis = [[1, 0, 0], [0, 1, 0]]
        for gate in word:
            for p in paulis:
                x, z, r = p
                if gate == "H":
                    p[:] = [z, x, (r + 2 * (x & z)) % 4]
                else:  # S
                    p[:] = [x, z ^ x, (r + 2 * (x & z)) % 4]
        return tuple(tuple(p) for p in paulis)

    found: dict[tuple, str] = {}
    frontier = [""]
    while frontier:
        nxt = []
        for word in frontier:
            key = act(word)
            if key in found:
                continue
            found[key] = word
            nxt.extend([word + "H", word + "S"])
        frontier = nxt
        if len(found) >= 24 and not any(act(w) not in found for w in frontier):
            break
    assert len(found) == 24
    return [found[k] for k in sorted(found.keys())]


CLIFFORD_1Q_WORDS: list[str] = _enumerate_cliffords()


# ---------------------------------------------------------------------------
# circuits


def graph_state_circuit(n: int) -> CliffordCircuit:
    """Path graph state: Hadamards on every qubit, then CZ on each edge
    (j, j+1)."""
    if n < 2:
        raise ModelError(f"graph states need n >= 2, got {n}")
    gates = [Gate("H", (j,)) for j in range(1, n + 1)]
    gates += [Gate("CZ", (j, j + 1)) for j in range(1, n)]
    return CliffordCircuit(n, tuple(gates))


def line_coupling(n: int) -> list[tuple[int, int]]:
    return [(j, j + 1) for j in range(1, n)]


def grid_coupling(rows: int, cols: int) -> list[tuple[int, int]]:
    """Nearest-neighbor edges of a rows x cols lattice, qubits numbered
    row-major from 1."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c + 1
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return edges


def _maximal_matching(edges: list[tuple[int, int]], rng) -> list[tuple[int, int]]:
    order = rng.permutation(len(edges))
    used: set[int] = set()
    out = []
    for i in order:
        a, b = edges[i]
        if a not in used and b not in used:
            out.append((a, b))
            used.update((a, b))
    return out


def random_clifford_circuit(n: int, depth: int, coupling: list[tuple[int, int]],
                            rng, entangling_layers=None) -> CliffordCircuit:
    """Alternating layers (starting with single-qubit Cliffords) of uniform
    random 1q Cliffords and CNOTs on disjoint coupling edges.

    Entangling layers use the supplied edge patterns when given (validated to
    be disjoint subsets of the coupling), otherwise a random maximal matching;
    CNOT orientation is randomized per edge.
    """
    rng = as_generator(rng)
    for a, b in coupling:
        if not (1 <= a <= n and 1 <= b <= n) or a == b:
            raise ModelError(f"bad coupling edge ({a}, {b})")
    gates: list[Gate] = []
    ent_layer = 0
    for d in range(depth):
        if d % 2 == 0:
            idxs = rng.integers(0, 24, size=n)
            gates += [Gate("C1", (j + 1,), int(idxs[j])) for j in range(n)]
        else:
            if entangling_layers is not None:
                layer = list(entangling_layers[ent_layer])
                seen: set[int] = set()
                for a, b in layer:
                    if (a, b) not in coupling and (b, a) not in coupling:
                        raise ModelError(f"edge ({a}, {b}) not in the coupling map")
                    if a in seen or b in seen:
                        raise ModelError(f"overlapping CNOTs in entangling layer: ({a}, {b})")
                    seen.update((a, b))
            else:
                layer = _maximal_matching(coupling, rng)
            for a, b in layer:
                if rng.random() < 0.5:
                    a, b = b, a
                gates.append(Gate("CNOT", (a, b)))
            ent_layer += 1
    return CliffordCircuit(n, tuple(gates))


# ---------------------------------------------------------------------------
# stabilizer-group access


def stabilizer_sample(tab: Tableau, rng, weight=None, max_tries: int = 1000) -> PauliOperator:
    """A uniformly random element of the stabilizer group (a random subset of
    generators, with exact phase tracking).

    ``weight`` optionally rejects until the Pauli weight matches (an int or an
    inclusive (lo, hi) range), giving up after ``max_tries`` draws.
    """
    rng = as_generator(rng)
    lo, hi = (weight, weight) if isinstance(weight, int) else (weight or (0, tab.n))
    for _ in range(max_tries):
        subset = rng.integers(0, 2, size=tab.n, dtype=np.uint8)
        x, z, r = _product(tab.x, tab.z, tab.r, subset)
        p = _extract_pauli(x, z, r)
        if weight is None or lo <= p.weight <= hi:
            return p
    raise ModelError(f"no stabilizer with weight in [{lo}, {hi}] found in "
                     f"{max_tries} draws")


def enumerate_stabilizers(tab: Tableau) -> list[PauliOperator]:
    """All 2^n group elements (small n only)."""
    if tab.n > 16:
        raise ModelError("enumeration is limited to n <= 16")
    out = []
    for mask in range(1 << tab.n):
        subset = np.array([(mask >> i) & 1 for i in range(tab.n)], dtype=np.uint8)
        x, z, r = _product(tab.x, tab.z, tab.r, subset)
        out.append(_extract_pauli(x, z, r))
    return out


def pauli_to_measurement(p: PauliOperator) -> tuple[CliffordCircuit, DiagonalObservable]:
    """Single-qubit rotation layer and signed parity observable such that
    measuring the observable on the rotated state reproduces <P>.

    X needs H; Y needs S-dagger (three S gates) then H; Z and I need nothing.
    """
    gates: list[Gate] = []
    for j, letter in enumerate(p.letters, start=1):
        if letter == "X":
            gates.append(Gate("H", (j,)))
        elif letter == "Y":
            gates += [Gate("S", (j,)), Gate("S", (j,)), Gate("S", (j,)), Gate("H", (j,))]
    return (CliffordCircuit(p.n, tuple(gates)),
            DiagonalObservable(p.support(), p.phase))


# ---------------------------------------------------------------------------
# sampling


def _gf2_rref(aug: np.ndarray) -> tuple[np.ndarray, list[int], int]:
    aug = aug.copy() % 2
    rows, cols = aug.shape
    pivots: list[int] = []
    row = 0
    for col in range(cols):
        if row >= rows:
            break
        hits = np.nonzero(aug[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            aug[[row, p]] = aug[[p, row]]
        others = np.nonzero(aug[:, col])[0]
        for i in others:
            if i != row:
                aug[i] ^= aug[row]
        pivots.append(col)
        row += 1
    return aug, pivots, row


def _solve_affine_support(tab: Tableau) -> tuple[np.ndarray, np.ndarray]:
    """The computational-basis support of the state as x0 + span(basis) over
    GF(2): Z-type stabilizer combinations impose parity constraints; the
    X-rank of the tableau is the log2 support size."""
    n = tab.n
    x = tab.x.copy()
    z = tab.z.copy()
    r = tab.r.copy().astype(np.int64)

    def rowmult(h: int, i: int):
        r[h] = (r[h] + r[i] + int(_phase_exponents(x[h], z[h], x[i], z[i]).sum())) % 4
        x[h] ^= x[i]
        z[h] ^= z[i]

    row = 0
    for col in range(n):
        hits = np.nonzero(x[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            x[[row, p]] = x[[p, row]]
            z[[row, p]] = z[[p, row]]
            r[[row, p]] = r[[p, row]]
        for i in range(n):
            if i != row and x[i, col]:
                rowmult(i, row)
        row += 1
    k = row  # X-rank = log2 of the support size
    zc = z[row:]
    rc = r[row:]
    if (rc % 2 != 0).any():
        raise ModelError("internal error: Z-type stabilizer with imaginary phase")
    b = (rc % 4) // 2  # 1 where the sign is -1, i.e. odd required parity
    aug = np.concatenate([zc, b[:, None].astype(np.uint8)], axis=1)
    red, pivots, rank = _gf2_rref(aug)
    if red[rank:, n].any():
        raise ModelError("internal error: inconsistent stabilizer constraints")
    x0 = np.zeros(n, dtype=np.uint8)
    for i, c in enumerate(pivots):
        x0[c] = red[i, n]
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for bi, f in enumerate(free):
        basis[bi, f] = 1
        for i, c in enumerate(pivots):
            basis[bi, c] = red[i, f]
    if len(free) != k:
        raise ModelError("internal error: support dimension mismatch")
    return x0, basis


def sample_ideal(circuit: CliffordCircuit, rotation: CliffordCircuit | None,
                 m: int, rng) -> ShotSet:
    """m exact computational-basis samples from the (optionally rotated)
    stabilizer state: uniform over the affine support set."""
    rng = as_generator(rng)
    tab = Tableau(circuit.n).apply(circuit)
    if rotation is not None:
        tab.apply(rotation)
    x0, basis = _solve_affine_support(tab)
    if basis.shape[0] == 0:
        bits = np.tile(x0, (m, 1))
    else:
        coeffs = rng.integers(0, 2, size=(m, basis.shape[0]), dtype=np.uint8)
        bits = (coeffs @ basis + x0[None, :]) % 2
    return ShotSet(circuit.n, bits.astype(np.uint8))


def exact_distribution(circuit: CliffordCircuit,
                       rotation: CliffordCircuit | None = None) -> np.ndarray:
    """Dense outcome distribution of the stabilizer state (small n)."""
    tab = Tableau(circuit.n).apply(circuit)
    if rotation is not None:
        tab.apply(rotation)
    if circuit.n > 16:
        raise ModelError("dense distribution limited to n <= 16")
    x0, basis = _solve_affine_support(tab)
    out = np.zeros(1 << circuit.n)
    k = basis.shape[0]
    weights = (1 << np.arange(circuit.n - 1, -1, -1)).astype(np.int64)
    for mask in range(1 << k):
        v = x0.copy()
        for i in range(k):
            if (mask >> i) & 1:
                v ^= basis[i]
        out[int(v @ weights)] = 1.0 / (1 << k)
    return out


# ---------------------------------------------------------------------------
# end-to-end stabilizer measurement


def fidelity_estimate(circuit: CliffordCircuit, noise_model, method: str = "raw",
                      num_stabilizers: int = 100, shots_per_stabilizer: int = 8192,
                      rng=None, mitigation_model=None, delta: float = 0.05,
                      all_stabilizers: bool = False, weight=None) -> dict:
    """Average mitigated stabilizer mean value: an estimate of the state
    fidelity, since the group average of <S> equals <psi|rho|psi>.

    ``noise_model`` corrupts the ideal post-rotation samples (None = ideal
    measurement).  ``mitigation_model`` is the model handed to the mitigator
    (defaults to the ground-truth model); ``method`` is one of raw, exact,
    tp, ctmp.
    """
    from .mitigation import mitigate_ctmp, mitigate_exact, mitigate_raw, mitigate_tp
    from .noise import CTMPModel, FullNoiseMatrix, TPNoise, build_full_matrix, corrupt_shots

    seed = derive_seed(rng)
    tab = Tableau(circuit.n).apply(circuit)
    if all_stabilizers:
        stabs = enumerate_stabilizers(tab)
    else:
        g = stream(seed, 0)
        stabs = [stabilizer_sample(tab, g, weight=weight) for _ in range(num_stabilizers)]
    mit_model = mitigation_model if mitigation_model is not None else noise_model
    if method == "exact" and isinstance(mit_model, (TPNoise, CTMPModel)):
        mit_model = build_full_matrix(mit_model)
    means = []
    for i, p in enumerate(stabs):
        rot, obs = pauli_to_measurement(p)
        g = stream(seed, i + 1)
        shots = sample_ideal(circuit, rot, shots_per_stabilizer, g)
        if noise_model is not None:
            shots = corrupt_shots(noise_model, shots, g)
        if method == "raw" or noise_model is None:
            res = mitigate_raw(shots, obs)
        elif method == "exact":
            res = mitigate_exact(shots, mit_model, obs)
        elif method == "tp":
            res = mitigate_tp(shots, mit_model, obs, delta=delta, rng=g)
        elif method == "ctmp":
            res = mitigate_ctmp(shots, mit_model, obs, delta=delta, rng=g)
        else:
            raise ModelError(f"unknown mitigation method {method!r}")
        means.append(res.xi)
    means_arr = np.array(means)
    return {
        "fhat": float(means_arr.mean()),
        "stderr": float(means_arr.std() / np.sqrt(len(means_arr))) if len(means_arr) > 1 else 0.0,
        "stabilizers": [str(p) for p in stabs],
        "weights": [p.weight for p in stabs],
        "means": means,
        "method": method,
    }
