"""Bit strings, shot records, probability vectors, and diagonal observables.

Conventions used everywhere in this package:

* qubits are labeled 1..n;
* the string form of an outcome puts qubit 1 in the leftmost character
  ("0101" means qubit 1 read 0, qubit 2 read 1, ...);
* the dense basis index of an outcome is the string read as a binary number,
  i.e. qubit 1 is the most significant bit.  Kronecker products over qubits
  1..n (left to right) act on exactly this index order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Union

import numpy as np

from .errors import ModelError
from .rng import as_generator


@dataclass(frozen=True)
class BitString:
    """An n-bit measurement outcome.  Immutable."""

    n: int
    value: int  # packed bits, qubit 1 = most significant

    def __post_init__(self):
        # plain ints only: numpy scalars overflow under bit arithmetic
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "value", int(self.value))
        if self.n < 1:
            raise ValueError(f"need at least one qubit, got n={self.n}")
        if not 0 <= self.value < (1 << self.n):
            raise ValueError(f"value {self.value} out of range for n={self.n}")

    @classmethod
    def from_str(cls, s: str) -> "BitString":
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {s!r}")
        return cls(len(s), int(s, 2))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        bits = list(bits)
        v = 0
        for b in bits:
            v = (v << 1) | (int(b) & 1)
        return cls(len(bits), v)

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(n, 0)

    @property
    def index(self) -> int:
        """Dense basis index (qubit 1 = most significant bit)."""
        return self.value

    def bit(self, j: int) -> int:
        """Value of qubit j (1-based)."""
        if not 1 <= j <= self.n:
            raise IndexError(f"qubit {j} out of range 1..{self.n}")
        return (self.value >> (self.n - j)) & 1

    def flip(self, *qubits: int) -> "BitString":
        """New BitString with the given qubits flipped."""
        v = self.value
        for j in qubits:
            if not 1 <= j <= self.n:
                raise IndexError(f"qubit {j} out of range 1..{self.n}")
            v ^= 1 << (self.n - j)
        return BitString(self.n, v)

    def weight(self) -> int:
        return bin(self.value).count("1")

    def bits(self) -> np.ndarray:
        """Bits as a uint8 array, entry j-1 = qubit j."""
        return np.array([(self.value >> (self.n - j)) & 1 for j in range(1, self.n + 1)],
                        dtype=np.uint8)

    def __str__(self) -> str:
        return format(self.value, f"0{self.n}b")

    def __repr__(self) -> str:
        return f"BitString('{self}')"


def bits_to_indices(bits: np.ndarray) -> np.ndarray:
    """Dense basis indices for a (M, n) bit matrix."""
    n = bits.shape[1]
    weights = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    return bits.astype(np.int64) @ weights


def indices_to_bits(idx: np.ndarray, n: int) -> np.ndarray:
    """(M, n) uint8 bit matrix for dense basis indices."""
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


class ShotSet:
    """An ordered collection of M same-length measurement outcomes.

    Stored internally as an (M, n) uint8 matrix so estimators can run
    vectorized; the matrix is frozen after construction.
    """

    def __init__(self, n: int, bits: np.ndarray):
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        if bits.ndim != 2 or bits.shape[1] != n:
            raise ValueError(f"shot matrix must be (M, {n}), got {bits.shape}")
        if bits.shape[0] < 1:
            raise ValueError("a ShotSet needs at least one shot")
        if bits.max(initial=0) > 1:
            raise ValueError("shot matrix entries must be 0/1")
        self.n = n
        self._bits = bits
        self._bits.flags.writeable = False

    @classmethod
    def from_bitstrings(cls, shots: Iterable[BitString]) -> "ShotSet":
        shots = list(shots)
        if not shots:
            raise ValueError("a ShotSet needs at least one shot")
        n = shots[0].n
        if any(s.n != n for s in shots):
            raise ValueError("all shots must have the same length")
        return cls(n, np.stack([s.bits() for s in shots]))

    @classmethod
    def from_strings(cls, strings: Iterable[str]) -> "ShotSet":
        return cls.from_bitstrings([BitString.from_str(s) for s in strings])

    @property
    def m(self) -> int:
        return self._bits.shape[0]

    @property
    def bits(self) -> np.ndarray:
        """(M, n) read-only uint8 matrix; row order is preserved."""
        return self._bits

    def indices(self) -> np.ndarray:
        return bits_to_indices(self._bits)

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> BitString:
        return BitString.from_bits(self._bits[i])

    def __iter__(self) -> Iterator[BitString]:
        for i in range(self.m):
            yield self[i]

    def __repr__(self) -> str:
        return f"ShotSet(n={self.n}, m={self.m})"


class ProbVector:
    """A sparse probability distribution over n-bit outcomes."""

    def __init__(self, n: int, entries: dict[BitString, float]):
        self.n = n
        total = 0.0
        for x, p in entries.items():
            if x.n != n:
                raise ValueError(f"entry {x} has length {x.n}, expected {n}")
            if p < -1e-12:
                raise ValueError(f"negative probability {p} at {x}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        self.entries = {x: max(p, 0.0) for x, p in entries.items() if p > 0.0}

    @classmethod
    def from_dense(cls, n: int, p: np.ndarray) -> "ProbVector":
        p = np.asarray(p, dtype=float)
        if p.shape != (1 << n,):
            raise ValueError(f"dense vector must have length {1 << n}")
        return cls(n, {BitString(n, i): float(p[i]) for i in np.nonzero(p)[0]})

    def dense(self) -> np.ndarray:
        out = np.zeros(1 << self.n)
        for x, p in self.entries.items():
            out[x.index] = p
        return out

    def expectation(self, obs: "DiagonalObservable") -> float:
        return sum(p * obs.eval(x) for x, p in self.entries.items())

    def sample(self, m: int, rng) -> ShotSet:
        """Draw m independent outcomes."""
        rng = as_generator(rng)
        keys = list(self.entries.keys())
        probs = np.array([self.entries[k] for k in keys])
        probs = probs / probs.sum()
        picks = rng.choice(len(keys), size=m, p=probs)
        idx = np.array([keys[i].index for i in picks], dtype=np.int64)
        return ShotSet(self.n, indices_to_bits(idx, self.n))


@dataclass(frozen=True)
class DiagonalObservable:
    """A signed parity observable: O(x) = sign * (-1)^(sum of x_j over support).

    The empty support gives the constant observable O(x) = sign.
    """

    support: tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        sup = tuple(sorted(set(self.support)))
        if any(j < 1 for j in sup):
            raise ValueError("qubit indices are 1-based")
        object.__setattr__(self, "support", sup)

    def eval(self, x: BitString) -> float:
        if self.support and max(self.support) > x.n:
            raise IndexError(f"support {self.support} exceeds bit string length {x.n}")
        par = 0
        for j in self.support:
            par ^= x.bit(j)
        return float(self.sign * (1 - 2 * par))

    def eval_bits(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on an (M, n) bit matrix."""
        if not self.support:
            return np.full(bits.shape[0], float(self.sign))
        if max(self.support) > bits.shape[1]:
            raise IndexError(f"support {self.support} exceeds register size {bits.shape[1]}")
        cols = [j - 1 for j in self.support]
        par = bits[:, cols].sum(axis=1) & 1
        return self.sign * (1.0 - 2.0 * par)

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "") + "Z" + ",Z".join(str(j) for j in self.support) \
            if self.support else ("-1" if self.sign < 0 else "+1")


# Estimator code accepts any real-valued diagonal observable as a callable on
# BitString; DiagonalObservable is the concrete serializable case.
ObservableLike = Union[DiagonalObservable, Callable[[BitString], float]]


def eval_observable(obs: ObservableLike, x: BitString) -> float:
    if isinstance(obs, DiagonalObservable):
        return obs.eval(x)
    return float(obs(x))


def eval_observable_bits(obs: ObservableLike, bits: np.ndarray) -> np.ndarray:
    """Evaluate an observable on every row of an (M, n) bit matrix.

    DiagonalObservable evaluates vectorized; generic callables fall back to a
    per-row Python loop.
    """
    if isinstance(obs, DiagonalObservable):
        return obs.eval_bits(bits)
    return np.array([float(obs(BitString.from_bits(row))) for row in bits])


def raw_mean(shots: ShotSet, obs: ObservableLike) -> float:
    """Empirical mean of the observable over the shots (no mitigation)."""
    if shots.m < 1:
        raise ModelError("cannot average over an empty ShotSet")
    return float(eval_observable_bits(obs, shots.bits).mean())
