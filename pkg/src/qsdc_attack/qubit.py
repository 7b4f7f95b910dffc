"""Single-qubit states restricted to the Z/X conjugate bases.

Two backends are provided:

* symbolic: a state is a ``ConjugateState`` (basis, bit), global phase dropped.
  Every operation is an integer/coin operation.
* statevector: a state is a ``PureState`` amplitude pair and operations are
  the textbook 2x2 matrices with Born-rule measurement.

``StateBatch`` is the vectorized form of the symbolic backend used by the
protocol simulation; its operations are checked against the scalar ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

import numpy as np

SQRT_HALF = 1.0 / math.sqrt(2.0)
NORM_TOL = 1e-12


class Basis(IntEnum):
    Z = 0  # {|0>, |1>}
    X = 1  # {|+>, |->}


class Pauli(IntEnum):
    I = 0
    X = 1
    Y = 2
    Z = 3


# (x, z) symplectic bits; composition modulo phase is XOR of these.
_PAULI_XZ = {Pauli.I: (0, 0), Pauli.X: (1, 0), Pauli.Y: (1, 1), Pauli.Z: (0, 1)}
_XZ_PAULI = {v: k for k, v in _PAULI_XZ.items()}

_PAULI_MATRIX = {
    Pauli.I: np.array([[1, 0], [0, 1]], dtype=complex),
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}

# Eigenvectors indexed by (basis, bit).
_EIGENVECTORS = {
    (Basis.Z, 0): np.array([1.0, 0.0], dtype=complex),
    (Basis.Z, 1): np.array([0.0, 1.0], dtype=complex),
    (Basis.X, 0): np.array([SQRT_HALF, SQRT_HALF], dtype=complex),
    (Basis.X, 1): np.array([SQRT_HALF, -SQRT_HALF], dtype=complex),
}


def compose_pauli(p: Pauli, q: Pauli) -> Pauli:
    """Product ``p @ q`` in the Pauli group with the phase discarded."""
    px, pz = _PAULI_XZ[Pauli(p)]
    qx, qz = _PAULI_XZ[Pauli(q)]
    return _XZ_PAULI[(px ^ qx, pz ^ qz)]


def flips_bit(p: Pauli, basis: Basis) -> bool:
    """Whether ``p`` maps each eigenstate of ``basis`` to the other one.

    Y anticommutes with both Z and X; X anticommutes with Z only; Z with X only.
    """
    x, z = _PAULI_XZ[Pauli(p)]
    return bool(x) if basis == Basis.Z else bool(z)


@dataclass(frozen=True)
class ConjugateState:
    basis: Basis
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.bit!r}")
        object.__setattr__(self, "basis", Basis(self.basis))


@dataclass(frozen=True)
class PureState:
    amp0: complex
    amp1: complex

    def __post_init__(self):
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @classmethod
    def from_vector(cls, vec) -> "PureState":
        return cls(complex(vec[0]), complex(vec[1]))


State = Union[ConjugateState, PureState]


@dataclass(frozen=True)
class MeasurementOutcome:
    bit: int
    post_state: State


def _check_bit(bit) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return int(bit)


def new_eigenstate(basis: Basis, bit: int, backend: str = "symbolic") -> State:
    basis = Basis(basis)
    bit = _check_bit(bit)
    if backend == "symbolic":
        return ConjugateState(basis, bit)
    if backend == "statevector":
        return PureState.from_vector(_EIGENVECTORS[(basis, bit)])
    raise ValueError(f"unknown backend {backend!r}")


def to_pure(cs: ConjugateState) -> PureState:
    return PureState.from_vector(_EIGENVECTORS[(cs.basis, cs.bit)])


def apply_pauli(state: State, p: Pauli) -> State:
    p = Pauli(p)
    if isinstance(state, ConjugateState):
        if flips_bit(p, state.basis):
            return ConjugateState(state.basis, state.bit ^ 1)
        return state
    return PureState.from_vector(_PAULI_MATRIX[p] @ state.vector)


def apply_encoding(state: State, message_bit: int) -> State:
    """Identity for 0, sigma_y for 1."""
    if _check_bit(message_bit):
        return apply_pauli(state, Pauli.Y)
    return state


def outcome_probability(state: State, basis: Basis, bit: int) -> float:
    basis = Basis(basis)
    bit = _check_bit(bit)
    if isinstance(state, ConjugateState):
        if state.basis != basis:
            return 0.5
        return 1.0 if state.bit == bit else 0.0
    amp = np.vdot(_EIGENVECTORS[(basis, bit)], state.vector)
    return float(abs(amp) ** 2)


def collapse(state: State, basis: Basis, bit: int) -> State:
    """Post-measurement state given that ``bit`` was observed in ``basis``."""
    basis = Basis(basis)
    bit = _check_bit(bit)
    if isinstance(state, ConjugateState):
        return ConjugateState(basis, bit)
    # Project and renormalize; keeps the phase of the projected amplitude.
    eig = _EIGENVECTORS[(basis, bit)]
    amp = np.vdot(eig, state.vector)
    if abs(amp) == 0.0:
        raise ValueError("outcome has zero probability")
    return PureState.from_vector(eig * (amp / abs(amp)))


def measure(state: State, basis: Basis, rng: np.random.Generator) -> MeasurementOutcome:
    basis = Basis(basis)
    if isinstance(state, ConjugateState):
        if state.basis == basis:
            return MeasurementOutcome(state.bit, state)
        bit = int(rng.integers(2))
        return MeasurementOutcome(bit, ConjugateState(basis, bit))
    p0 = outcome_probability(state, basis, 0)
    # Rounding residue (~1e-33) must not turn a certain outcome into a random one.
    if p0 < NORM_TOL:
        p0 = 0.0
    elif p0 > 1.0 - NORM_TOL:
        p0 = 1.0
    bit = 0 if rng.random() < p0 else 1
    return MeasurementOutcome(bit, collapse(state, basis, bit))


@dataclass(frozen=True)
class StateBatch:
    """A register of independent qubits in the symbolic backend.

    ``basis`` and ``bit`` are uint8 arrays of equal length. Operations return
    new batches; the arrays of an existing batch are never written to.
    """

    basis: np.ndarray
    bit: np.ndarray

    def __post_init__(self):
        if self.basis.shape != self.bit.shape or self.basis.ndim != 1:
            raise ValueError("basis and bit must be 1-d arrays of equal length")

    def __len__(self) -> int:
        return self.basis.shape[0]

    def __getitem__(self, i: int) -> ConjugateState:
        return ConjugateState(Basis(int(self.basis[i])), int(self.bit[i]))

    @classmethod
    def from_states(cls, states) -> "StateBatch":
        states = list(states)
        basis = np.array([s.basis for s in states], dtype=np.uint8)
        bit = np.array([s.bit for s in states], dtype=np.uint8)
        return cls(basis, bit)

    def states(self) -> list[ConjugateState]:
        return [self[i] for i in range(len(self))]

    def copy(self) -> "StateBatch":
        return StateBatch(self.basis.copy(), self.bit.copy())

    def apply_paulis(self, paulis: np.ndarray) -> "StateBatch":
        """Apply ``paulis[i]`` (values of ``Pauli``) to qubit ``i``."""
        paulis = np.asarray(paulis, dtype=np.uint8)
        x_part = (paulis == Pauli.X) | (paulis == Pauli.Y)
        z_part = (paulis == Pauli.Z) | (paulis == Pauli.Y)
        flip = np.where(self.basis == Basis.Z, x_part, z_part)
        return StateBatch(self.basis, self.bit ^ flip.astype(np.uint8))

    def encode(self, positions: np.ndarray, bits: np.ndarray) -> "StateBatch":
        """sigma_y on every position whose bit is 1; identity elsewhere."""
        new_bit = self.bit.copy()
        new_bit[positions] ^= np.asarray(bits, dtype=np.uint8)
        return StateBatch(self.basis, new_bit)

    def measure(
        self, positions: np.ndarray, bases: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, "StateBatch"]:
        """Measure ``positions`` in ``bases``; returns (outcomes, collapsed batch).

        One coin is drawn per measured position whether or not it is used, so
        the stream consumption depends only on ``len(positions)``.
        """
        positions = np.asarray(positions, dtype=np.int64)
        bases = np.asarray(bases, dtype=np.uint8)
        coins = rng.integers(0, 2, size=positions.shape[0], dtype=np.uint8)
        same = self.basis[positions] == bases
        outcomes = np.where(same, self.bit[positions], coins).astype(np.uint8)
        new_basis = self.basis.copy()
        new_bit = self.bit.copy()
        new_basis[positions] = bases
        new_bit[positions] = outcomes
        return outcomes, StateBatch(new_basis, new_bit)
