"""Per-pass channel models and the QBER <-> depolarizing-parameter calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qubit import Pauli, State, StateBatch, apply_pauli

IDEAL = "ideal"
DEPOLARIZING = "depolarizing"

# A depolarizing error is X, Y or Z with weight p/3 each. On any Z or X
# eigenstate exactly two of the three flip the bit, so the flip probability
# measured in the preparation basis is 2p/3.
FLIP_PER_P = 2.0 / 3.0


@dataclass(frozen=True)
class ChannelModel:
    kind: str = IDEAL
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in (IDEAL, DEPOLARIZING):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"channel parameter p={self.p} outside [0, 1]")

    @property
    def flip_probability(self) -> float:
        if self.kind == IDEAL:
            return 0.0
        return FLIP_PER_P * self.p

    @property
    def is_identity(self) -> bool:
        return self.kind == IDEAL or self.p == 0.0


IDEAL_CHANNEL = ChannelModel(IDEAL, 0.0)


@dataclass(frozen=True)
class NoiseCalibration:
    qber_r: float
    depol_p: float


def calibration(qber_r: float) -> NoiseCalibration:
    _check_rate(qber_r)
    return NoiseCalibration(qber_r, qber_r / FLIP_PER_P)


def calibrate(qber_r: float) -> ChannelModel:
    """Depolarizing channel whose single-pass QBER in the prep basis is ``qber_r``."""
    return ChannelModel(DEPOLARIZING, calibration(qber_r).depol_p)


def roundtrip_qber(qber_r: float) -> float:
    """Probability of an odd number of flips over two independent passes."""
    _check_rate(qber_r)
    return 2.0 * qber_r * (1.0 - qber_r)


def _check_rate(qber_r: float) -> None:
    if not 0.0 <= qber_r <= 0.5:
        raise ValueError(f"qber_r={qber_r} outside [0, 0.5]")


def _sample_paulis(p: float, size: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(size)
    # [0, p/3) -> X, [p/3, 2p/3) -> Y, [2p/3, p) -> Z, else I
    paulis = np.zeros(size, dtype=np.uint8)
    third = p / 3.0
    paulis[u < p] = Pauli.Z
    paulis[u < 2 * third] = Pauli.Y
    paulis[u < third] = Pauli.X
    return paulis


def transmit(state: State, model: ChannelModel, rng: np.random.Generator) -> State:
    if model.kind == IDEAL:
        return state
    pauli = Pauli(int(_sample_paulis(model.p, 1, rng)[0]))
    return apply_pauli(state, pauli)


def transmit_batch(
    batch: StateBatch, model: ChannelModel, rng: np.random.Generator
) -> StateBatch:
    """Independent per-qubit application of ``model`` to a whole batch.

    The ideal channel draws no randomness.
    """
    if model.kind == IDEAL:
        return batch
    return batch.apply_paulis(_sample_paulis(model.p, len(batch), rng))
