"""Eavesdropper strategies on the two-way quantum channel.

The central strategy is channel-replacing intercept-resend: Eve swaps the
noisy line for a perfect one, measures a fraction ``4r`` of the outbound
qubits in random conjugate bases and resends the collapsed states. On the
return pass she re-measures the tapped qubits that survived the first check
in the same bases. Because sigma_y maps eigenstates of either basis onto the
opposite eigenstate of the same basis, the XOR of her two outcomes is exactly
the bit Alice encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import DEPOLARIZING, FLIP_PER_P, ChannelModel, roundtrip_qber, transmit_batch
from .qubit import StateBatch

NONE = "none"
PAPER_ATTACK = "paper_attack"

MISSING = -1  # sentinel in TapRecord.second_outcome / inferred_bit


def attack_fraction_for(r: float) -> float:
    """Interception fraction whose induced first-check QBER equals ``r``."""
    if not 0.0 <= r <= 0.25:
        raise ValueError(f"r={r} outside [0, 0.25]; attack fraction 4r would exceed 1")
    return 4.0 * r


@dataclass(frozen=True)
class EveStrategy:
    kind: str = NONE
    attack_fraction: float = 0.0
    camouflage: bool = False
    # Channel error rate the attack hides under; only camouflage reads it.
    noise_r: float = 0.0
    replace_channel: bool = True

    def __post_init__(self):
        if self.kind not in (NONE, PAPER_ATTACK):
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if not 0.0 <= self.attack_fraction <= 1.0:
            raise ValueError(f"attack_fraction={self.attack_fraction} outside [0, 1]")

    @classmethod
    def paper_attack(cls, r: float, **kwargs) -> "EveStrategy":
        kwargs.setdefault("attack_fraction", attack_fraction_for(r))
        return cls(kind=PAPER_ATTACK, noise_r=r, **kwargs)

    @property
    def active(self) -> bool:
        return self.kind == PAPER_ATTACK


@dataclass(frozen=True)
class TapRecord:
    """Eve's private log, one entry per tapped position (ascending).

    ``second_outcome`` and ``inferred_bit`` hold ``MISSING`` where the qubit
    was consumed by the first check and never came back.
    """

    positions: np.ndarray
    eve_basis: np.ndarray
    first_outcome: np.ndarray
    second_outcome: np.ndarray
    inferred_bit: np.ndarray

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def returned(self) -> np.ndarray:
        return self.second_outcome != MISSING

    @classmethod
    def empty(cls) -> "TapRecord":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.astype(np.uint8), z.astype(np.uint8), z.astype(np.int8), z.astype(np.int8))


@dataclass(frozen=True)
class LeakReport:
    tapped_count: int
    surviving_tapped_count: int
    message_positions_learned: int
    leak_fraction: float
    # None when Eve holds no inferred bit to judge.
    accuracy_on_tapped: float | None


def _sample_positions(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    k = round(fraction * n)
    return np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)


def forward_intercept(
    batch: StateBatch, fraction: float, rng: np.random.Generator
) -> tuple[StateBatch, TapRecord]:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction={fraction} outside [0, 1]")
    positions = _sample_positions(len(batch), fraction, rng)
    if positions.size == 0:
        return batch, TapRecord.empty()
    bases = rng.integers(0, 2, size=positions.size, dtype=np.uint8)
    outcomes, batch = batch.measure(positions, bases, rng)
    missing = np.full(positions.size, MISSING, dtype=np.int8)
    return batch, TapRecord(positions, bases, outcomes, missing, missing.copy())


def camouflage_flip(noise_r: float, attack_fraction: float) -> float:
    """Flip rate on untapped return qubits that lifts qber2 to the honest 2r(1-r).

    Tapped survivors already err at rate 1/4, so the untapped share must
    supply the remainder; clipped to [0, 1/2].
    """
    if attack_fraction >= 1.0:
        return 0.0
    f = (roundtrip_qber(noise_r) - attack_fraction / 4.0) / (1.0 - attack_fraction)
    return min(0.5, max(0.0, f))


def backward_intercept(
    batch: StateBatch,
    taps: TapRecord,
    surviving_positions: np.ndarray,
    rng: np.random.Generator,
    camouflage_flip_rate: float = 0.0,
) -> tuple[StateBatch, TapRecord]:
    """Re-measure surviving tapped qubits in Eve's original bases.

    With ``camouflage_flip_rate > 0`` every untapped qubit additionally goes
    through a depolarizing channel with that bit-flip rate.
    """
    n = len(batch)
    if taps.positions.size and (taps.positions.min() < 0 or taps.positions.max() >= n):
        raise ValueError("tap position outside the session batch")
    if camouflage_flip_rate > 0.0:
        untapped = np.ones(n, dtype=bool)
        untapped[taps.positions] = False
        idx = np.flatnonzero(untapped)
        noisy = transmit_batch(
            StateBatch(batch.basis[idx], batch.bit[idx]),
            ChannelModel(DEPOLARIZING, camouflage_flip_rate / FLIP_PER_P),
            rng,
        )
        basis, bit = batch.basis.copy(), batch.bit.copy()
        basis[idx], bit[idx] = noisy.basis, noisy.bit
        batch = StateBatch(basis, bit)

    back = np.isin(taps.positions, surviving_positions, assume_unique=True)
    if not back.any():
        return batch, taps
    outcomes, batch = batch.measure(taps.positions[back], taps.eve_basis[back], rng)
    second = taps.second_outcome.copy()
    second[back] = outcomes.astype(np.int8)
    return batch, replace(taps, second_outcome=second)


def infer_bits(taps: TapRecord) -> TapRecord:
    """Alice's operation on each returned tap: first XOR second outcome."""
    returned = taps.returned
    inferred = np.full(len(taps), MISSING, dtype=np.int8)
    inferred[returned] = (
        taps.first_outcome[returned].astype(np.int8) ^ taps.second_outcome[returned]
    )
    return replace(taps, inferred_bit=inferred)


def build_leak_report(taps: TapRecord, plan, message_bits) -> LeakReport:
    """Score Eve's inferences against Alice's encoding plan.

    The plan is ground truth for reporting only; nothing here feeds back into
    Eve's behaviour.
    """
    message_bits = np.asarray(message_bits, dtype=np.uint8)
    returned = taps.returned
    pos = taps.positions[returned]
    inferred = taps.inferred_bit[returned]

    truth = plan.encoded_bits_at(pos)
    known = truth >= 0
    accuracy = float(np.mean(inferred[known] == truth[known])) if known.any() else None

    learned = int(np.isin(pos, plan.message_positions, assume_unique=True).sum())
    leak = learned / message_bits.size if message_bits.size else 0.0
    return LeakReport(
        tapped_count=len(taps),
        surviving_tapped_count=int(returned.sum()),
        message_positions_learned=learned,
        leak_fraction=leak,
        accuracy_on_tapped=accuracy,
    )


class Eavesdropper:
    """Stateful per-session driver for an ``EveStrategy``."""

    def __init__(self, strategy: EveStrategy, rng: np.random.Generator):
        self.strategy = strategy
        self.rng = rng
        self.taps = TapRecord.empty()

    def forward(self, batch: StateBatch) -> StateBatch:
        if not self.strategy.active:
            return batch
        batch, self.taps = forward_intercept(batch, self.strategy.attack_fraction, self.rng)
        return batch

    def backward(self, batch: StateBatch, surviving_positions: np.ndarray) -> StateBatch:
        if not self.strategy.active:
            return batch
        flip = 0.0
        if self.strategy.camouflage:
            flip = camouflage_flip(self.strategy.noise_r, self.strategy.attack_fraction)
        batch, taps = backward_intercept(batch, self.taps, surviving_positions, self.rng, flip)
        self.taps = infer_bits(taps)
        return batch

    def report(self, plan, message_bits) -> LeakReport | None:
        if not self.strategy.active:
            return None
        return build_leak_report(self.taps, plan, message_bits)
