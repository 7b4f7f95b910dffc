"""The two-way one-time-pad session as explicit Bob/Alice steps.

Data flow between parties is limited to the ``StateBatch`` in flight and the
public transcripts (first-check announcement, surviving positions, and the
check positions/bits revealed at the end). Functions run on Alice's side
never receive the ``BatchRecord``; Eve only ever sees the batch and
``surviving_positions``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adversary import Eavesdropper, EveStrategy, LeakReport
from .channel import IDEAL_CHANNEL, ChannelModel, roundtrip_qber, transmit_batch
from .qubit import StateBatch
from .stats import QberEstimate, estimate_qber, threshold

# Independent child streams per actor so that adding or removing Eve never
# shifts anyone else's randomness.
_STREAMS = ("bob", "alice", "forward", "backward", "eve")


def round_count(fraction: float, n: int) -> int:
    """``fraction * n`` rounded half to even."""
    return round(fraction * n)


def capacity(n: int, first_check_fraction: float, second_check_fraction: float) -> int:
    surviving = n - round_count(first_check_fraction, n)
    return surviving - round_count(second_check_fraction, surviving)


@dataclass(frozen=True)
class ThresholdPolicy:
    """One-sided abort rule: abort iff the observed QBER exceeds the threshold.

    ``expected_r`` is the per-pass channel rate. The second check expects
    the two-pass rate ``2r(1-r)`` unless ``second_expected_r`` overrides it.
    """

    expected_r: float = 0.0
    k_sigma: float = 3.0
    second_expected_r: float | None = None

    def __post_init__(self):
        if self.k_sigma < 0:
            raise ValueError("k_sigma must be non-negative")
        if not 0.0 <= self.expected_r <= 0.5:
            raise ValueError(f"expected_r={self.expected_r} outside [0, 0.5]")

    @property
    def expected_second(self) -> float:
        if self.second_expected_r is not None:
            return self.second_expected_r
        return roundtrip_qber(self.expected_r)


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    message_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    first_check_fraction: float = 0.2
    second_check_fraction: float = 0.1
    policy: ThresholdPolicy = ThresholdPolicy()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("batch size n must be at least 1")
        for name in ("first_check_fraction", "second_check_fraction"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        bits = np.asarray(self.message_bits, dtype=np.uint8)
        if bits.ndim != 1 or np.any(bits > 1):
            raise ValueError("message_bits must be a 1-d sequence of 0/1")
        object.__setattr__(self, "message_bits", bits)
        if bits.size > self.capacity:
            raise ValueError(f"message of {bits.size} bits exceeds capacity {self.capacity}")

    @property
    def capacity(self) -> int:
        return capacity(self.n, self.first_check_fraction, self.second_check_fraction)


@dataclass(frozen=True)
class BatchRecord:
    basis: np.ndarray
    bit: np.ndarray

    def __len__(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class FirstCheckTranscript:
    positions: np.ndarray
    meas_basis: np.ndarray
    outcome_bit: np.ndarray


@dataclass(frozen=True)
class EncodingPlan:
    surviving_positions: np.ndarray
    check_positions: np.ndarray
    check_bits: np.ndarray
    message_positions: np.ndarray
    carried_message: np.ndarray

    def encoded_bits_at(self, positions: np.ndarray) -> np.ndarray:
        """Bit Alice applied at each position; -1 where she never held the qubit.

        Surviving positions carrying neither a check nor a message bit got
        the identity, i.e. 0.
        """
        positions = np.asarray(positions, dtype=np.int64)
        out = np.full(positions.size, -1, dtype=np.int8)
        out[np.isin(positions, self.surviving_positions)] = 0
        for where, bits in ((self.check_positions, self.check_bits),
                            (self.message_positions, self.carried_message)):
            if where.size == 0:
                continue
            idx = np.minimum(np.searchsorted(where, positions), where.size - 1)
            hit = where[idx] == positions
            out[hit] = bits[idx[hit]]
        return out


@dataclass(frozen=True)
class DecodedBits:
    positions: np.ndarray  # ascending
    bits: np.ndarray

    def at(self, positions: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.positions, positions)
        if np.any(idx >= self.positions.size) or np.any(
            self.positions[np.minimum(idx, self.positions.size - 1)] != positions
        ):
            raise ValueError("requested positions were not decoded")
        return self.bits[idx]


@dataclass(frozen=True)
class SessionOutcome:
    qber1: QberEstimate
    abort1: bool
    qber2: QberEstimate | None = None
    abort2: bool | None = None
    decoded_message: bytes | None = None  # one byte (0/1) per message bit
    message_errors: int | None = None
    eve_report: LeakReport | None = None

    @property
    def aborted(self) -> bool:
        return self.abort1 or bool(self.abort2)


def bob_prepare(n: int, rng: np.random.Generator) -> tuple[BatchRecord, StateBatch]:
    """Each qubit uniform over |0>, |1>, |+>, |->."""
    if n < 1:
        raise ValueError("batch size n must be at least 1")
    basis = rng.integers(0, 2, size=n, dtype=np.uint8)
    bit = rng.integers(0, 2, size=n, dtype=np.uint8)
    return BatchRecord(basis.copy(), bit.copy()), StateBatch(basis, bit)


def alice_first_check(
    batch: StateBatch, fraction: float, rng: np.random.Generator
) -> tuple[FirstCheckTranscript, np.ndarray, StateBatch]:
    """Measure a uniform random subset in random bases.

    Returns the public transcript, the ascending surviving positions and the
    batch with the checked qubits collapsed.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("first-check fraction must lie in (0, 1)")
    n = len(batch)
    k = round_count(fraction, n)
    if k == 0:
        raise ValueError("first-check subset is empty; cannot estimate QBER")
    positions = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
    bases = rng.integers(0, 2, size=k, dtype=np.uint8)
    outcomes, batch = batch.measure(positions, bases, rng)
    mask = np.ones(n, dtype=bool)
    mask[positions] = False
    return FirstCheckTranscript(positions, bases, outcomes), np.flatnonzero(mask), batch


def bob_first_verify(
    transcript: FirstCheckTranscript, record: BatchRecord, policy: ThresholdPolicy
) -> tuple[QberEstimate, bool]:
    pos = transcript.positions
    if pos.size and (pos.min() < 0 or pos.max() >= len(record)):
        raise ValueError("transcript position outside the batch")
    same = transcript.meas_basis == record.basis[pos]
    samples = int(same.sum())
    if samples == 0:
        raise ValueError("no coinciding-basis positions; first check is undecidable")
    errors = int((transcript.outcome_bit[same] != record.bit[pos][same]).sum())
    est = estimate_qber(errors, samples)
    return est, est.rate > threshold(policy.expected_r, samples, policy.k_sigma)


def alice_encode(
    batch: StateBatch,
    surviving_positions: np.ndarray,
    message_bits: np.ndarray,
    second_check_fraction: float,
    rng: np.random.Generator,
) -> tuple[StateBatch, EncodingPlan]:
    surviving = np.asarray(surviving_positions, dtype=np.int64)
    message_bits = np.asarray(message_bits, dtype=np.uint8)
    k = round_count(second_check_fraction, surviving.size)
    if surviving.size - k < message_bits.size:
        raise ValueError(
            f"message of {message_bits.size} bits exceeds capacity {surviving.size - k}"
        )
    check_positions = np.sort(rng.choice(surviving, size=k, replace=False))
    check_bits = rng.integers(0, 2, size=k, dtype=np.uint8)
    free = surviving[~np.isin(surviving, check_positions, assume_unique=True)]
    message_positions = free[: message_bits.size]

    batch = batch.encode(check_positions, check_bits)
    batch = batch.encode(message_positions, message_bits)
    plan = EncodingPlan(surviving, check_positions, check_bits, message_positions, message_bits)
    return batch, plan


def bob_decode(
    batch: StateBatch,
    record: BatchRecord,
    surviving_positions: np.ndarray,
    rng: np.random.Generator,
) -> DecodedBits:
    """Measure each surviving qubit in its preparation basis, XOR the prepared bit."""
    pos = np.asarray(surviving_positions, dtype=np.int64)
    outcomes, _ = batch.measure(pos, record.basis[pos], rng)
    return DecodedBits(pos, outcomes ^ record.bit[pos])


def final_check(
    decoded: DecodedBits, plan: EncodingPlan, policy: ThresholdPolicy
) -> tuple[QberEstimate, bool]:
    samples = plan.check_positions.size
    if samples == 0:
        raise ValueError("no check positions; final check is undecidable")
    errors = int((decoded.at(plan.check_positions) != plan.check_bits).sum())
    est = estimate_qber(errors, samples)
    return est, est.rate > threshold(policy.expected_second, samples, policy.k_sigma)


def run_session(
    params: ProtocolParams,
    forward_channel: ChannelModel = IDEAL_CHANNEL,
    backward_channel: ChannelModel = IDEAL_CHANNEL,
    adversary: EveStrategy | None = None,
    seed: int | np.random.SeedSequence = 0,
) -> SessionOutcome:
    """Run one full session; stops after the first check if it aborts.

    Eve, when present, sits next to Bob: she taps before the forward channel
    and after the backward channel. Channel replacement is the caller's job
    (pass ideal channels).
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = dict(zip(_STREAMS, (np.random.default_rng(s) for s in ss.spawn(len(_STREAMS)))))
    eve = Eavesdropper(adversary or EveStrategy(), rngs["eve"])

    record, batch = bob_prepare(params.n, rngs["bob"])
    batch = eve.forward(batch)
    batch = transmit_batch(batch, forward_channel, rngs["forward"])

    transcript, surviving, batch = alice_first_check(
        batch, params.first_check_fraction, rngs["alice"]
    )
    qber1, abort1 = bob_first_verify(transcript, record, params.policy)
    if abort1:
        return SessionOutcome(qber1, True)

    batch, plan = alice_encode(
        batch, surviving, params.message_bits, params.second_check_fraction, rngs["alice"]
    )
    batch = transmit_batch(batch, backward_channel, rngs["backward"])
    batch = eve.backward(batch, surviving)

    decoded = bob_decode(batch, record, surviving, rngs["bob"])
    qber2, abort2 = final_check(decoded, plan, params.policy)
    message = decoded.at(plan.message_positions)
    return SessionOutcome(
        qber1=qber1,
        abort1=False,
        qber2=qber2,
        abort2=abort2,
        decoded_message=message.astype(np.uint8).tobytes(),
        message_errors=int((message != params.message_bits).sum()),
        eve_report=eve.report(plan, params.message_bits),
    )
