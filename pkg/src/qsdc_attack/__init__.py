"""Simulation of the two-way quantum one-time-pad direct-communication
protocol and of a channel-replacing intercept-resend attack on it."""

from .adversary import EveStrategy, LeakReport, attack_fraction_for
from .channel import ChannelModel, calibrate, roundtrip_qber
from .protocol import ProtocolParams, SessionOutcome, ThresholdPolicy, run_session
from .qubit import Basis, ConjugateState, Pauli, PureState

__all__ = [
    "Basis",
    "ChannelModel",
    "ConjugateState",
    "EveStrategy",
    "LeakReport",
    "Pauli",
    "ProtocolParams",
    "PureState",
    "SessionOutcome",
    "ThresholdPolicy",
    "attack_fraction_for",
    "calibrate",
    "roundtrip_qber",
    "run_session",
]
