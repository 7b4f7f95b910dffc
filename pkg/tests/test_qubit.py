import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import VECTORS, backend_equivalence
from qsdc_attack import qubit
from qsdc_attack.qubit import Basis, ConjugateState, Pauli, PureState, StateBatch

BACKENDS = ("symbolic", "statevector")
R = 1 / math.sqrt(2)


@pytest.mark.parametrize(
    "basis,bit,amps",
    [(Basis.Z, 0, (1, 0)), (Basis.X, 0, (R, R)), (Basis.X, 1, (R, -R)), (Basis.Z, 1, (0, 1))],
)
def test_eigenstate_amplitudes(basis, bit, amps):
    assert qubit.new_eigenstate(basis, bit) == ConjugateState(basis, bit)
    sv = qubit.new_eigenstate(basis, bit, "statevector")
    assert np.allclose(sv.vector, amps, atol=1e-15)
    assert np.allclose(qubit.to_pure(ConjugateState(basis, bit)).vector, amps, atol=1e-15)


def test_bad_inputs():
    with pytest.raises(ValueError):
        qubit.new_eigenstate(Basis.Z, 2)
    with pytest.raises(ValueError):
        qubit.new_eigenstate(Basis.Z, 0, backend="density")
    with pytest.raises(ValueError):
        PureState(1.0, 1.0)


@pytest.mark.parametrize(
    "state,p,expected",
    [
        (ConjugateState(Basis.Z, 0), Pauli.Y, ConjugateState(Basis.Z, 1)),
        (ConjugateState(Basis.X, 0), Pauli.Y, ConjugateState(Basis.X, 1)),
        (ConjugateState(Basis.Z, 1), Pauli.Z, ConjugateState(Basis.Z, 1)),
    ],
)
def test_apply_pauli_examples(state, p, expected):
    assert qubit.apply_pauli(state, p) == expected


@pytest.mark.parametrize(
    "state,m,expected",
    [
        (ConjugateState(Basis.Z, 0), 1, ConjugateState(Basis.Z, 1)),
        (ConjugateState(Basis.X, 1), 1, ConjugateState(Basis.X, 0)),
        (ConjugateState(Basis.X, 1), 0, ConjugateState(Basis.X, 1)),
    ],
)
def test_apply_encoding_examples(state, m, expected):
    assert qubit.apply_encoding(state, m) == expected


@pytest.mark.parametrize("basis,bit,p", list(itertools.product(Basis, (0, 1), Pauli)))
def test_pauli_flip_table_matches_statevector(basis, bit, p):
    sym = qubit.apply_pauli(ConjugateState(basis, bit), p)
    expect_flip = {Pauli.I: False, Pauli.Y: True, Pauli.X: basis == Basis.Z,
                   Pauli.Z: basis == Basis.X}[p]
    assert sym == ConjugateState(basis, bit ^ int(expect_flip))
    vec = qubit.apply_pauli(qubit.to_pure(ConjugateState(basis, bit)), p).vector
    assert abs(np.vdot(VECTORS[(basis, sym.bit)], vec)) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_compose_pauli_group_table():
    for p, q in itertools.product(Pauli, repeat=2):
        prod = qubit._PAULI_MATRIX[p] @ qubit._PAULI_MATRIX[q]
        target = qubit._PAULI_MATRIX[qubit.compose_pauli(p, q)]
        # Equal up to a phase in {1, -1, i, -i}.
        phase = np.trace(target.conj().T @ prod) / 2
        assert abs(abs(phase) - 1) < 1e-12
        assert np.allclose(prod, phase * target)


@pytest.mark.parametrize(
    "state,basis,bit,p",
    [
        (ConjugateState(Basis.Z, 0), Basis.Z, 0, 1.0),
        (ConjugateState(Basis.Z, 0), Basis.X, 0, 0.5),
        (ConjugateState(Basis.X, 1), Basis.X, 0, 0.0),
    ],
)
def test_outcome_probability_examples(state, basis, bit, p):
    assert qubit.outcome_probability(state, basis, bit) == p
    assert qubit.outcome_probability(qubit.to_pure(state), basis, bit) == pytest.approx(p, abs=1e-12)


def test_measure_eigenstate_is_deterministic():
    rng = np.random.default_rng(0)
    s = ConjugateState(Basis.Z, 1)
    for _ in range(20):
        out = qubit.measure(s, Basis.Z, rng)
        assert out.bit == 1 and out.post_state == s


@pytest.mark.parametrize("backend", BACKENDS)
def test_conjugate_measurement_is_fair_coin(backend):
    rng = np.random.default_rng(1)
    s = qubit.new_eigenstate(Basis.X, 0, backend)
    bits = []
    for _ in range(4000):
        out = qubit.measure(s, Basis.Z, rng)
        assert qubit.outcome_probability(out.post_state, Basis.Z, out.bit) == pytest.approx(1.0)
        bits.append(out.bit)
    # 3 sigma of a fair coin over 4000 draws
    assert abs(np.mean(bits) - 0.5) < 3 * 0.5 / math.sqrt(4000)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("basis,bit,m", list(itertools.product(Basis, (0, 1), (0, 1))))
def test_sigma_y_decode_identity(backend, basis, bit, m):
    s = qubit.apply_encoding(qubit.new_eigenstate(basis, bit, backend), m)
    assert qubit.outcome_probability(s, basis, bit ^ m) == pytest.approx(1.0, abs=1e-12)
    out = qubit.measure(s, basis, np.random.default_rng(0))
    assert out.bit ^ bit == m


def test_backend_equivalence_depth_2():
    # The depth-4 walk runs in the acceptance suite.
    stats = backend_equivalence(max_depth=2)
    assert stats["max_dev"] <= 1e-12
    assert stats["det_mismatch"] == 0 and stats["branch_mismatch"] == 0


ops = st.lists(
    st.one_of(
        st.tuples(st.just("pauli"), st.sampled_from(list(Pauli))),
        st.tuples(st.just("encode"), st.integers(0, 1)),
        st.tuples(st.just("measure"), st.sampled_from(list(Basis))),
    ),
    max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(start=st.tuples(st.sampled_from(list(Basis)), st.integers(0, 1)), seq=ops,
       seed=st.integers(0, 2**32 - 1))
def test_statevector_stays_normalized(start, seq, seed):
    rng = np.random.default_rng(seed)
    s = qubit.new_eigenstate(*start, backend="statevector")
    for kind, arg in seq:
        if kind == "pauli":
            s = qubit.apply_pauli(s, arg)
        elif kind == "encode":
            s = qubit.apply_encoding(s, arg)
        else:
            out = qubit.measure(s, arg, rng)
            again = qubit.measure(out.post_state, arg, rng)
            assert again.bit == out.bit
            s = out.post_state
        assert abs(abs(s.amp0) ** 2 + abs(s.amp1) ** 2 - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 60), seed=st.integers(0, 2**32 - 1))
def test_batch_agrees_with_scalar_ops(n, seed):
    rng = np.random.default_rng(seed)
    batch = StateBatch(rng.integers(0, 2, n, dtype=np.uint8), rng.integers(0, 2, n, dtype=np.uint8))
    paulis = rng.integers(0, 4, n, dtype=np.uint8)
    after = batch.apply_paulis(paulis)
    for i in range(n):
        assert after[i] == qubit.apply_pauli(batch[i], Pauli(int(paulis[i])))

    pos = np.sort(rng.choice(n, size=rng.integers(0, n + 1), replace=False))
    bases = rng.integers(0, 2, pos.size, dtype=np.uint8)
    outcomes, measured = after.measure(pos, bases, rng)
    for j, i in enumerate(pos):
        p = qubit.outcome_probability(after[i], Basis(int(bases[j])), int(outcomes[j]))
        assert p > 0
        assert measured[i] == ConjugateState(Basis(int(bases[j])), int(outcomes[j]))
    untouched = np.setdiff1d(np.arange(n), pos)
    assert all(measured[i] == after[i] for i in untouched)
    # the input batch is never mutated
    assert np.array_equal(after.bit, batch.apply_paulis(paulis).bit)


def test_batch_encode_matches_scalar():
    batch = StateBatch.from_states([ConjugateState(b, x) for b in Basis for x in (0, 1)])
    enc = batch.encode(np.arange(4), np.array([1, 0, 1, 1]))
    expect = [qubit.apply_encoding(s, m) for s, m in zip(batch.states(), (1, 0, 1, 1))]
    assert enc.states() == expect
