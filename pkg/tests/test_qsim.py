"""Statevector engine checks: pinned examples plus randomized invariants."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqc_lab import qsim
from cvqc_lab.qsim import (
    CapExceeded,
    DimensionMismatch,
    NotAProjector,
    NotUnitary,
    Operator,
    RegisterLayout,
    StateVector,
    UnknownRegister,
    ZeroState,
    apply,
    basis_state,
    from_amplitudes,
    measure,
    project,
    tensor,
    zeros,
)

H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)


def _random_state(rng, layout):
    amps = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    amps /= np.linalg.norm(amps)
    return StateVector(layout, amps)


def test_layout_rejects_duplicates_and_cap():
    with pytest.raises(ValueError):
        RegisterLayout((("a", 1), ("a", 2)))
    with pytest.raises(CapExceeded):
        RegisterLayout((("big", 21),))
    lay = RegisterLayout((("c", 2), ("x", 3)))
    assert lay.total_qubits == 5 and lay.dim == 32
    assert lay.qubit_positions("x") == [2, 3, 4]
    with pytest.raises(UnknownRegister):
        lay.width("nope")


def test_statevector_validation():
    lay = RegisterLayout((("q", 1),))
    with pytest.raises(DimensionMismatch):
        StateVector(lay, np.zeros(3, dtype=np.complex128))
    sub = StateVector(lay, np.array([0.5, 0.0]))
    assert sub.norm2 == pytest.approx(0.25)


def test_operator_validation():
    with pytest.raises(NotUnitary):
        Operator.unitary([[1, 0], [0, 2]])
    with pytest.raises(NotAProjector):
        Operator.projector([[0.5, 0.5j], [0.5, 0.5]])
    Operator.unitary(H)
    Operator.projector(P0)
    with pytest.raises(DimensionMismatch):
        Operator(4, np.eye(2), "unitary")


def test_tensor_basis_product():
    # |0> (x) |1> lands on index 1 of a 2-qubit space
    a = basis_state(RegisterLayout((("a", 1),)), "0")
    b = basis_state(RegisterLayout((("b", 1),)), "1")
    out = tensor(a, b)
    expect = np.zeros(4)
    expect[1] = 1.0
    assert np.allclose(out.amps, expect)


def test_tensor_linearity():
    plus = from_amplitudes(RegisterLayout((("a", 1),)), [1 / np.sqrt(2), 1 / np.sqrt(2)])
    zero = basis_state(RegisterLayout((("b", 1),)), "0")
    out = tensor(plus, zero)
    assert np.allclose(out.amps, [1 / np.sqrt(2), 0, 1 / np.sqrt(2), 0])


def test_tensor_norm_product():
    rng = np.random.default_rng(7)
    a = _random_state(rng, RegisterLayout((("a", 2),)))
    b = _random_state(rng, RegisterLayout((("b", 1),)))
    a = StateVector(a.layout, a.amps * 0.9)
    out = tensor(a, b)
    assert abs(out.norm2 - a.norm2 * b.norm2) <= 1e-12


def test_tensor_cap():
    a = zeros(RegisterLayout((("a", 12),)))
    b = zeros(RegisterLayout((("b", 12),)))
    with pytest.raises(CapExceeded):
        tensor(a, b)


def test_apply_pauli_flip():
    lay = RegisterLayout((("C", 1),))
    out = apply(Operator.unitary(X), basis_state(lay, "0"), ["C"])
    assert np.allclose(out.amps, [0, 1])


def test_apply_identity_bitwise():
    rng = np.random.default_rng(3)
    lay = RegisterLayout((("a", 2), ("b", 1)))
    psi = _random_state(rng, lay)
    out = apply(Operator.unitary(np.eye(2)), psi, ["b"])
    assert np.array_equal(out.amps, psi.amps)


def test_apply_h_involution():
    rng = np.random.default_rng(11)
    lay = RegisterLayout((("a", 1), ("b", 2)))
    psi = _random_state(rng, lay)
    once = apply(Operator.unitary(H), psi, ["a"])
    twice = apply(Operator.unitary(H), once, ["a"])
    assert np.max(np.abs(twice.amps - psi.amps)) <= 1e-12


def test_apply_register_order():
    # CNOT with control listed first: |10> on (hi, lo) flips lo
    lay = RegisterLayout((("lo", 1), ("hi", 1)))
    cnot = np.eye(4)[[0, 1, 3, 2]]
    psi = basis_state(lay, "01")  # lo=0, hi=1
    out = apply(Operator.unitary(cnot), psi, ["hi", "lo"])
    assert np.allclose(out.amps, basis_state(lay, "11").amps)


def test_apply_errors():
    lay = RegisterLayout((("a", 1),))
    psi = zeros(lay)
    with pytest.raises(DimensionMismatch):
        apply(Operator.unitary(np.eye(4)), psi, ["a"])
    with pytest.raises(UnknownRegister):
        apply(Operator.unitary(np.eye(2)), psi, ["zz"])


def test_project_textbook():
    plus = from_amplitudes(RegisterLayout((("q", 1),)), [1 / np.sqrt(2), 1 / np.sqrt(2)])
    out = project(Operator.projector(P0), plus, ["q"])
    assert np.allclose(out.amps, [1 / np.sqrt(2), 0])
    assert out.norm2 == pytest.approx(0.5)


def test_project_identity_and_idempotence():
    rng = np.random.default_rng(5)
    lay = RegisterLayout((("a", 2),))
    psi = _random_state(rng, lay)
    eye = Operator.projector(np.eye(4))
    assert np.array_equal(project(eye, psi, ["a"]).amps, psi.amps)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    p = Operator.projector(np.outer(v, v.conj()))
    once = project(p, psi, ["a"])
    twice = project(p, once, ["a"])
    assert np.max(np.abs(twice.amps - once.amps)) <= 1e-12
    with pytest.raises(NotAProjector):
        project(Operator.unitary(H), psi, ["a"][:1])


def test_measure_deterministic():
    lay = RegisterLayout((("r", 2),))
    outcome, post, prob = measure(basis_state(lay, "01"), "r", np.random.default_rng(0))
    assert outcome == "01" and prob == pytest.approx(1.0)
    assert np.allclose(post.amps, basis_state(lay, "01").amps)


def test_measure_born_frequency():
    # |+> should come up 1 about half the time
    lay = RegisterLayout((("q", 1),))
    plus = from_amplitudes(lay, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    rng = np.random.default_rng(2024)
    n = 10**5
    ones = sum(measure(plus, "q", rng)[0] == "1" for _ in range(n))
    assert abs(ones / n - 0.5) <= 0.01


def test_measure_entanglement_collapse():
    lay = RegisterLayout((("a", 1), ("b", 1)))
    bell = from_amplitudes(lay, np.array([1, 0, 0, 1]) / np.sqrt(2))
    rng = np.random.default_rng(1)
    for _ in range(20):
        outcome, post, prob = measure(bell, "a", rng)
        assert prob == pytest.approx(0.5)
        target = "00" if outcome == "0" else "11"
        assert np.allclose(post.amps, basis_state(lay, target).amps)


def test_measure_subnormalized_matches_normalized():
    lay = RegisterLayout((("q", 1),))
    amps = np.array([0.3, 0.4], dtype=np.complex128)
    scaled = StateVector(lay, amps)
    outcome, post, prob = measure(scaled, "q", np.random.default_rng(9))
    expect = 0.09 / 0.25 if outcome == "0" else 0.16 / 0.25
    assert prob == pytest.approx(expect)
    assert post.norm2 == pytest.approx(1.0)


def test_measure_zero_state():
    lay = RegisterLayout((("q", 1),))
    dead = StateVector(lay, np.zeros(2))
    with pytest.raises(ZeroState):
        measure(dead, "q", np.random.default_rng(0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_unitarity_preserves_norm(seed, nq):
    rng = np.random.default_rng(seed)
    lay = RegisterLayout((("a", nq), ("pad", 1)))
    psi = _random_state(rng, lay)
    m = rng.standard_normal((2**nq, 2**nq)) + 1j * rng.standard_normal((2**nq, 2**nq))
    q, _ = np.linalg.qr(m)
    out = apply(Operator.unitary(q), psi, ["a"])
    assert abs(out.norm2 - psi.norm2) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projection_monotone(seed):
    rng = np.random.default_rng(seed)
    lay = RegisterLayout((("a", 2),))
    psi = _random_state(rng, lay)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, _ = np.linalg.qr(m)
    rank = int(rng.integers(1, 4))
    p = q[:, :rank] @ q[:, :rank].conj().T
    out = project(Operator.projector(p), psi, ["a"])
    assert out.norm2 <= psi.norm2 + 1e-12


def test_measurement_completeness():
    # conditional outcome probabilities over a register sum to one
    rng = np.random.default_rng(42)
    lay = RegisterLayout((("a", 2), ("b", 2)))
    psi = _random_state(rng, lay)
    seen = {}
    probe = np.random.default_rng(0)
    for _ in range(400):
        outcome, _, prob = measure(psi, "a", probe)
        seen[outcome] = prob
    assert abs(sum(seen.values()) - 1.0) <= 1e-9


def test_snapshot_roundtrip():
    lay = RegisterLayout((("a", 1), ("b", 1)))
    psi = from_amplitudes(lay, [0.5, 0.5j, -0.5, -0.5j])
    snap = json.loads(json.dumps(psi.to_snapshot()))
    assert snap["layout"] == [["a", 1], ["b", 1]]
    back = np.array([complex(re, im) for re, im in snap["amps"]])
    assert np.array_equal(back, psi.amps)


def test_qsim_module_has_no_hidden_norm_mutation():
    lay = RegisterLayout((("q", 1),))
    psi = from_amplitudes(lay, [0.6, 0.8])
    before = psi.amps.copy()
    apply(Operator.unitary(H), psi, ["q"])
    project(Operator.projector(P0), psi, ["q"])
    measure(psi, "q", np.random.default_rng(0))
    assert np.array_equal(psi.amps, before)
