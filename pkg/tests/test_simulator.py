import numpy as np
import pytest

from diagforge.circuit import Circuit, cnot, cp, h, mcp, p, rz, unitary, x
from diagforge.errors import ImpossibleOutcome, WidthMismatch
from diagforge.simulator import (
    Statevector,
    SparseOverflow,
    apply,
    apply_qft,
    basis_action,
    embedded_action,
    fidelity,
    l2_distance,
    post_select,
    qft_circuit,
    read_binary,
    read_csv,
    sparse_action,
    write_binary,
    write_csv,
)


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return Statevector(v / np.linalg.norm(v))


def random_circuit(rng, width, count):
    gates = []
    for _ in range(count):
        a, b, c = (int(q) for q in rng.choice(width, 3, replace=False)) if width > 2 else (0, 1, None)
        t = float(rng.uniform(-3, 3))
        options = [h(a), x(a), p(a, t), rz(a, t), cnot(a, b), cp(a, b, t)]
        if c is not None:
            options.append(mcp((a, b), c, t))
        gates.append(options[rng.integers(len(options))])
    return Circuit(width, tuple(gates))


def test_basic_states():
    sv = apply(Statevector.zero(1), Circuit(1, (h(0),)))
    assert np.allclose(sv.amps, [2**-0.5, 2**-0.5])
    s = random_state(np.random.default_rng(0), 3)
    assert np.allclose(apply(s, Circuit(3)).amps, s.amps)
    with pytest.raises(ValueError):
        Statevector(np.array([1.0, 1.0]))
    assert Statevector(np.array([1.0, 1.0]), raw=True).norm() > 1


def test_apply_matches_unitary_and_preserves_norm():
    rng = np.random.default_rng(1)
    for width in (2, 5, 8):
        for _ in range(5):
            c = random_circuit(rng, width, 40)
            s = random_state(rng, width)
            out = apply(s, c)
            assert abs(out.norm() - 1) < 1e-12
            if width <= 5:
                assert np.allclose(out.amps, unitary(c) @ s.amps, atol=1e-10)


def test_apply_composes():
    rng = np.random.default_rng(2)
    c1, c2 = random_circuit(rng, 4, 20), random_circuit(rng, 4, 20)
    s = random_state(rng, 4)
    assert np.allclose(apply(s, c1.then(c2)).amps, apply(apply(s, c1), c2).amps)


def test_width_mismatch():
    with pytest.raises(WidthMismatch):
        apply(Statevector.zero(2), Circuit(3))
    with pytest.raises(WidthMismatch):
        fidelity(Statevector.zero(2), Statevector.zero(3))


def test_qubit_zero_is_most_significant():
    out = apply(Statevector.zero(3), Circuit(3, (x(0),)))
    assert out.amps[4] == 1


def test_post_select():
    one = Statevector.basis(1, 1)
    state, prob = post_select(one, 0, 1)
    assert prob == 1 and np.allclose(state.amps, one.amps)
    plus = apply(Statevector.zero(1), Circuit(1, (h(0),)))
    assert np.isclose(post_select(plus, 0, 1)[1], 0.5)
    with pytest.raises(ImpossibleOutcome):
        post_select(Statevector.zero(2), 1, 1)
    s = random_state(np.random.default_rng(3), 4)
    assert abs(post_select(s, 2, 0)[1] + post_select(s, 2, 1)[1] - 1) < 1e-12


def test_fidelity_and_distance():
    a = Statevector.basis(2, 0)
    b = Statevector.basis(2, 3)
    assert fidelity(a, a) == 1 and l2_distance(a, a) == 0
    assert fidelity(a, b) == 0 and np.isclose(l2_distance(a, b), 2**0.5)
    rng = np.random.default_rng(4)
    s = random_state(rng, 5)
    t = Statevector.from_vector(s.amps + 0.01 * random_state(rng, 5).amps)
    assert 1 - fidelity(s, t) <= l2_distance(s, t) ** 2 + 1e-15


def test_qft():
    n = 4
    uniform = Statevector(np.full(16, 0.25 + 0j))
    assert np.allclose(apply_qft(uniform, inverse=True).amps, Statevector.zero(n).amps)
    rng = np.random.default_rng(5)
    s = random_state(rng, n)
    assert np.allclose(apply_qft(apply_qft(s), inverse=True).amps, s.amps)
    for k in range(1, 9):
        s = random_state(rng, k)
        for inverse in (False, True):
            a = apply_qft(s, inverse=inverse, method="direct")
            b = apply_qft(s, inverse=inverse, method="circuit")
            assert np.allclose(a.amps, b.amps, atol=1e-10)


def test_qft_diagonalizes_shift():
    for n in range(1, 7):
        size = 1 << n
        shift = np.roll(np.eye(size), 1, axis=0)
        f = unitary(qft_circuit(range(n)))
        conj = f @ shift @ f.conj().T
        assert np.allclose(conj, np.diag(np.exp(2j * np.pi * np.arange(size) / size)), atol=1e-10)


def test_qft_on_sub_register():
    rng = np.random.default_rng(6)
    s = random_state(rng, 5)
    a = apply_qft(s, [1, 2, 3], method="direct")
    b = apply_qft(s, [1, 2, 3], method="circuit")
    assert np.allclose(a.amps, b.amps)
    with pytest.raises(WidthMismatch):
        apply_qft(s, [4, 5])


def test_sparse_action_matches_dense():
    rng = np.random.default_rng(7)
    for _ in range(100):
        c = random_circuit(rng, 4, 25)
        u = unitary(c)
        col, idx, amp = sparse_action(c, np.arange(16))
        dense = np.zeros((16, 16), dtype=complex)
        np.add.at(dense, (idx, col), amp)
        assert np.allclose(dense, u, atol=1e-12)


def test_sparse_overflow_raises():
    c = Circuit(6, tuple(h(q) for q in range(6)))
    with pytest.raises(SparseOverflow):
        sparse_action(c, np.arange(2), max_terms=8)


def test_embedded_action_reports_leak():
    block, leak = embedded_action(Circuit(2, (cnot(0, 1),)), [0])
    assert np.isclose(leak, 1.0)
    block, leak = embedded_action(Circuit(2, (h(1), p(0, 0.3), h(1))), [0])
    assert leak < 1e-12 and np.allclose(block, np.diag([1, np.exp(0.3j)]))


def test_basis_action_wide_register():
    c = Circuit(70, (x(0), cnot(0, 69), rz(69, 0.25)))
    out, phase = basis_action(c, [0])
    assert int(out[0]) == (1 << 69) | 1 and np.isclose(phase[0], -0.25)


def test_dumps_round_trip(tmp_path):
    s = random_state(np.random.default_rng(8), 3)
    write_csv(s, tmp_path / "s.csv")
    write_binary(s, tmp_path / "s.bin")
    assert np.allclose(read_csv(tmp_path / "s.csv").amps, s.amps)
    assert np.array_equal(read_binary(tmp_path / "s.bin").amps, s.amps)
