import json
from importlib import resources

import numpy as np
import pytest

from diagforge.circuit import (
    CIRCUIT_SCHEMA,
    Circuit,
    Gate,
    cnot,
    cp,
    depth,
    deserialize,
    dumps,
    gphase,
    h,
    lower_mcp,
    mcp,
    p,
    rz,
    serialize,
    size,
    unitary,
    x,
)
from diagforge.errors import InsufficientAncilla, SchemaViolation, UnloweredCircuit, WidthTooLarge
from diagforge.simulator import basis_action


def random_circuit(rng, width, count):
    gates = []
    for _ in range(count):
        kind = rng.choice(["X", "H", "P", "RZ", "CNOT", "CP", "GLOBAL_PHASE"])
        a, b = (int(q) for q in rng.choice(width, 2, replace=False))
        theta = float(rng.uniform(-np.pi, np.pi))
        gates.append({
            "X": lambda: x(a), "H": lambda: h(a), "P": lambda: p(a, theta), "RZ": lambda: rz(a, theta),
            "CNOT": lambda: cnot(a, b), "CP": lambda: cp(a, b, theta), "GLOBAL_PHASE": lambda: gphase(theta),
        }[kind]())
    return Circuit(width, tuple(gates))


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", 1, (1,))
    with pytest.raises(ValueError):
        Gate("RZ", 0)
    with pytest.raises(ValueError):
        Gate("H", 0, (1,))
    with pytest.raises(ValueError):
        Gate("GLOBAL_PHASE", 0, theta=1.0)
    with pytest.raises(ValueError):
        Circuit(2, (cnot(0, 2),))


def test_depth_examples():
    assert depth(Circuit(4, tuple(h(q) for q in range(4)))) == 1
    assert depth(Circuit(4, (cnot(0, 1), cnot(1, 2), cnot(0, 3)))) == 2
    assert depth(Circuit(2, (gphase(1.0), h(0)))) == 1
    assert depth(Circuit(0)) == 0


def test_size_excludes_global_phase_and_rejects_mcp():
    assert size(Circuit(1)) == 0
    assert size(Circuit(2, (gphase(0.3), h(0), cnot(0, 1)))) == 2
    with pytest.raises(UnloweredCircuit):
        size(Circuit(3, (mcp((0, 1), 2, 0.5),)))
    with pytest.raises(UnloweredCircuit):
        depth(Circuit(3, (mcp((0, 1), 2, 0.5),)))


def test_gate_matrices_follow_conventions():
    a = 0.37
    assert np.allclose(unitary(Circuit(1, (rz(0, a),))), np.diag([np.exp(1j * a), np.exp(-1j * a)]))
    assert np.allclose(unitary(Circuit(1, (p(0, a),))), np.diag([1, np.exp(1j * a)]))
    assert np.allclose(unitary(Circuit(1)), np.eye(2))
    # qubit 0 is the most significant bit: X on qubit 0 maps |00> to |10>
    assert np.allclose(unitary(Circuit(2, (x(0),)))[:, 0], [0, 0, 1, 0])
    assert np.allclose(unitary(Circuit(2, (gphase(a),))), np.exp(1j * a) * np.eye(4))


def test_unitary_width_cap():
    with pytest.raises(WidthTooLarge):
        unitary(Circuit(13))


def test_random_unitaries_are_unitary():
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = unitary(random_circuit(rng, 4, 30))
        assert np.max(np.abs(u.conj().T @ u - np.eye(16))) < 1e-10


def test_inverse():
    rng = np.random.default_rng(1)
    c = random_circuit(rng, 3, 25)
    assert np.allclose(unitary(c.then(c.inverse())), np.eye(8), atol=1e-12)


def mcp_matrix(n, controls, anticontrols, target, theta):
    diag = np.ones(1 << n, dtype=complex)
    for k in range(1 << n):
        bit = lambda q: (k >> (n - 1 - q)) & 1
        if all(bit(q) for q in controls + (target,)) and not any(bit(q) for q in anticontrols):
            diag[k] = np.exp(1j * theta)
    return np.diag(diag)


@pytest.mark.parametrize("strategy", ["walsh_staircase", "toffoli_ladder"])
def test_lower_single_control_is_cp(strategy):
    low = lower_mcp(Circuit(2, (mcp((0,), 1, 0.4),)), strategy)
    assert [g.kind for g in low.gates] == ["CP"]


def test_lower_two_controls_staircase():
    low = lower_mcp(Circuit(3, (mcp((0, 1), 2, np.pi / 3),)), "walsh_staircase")
    assert low.lowered and size(low) <= 13
    assert np.allclose(unitary(low), mcp_matrix(3, (0, 1), (), 2, np.pi / 3), atol=1e-10)


def test_lower_anticontrols():
    g = mcp((0,), 3, 0.9, anticontrols=(1, 2))
    want = mcp_matrix(4, (0,), (1, 2), 3, 0.9)
    assert np.allclose(unitary(lower_mcp(Circuit(4, (g,)), "walsh_staircase")), want, atol=1e-10)
    low = lower_mcp(Circuit(6, (g,)), "toffoli_ladder", [4, 5])
    u = unitary(low)
    zero_anc = [k for k in range(64) if k & 0b11 == 0]
    assert np.allclose(u[np.ix_(zero_anc, zero_anc)], want, atol=1e-10)


def test_toffoli_ladder_restores_ancillas():
    g = mcp((0, 1, 2, 3), 4, 1.1)
    low = lower_mcp(Circuit(8, (g,)), "toffoli_ladder", [5, 6, 7])
    u = unitary(low)
    for k in range(32):
        col = u[:, k << 3]
        assert np.isclose(np.sum(np.abs(col[np.arange(0, 256, 8)]) ** 2), 1.0)
    with pytest.raises(InsufficientAncilla):
        lower_mcp(Circuit(8, (g,)), "toffoli_ladder", [5, 6])


def test_serialize_round_trip():
    rng = np.random.default_rng(3)
    for c in (Circuit(0), random_circuit(rng, 5, 50), Circuit(4, (mcp((0, 1), 3, 0.2, anticontrols=(2,)),))):
        back = deserialize(dumps(c))
        assert back == c
        assert deserialize(serialize(c)) == c


def test_deserialize_rejects_bad_documents():
    doc = serialize(Circuit(2, (h(0), cnot(0, 1))))
    for bad in (
        {**doc, "version": 2},
        {**doc, "width": 1},
        {**doc, "global_phase": 1.0},
        {**doc, "gates": [{"kind": "RZ", "target": 0}]},
        {**doc, "gates": [{"kind": "FOO", "target": 0}]},
        "{not json",
    ):
        with pytest.raises(SchemaViolation):
            deserialize(bad)


def test_shipped_schema_matches_code():
    shipped = json.loads(resources.files("diagforge").joinpath("data/circuit.schema.json").read_text())
    assert shipped == CIRCUIT_SCHEMA


def test_roles():
    c = Circuit(3, (), ("main", "flag", "copy_ancilla"))
    assert c.qubits_with_role("flag") == [1]
    with pytest.raises(ValueError):
        Circuit(2, (), ("main", "junk"))


def test_basis_action_agrees_with_unitary_on_classical_circuits():
    rng = np.random.default_rng(4)
    for _ in range(30):
        gates = []
        for _ in range(20):
            a, b, c = (int(q) for q in rng.choice(4, 3, replace=False))
            gates.append([x(a), cnot(a, b), rz(a, 0.3), cp(a, b, -0.7), mcp((a, b), c, 1.3, anticontrols=())][rng.integers(5)])
        circ = Circuit(4, tuple(gates))
        u = unitary(circ)
        out, phase = basis_action(circ, np.arange(16))
        assert np.allclose(u[out, np.arange(16)], np.exp(1j * phase), atol=1e-12)
