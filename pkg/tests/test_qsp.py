import csv
import io
import math

import numpy as np
import pytest

from diagforge.applications.qsp import (
    aligned_distance,
    ancilla_sweep,
    budget_plan,
    pareto_dominates,
    prepare_state,
    rows_to_csv,
    sweep,
)
from diagforge.circuit import depth
from diagforge.functions import FunctionSpec


def test_constant_profile_gives_uniform_state():
    r = prepare_state(FunctionSpec.builtin("constant", c=0.7), 5, alpha=1.25)
    assert np.allclose(r.prepared.amps, np.full(32, 32**-0.5), atol=1e-10)
    assert math.isclose(r.p_success, 1 / 1.25**2, rel_tol=1e-10)
    assert r.infidelity < 1e-12


@pytest.mark.parametrize("budget", [None, {"sparse_s": 12}, {"m_qubits": 3}, {"epsilon": 0.05}])
def test_infidelity_below_squared_distance(budget):
    r = prepare_state(FunctionSpec.builtin("gaussian", sigma=0.15), 7, budget)
    assert r.infidelity <= r.l2_error**2 + 1e-12
    assert 0 < r.p_success <= 1


def test_exact_encoding_reproduces_samples():
    r = prepare_state(FunctionSpec.builtin("gaussian", sigma=0.1), 8)
    assert r.l2_error < 1e-10


def test_budget_plan():
    f = FunctionSpec.builtin("gaussian", sigma=0.1)
    assert budget_plan(f, 8, None, 1.1).approximation is None
    assert budget_plan(f, 8, {"sparse_s": 9}, 1.1).approximation == {"sparse_s": 9}
    m = budget_plan(f, 8, {"epsilon": 0.01}, 1.1).approximation["m_qubits"]
    assert 1 <= m <= 8
    assert budget_plan(f, 8, {"epsilon": 1e-3}, 1.1).approximation["m_qubits"] >= m
    with pytest.raises(ValueError):
        budget_plan(f, 8, {"sparse_s": 3, "m_qubits": 2}, 1.1)


def test_aligned_distance_ignores_global_phase():
    v = np.array([0.6, 0.8j])
    assert aligned_distance(v * np.exp(0.7j), v) < 1e-15


def test_ancilla_sweep():
    f = FunctionSpec.builtin("gaussian", sigma=0.1)
    rows = ancilla_sweep(f, 6, (0, 3, 6, 12, 24), {"exact": None})
    serial = prepare_state(f, 6).circuit
    assert rows[0]["depth"] == depth(serial)
    best = math.inf
    for row in rows:
        best = min(best, row["depth"])
        # copies of main qubits stay within the budget; each extra group adds one flag copy
        assert row["width"] <= 6 + 1 + row["ancillas"] + row["ancillas"] // 6
    assert best < rows[0]["depth"]


def test_sweep_axes():
    f = FunctionSpec.builtin("gaussian", sigma=0.15)
    rows = sweep(f, 6, "accuracy", m_values=(2, 3))
    assert [r["series"] for r in rows] == ["truncated", "sparse", "truncated", "sparse"]
    with pytest.raises(ValueError):
        sweep(f, 6, "width")


def test_rows_to_csv():
    assert rows_to_csv([]) == ""
    text = rows_to_csv([{"a": 1, "b": 0.5}, {"a": 2, "b": 0.25}])
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert parsed == [{"a": "1", "b": "0.5"}, {"a": "2", "b": "0.25"}]


def test_pareto_dominates():
    trunc = [{"depth": 10, "infidelity": 0.1}, {"depth": 20, "infidelity": 0.01}]
    assert pareto_dominates([{"depth": 9, "infidelity": 0.05}, {"depth": 20, "infidelity": 0.01}], trunc)
    assert not pareto_dominates([{"depth": 11, "infidelity": 0.001}], trunc)
