"""State preparation by block-encoding the target samples on a uniform superposition."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..block_encoding import BlockEncoding, encode, uniform_prep
from ..circuit import Circuit, depth, size
from ..functions import FunctionSpec
from ..simulator import Statevector, apply, fidelity
from ..synth import DiagonalSpec, SynthPlan
from ..walsh import choose_m


@dataclass
class QspResult:
    circuit: Circuit
    encoding: BlockEncoding
    target: Statevector
    prepared: Statevector
    p_success: float
    l2_error: float
    infidelity: float
    metrics: dict = field(default_factory=dict)


def budget_plan(f: FunctionSpec, n: int, budget: dict | None, alpha: float, method: str = "walsh", ordering: str = "gray") -> SynthPlan:
    """Translate an epsilon / sparse_s / m_qubits budget into a synthesis plan."""
    if not budget:
        return SynthPlan(method=method, ordering=ordering)
    keys = set(budget)
    if len(keys) != 1:
        raise ValueError("give exactly one of epsilon, sparse_s, m_qubits")
    if "epsilon" in budget:
        # bound on the derivative of arcsin(f / (alpha sup|f|))
        sup = float(np.max(np.abs(f.samples(16))))
        slope = f.derivative_bound() / (alpha * sup * math.sqrt(1.0 - 1.0 / alpha**2)) if alpha > 1 else math.inf
        m = n if not math.isfinite(slope) else min(n, choose_m(slope, float(budget["epsilon"])))
        return SynthPlan(method=method, ordering=ordering, approximation={"m_qubits": m})
    if "sparse_s" in budget:
        return SynthPlan(method=method, ordering=ordering, approximation={"sparse_s": int(budget["sparse_s"])})
    if "m_qubits" in budget:
        return SynthPlan(method=method, ordering=ordering, approximation={"m_qubits": int(budget["m_qubits"])})
    raise ValueError(f"unknown budget {budget}")


def qsp_circuit(be: BlockEncoding) -> Circuit:
    prep = Circuit(be.circuit.width, uniform_prep(be.n_main).gates, be.circuit.roles)
    return prep.then(be.circuit)


def flag_branch(state: Statevector, be: BlockEncoding, outcome: int = 1) -> np.ndarray:
    """Raw main-register amplitudes with the flag at ``outcome`` and ancillas at 0."""
    fixed = {q: 0 for q in be.ancillas}
    fixed[be.flag] = outcome
    return state.restrict(fixed)


def aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """2-norm distance after removing the relative global phase."""
    overlap = np.vdot(a, b)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a * phase - b))


def prepare_state(
    f: FunctionSpec,
    n: int,
    budget: dict | None = None,
    alpha: float = 1.1,
    parallel_m: int = 0,
    method: str = "walsh",
    ordering: str = "gray",
    strategy: str = "support_aware",
    with_depth: bool = True,
) -> QspResult:
    samples = f.samples(n)
    plan = budget_plan(f, n, budget, alpha, method, ordering)
    be = encode(DiagonalSpec.from_values(samples), alpha, plan, parallel_m, strategy)
    circuit = qsp_circuit(be)
    out = apply(Statevector.zero(circuit.width), circuit)
    branch = flag_branch(out, be, 1)
    p_success = float(np.sum(np.abs(branch) ** 2))
    prepared = Statevector(branch / np.sqrt(p_success))
    target = Statevector.from_vector(samples)
    l2 = aligned_distance(prepared.amps, target.amps)
    infid = 1.0 - fidelity(prepared, target)
    metrics = {
        "size": size(circuit) if circuit.lowered else None,
        "depth": depth(circuit) if with_depth and circuit.lowered else None,
        "width": circuit.width,
        "s_terms": _term_count(plan, be),
    }
    return QspResult(circuit, be, target, prepared, p_success, l2, infid, metrics)


def _term_count(plan: SynthPlan, be: BlockEncoding) -> int:
    return sum(1 for g in be.body.gates if g.kind in ("RZ", "MCP")) // (2 if plan.method == "sequential" else 1)


# -- trade-off sweeps ---------------------------------------------------------------


def accuracy_sweep(f: FunctionSpec, n: int, m_values=range(2, 11), alpha: float = 1.1) -> list[dict]:
    """(depth, infidelity) for M-term truncation and for the M largest Walsh terms."""
    rows = []
    for m in m_values:
        for series, budget in (("truncated", {"m_qubits": m}), ("sparse", {"sparse_s": 1 << m})):
            r = prepare_state(f, n, budget, alpha)
            rows.append({
                "series": series, "m": m, "terms": 1 << m,
                "depth": r.metrics["depth"], "size": r.metrics["size"],
                "infidelity": r.infidelity, "l2_error": r.l2_error,
            })
    return rows


def ancilla_sweep(f: FunctionSpec, n: int, ancillas, variants: dict | None = None, alpha: float = 1.1, strategy: str = "support_aware") -> list[dict]:
    """Depth against ancilla budget for several series budgets."""
    variants = variants or {"exact": None, "truncated": {"m_qubits": max(1, n - 2)}, "sparse": {"sparse_s": 70}}
    rows = []
    for name, budget in variants.items():
        plan = budget_plan(f, n, budget, alpha)
        spec = DiagonalSpec.from_values(f.samples(n))
        for m in ancillas:
            be = encode(spec, alpha, plan, m, strategy)
            c = qsp_circuit(be)
            rows.append({"variant": name, "ancillas": m, "width": c.width, "depth": depth(c), "size": size(c)})
    return rows


def sweep(f: FunctionSpec, n: int, axis: str, **kwargs) -> list[dict]:
    if axis == "accuracy":
        return accuracy_sweep(f, n, **kwargs)
    if axis == "ancilla":
        return ancilla_sweep(f, n, kwargs.pop("ancillas", (0, 2, 4, 8, 16, 32, 64)), **kwargs)
    raise ValueError(f"unknown sweep axis {axis!r}")


qsp_tradeoff_sweep = sweep


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def pareto_dominates(sparse: list[dict], truncated: list[dict]) -> bool:
    """Every truncated point is matched by a sparse point at no more depth and no more infidelity."""
    return all(
        any(s["depth"] <= t["depth"] and s["infidelity"] <= t["infidelity"] for s in sparse)
        for t in truncated
    )


def sparse_witness(f: FunctionSpec, n: int, depth_cap: int, alpha: float = 1.1) -> dict | None:
    """Largest sparse budget (found by bisection) whose circuit depth stays within ``depth_cap``."""
    lo, hi = 1, 1 << n
    best = None
    while lo <= hi:
        s = (lo + hi) // 2
        r = prepare_state(f, n, {"sparse_s": s}, alpha)
        if r.metrics["depth"] <= depth_cap:
            best = {"series": "sparse", "terms": s, "depth": r.metrics["depth"], "infidelity": r.infidelity}
            lo = s + 1
        else:
            hi = s - 1
    return best


def sparse_dominates(f: FunctionSpec, n: int, truncated: list[dict], alpha: float = 1.1) -> tuple[bool, list]:
    """For each truncated point, look for a sparse series at no more depth and no more infidelity."""
    witnesses = []
    for t in truncated:
        w = sparse_witness(f, n, t["depth"], alpha)
        witnesses.append(w)
    ok = all(w is not None and w["infidelity"] <= t["infidelity"] for w, t in zip(witnesses, truncated))
    return ok, witnesses
