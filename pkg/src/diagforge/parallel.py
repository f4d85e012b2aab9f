"""Copy networks and ancilla-parallel scheduling of commuting diagonal factors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Gate, cnot, depth, size
from .errors import InsufficientAncillaForGroup, OverlappingTargets
from .synth import (
    SynthPlan,
    _sequential_entries,
    approximate_walsh_terms,
    lower_circuit,
    sequential_gates,
    walsh_gates,
)
from .walsh import num_qubits_for

STRATEGIES = ("round_robin", "lpt", "support_aware")


@dataclass(frozen=True)
class Factor:
    circuit: Circuit
    support: tuple[int, ...]
    depth_est: int
    label: object = None


@dataclass(frozen=True)
class FactorList:
    n_main: int
    factors: tuple[Factor, ...]

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class ParallelPlan:
    ancilla_budget: int
    groups: tuple[tuple[int, ...], ...]
    copy_layout: dict = field(default_factory=dict)
    registers: tuple[dict, ...] = ()

    @property
    def ancillas_used(self) -> int:
        return sum(len(v) for v in self.copy_layout.values())

    def to_dict(self) -> dict:
        return {
            "ancilla_budget": self.ancilla_budget,
            "groups": [list(g) for g in self.groups],
            "copy_layout": {str(k): list(v) for k, v in self.copy_layout.items()},
        }


def make_factor(gates, n_main: int, label=None) -> Factor:
    c = Circuit(n_main, tuple(gates))
    support = tuple(sorted({q for g in c.gates for q in g.qubits}))
    return Factor(c, support, depth(c), label)


def walsh_factor_list(terms, n_main: int) -> FactorList:
    """One factor per Walsh term; the order-0 term is a qubit-free global phase."""
    factors = [
        make_factor(walsh_gates([(j, a)], list(range(n_main)), "natural"), n_main, j)
        for j, a in terms
        if a != 0.0
    ]
    return FactorList(n_main, tuple(factors))


def sequential_factor_list(entries, n_main: int) -> FactorList:
    """One lowered X-conjugated multi-controlled phase per non-zero eigenvalue."""
    factors = []
    for k, theta in entries:
        if theta == 0.0:
            continue
        gates = sequential_gates([(k, theta)], list(range(n_main)), "natural")
        lowered = lower_circuit(Circuit(n_main, tuple(gates)), "walsh_staircase")
        factors.append(make_factor(lowered.gates, n_main, k))
    return FactorList(n_main, tuple(factors))


def factor_list_for(phases, plan: SynthPlan) -> FactorList:
    phases = np.asarray(phases, dtype=float)
    n = num_qubits_for(phases.size)
    if plan.method == "walsh":
        return walsh_factor_list(approximate_walsh_terms(phases, plan.approximation), n)
    reg, entries = _sequential_entries(phases, plan)
    return sequential_factor_list(entries, reg) if reg == n else _widen(sequential_factor_list(entries, reg), n)


def _widen(fl: FactorList, n: int) -> FactorList:
    return FactorList(n, tuple(Factor(f.circuit.widen(n), f.support, f.depth_est, f.label) for f in fl.factors))


# -- copy network ------------------------------------------------------------------


def copy_layers(copy_layout: dict) -> list[list[Gate]]:
    """Doubling-tree layers: at every layer each holder of a value feeds one new copy."""
    seen: set[int] = set()
    for src, targets in copy_layout.items():
        for q in list(targets) + [src]:
            if q in seen:
                raise OverlappingTargets(f"qubit {q} used twice in the copy layout")
            seen.add(q)
    layers: list[list[Gate]] = []
    level = 1
    while True:
        layer = []
        for src, targets in copy_layout.items():
            holders = [src] + list(targets)
            half = 1 << (level - 1)
            for r in range(half):
                dst = half + r
                if dst < len(holders):
                    layer.append(cnot(holders[r], holders[dst]))
        if not layer:
            return layers
        layers.append(layer)
        level += 1


def copy_network(copy_layout: dict, width: int | None = None, roles=None) -> Circuit:
    gates = [g for layer in copy_layers(copy_layout) for g in layer]
    if width is None:
        used = [q for src, t in copy_layout.items() for q in [src, *t]]
        width = max(used) + 1 if used else 0
    return Circuit(width, tuple(gates), roles or ())


# -- grouping ------------------------------------------------------------------------


def _assign(factors, order, g: int, strategy: str) -> list[list[int]]:
    groups: list[list[int]] = [[] for _ in range(g)]
    if strategy == "round_robin":
        for pos, i in enumerate(order):
            groups[pos % g].append(i)
    elif strategy == "lpt":
        loads = [0] * g
        for i in order:
            best = min(range(g), key=lambda k: (loads[k], k))
            groups[best].append(i)
            loads[best] += factors[i].depth_est
    else:
        profiles: list[dict[int, int]] = [dict() for _ in range(g)]
        spans = [0] * g
        for i in order:
            f = factors[i]

            def cost(k):
                start = max((profiles[k].get(q, 0) for q in f.support), default=0)
                return (max(spans[k], start + f.depth_est), k)

            best = min(range(g), key=cost)
            start = max((profiles[best].get(q, 0) for q in f.support), default=0)
            for q in f.support:
                profiles[best][q] = start + f.depth_est
            spans[best] = max(spans[best], start + f.depth_est)
            groups[best].append(i)
    return [grp for grp in groups if grp]


def _support(factors, group) -> list[int]:
    return sorted({q for i in group for q in factors[i].support})


def group_factors(factors: FactorList, m: int, strategy: str = "support_aware") -> ParallelPlan:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown grouping strategy {strategy!r}")
    if m < 0:
        raise ValueError("ancilla budget must be non-negative")
    fs = factors.factors
    p = len(fs)
    order = sorted(range(p), key=lambda i: (-fs[i].depth_est, i))
    serial = ParallelPlan(m, (tuple(range(p)),) if p else (), {}, ({q: q for q in range(factors.n_main)},))
    if m == 0 or p <= 1:
        return serial
    for g in range(min(p, m + 1), 1, -1):
        groups = _assign(fs, order, g, strategy)
        supports = [_support(fs, grp) for grp in groups]
        # the widest group stays on the main register
        head = max(range(len(groups)), key=lambda k: (len(supports[k]), -k))
        rest = [k for k in range(len(groups)) if k != head]
        if sum(len(supports[k]) for k in rest) > m:
            continue
        ordered = [groups[head]] + [groups[k] for k in rest]
        ordered_supports = [supports[head]] + [supports[k] for k in rest]
        return _layout(factors, m, ordered, ordered_supports)
    return serial


def _layout(factors: FactorList, m: int, groups, supports) -> ParallelPlan:
    n = factors.n_main
    next_free = n
    copy_layout: dict[int, list[int]] = {}
    registers = [{q: q for q in range(n)}]
    for sup in supports[1:]:
        reg = {}
        for q in sup:
            reg[q] = next_free
            copy_layout.setdefault(q, []).append(next_free)
            next_free += 1
        registers.append(reg)
    if next_free - n > m:
        raise InsufficientAncillaForGroup(f"layout needs {next_free - n} ancillas, budget {m}")
    return ParallelPlan(m, tuple(tuple(g) for g in groups), copy_layout, tuple(registers))


def parallel_synth(factors: FactorList, m: int, strategy: str = "support_aware", plan: ParallelPlan | None = None) -> Circuit:
    """Copy the needed qubits, run every group on its own register, uncopy.

    The returned circuit holds the main register followed by the ancillas
    actually used (at most ``m``), all expected in |0> on input.
    """
    plan = plan or group_factors(factors, m, strategy)
    n = factors.n_main
    used = plan.ancillas_used
    if used > m:
        raise InsufficientAncillaForGroup(f"plan uses {used} ancillas, budget {m}")
    width = n + used
    roles = ("main",) * n + ("copy_ancilla",) * used
    copies = copy_network(plan.copy_layout, width, roles)
    body: list[Gate] = []
    for grp, reg in zip(plan.groups, plan.registers):
        for i in grp:
            f = factors.factors[i]
            missing = [q for q in f.support if q not in reg]
            if missing:
                raise InsufficientAncillaForGroup(f"register lacks qubits {missing}")
            body += [g.remap(reg) for g in f.circuit.gates]
    gates = copies.gates + tuple(body) + copies.inverse().gates
    return Circuit(width, gates, roles)


def full_parallel_depth_bound(factors: FactorList) -> int:
    p = len(factors)
    top = max((f.depth_est for f in factors.factors), default=0)
    return top + 2 * math.ceil(math.log2(p)) if p > 1 else top


def grouped_depth_bound(factors: FactorList, groups: int) -> int:
    depths = sorted((f.depth_est for f in factors.factors), reverse=True)
    per_group = math.ceil(len(depths) / groups) if depths else 0
    return sum(depths[:per_group]) + 2 * math.ceil(math.log2(groups)) if groups > 0 else 0


def serial_size(factors: FactorList) -> int:
    return sum(size(f.circuit) for f in factors.factors)


def full_parallel_budget(factors: FactorList) -> int:
    """Ancillas needed to run every factor on its own register."""
    ks = sorted((len(f.support) for f in factors.factors), reverse=True)
    return sum(ks[1:])


def plan_report(factors: FactorList, plan: ParallelPlan, circuit: Circuit) -> dict:
    out = plan.to_dict()
    out["predicted_depth"] = grouped_depth_bound(factors, len(plan.groups))
    out["measured_depth"] = depth(circuit)
    return out
