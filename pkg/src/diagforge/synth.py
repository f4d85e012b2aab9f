"""Serial synthesis of diagonal unitaries.

Two constructions are offered: the sequential one imprints one eigenvalue at a
time with a multi-controlled phase, the Walsh one applies one Walsh operator
``exp(i a_j w_j)`` at a time as a CNOT parity ladder around an RZ rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from .circuit import Circuit, Gate, cnot, cp, gphase, h, mcp, p, rz, x
from .errors import InsufficientAncilla, NonPhaseSpec
from .walsh import SparseWalshSeries, WalshSeries, fwht, inverse_fwht, num_qubits_for

WALSH_CUTOFF = 1e-14
PHASE_KINDS = ("unitary_phases", "sparse_phases")
VALUE_KINDS = ("real_values", "sparse_values")


@dataclass(frozen=True)
class DiagonalSpec:
    """Target diagonal operator.

    ``data`` is a dense vector for ``unitary_phases``/``real_values`` and an
    ``{index: value}`` mapping for the sparse kinds (absent entries are 0).
    """

    n_qubits: int
    kind: str
    data: object

    def __post_init__(self):
        if self.kind not in PHASE_KINDS + VALUE_KINDS:
            raise ValueError(f"unknown spec kind {self.kind!r}")
        size = 1 << self.n_qubits
        if self.kind in ("unitary_phases", "real_values"):
            vec = np.asarray(self.data, dtype=float).reshape(-1)
            if vec.size != size:
                raise ValueError(f"expected {size} entries, got {vec.size}")
            vec.setflags(write=False)
            object.__setattr__(self, "data", vec)
        else:
            entries = {int(k): float(v) for k, v in dict(self.data).items()}
            if any(not 0 <= k < size for k in entries):
                raise ValueError("sparse index out of range")
            object.__setattr__(self, "data", entries)

    @classmethod
    def from_phases(cls, theta) -> "DiagonalSpec":
        theta = np.asarray(theta, dtype=float)
        return cls(num_qubits_for(theta.size), "unitary_phases", theta)

    @classmethod
    def from_sparse_phases(cls, n: int, entries: dict) -> "DiagonalSpec":
        return cls(n, "sparse_phases", entries)

    @classmethod
    def from_values(cls, d) -> "DiagonalSpec":
        d = np.asarray(d, dtype=float)
        return cls(num_qubits_for(d.size), "real_values", d)

    @classmethod
    def from_sparse_values(cls, n: int, entries: dict) -> "DiagonalSpec":
        return cls(n, "sparse_values", entries)

    @property
    def is_phase(self) -> bool:
        return self.kind in PHASE_KINDS

    def dense(self) -> np.ndarray:
        if isinstance(self.data, dict):
            out = np.zeros(1 << self.n_qubits)
            for k, v in self.data.items():
                out[k] = v
            return out
        return np.array(self.data)

    def phases(self) -> np.ndarray:
        if not self.is_phase:
            raise NonPhaseSpec(f"{self.kind} spec carries values, not phases")
        return self.dense()

    def values(self) -> np.ndarray:
        if self.is_phase:
            raise NonPhaseSpec(f"{self.kind} spec carries phases, not values")
        return self.dense()

    def matrix_diagonal(self) -> np.ndarray:
        return np.exp(1j * self.phases()) if self.is_phase else self.values().astype(complex)


@dataclass(frozen=True)
class SynthPlan:
    method: str = "walsh"
    ordering: str = "gray"
    mcp_strategy: str | None = None
    approximation: dict | None = field(default=None)

    def __post_init__(self):
        if self.method not in ("sequential", "walsh"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.ordering not in ("natural", "gray"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.mcp_strategy not in (None, "walsh_staircase", "toffoli_ladder"):
            raise ValueError(f"unknown MCP strategy {self.mcp_strategy!r}")
        if self.approximation is not None:
            keys = set(self.approximation)
            if len(keys) != 1 or not keys <= {"m_qubits", "sparse_s"}:
                raise ValueError("approximation takes exactly one of m_qubits or sparse_s")


# -- ordering and cancellation -----------------------------------------------------


def _popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values.astype(np.uint64)).astype(np.int64)


def gray_order(indices: Iterable[int]) -> list[int]:
    """Reflected-binary order for a full range, greedy nearest-Hamming otherwise."""
    idx = sorted(set(int(i) for i in indices))
    count = len(idx)
    if count == 0:
        return []
    if idx[0] == 0 and idx[-1] == count - 1 and count & (count - 1) == 0:
        return [i ^ (i >> 1) for i in range(count)]
    remaining = np.array(idx, dtype=np.int64)
    alive = np.ones(count, dtype=bool)
    current = 0
    alive[0] = False
    order = [int(remaining[0])]
    for _ in range(count - 1):
        dist = _popcount(remaining ^ remaining[current])
        dist = np.where(alive, dist, np.iinfo(np.int64).max)
        current = int(np.argmin(dist))  # argmin returns the first, i.e. smallest, index
        alive[current] = False
        order.append(int(remaining[current]))
    return order


SELF_INVERSE = frozenset({"X", "CNOT"})


def cancel_adjacent(c: Circuit) -> Circuit:
    """Drop pairs of identical X or CNOT gates with nothing on their wires in between."""
    kept: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(c.width)]
    for g in c.gates:
        qs = g.qubits
        if g.kind in SELF_INVERSE:
            tops = {stacks[q][-1] if stacks[q] else None for q in qs}
            if len(tops) == 1:
                (top,) = tops
                if top is not None and kept[top] == g:
                    kept[top] = None
                    for q in qs:
                        stacks[q].pop()
                    continue
        kept.append(g)
        for q in qs:
            stacks[q].append(len(kept) - 1)
    return Circuit(c.width, tuple(g for g in kept if g is not None), c.roles)


# -- Walsh emission --------------------------------------------------------------


def walsh_term_layout(j: int, qubits) -> tuple[int, frozenset]:
    """Target (highest set bit) and control qubits of the order-j Walsh operator."""
    bits = [i for i in range(j.bit_length()) if (j >> i) & 1]
    return qubits[bits[-1]], frozenset(qubits[i] for i in bits[:-1])


def emit_parity_terms(terms) -> list[Gate]:
    """Emit ``exp(i a Z_t Z_c1 ...)`` rotations sharing CNOT ladders.

    ``terms`` yields (target, controls, angle).  The parity accumulated on a
    target is only undone when the next term moves to another target, so
    consecutive terms pay only for the controls in which they differ.
    """
    gates: list[Gate] = []
    target = None
    parity: frozenset = frozenset()
    for t, controls, angle in terms:
        controls = frozenset(controls)
        if t != target:
            if target is not None:
                gates += [cnot(q, target) for q in sorted(parity)]
            target, parity = t, frozenset()
        gates += [cnot(q, t) for q in sorted(parity ^ controls)]
        parity = controls
        gates.append(rz(t, angle))
    if target is not None:
        gates += [cnot(q, target) for q in sorted(parity)]
    return gates


def emit_isolated_terms(terms) -> list[Gate]:
    """One independent fan-in / RZ / fan-out block per term."""
    gates: list[Gate] = []
    for t, controls, angle in terms:
        ladder = [cnot(q, t) for q in sorted(controls)]
        gates += ladder + [rz(t, angle)] + ladder[::-1]
    return gates


def walsh_gates(terms, qubits, ordering: str = "gray", extra_controls=()) -> list[Gate]:
    """Gates for a list of (order, coefficient) Walsh terms.

    ``qubits[i]`` carries bit i of the orders.  ``extra_controls`` are added to
    every parity set (the order-0 term then rotates the first of them); without
    them the order-0 term becomes a global phase.
    """
    coeff = {int(j): float(a) for j, a in terms if abs(a) >= WALSH_CUTOFF}
    orders = sorted(coeff) if ordering == "natural" else gray_order(coeff)
    extra = frozenset(extra_controls)
    gates: list[Gate] = []
    rotations = []
    for j in orders:
        if j == 0:
            if extra:
                head = min(extra_controls)
                rotations.append((head, extra - {head}, coeff[0]))
            else:
                gates.append(gphase(coeff[0]))
            continue
        t, ctrls = walsh_term_layout(j, qubits)
        rotations.append((t, ctrls | extra, coeff[j]))
    emit = emit_parity_terms if ordering == "gray" else emit_isolated_terms
    return gates + emit(rotations)


# -- approximation ---------------------------------------------------------------


def _largest(values: np.ndarray, s: int) -> np.ndarray:
    size = len(values)
    if not 0 <= s <= size:
        raise ValueError(f"budget s must lie in [0, {size}]")
    order = np.lexsort((np.arange(size), -np.abs(values)))
    return np.sort(order[:s])


def approximate_walsh_terms(phases: np.ndarray, approximation: dict | None) -> list[tuple[int, float]]:
    """Walsh terms of the (possibly approximated) phase vector."""
    n = num_qubits_for(len(phases))
    if not approximation:
        series = fwht(phases)
        return series.terms(cutoff=0.0)
    if "m_qubits" in approximation:
        m = int(approximation["m_qubits"])
        if not 1 <= m <= n:
            raise ValueError(f"m_qubits must lie in [1, {n}]")
        series = fwht(phases[:: 1 << (n - m)])
        return series.terms(cutoff=0.0)
    coeffs = fwht(phases).coeffs
    keep = _largest(coeffs, int(approximation["sparse_s"]))
    return [(int(j), float(coeffs[j])) for j in keep]


def approximate_phases(phases: np.ndarray, plan: SynthPlan) -> np.ndarray:
    """Phase vector that the plan's circuit realizes exactly."""
    approx = plan.approximation
    if not approx:
        return np.array(phases, dtype=float)
    n = num_qubits_for(len(phases))
    if plan.method == "walsh":
        coeffs = np.zeros(len(phases))
        for j, a in approximate_walsh_terms(phases, approx):
            coeffs[j] = a
        if "m_qubits" in approx:
            m = int(approx["m_qubits"])
            return np.repeat(inverse_fwht(WalshSeries(m, coeffs[: 1 << m])), 1 << (n - m))
        return inverse_fwht(WalshSeries(n, coeffs))
    if "m_qubits" in approx:
        m = int(approx["m_qubits"])
        return np.repeat(phases[:: 1 << (n - m)], 1 << (n - m))
    out = np.zeros(len(phases))
    keep = _largest(phases, int(approx["sparse_s"]))
    out[keep] = phases[keep]
    return out


# -- synthesizers ----------------------------------------------------------------


def _phase_source(source) -> tuple[int, np.ndarray]:
    if isinstance(source, DiagonalSpec):
        return source.n_qubits, source.phases()
    if isinstance(source, SparseWalshSeries):
        return source.n_qubits, inverse_fwht(source.to_dense())
    if isinstance(source, WalshSeries):
        return source.n_qubits, inverse_fwht(source)
    phases = np.asarray(source, dtype=float)
    return num_qubits_for(phases.size), phases


def synth_walsh(source, plan: SynthPlan | None = None) -> Circuit:
    plan = plan or SynthPlan()
    if isinstance(source, (WalshSeries, SparseWalshSeries)) and not plan.approximation:
        n = source.n_qubits
        terms = source.terms() if isinstance(source, WalshSeries) else list(source.terms)
    else:
        n, phases = _phase_source(source)
        terms = approximate_walsh_terms(phases, plan.approximation)
    return Circuit(n, tuple(walsh_gates(terms, list(range(n)), plan.ordering)))


def sequential_gates(entries, qubits, ordering: str = "gray", extra_anticontrols=(), extra_controls=()) -> list[Gate]:
    """One X-conjugated multi-controlled phase per (index, phase) entry.

    The last of ``qubits`` is the MCP target; ``qubits[0]`` holds the most
    significant bit of the index.
    """
    qubits = list(qubits)
    n = len(qubits)
    phase = {int(k): float(v) for k, v in entries if v != 0.0}
    orders = sorted(phase) if ordering == "natural" else gray_order(phase)
    gates: list[Gate] = []
    for k in orders:
        zeros = [qubits[i] for i in range(n) if not (k >> (n - 1 - i)) & 1]
        flips = [x(q) for q in zeros]
        gates += flips
        gates.append(mcp(qubits[:-1] + list(extra_controls), qubits[-1], phase[k], extra_anticontrols))
        gates += flips
    return gates


def _sequential_entries(phases: np.ndarray, plan: SynthPlan) -> tuple[int, list[tuple[int, float]]]:
    """Register size and (index, phase) entries after approximation."""
    n = num_qubits_for(len(phases))
    approx = plan.approximation
    if approx and "m_qubits" in approx:
        m = int(approx["m_qubits"])
        if not 1 <= m <= n:
            raise ValueError(f"m_qubits must lie in [1, {n}]")
        coarse = phases[:: 1 << (n - m)]
        return m, [(k, float(v)) for k, v in enumerate(coarse)]
    if approx:
        keep = _largest(phases, int(approx["sparse_s"]))
        return n, [(int(k), float(phases[k])) for k in keep]
    return n, [(k, float(v)) for k, v in enumerate(phases)]


def synth_sequential(spec, plan: SynthPlan | None = None) -> Circuit:
    plan = plan or SynthPlan(method="sequential")
    if isinstance(spec, DiagonalSpec):
        if not spec.is_phase:
            raise NonPhaseSpec("sequential synthesis needs a phase spec")
        n, phases = spec.n_qubits, spec.phases()
    else:
        n, phases = _phase_source(spec)
    reg, entries = _sequential_entries(phases, plan)
    gates = sequential_gates(entries, list(range(reg)), plan.ordering)
    c = Circuit(n, tuple(gates))
    if plan.ordering == "gray":
        c = cancel_adjacent(c)
    if plan.mcp_strategy is None:
        return c
    return lower_for_strategy(c, plan.mcp_strategy)


def synthesize(spec, plan: SynthPlan) -> Circuit:
    return synth_walsh(spec, plan) if plan.method == "walsh" else synth_sequential(spec, plan)


# -- MCP lowering ------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _staircase_template(controls: tuple, anticontrols: tuple, target: int) -> tuple[Gate, ...]:
    """Staircase for a unit angle; every angle in it is proportional to the MCP angle."""
    ctrls = list(controls) + list(anticontrols)
    flips = [x(q) for q in anticontrols]
    qubits = sorted(ctrls) + [target]
    k = len(qubits)
    orders = np.arange(1 << k)
    coeffs = 1.0 / (1 << k) * np.where(_popcount(orders) & 1, -1.0, 1.0)
    return tuple(flips + walsh_gates(list(enumerate(coeffs)), qubits, "gray") + flips)


def _scaled(template, theta: float) -> list[Gate]:
    return [g if g.theta is None else g.with_theta(g.theta * theta) for g in template]


def mcp_walsh_staircase(g: Gate) -> list[Gate]:
    """Exact Walsh circuit of the diagonal with one non-unit phase."""
    ctrls = list(g.controls) + list(g.anticontrols)
    flips = [x(q) for q in g.anticontrols]
    if not ctrls:
        return [p(g.target, g.theta)]
    if len(ctrls) == 1:
        return flips + [cp(ctrls[0], g.target, g.theta)] + flips
    return _scaled(_staircase_template(g.controls, g.anticontrols, g.target), g.theta)


def toffoli(a: int, b: int, c: int) -> list[Gate]:
    """Exact Toffoli from H, CNOT and P(+-pi/4)."""
    t, tdg = np.pi / 4, -np.pi / 4
    return [
        h(c), cnot(b, c), p(c, tdg), cnot(a, c), p(c, t), cnot(b, c), p(c, tdg),
        cnot(a, c), p(b, t), p(c, t), h(c), cnot(a, b), p(a, t), p(b, tdg), cnot(a, b),
    ]


@lru_cache(maxsize=4096)
def _and_chain(ctrls: tuple, ancillas: tuple) -> tuple[tuple[Gate, ...], tuple[Gate, ...]]:
    """Toffoli chain leaving the AND of ``ctrls`` on the last ancilla, and its inverse."""
    compute: list[Gate] = toffoli(ctrls[0], ctrls[1], ancillas[0])
    for i in range(2, len(ctrls)):
        compute += toffoli(ancillas[i - 2], ctrls[i], ancillas[i - 1])
    return tuple(compute), tuple(gate.inverse() for gate in reversed(compute))


def mcp_toffoli_ladder(g: Gate, ancillas) -> list[Gate]:
    ctrls = list(g.controls) + list(g.anticontrols)
    flips = [x(q) for q in g.anticontrols]
    if not ctrls:
        return [p(g.target, g.theta)]
    if len(ctrls) == 1:
        return flips + [cp(ctrls[0], g.target, g.theta)] + flips
    need = len(ctrls) - 1
    ancillas = list(ancillas)
    if len(ancillas) < need:
        raise InsufficientAncilla(f"need {need} ancillas, have {len(ancillas)}")
    busy = set(g.qubits)
    if busy & set(ancillas[:need]):
        raise InsufficientAncilla("ancilla pool overlaps the gate's qubits")
    compute, uncompute = _and_chain(tuple(ctrls), tuple(ancillas[:need]))
    return flips + list(compute) + [cp(ancillas[need - 1], g.target, g.theta)] + list(uncompute) + flips


def lower_circuit(c: Circuit, strategy: str = "walsh_staircase", ancilla_pool=()) -> Circuit:
    if strategy not in ("walsh_staircase", "toffoli_ladder"):
        raise ValueError(f"unknown MCP strategy {strategy!r}")
    out: list[Gate] = []
    for g in c.gates:
        if g.kind != "MCP":
            out.append(g)
        elif strategy == "walsh_staircase":
            out += mcp_walsh_staircase(g)
        else:
            out += mcp_toffoli_ladder(g, ancilla_pool)
    return cancel_adjacent(Circuit(c.width, tuple(out), c.roles))


def ladder_ancillas_needed(c: Circuit) -> int:
    return max((len(g.controls) + len(g.anticontrols) - 1 for g in c.gates if g.kind == "MCP"), default=0)


def lower_for_strategy(c: Circuit, strategy: str) -> Circuit:
    """Lower every MCP, appending zeroed ladder ancillas when the strategy needs them."""
    if strategy == "toffoli_ladder":
        extra = ladder_ancillas_needed(c)
        if extra > 0:
            pool = list(range(c.width, c.width + extra))
            c = c.widen(c.width + extra, c.roles + ("mcp_ancilla",) * extra)
            return lower_circuit(c, strategy, pool)
    return lower_circuit(c, strategy)
