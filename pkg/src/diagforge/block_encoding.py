"""Block-encodings of real diagonal operators, amplitude amplification and RUS.

A real diagonal ``D`` is embedded through ``theta = arcsin(D / (alpha d_max))``:
a flag qubit in ``H`` framing selects ``exp(+i theta)`` or ``exp(-i theta)``,
so that after the closing ``H`` and ``P(-pi/2)`` the flag-1 branch carries
``sin(theta) = D / (alpha d_max)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, gphase, h, mcp, p, x
from .errors import AllZeroSpectrum, AlphaNotGreaterThanOne, AlphaTooSmall, NonPositiveProbability
from .parallel import copy_network, factor_list_for, group_factors
from .simulator import Statevector, apply, apply_gates, basis_action, is_permutation_phase
from .synth import (
    DiagonalSpec,
    SynthPlan,
    _sequential_entries,
    approximate_phases,
    approximate_walsh_terms,
    cancel_adjacent,
    gray_order,
    lower_circuit,
    lower_for_strategy,
    walsh_gates,
)
from .walsh import arcsin_phases, num_qubits_for

DENSE_BLOCK_WIDTH = 16


@dataclass(frozen=True)
class BlockEncoding:
    circuit: Circuit
    alpha: float
    d_max: float
    flag: int
    epsilon: float
    main: tuple[int, ...]
    values: np.ndarray
    phases: np.ndarray
    body: Circuit
    success_outcome: int = 1

    @property
    def n_main(self) -> int:
        return len(self.main)

    @property
    def ancillas(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.circuit.width) if q not in self.main and q != self.flag)

    def target_block(self) -> np.ndarray:
        return np.diag(self.values / (self.alpha * self.d_max))

    def block(self, outcome: int = 1) -> np.ndarray:
        """Main-register block with flag |0> in, flag ``outcome`` out, ancillas |0>."""
        if is_permutation_phase(self.body):
            return self._block_from_body(outcome)
        return self._block_dense(outcome)

    def _block_dense(self, outcome: int) -> np.ndarray:
        return extract_block(self.circuit, self.main, self.flag, outcome)

    def _block_from_body(self, outcome: int) -> np.ndarray:
        # body is diagonal on the pinned sector; the flag framing mixes two phases
        w = self.circuit.width
        n = self.n_main
        k = np.arange(1 << n)
        phases = []
        for f in (0, 1):
            idx = _embed_indices(k, self.main, {self.flag: f}, w)
            out, ph = basis_action(self.body, idx)
            if np.any(out != idx):
                raise ValueError("encoding body is not diagonal on the ancilla-zero sector")
            phases.append(ph)
        e0 = np.exp(1j * phases[0])
        e1 = np.exp(1j * phases[1])
        amp = -0.5j * (e0 - e1) if outcome == 1 else 0.5 * (e0 + e1)
        return np.diag(amp)


def extract_block(circuit: Circuit, main, flag: int, outcome: int = 1) -> np.ndarray:
    """Dense main-register block of any circuit: flag |0> in, flag ``outcome`` out, other qubits |0>."""
    w = circuit.width
    if w > DENSE_BLOCK_WIDTH + 4:
        raise ValueError(f"width {w} too large for dense block extraction")
    n = len(main)
    inputs = _embed_indices(np.arange(1 << n), main, {}, w)
    cols = np.zeros((1 << w, 1 << n), dtype=complex)
    cols[inputs, np.arange(1 << n)] = 1.0
    out = apply_gates(cols, circuit.gates, w)
    rows = _embed_indices(np.arange(1 << n), main, {flag: outcome}, w)
    return out[rows, :]


def _embed_indices(k: np.ndarray, main, fixed: dict, width: int) -> np.ndarray:
    main = list(main)
    n = len(main)
    out = np.zeros_like(k, dtype=np.int64)
    for pos, q in enumerate(main):
        out |= ((k >> (n - 1 - pos)) & 1) << (width - 1 - q)
    for q, b in fixed.items():
        if b:
            out |= np.int64(1) << (width - 1 - q)
    return out


def _spec_values(spec) -> np.ndarray:
    if isinstance(spec, DiagonalSpec):
        return spec.values()
    return np.asarray(spec, dtype=float)


def _paired_mcp(qubits, k: int, theta: float, flag: int) -> list[Gate]:
    """Flag-anticontrolled exp(i theta) and flag-controlled exp(-i theta) on eigenvalue k."""
    n = len(qubits)
    flips = [x(qubits[i]) for i in range(n) if not (k >> (n - 1 - i)) & 1]
    ctrls = list(qubits[:-1])
    return flips + [
        mcp(ctrls, qubits[-1], theta, anticontrols=(flag,)),
        mcp(ctrls + [flag], qubits[-1], -theta),
    ] + flips


def _sequential_body(entries, qubits, flag: int, ordering: str) -> list[Gate]:
    phase = {int(k): float(v) for k, v in entries if v != 0.0}
    orders = sorted(phase) if ordering == "natural" else gray_order(phase)
    gates: list[Gate] = []
    for k in orders:
        gates += _paired_mcp(qubits, k, phase[k], flag)
    return gates


def encode(spec, alpha: float, plan: SynthPlan | None = None, parallel_m: int = 0, strategy: str = "support_aware") -> BlockEncoding:
    plan = plan or SynthPlan()
    if alpha < 1.0:
        raise AlphaTooSmall(f"alpha must be at least 1, got {alpha}")
    d = _spec_values(spec)
    n = num_qubits_for(d.size)
    d_max = float(np.max(np.abs(d)))
    if d_max == 0.0:
        raise AllZeroSpectrum("all values are zero")
    theta = arcsin_phases(d, alpha)
    realized = approximate_phases(theta, plan)
    epsilon = float(np.max(np.abs(np.sin(realized) - d / (alpha * d_max))))
    if parallel_m > 0:
        body, roles = _parallel_body(theta, n, plan, parallel_m, strategy)
    else:
        body, roles = _serial_body(theta, n, plan)
    flag = n
    width = len(roles)
    frame_in = (h(flag),)
    frame_out = (h(flag), p(flag, -np.pi / 2))
    circuit = Circuit(width, frame_in + body.gates + frame_out, roles)
    return BlockEncoding(circuit, float(alpha), d_max, flag, epsilon, tuple(range(n)), d.copy(), realized, body)


def _serial_body(theta: np.ndarray, n: int, plan: SynthPlan) -> tuple[Circuit, tuple]:
    flag = n
    roles = ("main",) * n + ("flag",)
    if plan.method == "walsh":
        terms = approximate_walsh_terms(theta, plan.approximation)
        gates = walsh_gates(terms, list(range(n)), plan.ordering, extra_controls=(flag,))
        return Circuit(n + 1, tuple(gates), roles), roles
    reg, entries = _sequential_entries(theta, plan)
    c = Circuit(n + 1, tuple(_sequential_body(entries, list(range(reg)), flag, plan.ordering)), roles)
    if plan.ordering == "gray":
        c = cancel_adjacent(c)
    if plan.mcp_strategy is not None:
        c = lower_for_strategy(c, plan.mcp_strategy)
    return c, c.roles


def _parallel_body(theta: np.ndarray, n: int, plan: SynthPlan, m: int, strategy: str) -> tuple[Circuit, tuple]:
    factors = factor_list_for(theta, plan)
    pplan = group_factors(factors, m, strategy)
    flag = n
    used = pplan.ancillas_used
    n_groups = len(pplan.groups)
    main_copies = used
    flag_copies = list(range(n + 1 + main_copies, n + 1 + main_copies + max(0, n_groups - 1)))
    width = n + 1 + main_copies + len(flag_copies)
    roles = ("main",) * n + ("flag",) + ("copy_ancilla",) * main_copies + ("flag_copy",) * len(flag_copies)
    # parallel plan ancilla ids start right after the main register; shift past the flag
    layout = {q: [a + 1 for a in anc] for q, anc in pplan.copy_layout.items()}
    if flag_copies:
        layout[flag] = flag_copies
    copies = copy_network(layout, width, roles)
    flags = [flag] + flag_copies
    body: list[Gate] = []
    if plan.method == "walsh":
        terms = dict(approximate_walsh_terms(theta, plan.approximation))
    else:
        reg_size, entries = _sequential_entries(theta, plan)
        entry_phase = dict(entries)
    for g, (grp, reg) in enumerate(zip(pplan.groups, pplan.registers)):
        shifted = {q: (a if g == 0 else a + 1) for q, a in reg.items()}
        labels = [factors.factors[i].label for i in grp]
        if plan.method == "walsh":
            group_terms = [(j, terms[j]) for j in labels]
            body += walsh_gates(group_terms, shifted, plan.ordering, extra_controls=(flags[g],))
        else:
            qubits = [shifted[q] for q in range(reg_size)]
            chunk = Circuit(width, tuple(_sequential_body([(k, entry_phase[k]) for k in labels], qubits, flags[g], plan.ordering)), roles)
            body += lower_circuit(cancel_adjacent(chunk), "walsh_staircase").gates
    gates = copies.gates + tuple(body) + copies.inverse().gates
    return Circuit(width, gates, roles), roles


def split_complex(values) -> tuple[DiagonalSpec, DiagonalSpec]:
    values = np.asarray(values, dtype=complex)
    moduli = np.abs(values)
    phases = np.where(moduli == 0.0, 0.0, np.angle(values))
    return DiagonalSpec.from_phases(phases), DiagonalSpec.from_values(moduli)


def success_probability(values, psi, alpha: float) -> float:
    d = _spec_values(values)
    amps = psi.amps if isinstance(psi, Statevector) else np.asarray(psi, dtype=complex)
    d_max = float(np.max(np.abs(d)))
    if d_max == 0.0:
        raise AllZeroSpectrum("all values are zero")
    return float(np.sum((d / (alpha * d_max)) ** 2 * np.abs(amps) ** 2))


# -- amplitude amplification -------------------------------------------------------


@dataclass(frozen=True)
class AmplificationSchedule:
    p_success: float
    beta: float
    k_steps: int

    def probability_after(self, k: int) -> float:
        return math.sin((2 * k + 1) * self.beta) ** 2


def amplification_schedule(p_success: float) -> AmplificationSchedule:
    if not 0.0 < p_success <= 1.0:
        raise NonPositiveProbability(f"probability must lie in (0, 1], got {p_success}")
    beta = math.asin(math.sqrt(p_success))
    # tolerance keeps exact ratios such as p = 1/2 (pi / 4beta = 1) from rounding down
    return AmplificationSchedule(p_success, beta, int(math.floor(math.pi / (4 * beta) + 1e-12)))


def _on_encoding_width(prep: Circuit, be: BlockEncoding) -> Circuit:
    if prep.width > be.n_main:
        raise ValueError("state preparation must act on the main register only")
    return Circuit(be.circuit.width, prep.gates, be.circuit.roles)


def amplification_step(be: BlockEncoding, state_prep: Circuit) -> Circuit:
    """One Grover iterate: -Z on the flag, then the reflection about the encoded state."""
    prep = _on_encoding_width(state_prep, be)
    flag = be.flag
    minus_z = (gphase(np.pi), p(flag, np.pi))
    zero_reflection = (x(flag), mcp((), flag, np.pi, anticontrols=be.main), x(flag))
    gates = (
        minus_z
        + be.circuit.inverse().gates
        + prep.inverse().gates
        + zero_reflection
        + prep.gates
        + be.circuit.gates
    )
    return Circuit(be.circuit.width, gates, be.circuit.roles)


def amplified_circuit(be: BlockEncoding, state_prep: Circuit, k: int) -> Circuit:
    prep = _on_encoding_width(state_prep, be)
    step = amplification_step(be, state_prep)
    gates = prep.gates + be.circuit.gates + step.gates * k
    return Circuit(be.circuit.width, gates, be.circuit.roles)


def measured_success(be: BlockEncoding, state_prep: Circuit, k: int = 0) -> float:
    c = amplified_circuit(be, state_prep, k)
    out = apply(Statevector.zero(c.width), c)
    return out.qubit_probability(be.flag, 1)


def uniform_prep(n: int) -> Circuit:
    return Circuit(n, tuple(h(q) for q in range(n)))


# -- repeat until success ----------------------------------------------------------


@dataclass(frozen=True)
class RusStep:
    values: np.ndarray
    d_max: float
    damping: np.ndarray


def rus_next(values, alpha: float) -> RusStep:
    """Operator to apply after a failed shot, and the damping the failure applied."""
    if not alpha > 1.0:
        raise AlphaNotGreaterThanOne(f"alpha must exceed 1, got {alpha}")
    d = _spec_values(values)
    d_max = float(np.max(np.abs(d)))
    if d_max == 0.0:
        raise AllZeroSpectrum("all values are zero")
    damping = np.sqrt(1.0 - (d / (alpha * d_max)) ** 2)
    corrected = d / damping
    return RusStep(corrected, float(np.max(np.abs(corrected))), damping)


def rus_chain(values, psi, alpha: float, rounds: int) -> list[float]:
    """Success probability of each shot given that all previous shots failed."""
    d = _spec_values(values)
    amps = psi.amps if isinstance(psi, Statevector) else np.asarray(psi, dtype=complex)
    weight_d = float(np.sum(np.abs(d * amps) ** 2))
    op = d.copy()
    acc = np.ones_like(d)
    out = []
    for _ in range(rounds):
        g_max = float(np.max(np.abs(op)))
        out.append(weight_d / (alpha**2 * g_max**2 * float(np.sum(np.abs(acc * amps) ** 2))))
        step = rus_next(op, alpha)
        acc = acc * step.damping
        op = step.values
    return out


def expected_failures(chain: list[float]) -> float:
    """Mean number of failed shots before the first success, truncated to the chain."""
    survive = 1.0
    total = 0.0
    for k, prob in enumerate(chain):
        total += k * survive * prob
        survive *= 1.0 - prob
    return total
