"""Dense statevector simulation, post-selection, fidelities and the QFT."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, cnot, cp, h
from .errors import ImpossibleOutcome, WidthMismatch

MAX_WIDTH = 26
SQRT_HALF = np.sqrt(0.5)


def _index(width: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * width
    for q, b in fixed.items():
        idx[q] = b
    return tuple(idx) + (Ellipsis,)


def _view(flat: np.ndarray, width: int, qubits) -> tuple[np.ndarray, dict[int, int]]:
    """Reshape so that only ``qubits`` get their own size-2 axis; returns (view, axis of each qubit)."""
    shape: list[int] = []
    axis: dict[int, int] = {}
    prev = 0
    for q in sorted(qubits):
        if q > prev:
            shape.append(1 << (q - prev))
        axis[q] = len(shape)
        shape.append(2)
        prev = q + 1
    shape.append((1 << (width - prev)) * (flat.size >> width))
    return flat.reshape(shape), axis


def _slot(view: np.ndarray, axis: dict[int, int], fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * view.ndim
    for q, b in fixed.items():
        idx[axis[q]] = b
    return tuple(idx)


def _apply_gate(flat: np.ndarray, g: Gate, width: int) -> np.ndarray:
    """Apply one gate in place to a flat (width-qubit x batch) amplitude buffer."""
    kind = g.kind
    if kind == "GLOBAL_PHASE":
        flat *= np.exp(1j * g.theta)
        return flat
    state, axis = _view(flat, width, g.qubits)
    fixed = {q: 1 for q in g.controls}
    fixed.update({q: 0 for q in g.anticontrols})
    t = g.target
    if kind in ("X", "CNOT"):
        lo = state[_slot(state, axis, {**fixed, t: 0})]
        hi = state[_slot(state, axis, {**fixed, t: 1})]
        tmp = lo.copy()
        lo[...] = hi
        hi[...] = tmp
    elif kind == "H":
        lo = state[_slot(state, axis, {t: 0})]
        hi = state[_slot(state, axis, {t: 1})]
        a = lo + hi
        hi -= lo
        hi *= -SQRT_HALF
        a *= SQRT_HALF
        lo[...] = a
    elif kind in ("P", "CP", "MCP"):
        state[_slot(state, axis, {**fixed, t: 1})] *= np.exp(1j * g.theta)
    elif kind == "RZ":
        state[_slot(state, axis, {t: 0})] *= np.exp(1j * g.theta)
        state[_slot(state, axis, {t: 1})] *= np.exp(-1j * g.theta)
    else:  # pragma: no cover - Gate validates kinds
        raise ValueError(kind)
    return flat


def apply_gates(amps: np.ndarray, gates, width: int) -> np.ndarray:
    """Apply gates to a vector or to the columns of a matrix of amplitudes."""
    amps = np.array(amps, dtype=complex)
    flat = np.ascontiguousarray(amps).reshape(-1)
    for g in gates:
        _apply_gate(flat, g, width)
    return flat.reshape(amps.shape)


@dataclass
class Statevector:
    """Amplitudes of ``n_qubits`` qubits, qubit 0 being the most significant bit.

    ``raw`` marks an intentionally unnormalized vector.
    """

    amps: np.ndarray
    raw: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size != 1 << n:
            raise ValueError("amplitude count must be a power of two")
        if n > MAX_WIDTH:
            raise ValueError(f"at most {MAX_WIDTH} qubits")
        if not self.raw and abs(np.linalg.norm(amps) - 1.0) > 1e-10:
            raise ValueError("state is not normalized; pass raw=True for intermediates")
        self.amps = amps

    @property
    def n_qubits(self) -> int:
        return self.amps.size.bit_length() - 1

    @classmethod
    def zero(cls, n: int) -> "Statevector":
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def basis(cls, n: int, index: int) -> "Statevector":
        amps = np.zeros(1 << n, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def from_vector(cls, values) -> "Statevector":
        values = np.asarray(values, dtype=complex)
        return cls(values / np.linalg.norm(values))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "Statevector":
        return Statevector(self.amps / self.norm())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def extend(self, extra: int) -> "Statevector":
        """Append ``extra`` qubits in |0> after the existing ones."""
        amps = np.zeros((self.amps.size, 1 << extra), dtype=complex)
        amps[:, 0] = self.amps
        return Statevector(amps.reshape(-1), raw=self.raw)

    def qubit_probability(self, qubit: int, outcome: int) -> float:
        n = self.n_qubits
        view = self.amps.reshape((2,) * n)
        return float(np.sum(np.abs(view[_index(n, {qubit: outcome})]) ** 2))

    def restrict(self, fixed: dict[int, int]) -> np.ndarray:
        """Raw amplitudes of the remaining qubits with ``fixed`` qubits pinned."""
        n = self.n_qubits
        return self.amps.reshape((2,) * n)[_index(n, fixed)].reshape(-1).copy()


def apply(sv: Statevector, c: Circuit) -> Statevector:
    if c.width != sv.n_qubits:
        raise WidthMismatch(f"circuit width {c.width} != state width {sv.n_qubits}")
    return Statevector(apply_gates(sv.amps, c.gates, c.width), raw=sv.raw)


def post_select(sv: Statevector, qubit: int, outcome: int) -> tuple[Statevector, float]:
    n = sv.n_qubits
    amps = sv.amps.reshape((2,) * n).copy()
    amps[_index(n, {qubit: 1 - outcome})] = 0.0
    weight = float(np.sum(np.abs(amps) ** 2))
    if weight <= 1e-14:
        raise ImpossibleOutcome(f"outcome {outcome} on qubit {qubit} has probability {weight:.3g}")
    return Statevector(amps.reshape(-1) / np.sqrt(weight)), weight


def _check_widths(a: Statevector, b: Statevector) -> None:
    if a.n_qubits != b.n_qubits:
        raise WidthMismatch(f"{a.n_qubits} vs {b.n_qubits} qubits")


def fidelity(a: Statevector, b: Statevector) -> float:
    _check_widths(a, b)
    return float(min(1.0, abs(np.vdot(a.amps, b.amps)) ** 2))


def l2_distance(a: Statevector, b: Statevector) -> float:
    _check_widths(a, b)
    return float(np.linalg.norm(a.amps - b.amps))


# -- quantum Fourier transform ------------------------------------------------
#
# Convention: QFT|x> = N^{-1/2} sum_k e^{+2 pi i x k / N} |k>, which turns the
# cyclic shift S|x> = |x + 1> into diag(e^{2 pi i k / N}).


def qft_circuit(qubits, width: int | None = None, inverse: bool = False) -> Circuit:
    qubits = list(qubits)
    width = max(qubits) + 1 if width is None else width
    gates: list[Gate] = []
    n = len(qubits)
    for i in range(n):
        gates.append(h(qubits[i]))
        for j in range(i + 1, n):
            gates.append(cp(qubits[j], qubits[i], np.pi / (1 << (j - i))))
    for i in range(n // 2):
        a, b = qubits[i], qubits[n - 1 - i]
        gates += [cnot(a, b), cnot(b, a), cnot(a, b)]
    c = Circuit(width, tuple(gates))
    return c.inverse() if inverse else c


def _direct_qft(amps: np.ndarray, width: int, qubits, inverse: bool) -> np.ndarray:
    qubits = list(qubits)
    others = [q for q in range(width) if q not in qubits]
    tensor = amps.reshape((2,) * width).transpose(qubits + others)
    shape = tensor.shape
    flat = tensor.reshape(1 << len(qubits), -1)
    out = np.fft.fft(flat, axis=0, norm="ortho") if inverse else np.fft.ifft(flat, axis=0, norm="ortho")
    back = np.argsort(qubits + others)
    return out.reshape(shape).transpose(back).reshape(-1)


def apply_qft(sv: Statevector, qubits=None, inverse: bool = False, method: str = "direct") -> Statevector:
    width = sv.n_qubits
    qubits = list(range(width)) if qubits is None else list(qubits)
    if any(q >= width or q < 0 for q in qubits):
        raise WidthMismatch("register exceeds state width")
    if method == "direct":
        return Statevector(_direct_qft(sv.amps, width, qubits, inverse), raw=sv.raw)
    if method == "circuit":
        return apply(sv, qft_circuit(qubits, width, inverse))
    raise ValueError(f"unknown QFT method {method!r}")


# -- classical sweep ------------------------------------------------------------

PERMUTATION_KINDS = frozenset({"X", "CNOT", "P", "RZ", "CP", "MCP", "GLOBAL_PHASE"})


def is_permutation_phase(c: Circuit) -> bool:
    return all(g.kind in PERMUTATION_KINDS for g in c.gates)


def _phase_polynomial(gates, w: int) -> tuple[dict[int, tuple[int, int]], dict[int, float]]:
    """Affine parity form of every qubit touched by X/CNOT, and the phase as signed parities."""
    forms: dict[int, tuple[int, int]] = {}

    def form(q):
        return forms.get(q, (1 << (w - 1 - q), 0))

    coef: dict[int, float] = {}
    for g in gates:
        k = g.kind
        if k == "GLOBAL_PHASE":
            coef[0] = coef.get(0, 0.0) + g.theta
        elif k == "X":
            m, b = form(g.target)
            forms[g.target] = (m, b ^ 1)
        elif k == "CNOT":
            mc, bc = form(g.controls[0])
            m, b = form(g.target)
            forms[g.target] = (m ^ mc, b ^ bc)
        elif k == "RZ":
            m, b = form(g.target)
            coef[m] = coef.get(m, 0.0) + (-g.theta if b else g.theta)
        else:
            _add_product_phase(coef, form, g.controls + (g.target,), g.anticontrols, g.theta)
    return forms, coef


def _evaluate(idx: np.ndarray, forms: dict, coef: dict, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Output indices and phases of a compiled segment for each input index."""
    out = idx.copy()
    for q, (m, b) in forms.items():
        pos = np.int64(w - 1 - q)
        bit = ((np.bitwise_count(idx & np.int64(m)) & 1) ^ b).astype(np.int64)
        out = (out & ~(np.int64(1) << pos)) | (bit << pos)
    phase = np.zeros(len(idx))
    if coef:
        masks = np.array(list(coef), dtype=np.int64)
        weights = np.array(list(coef.values()))
        for start in range(0, len(masks), 1024):
            mk = masks[start:start + 1024]
            signs = 1.0 - 2.0 * (np.bitwise_count(idx[:, None] & mk[None, :]) & 1)
            phase += signs @ weights[start:start + 1024]
    return out, phase


def _evaluate_wide(idx, forms: dict, coef: dict, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Same as ``_evaluate`` with Python integers, for registers wider than an int64."""
    out, phase = [], []
    for k in idx:
        k = int(k)
        o = k
        for q, (m, b) in forms.items():
            bit = ((k & m).bit_count() & 1) ^ b
            pos = w - 1 - q
            o = (o & ~(1 << pos)) | (bit << pos)
        out.append(o)
        phase.append(sum(-v if (k & m).bit_count() & 1 else v for m, v in coef.items()))
    return np.array(out, dtype=object), np.array(phase, dtype=float)


def _add_product_phase(coef: dict, form, ones, zeros, theta: float) -> None:
    """Add theta * prod(b_q for q in ones) * prod(1 - b_q for q in zeros) as parity terms."""
    factors = [(form(q), -1.0) for q in ones] + [(form(q), 1.0) for q in zeros]
    scale = theta / (1 << len(factors))
    terms = {(0, 0): scale}
    for (mask, const), sign in factors:
        nxt: dict = {}
        for (m, c), v in terms.items():
            nxt[(m, c)] = nxt.get((m, c), 0.0) + v
            key = (m ^ mask, c ^ const)
            nxt[key] = nxt.get(key, 0.0) + sign * v
        terms = nxt
    for (m, c), v in terms.items():
        coef[m] = coef.get(m, 0.0) + (-v if c else v)


def basis_action(c: Circuit, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Track basis inputs through a circuit without H gates.

    Every such circuit maps ``|k>`` to ``e^{i phase} |out>``; this returns the
    output indices and phases for each input index, exactly and at any width.
    Each qubit is carried as an affine parity of the input bits and each phase
    gate as a sum of signed parities, so the gate list is read only once.
    """
    if not is_permutation_phase(c):
        raise ValueError("circuit contains gates that create superpositions")
    forms, coef = _phase_polynomial(c.gates, c.width)
    if c.width > 63:
        return _evaluate_wide(np.asarray(inputs, dtype=object).ravel(), forms, coef, c.width)
    return _evaluate(np.asarray(inputs, dtype=np.int64), forms, coef, c.width)


class SparseOverflow(RuntimeError):
    pass


def sparse_action(c: Circuit, inputs, drop: float = 1e-14, max_terms: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns ``c|k>`` for each input index, kept as (column, index, amplitude) triples.

    Only non-zero amplitudes are stored, so circuits whose H gates create
    short-lived superpositions (Toffoli ladders) are cheap at any width.
    Amplitudes below ``drop`` after an H gate are discarded; they arise from
    exact cancellations that leave rounding residue.
    """
    inputs = np.asarray(inputs, dtype=np.int64)
    w = c.width
    if w + max(1, len(inputs)).bit_length() > 62:
        raise ValueError("index space too large for the sparse sweep")
    col = np.arange(len(inputs), dtype=np.int64)
    idx = inputs.copy()
    amp = np.ones(len(inputs), dtype=complex)
    max_terms = max_terms or 64 * max(1, len(inputs))
    segment: list[Gate] = []

    def flush(idx, amp):
        if segment:
            forms, coef = _phase_polynomial(segment, w)
            idx, phase = _evaluate(idx, forms, coef, w)
            amp = amp * np.exp(1j * phase)
            segment.clear()
        return idx, amp

    for g in c.gates:
        if g.kind != "H":
            segment.append(g)
            continue
        idx, amp = flush(idx, amp)
        tb = np.int64(1) << np.int64(w - 1 - g.target)
        sign = np.where(idx & tb, -SQRT_HALF, SQRT_HALF)
        col = np.concatenate((col, col))
        idx = np.concatenate((idx & ~tb, idx | tb))
        amp = np.concatenate((amp * SQRT_HALF, amp * sign))
        key = (col << np.int64(w)) | idx
        uniq, inv = np.unique(key, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=complex)
        np.add.at(summed, inv, amp)
        keep = np.abs(summed) > drop
        uniq, amp = uniq[keep], summed[keep]
        col, idx = uniq >> np.int64(w), uniq & ((np.int64(1) << np.int64(w)) - 1)
        if len(idx) > max_terms:
            raise SparseOverflow(f"sparse sweep exceeded {max_terms} terms")
    idx, amp = flush(idx, amp)
    return col, idx, amp


def embedded_action(c: Circuit, main_qubits, fixed: dict[int, int] | None = None, max_dense: int = 12) -> tuple[np.ndarray, float]:
    """Matrix of c restricted to inputs and outputs with non-main qubits pinned.

    Non-main qubits are pinned to the values in ``fixed`` (default |0>) on both
    the input and the output side.  Returns (block, leak) where ``leak`` is the
    largest norm that escapes the pinned sector over all main basis inputs.
    """
    main_qubits = list(main_qubits)
    w = c.width
    fixed = {q: 0 for q in range(w) if q not in main_qubits} if fixed is None else dict(fixed)
    n = len(main_qubits)
    dim = 1 << n
    basis = np.zeros((dim, w), dtype=np.int64)
    for pos, q in enumerate(main_qubits):
        basis[:, q] = (np.arange(dim) >> (n - 1 - pos)) & 1
    for q, b in fixed.items():
        basis[:, q] = b
    if w > 63:
        if not is_permutation_phase(c):
            raise ValueError(f"width {w} exceeds 63 qubits; only X/CNOT/phase circuits are supported there")
        inputs = np.array([sum(int(b) << (w - 1 - q) for q, b in enumerate(row)) for row in basis], dtype=object)
    else:
        inputs = basis @ (1 << np.arange(w - 1, -1, -1, dtype=np.int64))
    if is_permutation_phase(c):
        out, phase = basis_action(c, inputs)
        index = {int(v): i for i, v in enumerate(inputs)}
        block = np.zeros((dim, dim), dtype=complex)
        leak = 0.0
        for col, (o, ph) in enumerate(zip(out, phase)):
            row = index.get(int(o))
            if row is None:
                leak = 1.0
            else:
                block[row, col] = np.exp(1j * ph)
        return block, leak
    try:
        col, out, amp = sparse_action(c, inputs)
    except SparseOverflow:
        if w > max_dense + 6:
            raise ValueError(f"width {w} too large for a dense sweep of a non-classical circuit")
    else:
        row_of = dict(zip(inputs.tolist(), range(dim)))
        rows = np.array([row_of.get(v, -1) for v in out.tolist()], dtype=np.int64)
        inside = rows >= 0
        block = np.zeros((dim, dim), dtype=complex)
        np.add.at(block, (rows[inside], col[inside]), amp[inside])
        escaped = np.zeros(dim)
        np.add.at(escaped, col[~inside], np.abs(amp[~inside]) ** 2)
        return block, float(np.sqrt(escaped.max()))
    cols = np.zeros((1 << w, dim), dtype=complex)
    cols[inputs, np.arange(dim)] = 1.0
    outs = apply_gates(cols, c.gates, w)
    block = outs[inputs, :]
    norms_in = np.sum(np.abs(block) ** 2, axis=0)
    leak = float(np.sqrt(max(0.0, 1.0 - norms_in.min())))
    return block, leak


# -- dumps ------------------------------------------------------------------------

BINARY_MAGIC = b"DFSV"


def write_csv(sv: Statevector, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,re,im\n")
        for i, a in enumerate(sv.amps):
            fh.write(f"{i},{float(a.real)!r},{float(a.imag)!r}\n")


def read_csv(path) -> Statevector:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    return Statevector(data[order, 1] + 1j * data[order, 2], raw=True)


def write_binary(sv: Statevector, path) -> None:
    """Header ``DFSV`` + little-endian uint32 qubit count, then complex128 amplitudes."""
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC + struct.pack("<I", sv.n_qubits))
        fh.write(sv.amps.astype("<c16").tobytes())


def read_binary(path) -> Statevector:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if head[:4] != BINARY_MAGIC:
            raise ValueError("not a statevector dump")
        (n,) = struct.unpack("<I", head[4:])
        amps = np.frombuffer(fh.read(), dtype="<c16")
    if amps.size != 1 << n:
        raise ValueError("truncated statevector dump")
    return Statevector(amps.astype(complex), raw=True)
