"""Gate-level circuit representation, metrics and JSON serialization.

Gate conventions: ``RZ(a) = diag(e^{ia}, e^{-ia})`` and ``P(t) = diag(1, e^{it})``.
``MCP`` is a multi-controlled phase node that must be lowered before the
circuit is counted; the simulator accepts it directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .errors import SchemaViolation, UnloweredCircuit, WidthTooLarge

ONE_QUBIT = frozenset({"X", "H", "P", "RZ"})
TWO_QUBIT = frozenset({"CNOT", "CP"})
KINDS = ONE_QUBIT | TWO_QUBIT | {"GLOBAL_PHASE", "MCP"}
ANGLED = frozenset({"P", "RZ", "CP", "GLOBAL_PHASE", "MCP"})
ROLES = ("main", "copy_ancilla", "flag", "flag_copy", "mcp_ancilla")
SCHEMA_VERSION = 1
MAX_UNITARY_WIDTH = 12


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int | None = None
    controls: tuple[int, ...] = ()
    anticontrols: tuple[int, ...] = ()
    theta: float | None = None

    def __post_init__(self):
        kind = self.kind
        if kind not in KINDS:
            raise ValueError(f"unknown gate kind {kind!r}")
        controls, anticontrols = self.controls, self.anticontrols
        if controls:
            controls = tuple(int(q) for q in controls)
        elif type(controls) is not tuple:
            controls = ()
        if anticontrols:
            anticontrols = tuple(int(q) for q in anticontrols)
        elif type(anticontrols) is not tuple:
            anticontrols = ()
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "anticontrols", anticontrols)
        if kind == "GLOBAL_PHASE":
            if self.target is not None or controls or anticontrols:
                raise ValueError("GLOBAL_PHASE acts on no qubit")
        elif self.target is None:
            raise ValueError(f"{kind} needs a target")
        if (kind in ANGLED) != (self.theta is not None):
            raise ValueError(f"{kind} angle mismatch")
        if self.theta is not None:
            object.__setattr__(self, "theta", float(self.theta))
        if kind in ONE_QUBIT and (controls or anticontrols):
            raise ValueError(f"{kind} takes no controls")
        if kind in TWO_QUBIT and (len(controls) != 1 or anticontrols):
            raise ValueError(f"{kind} takes exactly one control")
        qubits = controls + anticontrols + (() if self.target is None else (self.target,))
        if len(qubits) > 1 and len(set(qubits)) != len(qubits):
            raise ValueError("controls, anticontrols and target must be disjoint")
        if qubits and min(qubits) < 0:
            raise ValueError("negative qubit id")
        object.__setattr__(self, "_qubits", qubits)

    @property
    def qubits(self) -> tuple[int, ...]:
        return self._qubits

    def inverse(self) -> "Gate":
        if self.theta is None:
            return self
        return self.with_theta(-self.theta)

    def with_theta(self, theta: float) -> "Gate":
        """Same gate with another angle; skips revalidation since only the angle changes."""
        if self.theta is None:
            raise ValueError(f"{self.kind} has no angle")
        g = object.__new__(Gate)
        g.__dict__.update(self.__dict__)
        g.__dict__["theta"] = float(theta)
        return g

    def remap(self, mapping) -> "Gate":
        return Gate(
            self.kind,
            None if self.target is None else mapping[self.target],
            tuple(mapping[q] for q in self.controls),
            tuple(mapping[q] for q in self.anticontrols),
            self.theta,
        )

    def __str__(self) -> str:
        parts = [self.kind if self.theta is None else f"{self.kind}({self.theta:.12g})"]
        if self.controls:
            parts.append("c=" + ",".join(map(str, self.controls)))
        if self.anticontrols:
            parts.append("ac=" + ",".join(map(str, self.anticontrols)))
        if self.target is not None:
            parts.append(f"t={self.target}")
        return " ".join(parts)


def x(q: int) -> Gate:
    return Gate("X", q)


def h(q: int) -> Gate:
    return Gate("H", q)


def p(q: int, theta: float) -> Gate:
    return Gate("P", q, theta=theta)


def rz(q: int, a: float) -> Gate:
    return Gate("RZ", q, theta=a)


def cnot(c: int, t: int) -> Gate:
    return Gate("CNOT", t, (c,))


def cp(c: int, t: int, theta: float) -> Gate:
    return Gate("CP", t, (c,), theta=theta)


def gphase(phi: float) -> Gate:
    return Gate("GLOBAL_PHASE", theta=phi)


def mcp(controls, target: int, theta: float, anticontrols=()) -> Gate:
    return Gate("MCP", target, tuple(controls), tuple(anticontrols), theta)


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = ()
    roles: tuple[str, ...] = field(default=())

    def __post_init__(self):
        gates = tuple(self.gates)
        roles = tuple(self.roles) if self.roles else ("main",) * self.width
        if len(roles) != self.width:
            raise ValueError("one role per qubit required")
        for r in roles:
            if r not in ROLES:
                raise ValueError(f"unknown role {r!r}")
        top = max((max(g.qubits) for g in gates if g.qubits), default=-1)
        if top >= self.width:
            bad = next(g for g in gates if g.qubits and max(g.qubits) >= self.width)
            raise ValueError(f"gate {bad} exceeds width {self.width}")
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "roles", roles)

    @property
    def global_phase(self) -> float:
        return float(sum(g.theta for g in self.gates if g.kind == "GLOBAL_PHASE"))

    @property
    def lowered(self) -> bool:
        return all(g.kind != "MCP" for g in self.gates)

    def qubits_with_role(self, role: str) -> list[int]:
        return [q for q, r in enumerate(self.roles) if r == role]

    def inverse(self) -> "Circuit":
        return Circuit(self.width, tuple(g.inverse() for g in reversed(self.gates)), self.roles)

    def then(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise ValueError("width mismatch")
        return Circuit(self.width, self.gates + other.gates, self.roles)

    def widen(self, width: int, roles=None) -> "Circuit":
        extra = width - self.width
        roles = tuple(roles) if roles is not None else self.roles + ("main",) * extra
        return Circuit(width, self.gates, roles)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def text(self) -> str:
        return "\n".join(str(g) for g in self.gates)


def _require_lowered(c: Circuit) -> None:
    if not c.lowered:
        raise UnloweredCircuit("circuit still contains MCP gates")


def size(c: Circuit) -> int:
    _require_lowered(c)
    return sum(1 for g in c.gates if g.kind != "GLOBAL_PHASE")


def depth(c: Circuit) -> int:
    _require_lowered(c)
    return _asap_depth(c.gates, c.width)


def _asap_depth(gates, width: int) -> int:
    level = [0] * width
    top = 0
    for g in gates:
        qs = g.qubits
        if not qs:
            continue
        layer = max(level[q] for q in qs) + 1
        for q in qs:
            level[q] = layer
        top = max(top, layer)
    return top


def unitary(c: Circuit) -> np.ndarray:
    if c.width > MAX_UNITARY_WIDTH:
        raise WidthTooLarge(f"width {c.width} exceeds {MAX_UNITARY_WIDTH}")
    from .simulator import apply_gates

    dim = 1 << c.width
    batch = np.eye(dim, dtype=complex)
    # columns of the identity are the basis inputs
    return apply_gates(batch, c.gates, c.width)


def lower_mcp(c: Circuit, strategy: str = "walsh_staircase", ancilla_pool=()) -> Circuit:
    from .synth import lower_circuit

    return lower_circuit(c, strategy, ancilla_pool)


# -- serialization -----------------------------------------------------------

CIRCUIT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "circuit",
    "type": "object",
    "required": ["version", "width", "roles", "global_phase", "gates"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "width": {"type": "integer", "minimum": 0},
        "roles": {"type": "array", "items": {"enum": list(ROLES)}},
        "global_phase": {"type": "number"},
        "gates": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": sorted(KINDS)},
                    "target": {"type": "integer", "minimum": 0},
                    "controls": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "anticontrols": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "theta": {"type": "number"},
                },
            },
        },
    },
}


def gate_to_dict(g: Gate) -> dict:
    out: dict = {"kind": g.kind}
    if g.controls:
        out["controls"] = list(g.controls)
    if g.anticontrols:
        out["anticontrols"] = list(g.anticontrols)
    if g.target is not None:
        out["target"] = g.target
    if g.theta is not None:
        out["theta"] = g.theta
    return out


def serialize(c: Circuit) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "width": c.width,
        "roles": list(c.roles),
        "global_phase": c.global_phase,
        "gates": [gate_to_dict(g) for g in c.gates],
    }


def deserialize(doc) -> Circuit:
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, CIRCUIT_SCHEMA)
        gates = tuple(
            Gate(
                d["kind"],
                d.get("target"),
                tuple(d.get("controls", ())),
                tuple(d.get("anticontrols", ())),
                d.get("theta"),
            )
            for d in doc["gates"]
        )
        c = Circuit(doc["width"], gates, tuple(doc["roles"]))
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(exc.message) from exc
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from exc
    if not np.isclose(c.global_phase, doc["global_phase"], rtol=0, atol=1e-12):
        raise SchemaViolation("global_phase does not match the GLOBAL_PHASE gates")
    return c


def dumps(c: Circuit) -> str:
    return json.dumps(serialize(c), indent=1)
