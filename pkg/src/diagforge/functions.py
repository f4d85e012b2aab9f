"""Target functions on [0, 1): builtin registry and sampled tables."""

from __future__ import annotations

import csv
import inspect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .walsh import num_qubits_for

DENSE_SAMPLES = 1 << 16
DERIVATIVE_MARGIN = 1.05


def _gaussian(sigma: float, mu: float = 0.5):
    def f(x):
        return np.exp(-0.5 * (np.asarray(x, dtype=float) - mu) ** 2 / sigma**2)

    def bound():
        # |f'| peaks at |x - mu| = sigma when that point lies in [0, 1]
        candidates = [0.0, 1.0, mu - sigma, mu + sigma]
        xs = np.clip(np.array(candidates), 0.0, 1.0)
        return float(np.max(np.abs(xs - mu) / sigma**2 * f(xs)))

    return f, bound


def _linear(a: float, b: float = 0.0):
    def f(x):
        return a * np.asarray(x, dtype=float) + b

    return f, lambda: abs(a)


def _constant(c: float):
    def f(x):
        return np.full(np.shape(x), float(c))

    return f, lambda: 0.0


def _cosine(q: int = 1, amplitude: float = 1.0, offset: float = 0.0):
    def f(x):
        return offset + amplitude * np.cos(2 * np.pi * q * (np.asarray(x, dtype=float) - 0.5))

    return f, lambda: abs(amplitude) * 2 * np.pi * abs(q)


def _heat_kernel(kappa: float, t: float, n: int, freq_convention: str = "unsigned"):
    if freq_convention not in ("unsigned", "signed"):
        raise ValueError(f"unknown frequency convention {freq_convention!r}")
    rate = kappa * t * float(1 << int(n)) ** 2

    def f(x):
        x = np.asarray(x, dtype=float)
        if freq_convention == "signed":
            # frequencies above N/2 are read as negative ones; sin^2 is blind to the shift
            x = np.where(x >= 0.5, x - 1.0, x)
        return np.exp(-rate * np.sin(2 * np.pi * x) ** 2)

    def bound():
        xs = np.linspace(0.0, 1.0, DENSE_SAMPLES + 1)
        deriv = rate * 2 * np.pi * np.abs(np.sin(4 * np.pi * xs)) * f(xs)
        return float(np.max(deriv)) * DERIVATIVE_MARGIN

    return f, bound


BUILTINS: dict[str, Callable] = {
    "gaussian": _gaussian,
    "linear": _linear,
    "constant": _constant,
    "cosine": _cosine,
    "heat_kernel": _heat_kernel,
}


@dataclass
class FunctionSpec:
    """A real function on [0, 1) given by a builtin, a table or a callable.

    ``derivative_bound`` is an upper bound on sup |f'| over [0, 1]; when it is
    not supplied it comes from the builtin's closed form or from centered
    differences on a dense grid.
    """

    kind: str
    name: str | None = None
    params: dict = field(default_factory=dict)
    table: np.ndarray | None = None
    func: Callable | None = None
    user_bound: float | None = None

    _impl: Callable | None = field(default=None, init=False, repr=False)
    _bound: Callable | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind == "builtin":
            if self.name not in BUILTINS:
                raise ValueError(f"unknown builtin {self.name!r}; known: {sorted(BUILTINS)}")
            self._impl, self._bound = BUILTINS[self.name](**self.params)
        elif self.kind == "table":
            table = np.asarray(self.table, dtype=float).reshape(-1)
            num_qubits_for(len(table))
            self.table = table
            self._impl = self._table_eval
        elif self.kind == "callable":
            if self.func is None:
                raise ValueError("callable spec needs func")
            self._impl = lambda x: np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)
        else:
            raise ValueError(f"unknown function kind {self.kind!r}")

    @classmethod
    def builtin(cls, name: str, derivative_bound: float | None = None, **params) -> "FunctionSpec":
        return cls("builtin", name=name, params=params, user_bound=derivative_bound)

    @classmethod
    def from_table(cls, samples, derivative_bound: float | None = None) -> "FunctionSpec":
        return cls("table", table=np.asarray(samples, dtype=float), user_bound=derivative_bound)

    @classmethod
    def from_csv(cls, path, derivative_bound: float | None = None) -> "FunctionSpec":
        return cls.from_table(read_column_csv(path), derivative_bound)

    @classmethod
    def from_callable(cls, func: Callable, derivative_bound: float | None = None) -> "FunctionSpec":
        return cls("callable", func=func, user_bound=derivative_bound)

    def _table_eval(self, x):
        x = np.asarray(x, dtype=float)
        size = len(self.table)
        idx = np.clip(np.floor(x * size).astype(int), 0, size - 1)
        return self.table[idx]

    def __call__(self, x):
        return self._impl(x)

    def samples(self, n: int) -> np.ndarray:
        """Values at the grid points ``k / 2**n``."""
        if self.kind == "table" and len(self.table) == 1 << n:
            return self.table.copy()
        return np.asarray(self(np.arange(1 << n) / float(1 << n)), dtype=float)

    def derivative_bound(self) -> float:
        if self.user_bound is not None:
            return float(self.user_bound)
        if self._bound is not None:
            return float(self._bound())
        return estimate_derivative_bound(self)


def estimate_derivative_bound(f: Callable, points: int = DENSE_SAMPLES) -> float:
    """Max of centered differences on a uniform grid, inflated by 5%."""
    xs = np.linspace(0.0, 1.0, points + 1)
    ys = np.asarray(f(xs), dtype=float)
    step = xs[1] - xs[0]
    diffs = np.abs(ys[2:] - ys[:-2]) / (2 * step)
    edge = np.abs(np.array([ys[1] - ys[0], ys[-1] - ys[-2]])) / step
    return float(max(diffs.max(initial=0.0), edge.max())) * DERIVATIVE_MARGIN


def read_column_csv(path) -> np.ndarray:
    """Single column of reals; a non-numeric first row is treated as a header."""
    values = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if i == 0:
                    continue
                raise
    return np.asarray(values, dtype=float)


def parse_function(text: str) -> FunctionSpec:
    """Parse ``name:p1,p2,...`` (positional builtin params) or ``csv:path``."""
    name, _, rest = text.partition(":")
    if name == "csv":
        return FunctionSpec.from_csv(rest)
    args = [float(v) for v in rest.split(",") if v.strip()] if rest else []
    if name == "heat_kernel" and len(args) >= 3:
        args[2] = int(args[2])
    if name == "cosine" and args:
        args[0] = int(args[0])
    return FunctionSpec.builtin(name, **_positional(name, args))


def _positional(name: str, args: list) -> dict:
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin {name!r}; known: {sorted(BUILTINS)}")
    params = list(inspect.signature(BUILTINS[name]).parameters)
    if len(args) > len(params):
        raise ValueError(f"{name} takes at most {len(params)} parameters")
    return dict(zip(params, args))


def l2_norm_squared(f: FunctionSpec) -> float:
    """Integral of f**2 over [0, 1] (adaptive quadrature)."""
    from scipy.integrate import quad

    value, _ = quad(lambda x: float(f(x)) ** 2, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    return value


def sup_norm(f: FunctionSpec, points: int = DENSE_SAMPLES) -> float:
    xs = np.linspace(0.0, 1.0, points + 1)
    return float(np.max(np.abs(f(xs))))


def gaussian_l2_ratio(sigma: float) -> float:
    """Limit of ||f||_2^2 / ||f||_inf^2 for a centered Gaussian with small sigma."""
    return sigma * math.sqrt(math.pi)
