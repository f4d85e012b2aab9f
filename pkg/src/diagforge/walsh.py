"""Walsh functions, the fast Walsh-Hadamard transform and series truncation.

Bit convention used throughout the package: for a basis index ``k`` on ``n``
qubits, qubit 0 holds the most significant bit of ``k``.  The dyadic digit
``x_i`` of ``x = k / 2**n`` therefore lives on qubit ``i``, and bit ``i`` of a
Walsh order ``j`` (least significant bit first) pairs with qubit ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroSpectrum, MissingDerivativeBound, NonPositiveEpsilon, NonPowerOfTwoLength


def num_qubits_for(length: int) -> int:
    """Return ``n`` with ``2**n == length`` or raise NonPowerOfTwoLength."""
    length = int(length)
    if length < 1 or length & (length - 1):
        raise NonPowerOfTwoLength(f"length {length} is not a power of two")
    return length.bit_length() - 1


@dataclass(frozen=True)
class WalshSeries:
    """Dense coefficient vector; ``coeffs[j]`` multiplies the Walsh function of order j."""

    n_qubits: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (1 << self.n_qubits,):
            raise NonPowerOfTwoLength(
                f"expected {1 << self.n_qubits} coefficients, got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def terms(self, cutoff: float = 0.0) -> list[tuple[int, float]]:
        return [(j, float(a)) for j, a in enumerate(self.coeffs) if abs(a) > cutoff]

    def lift(self, n: int) -> "WalshSeries":
        """The same operator seen on ``n >= n_qubits`` qubits (identity on the low qubits)."""
        coeffs = np.zeros(1 << n)
        coeffs[: len(self.coeffs)] = self.coeffs
        return WalshSeries(n, coeffs)


@dataclass(frozen=True)
class SparseWalshSeries:
    n_qubits: int
    terms: tuple[tuple[int, float], ...]

    def __post_init__(self):
        terms = tuple((int(j), float(a)) for j, a in self.terms)
        orders = [j for j, _ in terms]
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError("orders must be strictly increasing")
        if orders and (orders[0] < 0 or orders[-1] >= 1 << self.n_qubits):
            raise ValueError("order out of range")
        object.__setattr__(self, "terms", terms)

    def to_dense(self) -> WalshSeries:
        coeffs = np.zeros(1 << self.n_qubits)
        for j, a in self.terms:
            coeffs[j] = a
        return WalshSeries(self.n_qubits, coeffs)


def dyadic_digits(x: float, count: int) -> list[int]:
    digits = []
    for _ in range(count):
        x *= 2
        d = int(x)
        digits.append(d)
        x -= d
    return digits


def walsh_function(j: int, x: float) -> int:
    """Value (+1 or -1) of the Walsh function of order ``j`` at ``x`` in [0, 1)."""
    if j < 0:
        raise ValueError("order must be non-negative")
    digits = dyadic_digits(float(x), j.bit_length())
    parity = sum(d for i, d in enumerate(digits) if (j >> i) & 1)
    return -1 if parity & 1 else 1


def _butterfly(values: np.ndarray) -> np.ndarray:
    """Unnormalized transform, output indexed by Walsh order."""
    n = num_qubits_for(values.shape[0])
    out = np.array(values, dtype=float).reshape((2,) * n) if n else np.array(values, dtype=float)
    for axis in range(n):
        lo = np.take(out, 0, axis=axis)
        hi = np.take(out, 1, axis=axis)
        out = np.stack((lo + hi, lo - hi), axis=axis)
    # axis i carries bit i of the order; reverse so that C-order flattening gives j
    return out.transpose(tuple(reversed(range(n)))).reshape(-1) if n else out.reshape(-1)


def fwht(values) -> WalshSeries:
    values = np.asarray(values, dtype=float)
    n = num_qubits_for(values.shape[0])
    return WalshSeries(n, _butterfly(values) / values.shape[0])


def inverse_fwht(series: WalshSeries) -> np.ndarray:
    # the butterfly matrix is symmetric and its own inverse up to 1/N
    n = series.n_qubits
    coeffs = np.asarray(series.coeffs, dtype=float)
    if n == 0:
        return coeffs.copy()
    grid = coeffs.reshape((2,) * n).transpose(tuple(reversed(range(n)))).reshape(-1)
    out = grid.reshape((2,) * n)
    for axis in range(n):
        lo = np.take(out, 0, axis=axis)
        hi = np.take(out, 1, axis=axis)
        out = np.stack((lo + hi, lo - hi), axis=axis)
    return out.reshape(-1)


def walsh_matrix(n: int) -> np.ndarray:
    """Dense matrix ``M[j, k] = w_j(k / N)``, built bit by bit (reference only)."""
    size = 1 << n
    k = np.arange(size)
    j = np.arange(size)
    parity = np.zeros((size, size), dtype=np.uint8)
    for i in range(n):
        x_i = ((k >> (n - 1 - i)) & 1).astype(np.uint8)
        j_i = ((j >> i) & 1).astype(np.uint8)
        parity ^= np.outer(j_i, x_i)
    return 1.0 - 2.0 * parity


def truncate_to_m_qubits(f, n: int, m: int) -> WalshSeries:
    """Walsh series on ``m`` qubits of the samples ``f(k / 2**m)``."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    return fwht(f.samples(m))


def truncation_error(f, n: int, m: int) -> float:
    series = truncate_to_m_qubits(f, n, m)
    approx = np.repeat(inverse_fwht(series), 1 << (n - m))
    return float(np.max(np.abs(f.samples(n) - approx)))


def choose_m(f, epsilon: float) -> int:
    if not epsilon > 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    bound = f.derivative_bound() if hasattr(f, "derivative_bound") else float(f)
    if bound is None:
        raise MissingDerivativeBound("no derivative bound available")
    if bound <= 0:
        return 1
    return max(1, int(np.ceil(np.log2(bound / epsilon))))


def sparsify(series: WalshSeries, s: int) -> SparseWalshSeries:
    size = len(series.coeffs)
    if not 0 <= s <= size:
        raise ValueError(f"s must lie in [0, {size}]")
    mags = np.abs(series.coeffs)
    order = np.lexsort((np.arange(size), -mags))[:s]
    keep = np.sort(order)
    return SparseWalshSeries(series.n_qubits, tuple((int(j), float(series.coeffs[j])) for j in keep))


def arcsin_phases(values, alpha: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    top = float(np.max(np.abs(values))) if values.size else 0.0
    if top == 0.0:
        raise AllZeroSpectrum("all values are zero")
    return np.arcsin(np.clip(values / (alpha * top), -1.0, 1.0))
