"""Periodic 1D diffusion solved by a block-encoded Fourier-space decay operator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from ..block_encoding import encode
from ..functions import FunctionSpec
from ..simulator import Statevector, apply, apply_qft
from ..synth import DiagonalSpec, SynthPlan
from ..walsh import arcsin_phases
from .qsp import aligned_distance, flag_branch, prepare_state

SPARSITY_THRESHOLD = 1e-3


@dataclass
class HeatRun:
    n: int
    kappa: float
    t: float
    freq_convention: str
    s_terms: int
    numeric: Statevector
    analytic: Statevector
    error: float
    p_success: float = 0.0
    metadata: dict = field(default_factory=dict)


def decay_rate(kappa: float, n: int) -> float:
    """kappa / dx**2 for the grid of 2**n points on [0, 1)."""
    return kappa * float(1 << n) ** 2


def evolution_diagonal(n: int, kappa: float, t: float, freq_convention: str = "unsigned") -> np.ndarray:
    kernel = FunctionSpec.builtin("heat_kernel", kappa=kappa, t=t, n=n, freq_convention=freq_convention)
    return kernel.samples(n)


def exact_discrete(f0: FunctionSpec, n: int, kappa: float, t: float) -> np.ndarray:
    """Classical solution of the semi-discrete equation via FFT diagonalization."""
    samples = f0.samples(n)
    decay = evolution_diagonal(n, kappa, t)
    return np.real(np.fft.ifft(np.fft.fft(samples) * decay))


def fourier_coefficients(f0: FunctionSpec, q_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Cosine and sine coefficients of f0 about x = 0.5, by weighted quadrature."""
    cos_c = np.zeros(q_max + 1)
    sin_c = np.zeros(q_max + 1)
    g = lambda y: float(f0(y))
    cos_c[0] = quad(g, 0.0, 1.0, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    for q in range(1, q_max + 1):
        sign = -1.0 if q & 1 else 1.0  # shifting the origin to 0.5 flips odd modes
        w = 2 * math.pi * q
        a = quad(g, 0.0, 1.0, weight="cos", wvar=w, limit=400, epsabs=1e-14)[0]
        b = quad(g, 0.0, 1.0, weight="sin", wvar=w, limit=400, epsabs=1e-14)[0]
        cos_c[q] = 2 * sign * a
        sin_c[q] = 2 * sign * b
    return cos_c, sin_c


def auto_q_max(f0: FunctionSpec, kappa: float, t: float, tol: float = 1e-12, cap: int = 4000) -> int:
    scale = 2 * quad(lambda y: abs(float(f0(y))), 0.0, 1.0, limit=400)[0]
    if t <= 0 or scale == 0:
        return cap
    q = math.sqrt(max(0.0, math.log(scale / tol)) / (4 * kappa * math.pi**2 * t))
    return min(cap, int(math.ceil(q)) + 1)


def analytic_heat(f0: FunctionSpec, x_grid, t: float, kappa: float, q_max: int | None = None) -> np.ndarray:
    x_grid = np.asarray(x_grid, dtype=float)
    if t == 0:
        return np.asarray(f0(x_grid), dtype=float)
    q_max = auto_q_max(f0, kappa, t) if q_max is None else q_max
    cos_c, sin_c = fourier_coefficients(f0, q_max)
    q = np.arange(q_max + 1)
    decay = np.exp(-4 * kappa * q**2 * math.pi**2 * t)
    phase = 2 * math.pi * np.outer(x_grid - 0.5, q)
    return (np.cos(phase) * (cos_c * decay) + np.sin(phase) * (sin_c * decay)).sum(axis=1)


def kernel_heat(f0: FunctionSpec, x_grid, t: float, kappa: float, images: int = 3) -> np.ndarray:
    """Periodized Gaussian heat-kernel convolution; independent of the Fourier series."""
    width = math.sqrt(4 * kappa * t)
    out = []
    for x0 in np.asarray(x_grid, dtype=float):
        def integrand(y):
            z = x0 - y + np.arange(-images, images + 1)
            return float(f0(y)) * float(np.sum(np.exp(-(z**2) / width**2)))

        val = quad(integrand, 0.0, 1.0, points=[x0] if 0 < x0 < 1 else None, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
        out.append(val / (math.sqrt(math.pi) * width))
    return np.array(out)


def sparsity_count(n: int, kappa: float, t: float, alpha: float = 1.1, threshold: float = SPARSITY_THRESHOLD) -> int:
    theta = arcsin_phases(evolution_diagonal(n, kappa, t), alpha)
    return int(np.sum(np.abs(theta) > threshold))


def calibrate_kappa(n: int = 8, t: float = 0.005, target_count: int = 14, alpha: float = 1.1, threshold: float = SPARSITY_THRESHOLD, lo: float = 1e-3, hi: float = 1e3) -> tuple[float, tuple[float, float]]:
    """Midpoint (in log scale) of the kappa interval that yields ``target_count`` operators.

    The count is non-increasing in kappa, so both interval ends are found by
    bisection on the predicates ``count <= target`` and ``count < target``.
    """

    def first_kappa(pred):
        a, b = math.log(lo), math.log(hi)
        if not pred(math.exp(b)):
            raise ValueError("kappa search range too small")
        for _ in range(200):
            mid = 0.5 * (a + b)
            if pred(math.exp(mid)):
                b = mid
            else:
                a = mid
        return math.exp(b)

    start = first_kappa(lambda k: sparsity_count(n, k, t, alpha, threshold) <= target_count)
    stop = first_kappa(lambda k: sparsity_count(n, k, t, alpha, threshold) < target_count)
    if sparsity_count(n, start, t, alpha, threshold) != target_count:
        raise ValueError(f"no kappa gives exactly {target_count} operators")
    return math.sqrt(start * stop), (start, stop)


def heat_solve(
    f0: FunctionSpec,
    n: int,
    kappa: float,
    t: float,
    budget: int | None = None,
    alpha: float = 1.1,
    freq_convention: str = "unsigned",
    qft_method: str = "direct",
) -> HeatRun:
    """Prepare f0, QFT, apply the block-encoded decay with ``budget`` operators, inverse QFT.

    ``budget`` keeps that many eigenvalues of the encoded phase, largest
    magnitude first; ``None`` keeps all of them.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    qsp = prepare_state(f0, n, {"m_qubits": n}, alpha, with_depth=False)
    state = apply_qft(qsp.prepared, list(range(n)), inverse=False, method=qft_method)
    decay = evolution_diagonal(n, kappa, t, freq_convention)
    approx = None if budget is None else {"sparse_s": int(budget)}
    plan = SynthPlan(method="sequential", ordering="gray", approximation=approx)
    be = encode(DiagonalSpec.from_values(decay), alpha, plan)
    full = apply(state.extend(be.circuit.width - n), be.circuit)
    branch = flag_branch(full, be, 1)
    p_success = float(np.sum(np.abs(branch) ** 2))
    evolved = Statevector(branch / np.sqrt(p_success))
    numeric = apply_qft(evolved, list(range(n)), inverse=True, method=qft_method)
    grid = np.arange(1 << n) / float(1 << n)
    analytic = Statevector.from_vector(analytic_heat(f0, grid, t, kappa))
    err = aligned_distance(numeric.amps, analytic.amps)
    kept = int(np.count_nonzero(be.phases))
    meta = {"alpha": alpha, "qsp_error": qsp.l2_error, "qft_method": qft_method, "budget": budget}
    return HeatRun(n, kappa, t, freq_convention, kept, numeric, analytic, err, p_success, meta)


def discretization_convergence(f0: FunctionSpec, kappa: float, t: float, n_list) -> list[dict]:
    """Analytic vs exact semi-discrete solution for each grid size."""
    rows = []
    for n in n_list:
        grid = np.arange(1 << n) / float(1 << n)
        a = analytic_heat(f0, grid, t, kappa)
        d = exact_discrete(f0, n, kappa, t)
        err = float(np.linalg.norm(a / np.linalg.norm(a) - d / np.linalg.norm(d)))
        rows.append({"n": n, "t": t, "kappa": kappa, "error": err})
    return rows
