import math

import numpy as np
import pytest

from diagforge.block_encoding import (
    amplification_schedule,
    encode,
    expected_failures,
    extract_block,
    measured_success,
    rus_chain,
    rus_next,
    split_complex,
    success_probability,
    uniform_prep,
)
from diagforge.errors import (
    AllZeroSpectrum,
    AlphaNotGreaterThanOne,
    AlphaTooSmall,
    NonPositiveProbability,
)
from diagforge.functions import FunctionSpec
from diagforge.simulator import Statevector, apply, post_select
from diagforge.synth import DiagonalSpec, SynthPlan


def test_two_point_spectrum_alpha_one():
    be = encode(DiagonalSpec.from_values([1.0, 0.0]), 1.0)
    assert np.allclose(be.phases, [math.pi / 2, 0.0])
    assert np.allclose(be.block(1), np.diag([1.0, 0.0]), atol=1e-10)


@pytest.mark.parametrize("alpha", [1.0, 1.1, 3.0])
def test_constant_spectrum_gives_scaled_identity(alpha):
    be = encode(DiagonalSpec.from_values(np.full(8, 2.0)), alpha)
    assert np.allclose(be.block(1), np.eye(8) / alpha, atol=1e-10)


def test_flag_zero_block_is_cosine():
    d = np.random.default_rng(0).uniform(-1, 1, 8)
    be = encode(DiagonalSpec.from_values(d), 1.2)
    theta = np.arcsin(d / (1.2 * np.max(np.abs(d))))
    assert np.allclose(be.block(0), np.diag(np.cos(theta)), atol=1e-10)
    assert np.allclose(extract_block(be.circuit, be.main, be.flag, 0), be.block(0), atol=1e-12)


def test_state_identity_on_basis_inputs():
    d = np.random.default_rng(1).uniform(0.1, 1, 4)
    be = encode(DiagonalSpec.from_values(d), 1.1, SynthPlan("sequential"), parallel_m=4)
    theta = np.arcsin(d / (1.1 * d.max()))
    extra = be.circuit.width - 2
    for k in range(4):
        out = apply(Statevector.basis(2, k).extend(extra), be.circuit)
        for flag, amp in ((0, np.cos(theta[k])), (1, np.sin(theta[k]))):
            pinned = {q: 0 for q in be.ancillas}
            pinned[be.flag] = flag
            branch = out.restrict(pinned)
            assert np.isclose(abs(branch[k]), abs(amp)) and np.isclose(np.sum(np.abs(branch) ** 2), amp**2)


def test_encode_errors():
    with pytest.raises(AllZeroSpectrum):
        encode(DiagonalSpec.from_values([0.0, 0.0]), 1.1)
    with pytest.raises(AlphaTooSmall):
        encode(DiagonalSpec.from_values([1.0, 0.5]), 0.9)


@pytest.mark.xfail(strict=True, reason="largest-term selection leaves a 0.012 block error at s = 45; see the decisions ledger")
def test_sparse_gaussian_block_error():
    f = FunctionSpec.builtin("gaussian", sigma=0.1)
    be = encode(DiagonalSpec.from_values(f.samples(12)), 1.1, SynthPlan(approximation={"sparse_s": 45}))
    assert be.epsilon < 0.006
    assert np.max(np.abs(np.diag(be.block(1)) - np.diag(be.target_block()))) < 0.006


def test_split_complex():
    phases, moduli = split_complex([1j, -1.0])
    assert np.allclose(phases.phases(), [math.pi / 2, math.pi]) and np.allclose(moduli.values(), [1, 1])
    assert np.allclose(split_complex([2.0, 3.0])[0].phases(), 0)
    z = np.random.default_rng(2).normal(size=16) + 1j * np.random.default_rng(3).normal(size=16)
    ph, mod = split_complex(z)
    assert np.allclose(np.exp(1j * ph.phases()) * mod.values(), z, atol=1e-14)


def test_success_probability_examples():
    plus = np.full(2, 2**-0.5)
    assert math.isclose(success_probability([1.0, 0.0], plus, 1.0), 0.5)
    psi = np.random.default_rng(4).normal(size=8)
    psi /= np.linalg.norm(psi)
    assert math.isclose(success_probability(np.full(8, 3.0), psi, 1.0), 1.0)
    f = FunctionSpec.builtin("gaussian", sigma=0.1)
    p = success_probability(f.samples(10), np.full(1024, 2**-5), 1.0)
    assert abs(p - 0.1 * math.sqrt(math.pi)) < 0.01


def test_schedule_examples():
    s = amplification_schedule(0.5)
    assert math.isclose(s.beta, math.pi / 4) and s.k_steps == 1
    s = amplification_schedule(1.0)
    assert math.isclose(s.beta, math.pi / 2) and s.k_steps == 0
    assert amplification_schedule(0.6).k_steps <= 1
    with pytest.raises(NonPositiveProbability):
        amplification_schedule(0.0)


def test_amplification_zero_steps_unchanged():
    d = np.random.default_rng(5).uniform(0.1, 1, 8)
    be = encode(DiagonalSpec.from_values(d), 1.1)
    p0 = success_probability(d, np.full(8, 8**-0.5), 1.1)
    assert math.isclose(measured_success(be, uniform_prep(3), 0), p0, abs_tol=1e-12)


def test_gaussian_first_peak():
    f = FunctionSpec.builtin("gaussian", sigma=0.1)
    be = encode(DiagonalSpec.from_values(f.samples(8)), 1.1)
    sched = amplification_schedule(measured_success(be, uniform_prep(8), 0))
    probs = [measured_success(be, uniform_prep(8), k) for k in range(sched.k_steps + 2)]
    assert abs(probs[1] - sched.probability_after(1)) < 1e-8
    # the first peak sits at the scheduled step count
    k = sched.k_steps
    assert probs[k] > probs[k - 1] and probs[k] >= probs[k + 1]


def test_rus_constant_spectrum():
    step = rus_next(np.full(4, 2.0), 1.5)
    assert np.allclose(step.values, step.values[0])
    with pytest.raises(AlphaNotGreaterThanOne):
        rus_next([1.0, 0.5], 1.0)


def test_rus_two_point_against_matrices():
    d, alpha = np.array([1.0, 0.5]), 1.1
    psi = np.array([0.6, 0.8])
    a = d / (alpha * d.max())
    fail = np.sqrt(1 - a**2) * psi
    step = rus_next(d, alpha)
    assert np.allclose(step.values, d / np.sqrt(1 - a**2))
    a2 = step.values / (alpha * step.d_max)
    p2 = np.sum((a2 * fail) ** 2) / np.sum(fail**2)
    assert np.allclose(rus_chain(d, psi, alpha, 2), [np.sum((a * psi) ** 2), p2])


def test_rus_chain_matches_simulation():
    d = np.random.default_rng(6).uniform(0.1, 1, 8)
    psi = Statevector(np.full(8, 8**-0.5 + 0j))
    chain = rus_chain(d, psi, 1.2, 4)
    state, op = psi, d
    for k in range(4):
        be = encode(DiagonalSpec.from_values(op), 1.2)
        out = apply(state.extend(1), be.circuit)
        assert abs(out.qubit_probability(be.flag, 1) - chain[k]) < 1e-12
        bad, _ = post_select(out, be.flag, 0)
        state = Statevector(bad.restrict({be.flag: 0}))
        op = rus_next(op, 1.2).values
    assert expected_failures(chain) > 0
