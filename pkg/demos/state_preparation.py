# %% [markdown]
# Loading a Gaussian profile into amplitudes, boosting the success probability,
# and evolving it under periodic diffusion.

# %%
import numpy as np

from diagforge import FunctionSpec, amplification_schedule
from diagforge.applications.heat import calibrate_kappa, heat_solve
from diagforge.applications.qsp import prepare_state
from diagforge.block_encoding import measured_success, rus_chain, uniform_prep

gauss = FunctionSpec.builtin("gaussian", sigma=0.1)
n = 10

# %%
for budget in (None, {"sparse_s": 45}, {"m_qubits": 5}):
    r = prepare_state(gauss, n, budget)
    print(f"{str(budget):20s} depth={r.metrics['depth']:6d} p={r.p_success:.4f} infidelity={r.infidelity:.2e}")

# %% [markdown]
# Amplitude amplification: the flag-1 probability follows sin^2((2k+1) beta).

# %%
r = prepare_state(gauss, 8)
sched = amplification_schedule(r.p_success)
for k in range(4):
    print(k, round(measured_success(r.encoding, uniform_prep(8), k), 6), round(sched.probability_after(k), 6))

# %% [markdown]
# Repeat-until-success keeps the failed branch and retries with a corrected operator.

# %%
d = gauss.samples(n)
chain = rus_chain(d, np.full(d.size, 2 ** (-n / 2)), 1.1, 6)
print(np.round(chain, 5))

# %% [markdown]
# Diffusion: the decay operator acts diagonally after a QFT.

# %%
kappa, _ = calibrate_kappa(n=8)
for t, s in zip((0.005, 0.02, 0.05, 1.0), (14, 8, 6, 1)):
    run = heat_solve(gauss, 8, kappa, t, s)
    print(f"t={t:<6} operators={run.s_terms:2d} error={run.error:.1e}")
print("calibrated kappa", round(kappa, 4))
