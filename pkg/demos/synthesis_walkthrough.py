# %% [markdown]
# Diagonal unitaries: Walsh vs sequential synthesis, then spreading the work over ancillas.

# %%
import numpy as np

from diagforge import DiagonalSpec, SynthPlan, depth, embedded_action, factor_list_for, parallel_synth, size, synthesize

rng = np.random.default_rng(3)
n = 5
theta = rng.uniform(-np.pi, np.pi, 1 << n)
spec = DiagonalSpec.from_phases(theta)

# %%
for method in ("walsh", "sequential"):
    plan = SynthPlan(method, "gray", "walsh_staircase" if method == "sequential" else None)
    c = synthesize(spec, plan)
    block, leak = embedded_action(c, range(n))
    err = np.max(np.abs(np.diag(block) - np.exp(1j * theta)))
    print(f"{method:10s} size={size(c):4d} depth={depth(c):4d} width={c.width:2d} max err={err:.1e}")

# %% [markdown]
# Walsh factors on disjoint copies of the register run side by side.

# %%
factors = factor_list_for(theta, SynthPlan())
for m in (0, n, 2 * n, 4 * n, 8 * n):
    c = parallel_synth(factors, m)
    print(f"ancillas={m:3d} width={c.width:3d} depth={depth(c):4d} size={size(c):4d}")

# %% [markdown]
# Keeping only the largest Walsh terms trades accuracy for gates. Random phases
# have no structure to exploit, so use a smooth profile here.

# %%
smooth = np.exp(-0.5 * ((np.arange(1 << n) / (1 << n) - 0.5) / 0.15) ** 2)
for s in (4, 8, 16, 32):
    c = synthesize(DiagonalSpec.from_phases(smooth), SynthPlan(approximation={"sparse_s": s}))
    block, _ = embedded_action(c, range(n))
    err = np.max(np.abs(np.angle(np.diag(block) * np.exp(-1j * smooth))))
    print(f"s={s:2d} size={size(c):3d} max phase err={err:.3f}")
