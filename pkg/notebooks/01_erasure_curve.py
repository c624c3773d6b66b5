# %% [markdown]
# # The erasure example: R(D, C) from slope sweeps
#
# A source with K = 4 equiprobable relevant letters and one free letter of
# probability q = 0.5. Taking action 1 (cost 1) shows the letter to the
# decoder through an erasure channel; action 0 (cost 0) shows nothing.
# We trace the rate-distortion-cost surface with the alternating solver,
# compare it with the closed form, and measure what adaptive actions buy.

# %%
import numpy as np

from actionrd import build_erasure, analytic_rdc, d_max, sweep, evaluate_rdc, rd_at
from actionrd.curves import nonadaptive_rd_at, NonAdaptive

sc = build_erasure(K=4, q=0.5, p=0.0)
print(sc.name, "px =", sc.px)

# %% [markdown]
# ## Zero-rate boundary
#
# With no message at all the decoder can still guess, and with a budget it
# can look. D_max(C) is the best such distortion; it falls linearly in C.

# %%
for C in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"C = {C:4.2f}   D_max = {d_max(sc, C):.4f}")

# %% [markdown]
# ## A coarse sweep
#
# Each (s, m) pair gives one point and one supporting plane. The envelope
# of the planes is a lower bound everywhere; refining at a target adds the
# planes that touch there.

# %%
s_grid = [-0.5, -1.0, -2.0, -4.0, -8.0]
m_grid = [-0.25, -0.5, -1.0, -2.0]
curve = sweep(sc, s_grid, m_grid)
print(f"{len(curve.points)} points, all converged: {curve.all_converged}")
for p in curve.points[:5]:
    print(f"s={p.s:6.2f} m={p.m:6.2f}  R={p.rate:.4f}  D={p.distortion:.4f}  C={p.cost:.4f}")

# %%
print("   D     C   envelope   refined   closed form")
for D, C in [(0.05, 0.25), (0.1, 0.25), (0.1, 0.5), (0.2, 0.75)]:
    coarse = evaluate_rdc(curve, D, C)
    fine = rd_at(sc, D, C, curve=curve)
    print(f"{D:5.2f} {C:5.2f}   {coarse:.4f}    {fine:.4f}    {analytic_rdc(D, C):.4f}")

# %% [markdown]
# ## Adaptive against source-independent actions
#
# If the action may not depend on the source, the rate splits into one
# side-information problem per action. The gap is the value of looking
# where it matters.

# %%
baseline = NonAdaptive(sc)
for D in (0.05, 0.1, 0.15):
    a = rd_at(sc, D, 0.5)
    b = nonadaptive_rd_at(sc, D, 0.5, baseline=baseline)
    print(f"D={D:4.2f} C=0.5   adaptive {a:.4f}   independent {b:.4f}   gain {b - a:.4f}")

# %% [markdown]
# ## Noisy looks
#
# With erasure probability p = 0.1 on the costly action, every target needs
# at least as much rate.

# %%
noisy = build_erasure(K=4, q=0.5, p=0.1)
for D in (0.05, 0.1):
    print(f"D={D:4.2f} C=0.5   p=0: {rd_at(sc, D, 0.5):.4f}   p=0.1: {rd_at(noisy, D, 0.5):.4f}")
