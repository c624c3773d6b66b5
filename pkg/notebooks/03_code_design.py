# %% [markdown]
# # Codes that approach the bound
#
# A design starts from a strategy conditional that meets a target (D, C).
# An LDGM code picks the actions, the source is split by action, and each
# part gets its own source code. Here we simulate a few blocks of length
# 10000 and then look at Wyner-Ziv binning on a small binary example.

# %%
import numpy as np

from actionrd import build_erasure, rd_at
from actionrd import multiplex as mx
from actionrd.scenario import ScenarioInstance

sc = build_erasure(K=4, q=0.5, p=0.0)
design = mx.design_for_target(sc, 0.1, 0.25, 10000)
print(f"action bits k = {design.k}, P_A = {np.round(design.pa, 4)}, d = {design.action_mapping.d}")
for b in design.branches:
    print(f"  action {b.action}: mode {b.mode}, k_a = {b.k_a}, n_a = {b.n_a}")
print(f"design rate {design.rate:.4f}")

# %%
report = mx.evaluate(sc, design, trials=3, seed=1)
print(report.to_csv())
bound = rd_at(sc, report.distortion, report.cost)
print(f"bound at the empirical point {bound:.4f}, gap {report.rate - bound:.4f} bits")

# %% [markdown]
# ## Binning with useful side information
#
# Two actions observe a fair bit through binary symmetric channels of
# crossover 0.25 (free) and 0.05 (cost 1). Explicit random codebooks are
# binned; the decoder searches one bin using the side information.
# Turning binning off sends the full index and shows what it saves.

# %%
bsc = lambda e: np.array([[1 - e, e], [e, 1 - e]])
toy = ScenarioInstance([0.5, 0.5], np.stack([bsc(0.25), bsc(0.05)]), 1 - np.eye(2), [0.0, 1.0])
from actionrd.curves import design_conditional

ptx, ws, upper, lower = design_conditional(toy, 0.08, 0.5)
for binning in (True, False):
    des = mx.design_from_conditional(toy, ptx, ws.space, 40, mode="codebook", binning=binning,
                                     codebook_slack=1, eps=0.2)
    rep = mx.evaluate(toy, des, trials=20, seed=3)
    print(f"binning={binning!s:5}  rate {rep.rate:.3f}  D {rep.distortion:.3f} +- {rep.distortion_hw:.3f}"
          f"  cost {rep.cost:.3f}")
