# %% [markdown]
# # Inside the solver
#
# Three checks that explain why the alternating minimization can be trusted:
# it reproduces the binary rate-distortion function, the objective never
# goes up across block updates, and the inner fixed-point map contracts.

# %%
import math

import numpy as np

from actionrd import build_erasure, classic_rd, solve_point
from actionrd.solver import Workspace, compute_log_alphas, log_fixed_point_map, update_qa, update_qty


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# %% [markdown]
# ## One action, no side information
#
# The problem collapses to plain rate-distortion. For a fair coin under
# Hamming distortion the answer is 1 - h2(D).

# %%
for D in (0.05, 0.1, 0.25):
    r = classic_rd(D, [0.5, 0.5], 1 - np.eye(2))
    print(f"D={D:4.2f}  solver {r:.6f}   1-h2(D) {1 - h2(D):.6f}")

# %% [markdown]
# ## Monotone descent
#
# The objective is recorded after each of the three block updates of every
# outer iteration.

# %%
sc = build_erasure(K=4, q=0.5, p=0.0)
trace = []
pt = solve_point(sc, -2.0, -1.0, trace=trace)
steps = np.diff(trace)
print(f"{pt.iterations} iterations, {len(steps)} block updates, largest increase {steps.max():.2e}")
print(f"R={pt.rate:.4f} D={pt.distortion:.4f} C={pt.cost:.4f}")

# %% [markdown]
# ## Contraction of the action update
#
# Finite differences of the log-domain map at a random state. Each row sum
# of absolute derivatives is beta plus (1 - beta) times a term below one.

# %%
ws = Workspace(sc)
rng = np.random.default_rng(0)
ptx = rng.dirichlet(np.ones(ws.n_t), size=sc.n_x)
qa, qty = update_qa(ptx, sc.px, ws.actions, sc.n_a), update_qty(ptx, sc.px, ws.W)
_, la_a = compute_log_alphas(qa, qty, sc, -2.0, -1.0, ws)
q = np.log2(rng.dirichlet(np.ones(sc.n_a), size=sc.n_x).T)
mu = np.zeros(sc.n_x)
for beta in (0.1, 0.5, 0.9):
    base = log_fixed_point_map(q, mu, la_a, sc, beta).ravel()
    J = np.empty((base.size, base.size))
    for k in range(base.size):
        qp = q.ravel().copy()
        qp[k] += 1e-6
        J[:, k] = (log_fixed_point_map(qp.reshape(q.shape), mu, la_a, sc, beta).ravel() - base) / 1e-6
    print(f"beta={beta}: |J|_inf = {np.abs(J).sum(axis=1).max():.4f}")
