# %% [markdown]
# # Entropic quantities
#
# Hypothesis-testing divergence, max-divergence and their mutual-information
# versions on small qubit states. Every value carries a certified bracket.

# %%
import numpy as np

from oneshot_qit import DensityMatrix, d_hypo, d_hypo_sdp, d_max, d_max_smooth, i_hypo, i_max, i_max_smooth
from oneshot_qit.qmat import partial_trace
from oneshot_qit.states import bell_state, classically_correlated, random_state

# %% [markdown]
# ## Hypothesis testing
#
# The Neyman-Pearson tester and the SDP give the same number; the tester is the
# fast path and the SDP is the independent cross-check.

# %%
rho = DensityMatrix(np.diag([0.7, 0.3]), [("A", 2)])
sigma = DensityMatrix(np.diag([0.2, 0.8]), [("A", 2)])
for eps in (0.05, 0.1, 0.3):
    v, tester = d_hypo(rho, sigma, eps)
    s = d_hypo_sdp(rho, sigma, eps)
    print(f"eps={eps:<5} NP {v.value:.6f}  SDP {s.value:.6f}  tr(T rho)={np.trace(tester.pi @ rho.data).real:.4f}")

# %%
r = random_state([("A", 3)], seed=1)
s = random_state([("A", 3)], seed=2)
print("random qutrits, eps=0.1:", d_hypo(r, s, 0.1)[0].value, d_hypo_sdp(r, s, 0.1).value)

# %% [markdown]
# ## Max-divergence and its smoothed form

# %%
print("D_max(rho||sigma) =", d_max(rho, sigma).value, "exact:", np.log2(0.7 / 0.2))
for eps in (0.0, 0.05, 0.2):
    v = d_max_smooth(rho, sigma, eps)
    print(f"smoothed eps={eps}: {v.value:.4f} in [{v.lower:.4f}, {v.upper:.4f}]")

# %% [markdown]
# ## Mutual informations across a cut

# %%
bell = bell_state("A", "B").dm()
cc = classically_correlated(("A", "B"))
cut = ("A", "B")
for name, st in (("Bell", bell), ("classical", cc)):
    ih = i_hypo(st, cut, 0.1)[0].value
    im = i_max(st, cut).value
    ims = i_max_smooth(st, cut, 0.1).value
    print(f"{name:9s} I_H^0.1 = {ih:.4f}  I_max = {im:.4f}  smoothed I_max^0.1 = {ims:.4f}")
print("marginal of the Bell state:\n", partial_trace(bell, ["A"]).data.real)
