# %% [markdown]
# # Rejection sampling and the blocked protocol
#
# A correlated source is reached from product resources by flagging one of
# many copies; the flag search fails with probability at most exp(-1/delta).

# %%
import math

import numpy as np
from scipy.stats import chisquare

from oneshot_qit import DensityMatrix
from oneshot_qit.protocols import (
    ProtocolConfig,
    blocked_protocol_simulate,
    rejection_sample_many,
    rejection_success_probability,
)
from oneshot_qit.qmat import partial_trace, purify, tensor
from oneshot_qit.states import classically_correlated, random_im_state, rejection_purification

rab = classically_correlated(("Af", "Bf"))
rp = rejection_purification(rab, purify(partial_trace(rab, ["Af"]), "A"), purify(partial_trace(rab, ["Bf"]), "B"))
print(f"I_max = {rp.imax:.4f}, flag probability per copy = {rp.q_probability(0):.4f}")

# %%
for delta in (0.25, 0.5):
    n = math.ceil(2**rp.imax / delta)
    exact = rejection_success_probability(rp.q_probability(0), n)
    succ, b = rejection_sample_many(rp, n, 100_000, seed=7)
    pval = chisquare(np.bincount(b[succ], minlength=n)).pvalue
    print(f"delta={delta}: copies {n}, success {exact:.4f} (sampled {succ.mean():.4f}), "
          f"abort {1 - exact:.4f} <= {math.exp(-1 / delta):.4f}, uniform index p={pval:.2f}")

# %% [markdown]
# The blocked protocol sends messages through the side register of the
# sampled copy. A classically correlated source aborts with the rate above;
# a source whose global state factors through its marginals never aborts.

# %%
rho = tensor(rab, DensityMatrix(np.eye(2) / 2, [("C", 2)]))
o = blocked_protocol_simulate(rho, ProtocolConfig(M=1, N=1, eps=0.3, delta=0.5))
print("classical source: block size", o.extras["block_size"], "abort", round(o.abort_prob, 4))

im = random_im_state(seed=2)
o = blocked_protocol_simulate(im.rho, ProtocolConfig(M=2, N=2, eps=0.3))
print("independent-marginal source: abort", round(o.abort_prob, 12), "per-message error", o.per_message_error.round(4))
