# %% [markdown]
# # Chain-rule and converse checks
#
# Each sweep draws random states, evaluates both sides of an inequality with
# certified brackets, and labels every trial pass, violation, inconclusive or
# vacuous. The same sweeps back the ``oneshot-qit verify`` command.

# %%
from oneshot_qit.states import ghz_state
from oneshot_qit.verify import check_lemma_suite, check_thm2, sweep_converse, sweep_prop1, sweep_thm1, sweep_thm2

for name, rep in (
    ("independent marginals", sweep_prop1(trials=10, seed=7)),
    ("side information", sweep_thm1(trials=10, seed=7)),
    ("tripartite, unsmoothed", sweep_thm2(trials=10, seed=7, eps=0.0)),
):
    print(f"{name:24s} {rep.summary()}")

# %% [markdown]
# The GHZ state meets the unsmoothed tripartite inequality with equality;
# smoothing opens a gap.

# %%
ghz = ghz_state(("A", "B", "C"))
for eps in (0.0, 0.2):
    r = check_thm2(ghz, eps)
    print(f"GHZ eps={eps}: lhs {r['lhs']:.4f}  rhs {r['rhs']:.4f}  slack {r['slack']:.4f}  {r['verdict']}")

# %%
conv = sweep_converse(seed=7)
print("converse:", conv.summary(), "smallest slack", round(min(r["slack"] for r in conv.rows), 4))

# %%
lemmas = check_lemma_suite(seed=7, trials=20)
print("supporting lemmas:", lemmas.summary())
print(lemmas.to_csv().splitlines()[0])
