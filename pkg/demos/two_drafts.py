"""
How much does a second draft buy?
=================================

A single draft token is kept with probability ``sum(min(p, q))``.  With two
independent drafts from the same model the best selection rule does better,
and the optimum has a closed form as a minimum over token subsets.
"""

import numpy as np

from draftsel import SingleDraft, SpecInfer, SpecTr, TwoStepIS, lp, theory

# a two-token draft model against a sweep of targets
p = np.array([0.5, 0.5])
print("q[0]   single  optimal  specinfer  spectr")
for q0 in np.linspace(0.0, 1.0, 11):
    q = np.array([q0, 1 - q0])
    row = [SingleDraft().bind([p], q).accept_prob()]
    row += [s.bind([p, p], q).accept_prob() for s in (TwoStepIS(), SpecInfer(), SpecTr())]
    print(f"{q0:4.1f}  " + "  ".join(f"{v:7.4f}" for v in row))

# acceptance is exactly one when every subset S has q(S) >= p(S)^2;
# for two tokens that means q[0] in [1/4, 3/4]
ok, witness = theory.thm2_condition(p, [0.9, 0.1])
print("\nq=(0.9, 0.1) reaches one:", ok, "| tightest subset:", witness.subset.members, f"gap {witness.value:.3f}")

# the subset formula and the linear program agree
rng = np.random.default_rng(0)
p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
value, cert = theory.thm3_accept_prob(p, q)
print(f"\nrandom n=5: formula {value:.12f}, LP {lp.optimal_accept_prob(p, q, 2):.12f}, minimizing set {cert.subset.members}")
