"""
Trading optimality for a smaller program
========================================

The pair-weight program has one variable per token pair.  Keeping only the
``s`` tokens with the largest ``q - p**2`` as free, and fixing every other
weight with a ranking rule, shrinks it to ``s*(s-1)/2`` variables.  The lost
acceptance is bounded by the positive part of ``q - p**2`` on the dropped
tokens.
"""

import numpy as np

from draftsel import lp, theory
from draftsel.verify import truncated_accept

rng = np.random.default_rng(3)
n = 8
q = rng.dirichlet(np.ones(n) * 0.5)
p = q**1.6 / (q**1.6).sum()  # a sharper draft

best = lp.optimal_accept_prob(p, q, 2)
print(f"n={n}, optimum {best:.6f}, single draft {np.minimum(p, q).sum():.6f}\n")
print(" s  free   ranked    fast   floor")
for s in range(1, n + 1):
    got, kept = truncated_accept(p, q, s)
    fast, _ = truncated_accept(p, q, s, fast=True)
    dropped = [t for t in range(n) if t not in kept]
    floor = best - theory.truncation_penalty(p, q, dropped)
    print(f"{s:2d} {s * (s - 1) // 2:5d} {got:8.5f} {fast:8.5f} {floor:7.4f}")

# the ranked variant never goes down as s grows; the fast one can
p, q = [0.67, 0.16, 0.17], [0.47, 0.44, 0.09]
print("\nranked:", [round(truncated_accept(p, q, s)[0], 4) for s in (1, 2, 3)])
print("fast:  ", [round(truncated_accept(p, q, s, fast=True)[0], 4) for s in (1, 2, 3)])
