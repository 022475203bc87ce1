"""
Tokens per target call on a toy language model
==============================================

Each block drafts ``L`` tokens with every draft model, then verifies them
one position at a time.  A rejection ends the block after emitting the
correction token, so a block yields between 1 and ``L + 1`` tokens.
"""

from draftsel import SimConfig, SingleDraft, SpecInfer, ToyLm, TwoStepIS, run_block_sim
from draftsel.sim import analytic_block_efficiency

# with a context-free model every position accepts with the same probability
alpha = 0.5
cfg = SimConfig(ToyLm(2, fixed=(0.5, 0.5)), [ToyLm(2, fixed=(1.0, 0.0))], SingleDraft(), L=5, blocks=20000)
stats = run_block_sim(cfg)
print(stats.summary())
print(f"geometric sum: {analytic_block_efficiency(alpha, 5):.6f}\n")

# a bigram target and a sharpened copy of it as the draft
target = ToyLm(6, context=2, seed=5)
draft = ToyLm(6, context=2, seed=5, temperature=0.4)
for scheme, K in ((SingleDraft(), 1), (SpecInfer(), 2), (TwoStepIS(), 2), (SpecInfer(), 4), (TwoStepIS("beta"), 3)):
    stats = run_block_sim(SimConfig(target, [draft] * K, scheme, L=5, blocks=5000, seed=1))
    print(f"K={K} {stats.summary()}")
    print("    per-position acceptance:", " ".join(f"{a:.3f}" for a in stats.accept_rate))
