"""
Acceptance along a line of targets
==================================

Fix a uniform three-token draft and move the target along
``q = (q1, t, 1 - q1 - t)``.  The optimal rule sits at one over a whole
interval of ``t``; the two sequential baselines only touch one at the
uniform target.  Pipe ``draftsel sweep fig2-left`` into any plotter for the
picture; here the curve is drawn as text.
"""

from draftsel.cli import sweep_rows

WIDTH = 40

for q1 in (1 / 3, 1 / 6):
    print(f"\nq1 = {q1:.4f}   (# optimal, o specinfer)")
    for r in sweep_rows([1 / 3] * 3, q1, 21):
        bar = [" "] * (WIDTH + 1)
        bar[round(r["specinfer"] * WIDTH)] = "o"
        bar[round(r["optimal"] * WIDTH)] = "#"
        flag = "*" if r["thm2_holds"] else " "
        print(f"t={r['q2']:.3f} {flag} |{''.join(bar)}| {r['optimal']:.4f} {r['spectr']:.4f} {r['specinfer']:.4f}")
# rows marked * satisfy the subset condition, and exactly those reach one
