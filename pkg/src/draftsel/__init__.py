"""Multi-draft token selection for speculative decoding.

Selection schemes, their optimal and truncated linear programs,
closed-form acceptance results, enumeration oracles and a block
efficiency simulator over synthetic models.
"""

from .lp import (
    GuardExceeded,
    LpProblem,
    LpSolution,
    build_fast_truncated_variant,
    build_full_beta_lp,
    build_noniid_w_lp_k2,
    build_truncated_w_lp,
    build_w_lp_k2,
    feasibility_accepts_one,
    optimal_accept_prob,
    solve_lp,
)
from .prob import (
    DegenerateResidual,
    DimensionMismatch,
    IngestError,
    SupportSet,
    TokenDist,
    residual_dist,
    temperature_tilt,
    top_k_truncate,
    top_p_truncate,
    tv_distance,
)
from .selection import (
    BetaRule,
    MultiStagePair,
    Selection,
    SingleDraft,
    SpecInfer,
    SpecTr,
    TruncatedAlphabet,
    TwoStepIS,
    exact_accept_prob,
    exact_hit_prob,
    exact_output_dist,
    scheme_from_dict,
)
from .sim import SimConfig, SimStats, ToyLm, analytic_block_efficiency, gen_random_instance, run_block_sim
from .specsample import accept_prob_single, exact_output_dist_single, spec_sample_step
from .theory import conjecture_accept_prob, conjecture_condition_k, thm2_condition, thm3_accept_prob
from .weights import OrderedWeightMatrix, WeightMatrix

__version__ = "0.1.0"
