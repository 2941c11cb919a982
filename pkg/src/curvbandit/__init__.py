"""Adversarial bandits with refined regularizers.

FTRL on the simplex with a negentropy plus log-barrier regularizer, a
reservoir-centred variant for slowly varying losses, and FTRL on the l_p
ball with the barrier ``-log(1 - ||x||_p^p)``; together with loss generators,
a starved-feedback protocol wrapper and a regret harness.
"""

from .environments import (
    GaussianLbParams,
    LossSequence,
    StarvedProtocol,
    gen_ball_noisy,
    gen_gaussian_lb,
    gen_low_variation,
    gen_sparse,
    gen_starved_bernoulli,
    info_diagnostic,
    sequence_stats,
    starved_wrap,
)
from .estimators import (
    Feedback,
    Reservoir,
    centered_estimator,
    lp_estimator,
    lp_sample,
    mab_estimator,
    mab_sample,
    reservoir_mean,
    reservoir_step,
)
from .exceptions import AuditError, ContractViolation, ConvergenceError, DomainError, ReservoirNotReady
from .ftrl import (
    AuditRecord,
    FtrlState,
    ball_argmin,
    be_the_leader_audit,
    conditioning_ratio,
    kkt_residual,
    simplex_argmin,
)
from .harness import ExperimentConfig, RegretCurve, best_fixed_loss, run_episode, run_experiment, scaling_fit
from .regularizers import (
    BallPoint,
    HybridParams,
    LpParams,
    SimplexPoint,
    dual_local_norm_sq,
    hybrid_eval,
    lp_dual_norm_bound,
    lp_eval,
    lp_grad_inverse,
)
from .strategies import (
    LpBallBandit,
    SparseMAB,
    UniformExploreCommit,
    VariationMAB,
    default_lp_params,
    sparse_mab_params,
    variation_params,
)

__version__ = "0.1.0"
