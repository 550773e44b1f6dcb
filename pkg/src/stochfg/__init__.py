"""Adversarial online learning with stochastic feedback graphs.

Library layout:

- graphs: deterministic graphs, observability, independence/domination numbers
- stochastic: probability matrices, thresholding, optimal thresholds
- environment: adversaries, realization sampling, hard instances
- exp_weights: exponential weights and the two graph policies
- edge_catcher: explore-then-commit pipeline for local feedback
- otcg: optimistic-then-commit learner for full-graph feedback
- harness: experiment configs, seed sweeps, slope fits
- cli: `stochfg simulate|params|hard-instance`
"""

from .errors import (
    ArgumentError,
    CapabilityError,
    ConfigurationError,
    DomainError,
    ProtocolError,
    StateError,
    StochfgError,
)
from .graphs import (
    DirectedGraph,
    GraphClass,
    ObservabilityClass,
    VertexWeights,
    classify,
    derive_weights,
    independence_number,
    neighborhoods,
    weak_domination,
    weighted_independence_number,
    weighted_weak_domination,
)
from .stochastic import (
    GraphEstimate,
    NOT_ACHIEVABLE,
    StochasticFeedbackGraph,
    candidate_thresholds,
    is_eps_good_approx,
    optimal_threshold_delta_sigma,
    optimal_threshold_strong,
    optimal_threshold_weak,
    support,
    threshold,
)
from .environment import (
    Environment,
    FeedbackEvent,
    HardInstanceSpec,
    gen_hard_strong_c1,
    gen_hard_strong_c2,
    gen_hard_weak_c3,
    gen_hard_weak_c4,
    make_feedback,
    sample_realization,
    split_streams,
)
from .exp_weights import EwState, Exp3GPolicy, ew_bound_residual, ew_distribution, exp3g_step
from .edge_catcher import (
    EdgeCatcherOptions,
    RoundRobinOutput,
    UNOBSERVED,
    block_estimator,
    block_reduction,
    edge_catcher,
    phi,
    phi_components,
    round_robin,
)
from .otcg import (
    OtcgOptions,
    OtcgRunner,
    UcbEstimate,
    commit_dominating_set,
    iw_loss,
    kappa_violations,
    lambda_bound,
    psi_upper,
    run_otcg,
    select_eps_theta,
    theta,
    ucb_update,
)
from .traces import RegretTrace
from .harness import ExperimentConfig, SlopeFit, run, run_one, slope

__version__ = "0.1.0"
