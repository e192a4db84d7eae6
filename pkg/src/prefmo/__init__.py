"""Finite discounted MDPs with scalar, vector or order-only rewards.

The subpackages cover policy evaluation and history machinery (``mdp``),
multiobjective dominance, frontiers and covers (``momdp``), preference
duels and tournaments (``pbmdp``), order-to-vector reward transforms
(``transforms``), Chebyshev and minimax-regret optimisation (``regret``),
simulated elicitation (``elicitation``) and the JSON/CLI layer (``io``,
``cli``).
"""

from prefmo.elicitation import SimulatedOracle, WeightPolytope, elicit_loop
from prefmo.errors import (
    CapExceededError,
    DomainError,
    InconsistentOracleError,
    NumericalError,
    PrefmoError,
    SingularBasisError,
    ValidationError,
)
from prefmo.lp import LinearProgram, LpSolution, solve_lp
from prefmo.mdp import (
    DeterministicPolicy,
    History,
    MdpInstance,
    MixedPolicy,
    RandomizedPolicy,
    ScalarReward,
    SymbolicReward,
    VectorReward,
    enumerate_deterministic_policies,
    enumerate_histories,
    evaluate_policy,
    history_value,
    random_instance,
    sample_history,
    value_iteration,
)
from prefmo.momdp import (
    ChebyshevScalarizer,
    LinearScalarizer,
    MonotoneScalarizer,
    ParetoSet,
    epsilon_cover,
    lorenz_dominates,
    pareto_dominates,
    pareto_frontier,
    scalarize,
    vector_evaluate,
    verify_cover,
)
from prefmo.pbmdp import (
    DuelResult,
    Tournament,
    borda_winner,
    build_tournament,
    condorcet_winner,
    copeland_winner,
    detect_cycles,
    duel_exact,
    duel_monte_carlo,
    optimal_mixed_policy,
    pareto_preference,
    probabilistic_dominance,
    scalarized_preference,
    utility_preference,
)
from prefmo.regret import chebyshev_optimal, ideal_point, minimax_regret, verify_lemma3
from prefmo.transforms import (
    OrderedHistories,
    RewardOrder,
    counting_reward,
    decumulative,
    dominance_soundness_check,
    history_basis_matrix,
    ordered_history_transform,
    ordered_reward_transform,
    verify_lemma1,
    verify_lemma2,
)

__version__ = "0.1.0"

__all__ = [
    "CapExceededError",
    "ChebyshevScalarizer",
    "DeterministicPolicy",
    "DomainError",
    "DuelResult",
    "History",
    "InconsistentOracleError",
    "LinearProgram",
    "LinearScalarizer",
    "LpSolution",
    "MdpInstance",
    "MixedPolicy",
    "MonotoneScalarizer",
    "NumericalError",
    "OrderedHistories",
    "ParetoSet",
    "PrefmoError",
    "RandomizedPolicy",
    "RewardOrder",
    "ScalarReward",
    "SimulatedOracle",
    "SingularBasisError",
    "SymbolicReward",
    "Tournament",
    "ValidationError",
    "VectorReward",
    "WeightPolytope",
    "__version__",
    "borda_winner",
    "build_tournament",
    "chebyshev_optimal",
    "condorcet_winner",
    "copeland_winner",
    "counting_reward",
    "decumulative",
    "detect_cycles",
    "dominance_soundness_check",
    "duel_exact",
    "duel_monte_carlo",
    "elicit_loop",
    "enumerate_deterministic_policies",
    "enumerate_histories",
    "epsilon_cover",
    "evaluate_policy",
    "history_basis_matrix",
    "history_value",
    "ideal_point",
    "lorenz_dominates",
    "minimax_regret",
    "optimal_mixed_policy",
    "ordered_history_transform",
    "ordered_reward_transform",
    "pareto_dominates",
    "pareto_frontier",
    "pareto_preference",
    "probabilistic_dominance",
    "random_instance",
    "sample_history",
    "scalarize",
    "scalarized_preference",
    "solve_lp",
    "utility_preference",
    "value_iteration",
    "vector_evaluate",
    "verify_cover",
    "verify_lemma1",
    "verify_lemma2",
    "verify_lemma3",
]
