"""Online multiple hypothesis testing with simultaneous FDR control across
group layers: streaming decision procedures, synthetic scenario generators,
error metrics, and a seeded experiment harness."""

from .core import (
    DecisionRecord,
    HypothesisEvent,
    LayerConfig,
    LayerOutcome,
    LayerState,
    StreamHalted,
    TruthState,
    group_selection_sets,
    truth_state_from_events,
    update_group_truth,
)
from .harness import (
    DEFAULT_BETA_GRID,
    LAYER_NAMES,
    ReplicateRun,
    SweepSpec,
    emit_results,
    replicate_seed,
    run_replicate,
    run_sweep,
    standard_scenarios,
)
from .metrics import (
    AggregateResult,
    LayerTally,
    TallyTracker,
    aggregate,
    layer_tally,
    tally_from_sets,
)
from .procedures import (
    METHODS,
    AlphaInvesting,
    BetaSequence,
    Lond,
    Lord,
    OnlineProcedure,
    PolicyReport,
    SpendingPolicy,
    beta_eval,
    constant_policy,
    make_procedure,
    make_single_layer,
    replay,
    simple_choice,
    validate_policy,
)
from .simgen import (
    ScenarioSpec,
    StreamData,
    gen_pvalues,
    gen_structure,
    gen_truth,
    make_stream,
    signal_means,
    two_sided_p,
    two_sided_p_array,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "AlphaInvesting",
    "BetaSequence",
    "DEFAULT_BETA_GRID",
    "DecisionRecord",
    "HypothesisEvent",
    "LAYER_NAMES",
    "LayerConfig",
    "LayerOutcome",
    "LayerState",
    "LayerTally",
    "Lond",
    "Lord",
    "METHODS",
    "OnlineProcedure",
    "PolicyReport",
    "ReplicateRun",
    "ScenarioSpec",
    "SpendingPolicy",
    "StreamData",
    "StreamHalted",
    "SweepSpec",
    "TallyTracker",
    "TruthState",
    "aggregate",
    "beta_eval",
    "constant_policy",
    "emit_results",
    "gen_pvalues",
    "gen_structure",
    "gen_truth",
    "group_selection_sets",
    "layer_tally",
    "make_procedure",
    "make_single_layer",
    "make_stream",
    "replay",
    "replicate_seed",
    "run_replicate",
    "run_sweep",
    "signal_means",
    "simple_choice",
    "standard_scenarios",
    "tally_from_sets",
    "truth_state_from_events",
    "two_sided_p",
    "two_sided_p_array",
    "update_group_truth",
    "validate_policy",
]
