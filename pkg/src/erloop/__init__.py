"""Budgeted uncertainty reduction for entity-resolution results.

The library keeps a probability distribution over candidate partitions of a
record set, picks the matching questions that shrink that uncertainty the
most per token, asks an oracle (a chat-completions endpoint or a simulated
stand-in), and folds the answers back in with error-tolerant Bayesian
updates and partition repair, until the budget runs out or the uncertainty
collapses.
"""

from .core import (
    Dataset,
    MatchPair,
    MatchingSet,
    Partition,
    Record,
    ResultSet,
    normalize_and_dedup,
    partition_pairs,
)
from .entropy import (
    AnswerDistribution,
    AnswerVector,
    QuestionSet,
    answer_distribution,
    answer_signature,
    expected_reduction,
    marginal_gain,
    pair_prob,
    result_entropy,
    set_prob,
)
from .errors import (
    AuthError,
    ConfigError,
    DanglingId,
    EmptyAttributeSchema,
    EmptyTruth,
    ErloopError,
    ParseError,
    PoolTooLarge,
    TotalMassVanished,
    TransportError,
    UnknownRecord,
    UnparseableAnswer,
)
from .oracle import (
    AnswerSource,
    LlmEndpointSpec,
    OracleAnswer,
    SimulatedOracleSpec,
    ask_llm,
    ask_simulated,
    clamp_theta,
    estimate_capability,
    parse_verdict,
    render_prompt,
)
from .pipeline import (
    IterationLog,
    PerturbationSpec,
    RunConfig,
    RunResult,
    compute_metrics,
    emit_curve,
    load_dataset,
    run_loop,
    synth_generate,
)
from .select import (
    BudgetState,
    CostModel,
    SelectionConfig,
    Strategy,
    brute_force_select,
    candidate_pool,
    mq_cost,
    select_greedy_pe,
    select_random,
    select_single,
)
from .simgen import (
    InitMode,
    MissingPolicy,
    SimConfig,
    SimFunction,
    generate_partition,
    init_distribution,
    similarity,
    sweep_result_set,
)
from .update import Evidence, posterior_batch, posterior_single, repair

__version__ = "0.1.0"
