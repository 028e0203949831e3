"""Group fairness metrics for ranked retrieval and recommendation outputs."""

from .core import (
    AlignmentMatrix,
    AllDegenerate,
    ConfigError,
    Degenerate,
    DegenerateDenominator,
    DegenerateUtility,
    Direction,
    EmptyGroup,
    FairRankError,
    GroupSpace,
    NoPairs,
    ParseError,
    Ranking,
    RankingSequence,
    RelevanceTable,
    TargetDistribution,
    UndefinedNormalizer,
    UnknownRequest,
    apply_unknown_policy,
    binarize,
    protected_mask,
    restrict_to_labeled,
)
from .distance import delta, delta_kl, delta_nd, delta_rd
from .exposure import (
    WeightModel,
    group_exposure,
    position_weights,
    request_exposure,
    system_exposure,
    target_exposure,
)
from .metrics_multi import demographic_parity, eed
from .metrics_single import SingleListResult, awrf, fair_score, pref_fairness, pref_normalizer
from .opportunity import (
    ExpectedExposureResult,
    GroupUtility,
    discounted_group_utility,
    ee_decompose,
    eur,
    expected_exposure,
    group_utility,
    iaa,
    rur,
)
from .pairwise import PairSample, ScoredPair, accuracy_table, intra_inter, pairwise_accuracy, sample_pairs
from .report import (
    CorrelationMatrix,
    MetricResult,
    aggregate,
    correlation_matrix,
    emit_tables,
    kendall_tau_c,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMatrix",
    "AllDegenerate",
    "ConfigError",
    "CorrelationMatrix",
    "Degenerate",
    "DegenerateDenominator",
    "DegenerateUtility",
    "Direction",
    "EmptyGroup",
    "ExpectedExposureResult",
    "FairRankError",
    "GroupSpace",
    "GroupUtility",
    "MetricResult",
    "NoPairs",
    "PairSample",
    "ParseError",
    "Ranking",
    "RankingSequence",
    "RelevanceTable",
    "ScoredPair",
    "SingleListResult",
    "TargetDistribution",
    "UndefinedNormalizer",
    "UnknownRequest",
    "WeightModel",
    "accuracy_table",
    "aggregate",
    "apply_unknown_policy",
    "awrf",
    "binarize",
    "correlation_matrix",
    "delta",
    "delta_kl",
    "delta_nd",
    "delta_rd",
    "demographic_parity",
    "discounted_group_utility",
    "ee_decompose",
    "eed",
    "emit_tables",
    "eur",
    "expected_exposure",
    "fair_score",
    "group_exposure",
    "group_utility",
    "iaa",
    "intra_inter",
    "kendall_tau_c",
    "pairwise_accuracy",
    "position_weights",
    "pref_fairness",
    "pref_normalizer",
    "protected_mask",
    "request_exposure",
    "restrict_to_labeled",
    "rur",
    "sample_pairs",
    "system_exposure",
    "target_exposure",
]
