"""Query-aware video token pruning toolkit.

Scores every visual token by crossmodal relevance minus temporal-echo
redundancy and keeps a budgeted subset via global Top-K with a quota for
frames lacking reconstruction history.
"""

from .baselines import SplitMix64, select_random, select_relevance_only
from .bench import (
    RetentionProfile,
    ScalingVerdict,
    TimingReport,
    retention_profile,
    scaling_check,
    time_compression,
)
from .oracle import oracle_score, oracle_select
from .scoring import (
    PruneConfig,
    ScoreTable,
    Variant,
    combine_scores,
    corr_error,
    echo_error,
    echo_weights,
    normalize,
    relevance,
    score_all,
)
from .selection import (
    BudgetError,
    BudgetPlan,
    Selection,
    resolve_budget,
    select_topk,
    select_uniform,
)
from .synthgen import (
    NoveltySpec,
    ObjectSpec,
    SceneSpec,
    TokenLabels,
    generate,
    subsample_frames,
)
from .tensor_io import (
    KeptToken,
    SelectionReport,
    TensorFormatError,
    TextTokenSet,
    VisualTokenGrid,
    read_report,
    read_tensor,
    write_report,
    write_tensor,
)

__version__ = "0.1.0"
