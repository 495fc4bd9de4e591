"""Per-user lexical association testing in embedding spaces.

Users and lexical items share one embedding geometry; the package computes
standardized per-user effect sizes along curated attribute axes, attaches
Monte Carlo permutation p-values with false-discovery control, and ships
the evaluation, trajectory, and calibration machinery around them.
"""

__version__ = "0.1.0"

from .association import (
    PermutationConfig,
    ScoreResult,
    ScoreRow,
    bh_fdr,
    effect_size,
    exact_permutation_p,
    permutation_p,
    score_all,
)
from .errors import (
    DegenerateVectorError,
    EmptySideError,
    InputError,
    InternalError,
    LoadError,
    MissingUserTokenError,
    PolarError,
    StratificationError,
    TokenCollisionError,
    TooLargeError,
    UndefinedMetricError,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    ProtocolResult,
    aggregated_sentence_scores,
    auroc,
    bootstrap_ci,
    brier,
    ece,
    fit_logistic,
    paired_bootstrap_test,
    pca_2d,
    pr_auc,
    run_protocol,
    select_axes,
    stratified_folds,
)
from .ingestion import Corpus, load_corpus, optional_post_cap
from .lexicon import AttributePair, build_pair, embed_item, load_lexicon
from .store import (
    EmbeddingTable,
    UserRecord,
    load_table,
    resolve_user_tokens,
    save_table,
    user_token,
    user_vector,
)
from .synthetic import (
    CalibrationReport,
    SynthSpec,
    SynthWorld,
    calibration_report,
    generate_world,
    ks_uniform,
)
from .trajectory import (
    DrifterReport,
    PostSequence,
    TrajectoryPoint,
    cumulative_scores,
    flag_drifters,
    post_unit_vectors,
    proxy_user_vector,
)
from .wordpiece import TokenizerConfig, config_from_table, tokenize_phrase, tokenize_word

__all__ = [name for name in dir() if not name.startswith("_")]
