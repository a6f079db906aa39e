"""Semantic-type prediction and type-based candidate filtering for biomedical entity linking."""

from .annotations import GoldAnnotation, read_documents, read_gold
from .corpus_builder import distant_supervise, map_links, quality_report
from .filter import LinkedMention, filter_candidates, link_corpus, oracle_allowed
from .lexicon import Concept, Lexicon, load_lexicon, lookup, normalize
from .matcher import (
    Candidate,
    CandidateSet,
    Document,
    Mention,
    detect_and_generate,
    import_external_candidates,
)
from .metrics import (
    candidate_size_stats,
    error_breakdown,
    exact_f1,
    paired_bootstrap,
    partial_f1,
    per_group_f1,
)
from .type_system import NONE_GROUP, TypeMap, default_type_map, group_of, groups_of, load_type_map
from .typer import (
    Thresholds,
    TrainConfig,
    TrainingExample,
    TyperModel,
    featurize,
    import_scores,
    pr_auc,
    predict_groups,
    predict_scores,
    train,
    tune_thresholds,
)

__version__ = "0.1.0"
