"""regiolex: explainable text-region classification.

Train or wrap a classifier that assigns short texts to region classes,
extract the words that drove each correct prediction by leave-one-out
ablation, and aggregate them into ranked per-class lexicons with evaluation
reports.
"""

from .aggregate import ClassLexicon, LexiconEntry, aggregate, lexicon_report
from .classifier import (
    Hyperparams,
    Model,
    NativeScorer,
    Prediction,
    RandomBaselineScorer,
    Scorer,
    UniformScorer,
    load_model,
    predict,
    save_model,
    score_batch,
    train,
)
from .corpus import (
    Dataset,
    LabeledInstance,
    RawPost,
    RegionScheme,
    SchemeKind,
    SyntheticSpec,
    generate_synthetic,
    ingest,
    map_region,
    normalize_text,
    sample_splits,
    scheme_from_name,
)
from .errors import (
    ModelFormatError,
    ScorerProtocolError,
    ToolkitError,
    TrainingDivergedError,
    ValidationError,
)
from .evaluate import (
    Gazetteer,
    MatchPolicy,
    Metrics,
    PlaceNameReport,
    evaluate,
    load_gazetteer,
    place_name_share,
    random_baseline,
    run_report,
)
from .explain import (
    AblationRecord,
    InstanceExplanation,
    ablate_instance,
    explain_corpus,
    explain_instance,
)
from .features import Vocabulary, build_vocab, remove_word, tokenize, vectorize
from .wire import ExternalScorer, external_scorer_connect

__version__ = "0.1.0"

__all__ = [
    "AblationRecord",
    "ClassLexicon",
    "Dataset",
    "ExternalScorer",
    "Gazetteer",
    "Hyperparams",
    "InstanceExplanation",
    "LabeledInstance",
    "LexiconEntry",
    "MatchPolicy",
    "Metrics",
    "Model",
    "ModelFormatError",
    "NativeScorer",
    "PlaceNameReport",
    "Prediction",
    "RandomBaselineScorer",
    "RawPost",
    "RegionScheme",
    "SchemeKind",
    "Scorer",
    "ScorerProtocolError",
    "SyntheticSpec",
    "ToolkitError",
    "TrainingDivergedError",
    "UniformScorer",
    "ValidationError",
    "Vocabulary",
    "ablate_instance",
    "aggregate",
    "build_vocab",
    "evaluate",
    "explain_corpus",
    "explain_instance",
    "external_scorer_connect",
    "generate_synthetic",
    "ingest",
    "lexicon_report",
    "load_gazetteer",
    "load_model",
    "map_region",
    "normalize_text",
    "place_name_share",
    "predict",
    "random_baseline",
    "remove_word",
    "run_report",
    "sample_splits",
    "save_model",
    "scheme_from_name",
    "score_batch",
    "tokenize",
    "train",
    "vectorize",
    "__version__",
]
