"""Dropout prediction from pre-enrollment motivation statements.

Student records (structured characteristics plus free-text motivation)
become feature matrices through TFIDF, collapsed-Gibbs topic modeling
and LIWC-style dictionary extraction; class-weighted linear SVMs are
then trained and compared under a six-model ablation protocol.
"""

from .corpus import (
    Dataset,
    FeatureBlock,
    FeatureMatrix,
    FeatureSchema,
    Label,
    StudentRecord,
    encode_structured,
    kfold,
    load_dataset,
    load_program_map,
    save_dataset,
    split,
)
from .errors import ConfigError, DataError, MotivmineError, NumericalError, SchemaError
from .lda import TopicModelState, TopicSummary, conditional_distribution, doc_topic_features, fold_in, top_terms
from .lexicon import Lexicon, LiwcFeatures, bundled_lexicon, extract, load_dic, parse_dic
from .model import (
    ConfusionMatrix,
    LinearModel,
    MetricsReport,
    class_weights,
    evaluate,
    predict,
    top_coefficients,
    train,
)
from .runner import (
    ExperimentConfig,
    ExperimentReport,
    assemble_features,
    compare_top_terms,
    run_all,
    run_experiment,
)
from .textprep import StopwordList, TokenizedDoc, bundled_stopwords, normalize, tokenize
from .tfidf import SparseVector, Vocabulary, build_vocabulary, transform

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConfusionMatrix", "Dataset", "DataError", "ExperimentConfig",
    "ExperimentReport", "FeatureBlock", "FeatureMatrix", "FeatureSchema", "Label",
    "Lexicon", "LinearModel", "LiwcFeatures", "MetricsReport", "MotivmineError",
    "NumericalError", "SchemaError", "SparseVector", "StopwordList", "StudentRecord",
    "TokenizedDoc", "TopicModelState", "TopicSummary", "Vocabulary",
    "assemble_features", "build_vocabulary", "bundled_lexicon", "bundled_stopwords",
    "class_weights", "compare_top_terms", "conditional_distribution",
    "doc_topic_features", "encode_structured", "evaluate", "extract", "fold_in",
    "kfold", "load_dataset", "load_dic", "load_program_map", "normalize",
    "parse_dic", "predict", "run_all", "run_experiment", "save_dataset", "split",
    "tokenize", "top_coefficients", "top_terms", "train", "transform",
]
