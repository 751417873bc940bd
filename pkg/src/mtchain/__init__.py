"""Chained machine-translation experiments: run texts through sequences of
translation hops, measure accuracy decay with GLEU, and fit the decay curve."""

from .analysis import (
    AccuracyCurve,
    PairMatrix,
    PowerLawFit,
    accumulated_gleu,
    aggregate_curves,
    curve_rmse,
    fit_power_law,
    pair_matrix,
    power_decay,
    size_trajectory,
    stepwise_gleu,
)
from .backends import (
    SimulatorBackend,
    SimulatorParams,
    TranslationCache,
    TranslationRequest,
    translate,
)
from .catalog import (
    Catalog,
    ChainSpec,
    build_common_chain,
    build_mixed_chain,
    build_random_chain,
    bundled_catalog,
    load_catalog,
    tree_distance,
)
from .gleu import GleuScore, extract_ngrams, gleu, score_texts, tokenize
from .runner import (
    ChainRun,
    SourceText,
    bundled_text,
    load_run,
    resume_chain,
    run_chain,
    word_count,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyCurve",
    "Catalog",
    "ChainRun",
    "ChainSpec",
    "GleuScore",
    "PairMatrix",
    "PowerLawFit",
    "SimulatorBackend",
    "SimulatorParams",
    "SourceText",
    "TranslationCache",
    "TranslationRequest",
    "accumulated_gleu",
    "aggregate_curves",
    "build_common_chain",
    "build_mixed_chain",
    "build_random_chain",
    "bundled_catalog",
    "bundled_text",
    "curve_rmse",
    "extract_ngrams",
    "fit_power_law",
    "gleu",
    "load_catalog",
    "load_run",
    "pair_matrix",
    "power_decay",
    "resume_chain",
    "run_chain",
    "score_texts",
    "size_trajectory",
    "stepwise_gleu",
    "tokenize",
    "translate",
    "tree_distance",
    "word_count",
]
