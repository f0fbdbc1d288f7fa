"""Surrogate-assisted simulated annealing for fairness-aware head pruning."""

__version__ = "0.1.0"

from .annealing import (
    AnnealConfig,
    AnnealRun,
    ObjectiveCost,
    SurrogatePairCost,
    accept,
    anneal,
    cost,
    estimate_t0,
    run,
    temperature,
)
from .baselines import FaspConfig, HeadEffectTable, fasp_select, random_select, score_ranked_select
from .masks import (
    HeadMask,
    WeightBounds,
    generate_neighbor,
    hamming_distance,
    hamming_weight,
    random_state,
)
from .metrics import (
    BiasReport,
    PromptToxicityTable,
    SequenceLossTable,
    compute_bias,
    compute_perplexity,
    stratified_subsample,
)
from .oracle import SyntheticObjective, evaluate, exhaustive_search, generate_corpus
from .records import SampleRecord, load_corpus, save_corpus
from .surrogate import (
    ScalingSpec,
    SurrogateRegressor,
    TrainingCorpus,
    finite_diff_check,
    load_regressor,
    predict,
    preprocess,
    save_regressor,
    train,
    train_pair,
)

__all__ = [
    "__version__",
    "AnnealConfig",
    "AnnealRun",
    "BiasReport",
    "FaspConfig",
    "HeadEffectTable",
    "HeadMask",
    "ObjectiveCost",
    "PromptToxicityTable",
    "SampleRecord",
    "ScalingSpec",
    "SequenceLossTable",
    "SurrogatePairCost",
    "SurrogateRegressor",
    "SyntheticObjective",
    "TrainingCorpus",
    "WeightBounds",
    "accept",
    "anneal",
    "compute_bias",
    "compute_perplexity",
    "cost",
    "estimate_t0",
    "evaluate",
    "exhaustive_search",
    "fasp_select",
    "finite_diff_check",
    "generate_corpus",
    "generate_neighbor",
    "hamming_distance",
    "hamming_weight",
    "load_corpus",
    "load_regressor",
    "predict",
    "preprocess",
    "random_select",
    "random_state",
    "run",
    "save_corpus",
    "save_regressor",
    "score_ranked_select",
    "stratified_subsample",
    "temperature",
    "train",
    "train_pair",
]
