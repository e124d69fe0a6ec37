"""Online Gaussian Adaptation over pre-computed embeddings, with baselines and a multi-run harness."""
from .adapters import (
    AdaptedPrediction,
    OgaConfig,
    TipAdapterConfig,
    log_likelihood_quadratic,
    map_posterior,
    oga_predict,
    tip_adapter_logits,
)
from .cache import CacheConfig, EntropyCache, InsertOutcome, Outcome
from .embedding_io import (
    EmbeddingSet,
    TextClassifier,
    generate_synthetic,
    load_embedding_set,
    load_text_classifier,
    save_embedding_set,
    save_text_classifier,
)
from .errors import (
    ConfigError,
    DegenerateCovariance,
    FormatError,
    IoError,
    NumericsError,
    ValidationError,
)
from .gaussian import (
    Estimator,
    GaussianModel,
    bayes_ridge_precision,
    fit_centroids,
    fit_covariance,
    refit,
    select_precision,
)
from .metrics import MetricsReport, expected_tail_accuracy, summarize, win_rate
from .stream import OnlineAdapter, RunTrace, StreamConfig, make_stream, run_many, run_stream
from .zeroshot import ZeroShotOutput, compute_logits, shannon_entropy, softmax, zero_shot_predict

__version__ = "0.1.0"
