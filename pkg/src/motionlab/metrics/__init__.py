from .classifier import (
    ClassifierConfig,
    MotionClassifier,
    extract_features,
    extract_features_batch,
    recognition_accuracy,
    train_classifier,
)
from .evaluate import (
    METRIC_NAMES,
    MetricsReport,
    evaluate,
    evaluate_real_baseline,
)
from .scores import (
    SingularCovariance,
    diversity,
    fid,
    fid_with_info,
    frechet_from_stats,
    multimodality,
    sqrt_psd,
)
