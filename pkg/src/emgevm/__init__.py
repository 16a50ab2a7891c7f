"""EMG finger-gesture classification: Burg reflection-coefficient features
fed to an Extreme Value Machine, with a KNN baseline and evaluation kit."""

from .arburg import (
    ArModel,
    ReflectionModel,
    ar_psd,
    autocorrelation,
    burg,
    extract_features,
    lattice_filter,
    reflection_to_ar,
    yule_walker,
)
from .baselines import KnnModel, knn_fit, knn_predict
from .dataio import (
    Frame,
    GESTURE_LABELS,
    LabeledDataset,
    RawRecording,
    gen_ar_process,
    gen_gaussian_blobs,
    load_dataset,
    split_by_trial,
    window_signal,
)
from .errors import ConfigError, DataError, EmgEvmError, NumericError
from .evalkit import ConfusionMatrix, EvalReport, confuse, metrics, render_report
from .evm import (
    EvmModel,
    ExtremeVector,
    WeibullParams,
    distance,
    evm_fit,
    evm_predict,
    evm_reduce,
    load_model,
    psi,
    save_model,
    weibull_fit,
)
from .preprocess import (
    FilterSpec,
    ScalerParams,
    apply_filter,
    apply_scaler,
    fit_scaler,
)

__version__ = "0.1.0"
