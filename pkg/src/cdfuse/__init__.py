"""cdfuse: contrastive-decoding calibration over replayable logit records.

The engine is model-agnostic: first-token logits for an original input and
its visually changed variants (noised, downsampled, absent, edited) enter
through record files or synthetic providers, get calibrated by single-sample
contrast or multi-sample fusion under a plausibility constraint, and are
analyzed at the probability level (entropy, confidence, Hellinger distance,
revision behavior, answer tendency, pairwise rectification overlap).
"""

__version__ = "0.1.0"

from .core import (
    CalibrationConfig,
    DiffusionNoise,
    Distribution,
    Downsample,
    Edited,
    LogitVector,
    Naive,
    NoImage,
    Original,
    Single,
    VariantRecord,
    Weighted,
    WeightMetric,
    densify,
    softmax,
)
from .calibrate import (
    CalibrationInput,
    CalibrationOutput,
    apply_plausibility,
    calibrate,
    cd_single,
    fuse_naive,
    fuse_weighted,
)
from .metrics import (
    AnswerClass,
    RevisionClass,
    classify_answer,
    classify_revision,
    entropy,
    hellinger,
    jaccard,
)
from .perturb import ImageTensor, NoiseSchedule, blank, diffuse, downsample
from .records import RecordFileHeader, inspect_records, read_records, write_records
from .harness import (
    EvalReport,
    Method,
    MockKnobs,
    MockProvider,
    QAItem,
    ReplayProvider,
    derive_edit_instruction,
    load_dataset,
    overlap_matrix,
    preset_methods,
    run_eval,
)

__all__ = [
    "CalibrationConfig",
    "CalibrationInput",
    "CalibrationOutput",
    "DiffusionNoise",
    "Distribution",
    "Downsample",
    "Edited",
    "EvalReport",
    "ImageTensor",
    "LogitVector",
    "Method",
    "MockKnobs",
    "MockProvider",
    "Naive",
    "NoImage",
    "NoiseSchedule",
    "Original",
    "QAItem",
    "RecordFileHeader",
    "ReplayProvider",
    "RevisionClass",
    "AnswerClass",
    "Single",
    "VariantRecord",
    "Weighted",
    "WeightMetric",
    "apply_plausibility",
    "blank",
    "calibrate",
    "cd_single",
    "classify_answer",
    "classify_revision",
    "densify",
    "derive_edit_instruction",
    "diffuse",
    "downsample",
    "entropy",
    "fuse_naive",
    "fuse_weighted",
    "hellinger",
    "inspect_records",
    "jaccard",
    "load_dataset",
    "overlap_matrix",
    "preset_methods",
    "read_records",
    "run_eval",
    "softmax",
    "write_records",
]
