"""Speech-based relapse detection with one-shot similarity learning.

The package covers the full path from raw recordings to a decision:
manifest loading and preprocessing, MFCC / learned-embedding / text
features, balanced pair generation, Siamese training on a small
autodiff engine, and similarity scoring against reference recordings.

Most workflows go through :func:`run_pipeline` or the ``vocalsim``
command line; the names re-exported here are the pieces those are
built from.
"""

from .config import ExperimentConfig, load_config
from .errors import DataError, NumericError
from .manifest import SubjectRecord, load_manifest, read_wav, write_wav
from .metrics import EvalReport, evaluate, render_confusion
from .mfcc import extract_mfcc
from .models import (
    FeatureSet,
    ModelSpec,
    RelapseDecision,
    SiameseModel,
    build_model,
    detect_relapse,
    load_checkpoint,
    save_checkpoint,
)
from .pairs import PairRecord, PairSet, SampleRef, make_pairs
from .pipeline import PipelineResult, run_pipeline
from .preprocess import augment_corpus, segment, strip_unvoiced
from .textfeat import extract_text, load_lexicon
from .training import TrainConfig, TrainResult, train
from .vggish import extract_vggish, load_embedding_file

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "EvalReport",
    "ExperimentConfig",
    "FeatureSet",
    "ModelSpec",
    "NumericError",
    "PairRecord",
    "PairSet",
    "PipelineResult",
    "RelapseDecision",
    "SampleRef",
    "SiameseModel",
    "SubjectRecord",
    "TrainConfig",
    "TrainResult",
    "augment_corpus",
    "build_model",
    "detect_relapse",
    "evaluate",
    "extract_mfcc",
    "extract_text",
    "extract_vggish",
    "load_checkpoint",
    "load_config",
    "load_embedding_file",
    "load_lexicon",
    "load_manifest",
    "make_pairs",
    "read_wav",
    "render_confusion",
    "run_pipeline",
    "save_checkpoint",
    "segment",
    "strip_unvoiced",
    "train",
    "write_wav",
    "__version__",
]
