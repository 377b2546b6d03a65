"""Model-facing companion package for ovcd.

Everything here exists to produce or consume the primary package's file
formats: support-set generation, bi-temporal feature/mask export, and a
weakly supervised change localizer whose outputs feed ovcd's fusion stage.
"""

from .errors import AdapterError, RetriableAdapterError, TrainingError
from .extract import export_pair_manifest, extract_pair
from .interfaces import (
    FeatureExtractor,
    FolderImageSource,
    ImageSynthesizer,
    LuminanceMaskGenerator,
    MaskGenerator,
    ProceduralSynthesizer,
    RandomProjectionExtractor,
)
from .s2c import (
    S2CModel,
    S2CTrainConfig,
    TrainPair,
    TrainResult,
    export_predictions,
    train_s2c,
)
from .support import BACKGROUND_CLASS, PromptTemplate, generate_support_set

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "RetriableAdapterError",
    "TrainingError",
    "FeatureExtractor",
    "MaskGenerator",
    "ImageSynthesizer",
    "RandomProjectionExtractor",
    "LuminanceMaskGenerator",
    "ProceduralSynthesizer",
    "FolderImageSource",
    "PromptTemplate",
    "generate_support_set",
    "BACKGROUND_CLASS",
    "extract_pair",
    "export_pair_manifest",
    "S2CModel",
    "S2CTrainConfig",
    "TrainPair",
    "TrainResult",
    "train_s2c",
    "export_predictions",
]
