"""Open-vocabulary change-detection retrieval engine.

Prototype construction, class-agnostic change proposal, vision-space
category retrieval, weakly-supervised fusion, and evaluation over
precomputed feature tensors and instance masks.
"""

from .core import (
    CategoryVocabulary,
    DatasetManifest,
    FeatureMap,
    InstanceMask,
    MaskSet,
    PairEntry,
    SupportEntry,
    decode_runs,
    encode_runs,
    read_feature_map,
    read_label_raster,
    read_manifest,
    read_mask_set,
    upsample_bilinear,
    write_feature_map,
    write_label_raster,
    write_manifest,
    write_mask_set,
)
from .errors import (
    ConfigError,
    DataError,
    EmptyRegionError,
    FormatError,
    LabelError,
    MissingClassError,
    OvcdError,
    ShapeError,
)
from .evaluation import (
    ConfusionAccumulator,
    EvalReport,
    finalize,
    oracle_change_proposal,
    oracle_identification,
)
from .fusion import (
    CamMap,
    FusionConfig,
    binarize_cam,
    fuse_inference,
    overlap_ratio,
    refine_pseudo_label,
)
from .pipeline import PipelineConfig, build_bank_from_manifest, run_pipeline
from .prototypes import (
    PrototypeBuildConfig,
    PrototypeSet,
    SupportSample,
    build_prototypes,
    lloyd_kmeans,
    load_prototypes,
    masked_pool,
    save_prototypes,
)
from .proposals import (
    ChangeProposal,
    ProposalConfig,
    cosine,
    dedup_masks,
    mask_iou,
    propose_changes,
    score_change,
)
from .retrieval import (
    CategoryAssignment,
    RetrievalConfig,
    SemanticChangeMap,
    assign_categories,
    rasterize,
    retrieve,
)
from .synth import SynthConfig, synth_generate

__version__ = "0.1.0"
