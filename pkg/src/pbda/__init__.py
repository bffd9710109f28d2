"""Poisson blending data augmentation.

Curate an image dataset by embedding-space deduplication, pair lesions with
similar healthy images, place them by border color match, blend by solving
the guided Poisson equation, and emit balanced training manifests.
"""

__version__ = "0.1.0"

from .balance import (
    AugmentationPlan,
    ClassPlan,
    SamplingStrategy,
    class_weights,
    plan_augmentation,
    resample,
)
from .core import (
    BBox,
    EmbeddingTable,
    ImageBuffer,
    Manifest,
    Sample,
    image_io,
    load_embeddings,
    load_manifest,
    read_image,
    save_embeddings,
    save_manifest,
    write_image,
)
from .curation import DedupConfig, PairAssignment, deduplicate, distance, select_pairs
from .errors import (
    ConvergenceError,
    EmbeddingFormatError,
    ImageFormatError,
    InsufficientInventoryError,
    ManifestError,
    PBDAError,
    ValidationError,
)
from .kernels import BACKEND
from .pipeline import PipelineConfig, run_pipeline, stats
from .poisson import (
    PoissonSystem,
    assemble_system,
    seamless_clone,
    seamless_clone_via_correction,
    solve_system,
)
from .roi import RoiResult, RoiSearchConfig, border_pixels, roi_score, select_roi
