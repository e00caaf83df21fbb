"""Multi-label prediction through a latent space shared by several data modalities."""

__version__ = "0.1.0"

from .data_model import (  # noqa: E402
    LabelMatrix,
    ModalityKind,
    ModalityMatrix,
    ModelState,
    MultiModalView,
    load_model,
    save_model,
    validate,
)
from .estimators import BinaryRelevanceRidge, LatentSubspaceClassifier, MultiViewBuilder  # noqa: E402
from .solver import FitTrace, SolverConfig, fit, predict, predict_transductive  # noqa: E402
from .views import KernelSpec, ScalingKind, assemble_view  # noqa: E402

__all__ = [
    "LabelMatrix",
    "ModalityKind",
    "ModalityMatrix",
    "ModelState",
    "MultiModalView",
    "load_model",
    "save_model",
    "validate",
    "BinaryRelevanceRidge",
    "LatentSubspaceClassifier",
    "MultiViewBuilder",
    "FitTrace",
    "SolverConfig",
    "fit",
    "predict",
    "predict_transductive",
    "KernelSpec",
    "ScalingKind",
    "assemble_view",
]
