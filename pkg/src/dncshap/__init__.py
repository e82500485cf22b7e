"""Divide-and-conquer Shapley attribution for image + speech classifiers.

Main entry points:

* :func:`dncshap.attribution.dnc_shap` - modality scores and per-pixel maps
* :class:`dncshap.fusion.FusionModel` - the miniature hybrid-fusion network
* :func:`dncshap.shapley.exact_shapley` - exponential reference oracle
"""

from .attribution import AttributionResult, dnc_shap, modality_scores
from .fusion import FusionConfig, FusionModel, load_model
from .kernels import backend as kernel_backend
from .shapley import CoalitionGame, exact_shapley, two_player_shapley

__version__ = "0.1.0"

__all__ = [
    "AttributionResult", "CoalitionGame", "FusionConfig", "FusionModel", "dnc_shap", "exact_shapley",
    "kernel_backend", "load_model", "modality_scores", "two_player_shapley",
]
