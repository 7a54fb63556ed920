"""splitwire-trainer: trains split classifiers under channel noise and
exports weight containers plus accuracy tables for the inference package."""

__version__ = "0.1.0"

from .config import TrainConfig
from .evaluate import eval_grid
from .export import export_weights
from .models import GaussianChannel, GraphModule, NormalizeScale, SplitClassifier, VanillaClassifier, build_model
from .train import TrainResult, evaluate_top1, train
