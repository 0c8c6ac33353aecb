"""Channel-adaptive classification of multichannel time series.

Per-channel encoders feed a learnable holographic fusion that maps any number
of channels to one fixed-size vector per window; a causal temporal network
classifies short stacks of those vectors.
"""

__version__ = "0.1.0"

from .errors import ChanfuseError
from .model import CAModel, ModelConfig

__all__ = ["CAModel", "ChanfuseError", "ModelConfig", "__version__"]
