"""Reference operator servers for the occam wire protocol.

Five deterministic CPU models — a region proposer, a color grounder, a
border-fill editor, a histogram softmax classifier, and a hashed token
embedder — served behind the standard five HTTP endpoints, with optional
fixture recording that the primary engine replays bit-exactly.
"""

from .config import DEFAULT_MODELS, DEFAULT_PROMPT_TEMPLATE, BridgeConfig
from .errors import BridgeError, RequestError, StartupError
from .models import (
    REGISTRY,
    BorderFillEditor,
    ColorRegionGrounder,
    HistogramSoftmaxClassifier,
    ModelSuite,
    RegionProposer,
    TokenHashEmbedder,
    load_models,
)
from .recording import FixtureRecorder
from .server import BridgeServer, serve

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "BridgeServer",
    "BorderFillEditor",
    "ColorRegionGrounder",
    "DEFAULT_MODELS",
    "DEFAULT_PROMPT_TEMPLATE",
    "FixtureRecorder",
    "HistogramSoftmaxClassifier",
    "ModelSuite",
    "REGISTRY",
    "RegionProposer",
    "RequestError",
    "StartupError",
    "TokenHashEmbedder",
    "load_models",
    "serve",
]
