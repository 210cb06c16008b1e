"""Full model: conv encoder plus the recurrent attention module.

Also owns packing/unpacking the model (and optionally Adam state) into the
named-tensor checkpoint container; the architecture descriptor rides along as
``meta/*`` tensors so a checkpoint is self-describing.
"""

from dataclasses import dataclass

import numpy as np

from .attention import AttentionWeights, fuse_scores, run_episode
from .backbone import DEFAULT_CHANNELS, BackboneWeights, encode
from .checkpoint import load_tensors, save_tensors
from .errors import ConfigError, FormatError
from .optim import Adam
from .tensor import Tensor, softmax


@dataclass
class ModelConfig:
    n_classes: int
    channels: tuple = DEFAULT_CHANNELS
    n_hidden: int = 64
    region: tuple = (4, 4)
    k_regions: int = 5
    cell_tanh: bool = False
    in_channels: int = 3

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.region = tuple(int(r) for r in self.region)
        if self.n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.n_classes}")
        if self.k_regions < 1:
            raise ConfigError(f"need at least 1 region, got k={self.k_regions}")

    @property
    def feature_len(self):
        return self.channels[-1] * self.region[0] * self.region[1]


class Model:
    def __init__(self, config: ModelConfig, backbone: BackboneWeights, attn: AttentionWeights):
        if backbone.channels != config.channels:
            raise ConfigError("backbone weights do not match the config descriptor")
        if attn.feature_len != config.feature_len or attn.n_classes != config.n_classes:
            raise ConfigError("attention weights do not match the config descriptor")
        self.config = config
        self.backbone = backbone
        self.attn = attn

    @classmethod
    def init(cls, config: ModelConfig, seed=0):
        rng = np.random.default_rng([seed, 0])
        backbone = BackboneWeights.init(rng, channels=config.channels, in_channels=config.in_channels)
        attn = AttentionWeights.init(rng, config.feature_len, config.n_hidden, config.n_classes)
        return cls(config, backbone, attn)

    def parameters(self):
        return self.backbone.named() + self.attn.named()

    def feature_map(self, image):
        t = image if isinstance(image, Tensor) else Tensor(image)
        return encode(t, self.backbone)

    def episode(self, image, k_regions=None):
        k = self.config.k_regions if k_regions is None else k_regions
        return run_episode(self.feature_map(image), self.attn, k,
                           out_size=self.config.region, cell_tanh=self.config.cell_tanh)

    def classify(self, image):
        trace = self.episode(image)
        return trace, fuse_scores(trace.score_tensors)

    def predict(self, image):
        """Fused per-class scores and softmax probabilities as plain arrays."""
        _, fused = self.classify(image)
        return fused.data.copy(), softmax(fused).data.copy()


def _meta_arrays(config: ModelConfig):
    return [
        ("meta/channels", np.array(config.channels, dtype=np.float32)),
        ("meta/hidden", np.array([config.n_hidden], dtype=np.float32)),
        ("meta/classes", np.array([config.n_classes], dtype=np.float32)),
        ("meta/region", np.array(config.region, dtype=np.float32)),
        ("meta/k", np.array([config.k_regions], dtype=np.float32)),
        ("meta/cell_tanh", np.array([1.0 if config.cell_tanh else 0.0], dtype=np.float32)),
    ]


def save_model(path, model: Model, adam: Adam = None):
    named = _meta_arrays(model.config)
    named += [(name, t.data) for name, t in model.parameters()]
    if adam is not None:
        named += adam.state_arrays()
    save_tensors(named, path)


def load_model(path):
    """Rebuild (model, optimizer-state arrays or None) from a checkpoint."""
    arrays = load_tensors(path)
    for key in ("meta/channels", "meta/hidden", "meta/classes", "meta/region", "meta/k", "meta/cell_tanh"):
        if key not in arrays:
            raise FormatError(f"checkpoint missing {key}")

    def ints(key):
        return tuple(int(round(float(v))) for v in arrays[key])

    config = ModelConfig(
        n_classes=ints("meta/classes")[0],
        channels=ints("meta/channels"),
        n_hidden=ints("meta/hidden")[0],
        region=ints("meta/region"),
        k_regions=ints("meta/k")[0],
        cell_tanh=bool(ints("meta/cell_tanh")[0]),
    )
    model = Model.init(config, seed=0)
    for name, t in model.parameters():
        if name not in arrays:
            raise FormatError(f"checkpoint missing tensor {name!r}")
        arr = arrays[name]
        if arr.shape != t.data.shape:
            raise FormatError(f"checkpoint tensor {name!r} has shape {arr.shape}, expected {t.data.shape}")
        t.data = arr.astype(np.float32)
    adam_state = {k: v for k, v in arrays.items() if k.startswith("adam/")} or None
    return model, adam_state
