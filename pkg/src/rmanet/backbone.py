"""Small trainable convolutional encoder producing the whole-image feature map.

Three blocks of (3x3 conv, relu, 2x2 max-pool) downsample the input by 8 and
widen it to the configured channel count.  Weights start from Xavier-uniform
draws; biases start at zero.
"""

import numpy as np

from .errors import ConfigError
from .tensor import Tensor, bias_add, conv2d, maxpool2d, relu

DEFAULT_CHANNELS = (16, 32, 32)


def xavier_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True, dtype=dtype)


class BackboneWeights:
    """Per-layer conv kernels and biases plus the architecture descriptor."""

    def __init__(self, kernels, biases, channels, in_channels=3, kernel_size=3):
        if len(kernels) != len(channels) or len(biases) != len(channels):
            raise ConfigError("backbone layer lists do not match the channel descriptor")
        prev = in_channels
        for k, b, c in zip(kernels, biases, channels):
            if k.shape != (c, prev, kernel_size, kernel_size) or b.shape != (c,):
                raise ConfigError(
                    f"backbone layer shapes {k.shape}/{b.shape} inconsistent with descriptor "
                    f"(in={prev}, out={c}, kernel={kernel_size})"
                )
            prev = c
        self.kernels = list(kernels)
        self.biases = list(biases)
        self.channels = tuple(channels)
        self.in_channels = in_channels
        self.kernel_size = kernel_size

    @classmethod
    def init(cls, rng, channels=DEFAULT_CHANNELS, in_channels=3, kernel_size=3):
        kernels, biases = [], []
        prev = in_channels
        for c in channels:
            fan_in = prev * kernel_size * kernel_size
            fan_out = c * kernel_size * kernel_size
            kernels.append(xavier_uniform(rng, (c, prev, kernel_size, kernel_size), fan_in, fan_out))
            biases.append(Tensor(np.zeros(c), requires_grad=True, dtype=np.float32))
            prev = c
        return cls(kernels, biases, channels, in_channels, kernel_size)

    @property
    def downsampling(self):
        return 2 ** len(self.channels)

    @property
    def out_channels(self):
        return self.channels[-1]

    def named(self):
        out = []
        for i, (k, b) in enumerate(zip(self.kernels, self.biases)):
            out.append((f"backbone/conv{i}/kernel", k))
            out.append((f"backbone/conv{i}/bias", b))
        return out


def encode(image, weights: BackboneWeights):
    """Run the conv blocks over a (3, H, W) image tensor."""
    c, h, w = image.shape
    if c != weights.in_channels:
        raise ConfigError(f"encode expects {weights.in_channels}-channel input, got shape {image.shape}")
    factor = weights.downsampling
    if h < 16 or w < 16 or h % factor or w % factor:
        raise ConfigError(
            f"encode: input {h}x{w} unsupported; valid sizes are multiples of {factor} "
            f"with both sides >= 16"
        )
    pad = weights.kernel_size // 2
    x = image
    for k, b in zip(weights.kernels, weights.biases):
        x = maxpool2d(relu(bias_add(conv2d(x, k, stride=1, padding=pad), b)), 2)
    return x
