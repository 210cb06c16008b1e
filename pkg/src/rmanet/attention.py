"""Recurrent attention episode: LSTM scoring over transformer-sampled regions.

One episode runs K+1 iterations over a feature map.  Iteration 0 samples with
the identity transform and only proposes the next transform; iterations
1..K each sample with the previously proposed transform, emit a class-score
vector, and propose the next transform.  The transform proposed on the last
iteration is computed but never consumed.  Per-class scores are fused by a
maximum over the K regions.
"""

from dataclasses import dataclass

import numpy as np

from .backbone import xavier_uniform
from .errors import ConfigError
from .tensor import Tensor, fuse_max, matmul, relu, reshape, sigmoid, tanh
from .transformer import TransformParams, st

_TENSOR_FIELDS = (
    "w_fx", "b_x",
    "w_xi", "w_hi", "b_i",
    "w_xg", "w_hg", "b_g",
    "w_xo", "w_ho", "b_o",
    "w_xm", "w_hm", "b_m",
    "w_hz", "b_z",
    "w_zs", "b_s",
    "w_zm", "b_zm",
)


@dataclass
class LstmState:
    h: Tensor
    c: Tensor

    @classmethod
    def zeros(cls, n_hidden, dtype=np.float32):
        return cls(Tensor(np.zeros((n_hidden, 1)), dtype=dtype), Tensor(np.zeros((n_hidden, 1)), dtype=dtype))


class AttentionWeights:
    """All weight tensors of the recurrent module, as (n, 1)-column algebra.

    ``w_fx`` embeds the flattened region features; ``w_x*``/``w_h*``/``b_*``
    drive the input, forget-style, output, and input-modulation gates;
    ``w_hz``/``b_z`` form the shared head trunk; ``w_zs``/``b_s`` score the C
    classes and ``w_zm``/``b_zm`` propose the next 4 transform parameters in
    the order (sx, sy, tx, ty).
    """

    def __init__(self, **tensors):
        missing = [f for f in _TENSOR_FIELDS if f not in tensors]
        if missing:
            raise ConfigError(f"attention weights missing tensors: {missing}")
        for f in _TENSOR_FIELDS:
            setattr(self, f, tensors[f])
        n = self.w_hi.shape[0]
        feat = self.w_fx.shape[1]
        c = self.w_zs.shape[0]
        expected = {
            "w_fx": (n, feat), "b_x": (n, 1),
            "w_xi": (n, n), "w_hi": (n, n), "b_i": (n, 1),
            "w_xg": (n, n), "w_hg": (n, n), "b_g": (n, 1),
            "w_xo": (n, n), "w_ho": (n, n), "b_o": (n, 1),
            "w_xm": (n, n), "w_hm": (n, n), "b_m": (n, 1),
            "w_hz": (n, n), "b_z": (n, 1),
            "w_zs": (c, n), "b_s": (c, 1),
            "w_zm": (4, n), "b_zm": (4, 1),
        }
        for f, shape in expected.items():
            if getattr(self, f).shape != shape:
                raise ConfigError(f"attention weight {f} has shape {getattr(self, f).shape}, expected {shape}")
        self.n_hidden = n
        self.feature_len = feat
        self.n_classes = c

    @classmethod
    def init(cls, rng, feature_len, n_hidden, n_classes, dtype=np.float32):
        def mat(rows, cols):
            return xavier_uniform(rng, (rows, cols), cols, rows, dtype=dtype)

        def bias(rows, values=None):
            data = np.zeros((rows, 1)) if values is None else np.asarray(values, dtype=float).reshape(rows, 1)
            return Tensor(data, requires_grad=True, dtype=dtype)

        t = {"w_fx": mat(n_hidden, feature_len), "b_x": bias(n_hidden)}
        for gate in ("i", "g", "o", "m"):
            t[f"w_x{gate}"] = mat(n_hidden, n_hidden)
            t[f"w_h{gate}"] = mat(n_hidden, n_hidden)
            t[f"b_{gate}"] = bias(n_hidden)
        t["w_hz"] = mat(n_hidden, n_hidden)
        t["b_z"] = bias(n_hidden)
        t["w_zs"] = mat(n_classes, n_hidden)
        t["b_s"] = bias(n_classes)
        # transform head starts at zero weight + identity bias so the first
        # proposals cover the whole image instead of sampling noise
        t["w_zm"] = Tensor(np.zeros((4, n_hidden)), requires_grad=True, dtype=dtype)
        t["b_zm"] = bias(4, [1.0, 1.0, 0.0, 0.0])
        return cls(**t)

    def named(self):
        return [(f"attn/{f}", getattr(self, f)) for f in _TENSOR_FIELDS]


def lstm_step(f_k, prev: LstmState, w: AttentionWeights, cell_tanh=False):
    """One recurrence step on sampled region features.

    The region map is flattened row-major, embedded through relu, and run
    through the four sigmoid/tanh gates.  By default the new hidden state is
    ``o * c`` (no squashing of the cell); ``cell_tanh=True`` switches to the
    common ``o * tanh(c)`` variant.
    """
    if f_k.size != w.feature_len:
        raise ConfigError(f"region features have {f_k.size} values, weights expect {w.feature_len}")
    vec = reshape(f_k, (w.feature_len, 1))
    x = relu(matmul(w.w_fx, vec) + w.b_x)
    i = sigmoid(matmul(w.w_xi, x) + matmul(w.w_hi, prev.h) + w.b_i)
    g = sigmoid(matmul(w.w_xg, x) + matmul(w.w_hg, prev.h) + w.b_g)
    o = sigmoid(matmul(w.w_xo, x) + matmul(w.w_ho, prev.h) + w.b_o)
    m = tanh(matmul(w.w_xm, x) + matmul(w.w_hm, prev.h) + w.b_m)
    c = g * prev.c + i * m
    h = o * tanh(c) if cell_tanh else o * c
    return LstmState(h, c)


def heads(h, w: AttentionWeights, emit_score=True):
    """Score head and transform head on a hidden state.

    Returns ``(scores, next_params)`` where ``scores`` is None when
    ``emit_score`` is false (the very first iteration, which has seen no
    attended region yet).
    """
    z = relu(matmul(w.w_hz, h) + w.b_z)
    p = reshape(matmul(w.w_zm, z) + w.b_zm, (4,))
    if not emit_score:
        return None, p
    s = reshape(matmul(w.w_zs, z) + w.b_s, (w.n_classes,))
    return s, p


@dataclass
class EpisodeTrace:
    """Everything one episode produced, with live graph nodes for training."""

    transforms: list            # K+1 consumed TransformParams; index 0 is the identity
    final_transform: TransformParams  # proposed on the last iteration, never consumed
    score_tensors: list         # K tensors of shape (C,)
    param_tensors: list         # K tensors of shape (4,) behind transforms[1:]
    states: list                # K+1 LstmState

    @property
    def scores(self):
        return [t.data.copy() for t in self.score_tensors]


def run_episode(f_I, w: AttentionWeights, k_regions, out_size=None, cell_tanh=False):
    """Run K+1 iterations over feature map ``f_I`` and record the trace."""
    if k_regions < 1:
        raise ConfigError(f"an episode needs at least one scored region, got k={k_regions}")
    dtype = f_I.data.dtype
    state = LstmState.zeros(w.n_hidden, dtype=dtype)
    params_node = TransformParams.identity().as_tensor(dtype)
    transforms = [TransformParams.identity()]
    score_tensors, param_tensors, states = [], [], []
    final = None
    for k in range(k_regions + 1):
        f_k = st(f_I, params_node, out_size)
        state = lstm_step(f_k, state, w, cell_tanh=cell_tanh)
        states.append(state)
        s, p_next = heads(state.h, w, emit_score=(k != 0))
        if s is not None:
            score_tensors.append(s)
        if k < k_regions:
            params_node = p_next
            param_tensors.append(p_next)
            transforms.append(TransformParams.from_tensor(p_next))
        else:
            final = TransformParams.from_tensor(p_next)
    return EpisodeTrace(transforms, final, score_tensors, param_tensors, states)


def fuse_scores(score_tensors):
    """Per-class maximum over the K regional score vectors."""
    return fuse_max(score_tensors)
