"""Adam optimizer with bias correction."""

import numpy as np

from .errors import ConfigError


class Adam:
    """Standard Adam over named parameters.

    Moment accumulators start at zero, so a parameter whose gradient stays
    zero is never moved.  State serializes into checkpoints under
    ``adam/m/<name>``, ``adam/v/<name>`` and ``adam/step``.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in self.params}
        self.v = {name: np.zeros_like(t.data) for name, t in self.params}

    def zero_grad(self):
        for _, t in self.params:
            t.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params:
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif g.shape != p.data.shape:
                raise ConfigError(f"gradient shape {g.shape} does not match parameter {name} {p.data.shape}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self):
        out = [("adam/step", np.array([float(self.step_count)], dtype=np.float32))]
        for name, _ in self.params:
            out.append((f"adam/m/{name}", self.m[name]))
            out.append((f"adam/v/{name}", self.v[name]))
        return out

    def load_state(self, arrays):
        if "adam/step" not in arrays:
            raise ConfigError("optimizer state missing adam/step")
        self.step_count = int(round(float(arrays["adam/step"][0])))
        for name, p in self.params:
            for prefix, store in (("adam/m/", self.m), ("adam/v/", self.v)):
                key = prefix + name
                if key not in arrays:
                    raise ConfigError(f"optimizer state missing {key}")
                arr = arrays[key]
                if arr.shape != p.data.shape:
                    raise ConfigError(f"optimizer tensor {key} has shape {arr.shape}, expected {p.data.shape}")
                store[name] = arr.astype(p.data.dtype)
