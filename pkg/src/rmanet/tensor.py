"""Dense float tensors with reverse-mode automatic differentiation.

Operations record a computation graph as they run.  ``Tensor.backward`` walks
the graph once in reverse topological order, accumulates vector-Jacobian
products into the ``.grad`` of every input created with
``requires_grad=True``, then frees the graph.  Model state is float32 end to
end; ``grad_check`` re-runs a computation in float64 so the comparison
against central finite differences is not polluted by single-precision
roundoff.
"""

import numpy as np

from .errors import ProtocolError, ShapeError

_SCALARS = (int, float, np.integer, np.floating)


class Tensor:
    """Row-major dense float array plus autodiff bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float32
        arr = np.asarray(arr, dtype=dtype)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)  # keeps rank-0 arrays rank-0
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self, cotangent=None):
        """Propagate ``cotangent`` (default: ones, scalar outputs only) to inputs."""
        if cotangent is None:
            if self.data.size != 1:
                raise ShapeError(
                    f"backward() without a cotangent needs a single-element tensor, got {self.shape}"
                )
            cot = np.ones_like(self.data)
        else:
            cot = np.asarray(cotangent, dtype=self.data.dtype)
            if cot.shape != self.data.shape:
                raise ShapeError(f"cotangent shape {cot.shape} != output shape {self.data.shape}")

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, emitted = stack.pop()
            if emitted:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = cot.copy() if self.grad is None else self.grad + cot
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            # free the graph so a forward pass never outlives its backward
            node._parents = ()
            node._backward = None

    # operators -------------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def reshape(self, shape):
        return reshape(self, shape)

    def sum(self):
        return sum_all(self)

    def abs(self):
        return absolute(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"


def _node(data, parents, backward):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    grads_needed = tuple(p for p in parents if p.requires_grad)
    out.requires_grad = bool(grads_needed)
    out._parents = grads_needed
    out._backward = backward if grads_needed else None
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if g.dtype != t.data.dtype:
        g = g.astype(t.data.dtype)
    if t.grad is None:
        t.grad = np.array(g, copy=True)
    else:
        t.grad += g


def _check_same_shape(a, b, opname):
    if a.shape != b.shape:
        raise ShapeError(f"{opname}: operand shapes differ: {a.shape} vs {b.shape}")


# elementwise ----------------------------------------------------------------

def add(a, b):
    if isinstance(a, _SCALARS):
        a, b = b, a
    if isinstance(b, _SCALARS):
        c = float(b)

        def bwd(g):
            _accum(a, g)

        return _node(a.data + c, (a,), bwd)
    _check_same_shape(a, b, "add")

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    return _node(a.data + b.data, (a, b), bwd)


def sub(a, b):
    if isinstance(a, _SCALARS):
        c = float(a)
        t = b

        def bwd(g):
            _accum(t, -g)

        return _node(c - t.data, (t,), bwd)
    if isinstance(b, _SCALARS):
        c = float(b)

        def bwd(g):
            _accum(a, g)

        return _node(a.data - c, (a,), bwd)
    _check_same_shape(a, b, "sub")

    def bwd(g):
        _accum(a, g)
        _accum(b, -g)

    return _node(a.data - b.data, (a, b), bwd)


def mul(a, b):
    if isinstance(a, _SCALARS):
        a, b = b, a
    if isinstance(b, _SCALARS):
        c = float(b)

        def bwd(g):
            _accum(a, g * c)

        return _node(a.data * c, (a,), bwd)
    _check_same_shape(a, b, "mul")

    def bwd(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _node(a.data * b.data, (a, b), bwd)


def relu(x):
    mask = x.data > 0

    def bwd(g):
        _accum(x, g * mask)

    return _node(np.maximum(x.data, 0), (x,), bwd)


def sigmoid(x):
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)

    def bwd(g):
        _accum(x, g * out * (1.0 - out))

    return _node(out, (x,), bwd)


def tanh(x):
    out = np.tanh(x.data)

    def bwd(g):
        _accum(x, g * (1.0 - out * out))

    return _node(out, (x,), bwd)


def absolute(x):
    # subgradient 0 at the kink: sign(0) == 0
    sgn = np.sign(x.data)

    def bwd(g):
        _accum(x, g * sgn)

    return _node(np.abs(x.data), (x,), bwd)


# linear algebra and reductions ----------------------------------------------

def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(a.data @ b.data, (a, b), bwd)


def softmax(x):
    """Normalized exponentials of a 1-D tensor, computed with max-subtraction."""
    if x.data.ndim != 1 or x.data.size == 0:
        raise ShapeError(f"softmax expects a nonempty 1-D tensor, got shape {x.shape}")
    z = x.data - x.data.max()
    e = np.exp(z)
    y = e / e.sum()

    def bwd(g):
        _accum(x, y * (g - np.dot(g, y)))

    return _node(y, (x,), bwd)


def sum_all(x):
    out = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def bwd(g):
        _accum(x, np.broadcast_to(g, x.data.shape))

    return _node(out, (x,), bwd)


def reshape(x, shape):
    try:
        new = x.data.reshape(shape).copy()
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view shape {x.shape} as {shape}") from exc

    def bwd(g):
        _accum(x, g.reshape(x.data.shape))

    return _node(new, (x,), bwd)


def take(x, indices):
    """Gather entries at flat row-major positions into a 1-D tensor."""
    idx = np.asarray(indices, dtype=np.intp)
    out = x.data.reshape(-1)[idx].copy()

    def bwd(g):
        gx = np.zeros(x.data.size, dtype=g.dtype)
        np.add.at(gx, idx, g)
        _accum(x, gx.reshape(x.data.shape))

    return _node(out, (x,), bwd)


def bias_add(x, b):
    """Add per-channel bias ``b[c]`` to a (C, H, W) map."""
    if x.data.ndim != 3 or b.data.ndim != 1 or b.shape[0] != x.shape[0]:
        raise ShapeError(f"bias_add: map shape {x.shape} does not take bias shape {b.shape}")

    def bwd(g):
        _accum(x, g)
        _accum(b, g.sum(axis=(1, 2)))

    return _node(x.data + b.data[:, None, None], (x, b), bwd)


def fuse_max(tensors):
    """Elementwise maximum over equal-length 1-D tensors.

    The backward pass routes each position's cotangent to the first tensor
    (in argument order) attaining the maximum, which keeps gradients
    deterministic under ties.
    """
    if not tensors:
        raise ProtocolError("fuse_max needs at least one input vector")
    first = tensors[0]
    for t in tensors[1:]:
        if t.shape != first.shape:
            raise ShapeError(f"fuse_max: shapes differ: {first.shape} vs {t.shape}")
    if first.data.ndim != 1:
        raise ShapeError(f"fuse_max expects 1-D tensors, got shape {first.shape}")
    stacked = np.stack([t.data for t in tensors])
    winner = stacked.argmax(axis=0)
    out = stacked.max(axis=0)

    def bwd(g):
        for k, t in enumerate(tensors):
            _accum(t, g * (winner == k))

    return _node(out, tuple(tensors), bwd)


# spatial ops -----------------------------------------------------------------

def conv2d(x, kernels, stride=1, padding=0):
    """Cross-correlate a (Cin, H, W) map with (Cout, Cin, kH, kW) kernels.

    Zero padding; output H' = (H + 2*padding - kH) // stride + 1.  The taps
    accumulate in fixed (cin, kh, kw) order so the float32 result is
    bit-reproducible against a scalar loop doing the same.
    """
    if x.data.ndim != 3 or kernels.data.ndim != 4:
        raise ShapeError(f"conv2d: need (Cin,H,W) and (Cout,Cin,kH,kW), got {x.shape} and {kernels.shape}")
    cin, h, w = x.shape
    cout, kcin, kh, kw = kernels.shape
    if kcin != cin:
        raise ShapeError(f"conv2d: input channels {x.shape} do not match kernels {kernels.shape}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride={stride} padding={padding}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d: kernel ({kh}, {kw}) larger than padded input ({hp}, {wp})")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    if padding:
        xp = np.zeros((cin, hp, wp), dtype=x.data.dtype)
        xp[:, padding:padding + h, padding:padding + w] = x.data
    else:
        xp = x.data
    kd = kernels.data
    out = np.zeros((cout, ho, wo), dtype=x.data.dtype)
    tmp = np.empty_like(out)
    re = stride * (ho - 1) + 1
    ce = stride * (wo - 1) + 1
    for ci in range(cin):
        plane = xp[ci]
        for a in range(kh):
            for b in range(kw):
                win = plane[a:a + re:stride, b:b + ce:stride]
                np.multiply(kd[:, ci, a, b][:, None, None], win[None, :, :], out=tmp)
                out += tmp

    def bwd(g):
        gm = g.reshape(cout, -1)
        if kernels.requires_grad:
            cols = np.empty((cin * kh * kw, ho * wo), dtype=xp.dtype)
            row = 0
            for ci in range(cin):
                plane = xp[ci]
                for a in range(kh):
                    for b in range(kw):
                        cols[row] = plane[a:a + re:stride, b:b + ce:stride].reshape(-1)
                        row += 1
            _accum(kernels, (gm @ cols.T).reshape(cout, cin, kh, kw))
        if x.requires_grad:
            spread = kd.reshape(cout, -1).T @ gm  # (cin*kh*kw, ho*wo)
            gxp = np.zeros((cin, hp, wp), dtype=g.dtype)
            row = 0
            for ci in range(cin):
                for a in range(kh):
                    for b in range(kw):
                        gxp[ci, a:a + re:stride, b:b + ce:stride] += spread[row].reshape(ho, wo)
                        row += 1
            if padding:
                gxp = gxp[:, padding:padding + h, padding:padding + w]
            _accum(x, gxp)

    return _node(out, (x, kernels), bwd)


def maxpool2d(x, window, stride=None):
    """Per-window maximum over a (C, H, W) map.

    The backward pass routes each window's cotangent to the first (row-major)
    position attaining the maximum.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"maxpool2d expects a (C,H,W) tensor, got shape {x.shape}")
    wh, ww = (window, window) if isinstance(window, int) else window
    if stride is None:
        sh, sw = wh, ww
    else:
        sh, sw = (stride, stride) if isinstance(stride, int) else stride
    c, h, w = x.shape
    if wh > h or ww > w:
        raise ShapeError(f"maxpool2d: window ({wh}, {ww}) exceeds input ({h}, {w})")
    ho = (h - wh) // sh + 1
    wo = (w - ww) // sw + 1
    d = x.data

    if (sh, sw) == (wh, ww) and h % wh == 0 and w % ww == 0:
        blocks = d.reshape(c, ho, wh, wo, ww).transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, wh * ww)
        am = blocks.argmax(axis=3)
        out = blocks.max(axis=3)
        gi = (np.arange(ho) * sh)[None, :, None] + am // ww
        gj = (np.arange(wo) * sw)[None, None, :] + am % ww
    else:
        out = np.empty((c, ho, wo), dtype=d.dtype)
        gi = np.empty((c, ho, wo), dtype=np.intp)
        gj = np.empty((c, ho, wo), dtype=np.intp)
        rows = np.arange(c)
        for i in range(ho):
            for j in range(wo):
                win = d[:, i * sh:i * sh + wh, j * sw:j * sw + ww].reshape(c, -1)
                am = win.argmax(axis=1)
                out[:, i, j] = win[rows, am]
                gi[:, i, j] = i * sh + am // ww
                gj[:, i, j] = j * sw + am % ww

    flat = ((np.arange(c)[:, None, None] * h + gi) * w + gj).reshape(-1)

    def bwd(g):
        gx = np.zeros(c * h * w, dtype=g.dtype)
        np.add.at(gx, flat, g.reshape(-1))
        _accum(x, gx.reshape(c, h, w))

    return _node(out, (x,), bwd)


# gradient checking -----------------------------------------------------------

def grad_check(fn, inputs, eps=1e-4, seed=0):
    """Max relative error between analytic gradients and central differences.

    ``fn`` maps ``len(inputs)`` tensors to one tensor.  Inputs are copied to
    float64; the output is contracted against a fixed random cotangent so a
    single scalar probes the whole vector-Jacobian product.  Relative error
    per entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    Sample points must stay clear of kinks (relu/abs zeros, pooling ties,
    integer bilinear coordinates) by more than ``eps``.
    """
    rng = np.random.default_rng(seed)
    leaves = [
        Tensor(np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64), requires_grad=True)
        for t in inputs
    ]
    out = fn(*leaves)
    w = rng.standard_normal(out.data.shape)
    out.backward(w)
    analytic = [leaf.grad.copy() if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    worst = 0.0
    for leaf, ana in zip(leaves, analytic):
        flat = leaf.data.reshape(-1)
        aflat = ana.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            hi = float((w * fn(*leaves).data).sum())
            flat[i] = saved - eps
            lo = float((w * fn(*leaves).data).sum())
            flat[i] = saved
            numeric = (hi - lo) / (2.0 * eps)
            err = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            if err > worst:
                worst = err
    return worst
