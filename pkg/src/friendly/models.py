"""Classifier architectures and auxiliary simplifier networks.

All networks consume flat inputs ``[batch, d]``; convolutional models
reshape internally using ``input_shape = (channels, height, width)``.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .autodiff import ops
from .autodiff.params import ParamStore
from .autodiff.tape import Tensor

CLASSIFIER_KINDS = ("fc_a", "fc_b", "cnn_a", "toy_2d")
AUX_KINDS = ("fc_residual", "conv_bottleneck", "identity")
FC_B_WIDTHS = (2500, 2000, 1500, 1000, 500)
CNN_A_FILTERS = (32, 64)
CNN_A_HIDDEN = 128


def scaled(width, scale):
    return max(1, int(round(scale * width)))


def _flat_dim(shape):
    return int(np.prod(shape))


@dataclass
class ClassifierSpec:
    kind: str
    input_shape: tuple
    num_classes: int
    scale: float = 1.0
    hidden: Optional[int] = None  # overrides the single hidden width of fc_a / toy_2d
    dropout: float = 0.25

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in np.atleast_1d(self.input_shape))
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if any(s <= 0 for s in self.input_shape) or self.num_classes <= 0:
            raise ValueError("classifier dimensions must be positive")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError(f"scale must lie in (0, 1], got {self.scale}")
        if self.hidden is not None and self.hidden <= 0:
            raise ValueError("hidden width must be positive")
        if self.kind == "cnn_a" and len(self.input_shape) != 3:
            raise ValueError("cnn_a needs input_shape (channels, height, width)")
        if self.kind == "toy_2d" and _flat_dim(self.input_shape) != 2:
            raise ValueError("toy_2d takes 2-d inputs")

    @property
    def input_dim(self):
        return _flat_dim(self.input_shape)

    def to_dict(self):
        return asdict(self)


@dataclass
class AuxNetSpec:
    kind: str
    input_shape: tuple
    hidden: int = 256
    n_f: int = 64
    depth: int = 1
    scale: float = 1.0
    residual: bool = True
    activation: str = "tanh"

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in np.atleast_1d(self.input_shape))
        if self.kind not in AUX_KINDS:
            raise ValueError(f"unknown auxiliary kind {self.kind!r}")
        if any(s <= 0 for s in self.input_shape):
            raise ValueError("auxiliary input dimensions must be positive")
        if self.hidden <= 0:
            raise ValueError("auxiliary hidden width must be positive")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.kind == "conv_bottleneck":
            if self.n_f not in (64, 96, 128):
                raise ValueError(f"n_f must be one of 64, 96, 128, got {self.n_f}")
            if self.depth not in (1, 2):
                raise ValueError(f"depth must be 1 or 2, got {self.depth}")
            if len(self.input_shape) != 3:
                raise ValueError("conv_bottleneck needs input_shape (channels, height, width)")
            _, h, w = self.input_shape
            if h % (2 ** self.depth) or w % (2 ** self.depth):
                raise ValueError(f"image size {h}x{w} not divisible by 2**depth")

    @property
    def input_dim(self):
        return _flat_dim(self.input_shape)

    def to_dict(self):
        return asdict(self)


def _glorot(rng, fan_in, fan_out, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class _Builder:
    def __init__(self, seed, dtype):
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype
        self.store = ParamStore()

    def linear(self, name, n_in, n_out, zero=False):
        w = np.zeros((n_in, n_out), self.dtype) if zero else _glorot(
            self.rng, n_in, n_out, (n_in, n_out), self.dtype)
        self.store.add(f"{name}.w", w)
        self.store.add(f"{name}.b", np.zeros(n_out, self.dtype))

    def conv(self, name, c_in, c_out, k, zero=False):
        shape = (c_out, c_in, k, k)
        w = np.zeros(shape, self.dtype) if zero else _glorot(
            self.rng, c_in * k * k, c_out * k * k, shape, self.dtype)
        self.store.add(f"{name}.w", w)
        self.store.add(f"{name}.b", np.zeros(c_out, self.dtype))

    def batchnorm(self, name, n):
        self.store.add(f"{name}.gamma", np.ones(n, self.dtype))
        self.store.add(f"{name}.beta", np.zeros(n, self.dtype))
        self.store.add_buffer(f"{name}.mean", np.zeros(n, self.dtype))
        self.store.add_buffer(f"{name}.var", np.ones(n, self.dtype))


def _linear(w, name, x):
    return ops.add(ops.matmul(x, w[f"{name}.w"]), w[f"{name}.b"])


def _conv(w, name, x, padding=0):
    return ops.conv2d(x, w[f"{name}.w"], w[f"{name}.b"], padding=padding)


class Network:
    """A parameter store plus the forward function that reads it.

    ``apply(w, x, ...)`` evaluates the network with parameters ``w`` (a
    mapping from names to tensors or arrays, e.g. the result of
    ``tape.bind(net.params)``); ``w=None`` uses the stored arrays.
    Passing ``buffers`` substitutes the running statistics read and updated
    by batch normalisation.
    """

    def __init__(self, spec, params, forward):
        self.spec = spec
        self.params = params
        self._forward = forward

    def apply(self, w, x, train=False, key=(0,), buffers=None):
        if w is None:
            w = {k: p.value for k, p in self.params.params.items()}
        if buffers is None:
            buffers = self.params.buffers
        out = self._forward(w, buffers, x, train, key)
        return out if isinstance(out, Tensor) else Tensor(out)

    def __call__(self, x, train=False, key=(0,)):
        return self.apply(None, x, train, key)

    def predict(self, x, batch_size=2048):
        """Eval-mode outputs as an ndarray, evaluated in chunks."""
        x = np.asarray(x)
        outs = [self(x[i:i + batch_size]).data for i in range(0, len(x), batch_size)]
        if not outs:
            return np.zeros((0,) + self.output_shape(), dtype=x.dtype)
        return np.concatenate(outs, axis=0)

    def output_shape(self):
        spec = self.spec
        return (spec.num_classes,) if isinstance(spec, ClassifierSpec) else (spec.input_dim,)


def build_classifier(spec, seed, dtype=np.float64):
    """Construct a classifier; identical seeds give identical parameters."""
    b = _Builder(seed, dtype)
    d, c = spec.input_dim, spec.num_classes

    if spec.kind in ("fc_a", "toy_2d"):
        base = 10 if spec.kind == "fc_a" else 5
        hidden = spec.hidden if spec.hidden is not None else (
            scaled(base, spec.scale) if spec.kind == "fc_a" else base)
        b.linear("hidden", d, hidden)
        b.linear("out", hidden, c)

        def forward(w, bufs, x, train, key):
            return _linear(w, "out", ops.tanh(_linear(w, "hidden", x)))

    elif spec.kind == "fc_b":
        widths = [scaled(n, spec.scale) for n in FC_B_WIDTHS]
        n_in = d
        for i, n in enumerate(widths):
            b.linear(f"fc{i}", n_in, n)
            b.batchnorm(f"bn{i}", n)
            n_in = n
        b.linear("out", n_in, c)

        def forward(w, bufs, x, train, key):
            h = x
            for i in range(len(widths)):
                h = _linear(w, f"fc{i}", h)
                h = ops.batchnorm1d(h, w[f"bn{i}.gamma"], w[f"bn{i}.beta"],
                                    bufs[f"bn{i}.mean"], bufs[f"bn{i}.var"], train=train)
                h = ops.relu(h)
            return _linear(w, "out", h)

    else:  # cnn_a
        ch, hh, ww = spec.input_shape
        f1, f2 = (scaled(n, spec.scale) for n in CNN_A_FILTERS)
        hidden = scaled(CNN_A_HIDDEN, spec.scale)
        oh, ow = (hh - 4) // 2, (ww - 4) // 2
        if oh < 1 or ow < 1:
            raise ValueError(f"cnn_a input {hh}x{ww} is too small")
        b.conv("conv1", ch, f1, 3)
        b.conv("conv2", f1, f2, 3)
        b.linear("fc1", f2 * oh * ow, hidden)
        b.linear("out", hidden, c)
        rate = spec.dropout

        def forward(w, bufs, x, train, key):
            n = x.shape[0]
            h = ops.reshape(x, (n, ch, hh, ww))
            h = ops.relu(_conv(w, "conv1", h))
            h = ops.relu(_conv(w, "conv2", h))
            h = ops.maxpool2d(h)
            h = ops.dropout(h, rate, train, tuple(key) + (1,))
            h = ops.reshape(h, (n, -1))
            h = ops.relu(_linear(w, "fc1", h))
            return _linear(w, "out", h)

    return Network(spec, b.store, forward)


def build_auxiliary(spec, seed, dtype=np.float64):
    """Construct the simplifier s(x, theta), mapping [b, d] to [b, d].

    With ``residual`` set, s(x) = x + g(x) and the last layer of g starts at
    zero, so the network is the exact identity before any update.
    """
    b = _Builder(seed, dtype)
    d = spec.input_dim
    act = ops.tanh if spec.activation == "tanh" else ops.relu
    residual = spec.residual

    if spec.kind == "identity":
        def forward(w, bufs, x, train, key):
            return x

    elif spec.kind == "fc_residual":
        b.linear("hidden", d, spec.hidden)
        b.linear("out", spec.hidden, d, zero=residual)

        def forward(w, bufs, x, train, key):
            g = _linear(w, "out", act(_linear(w, "hidden", x)))
            return ops.add(x, g) if residual else g

    else:  # conv_bottleneck
        ch, hh, ww = spec.input_shape
        nf = scaled(spec.n_f, spec.scale)
        depth = spec.depth
        b.conv("enc0", ch, nf, 3)
        b.conv("enc1", nf, nf, 3)
        for i in range(depth):
            b.conv(f"down{i}", nf, nf, 3)
        for i in range(depth):
            b.conv(f"up{i}", 2 * nf, nf, 3)
        b.conv("head", nf, ch, 1, zero=residual)

        def forward(w, bufs, x, train, key):
            n = x.shape[0]
            img = ops.reshape(x, (n, ch, hh, ww))
            h = ops.relu(_conv(w, "enc0", img, padding=1))
            h = ops.relu(_conv(w, "enc1", h, padding=1))
            skips = []
            for i in range(depth):
                skips.append(h)
                h = ops.relu(_conv(w, f"down{i}", ops.maxpool2d(h), padding=1))
            for i in range(depth):
                h = ops.concat([ops.upsample2d(h), skips.pop()], axis=1)
                h = ops.relu(_conv(w, f"up{i}", h, padding=1))
            g = ops.reshape(_conv(w, "head", h), (n, d))
            return ops.add(x, g) if residual else g

    return Network(spec, b.store, forward)


IDENTITY = build_auxiliary(AuxNetSpec("identity", (1,)), 0)


def simplify(x, aux=None):
    """Apply the simplifier in eval mode; returns ``(x_tilde, delta)``.

    ``delta`` is s(x) - x and ``x_tilde`` is reported as ``x + delta`` so
    that the pair satisfies x + delta == x_tilde exactly. ``aux=None`` or an
    identity network returns ``(x, 0)``.
    """
    x = np.asarray(x)
    if aux is None or aux.spec.kind == "identity":
        return x, np.zeros_like(x)
    s = aux.predict(x)
    delta = s - x
    return x + delta, delta
