"""Tensors and the tape that records them for reverse-mode differentiation."""

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_DEBUG = os.environ.get("FRIENDLY_DEBUG_CHECKS", "") == "1"


def set_debug(enabled: bool) -> None:
    """Toggle NaN/Inf checks on every recorded forward value."""
    global _DEBUG
    _DEBUG = bool(enabled)


def debug_enabled() -> bool:
    return _DEBUG


@dataclass
class Node:
    op: str
    parents: tuple  # node indices, or None for inputs that need no gradient
    vjp: Optional[Callable]  # upstream grad -> tuple of grads aligned with parents


class Tensor:
    """A dense array, optionally attached to a :class:`Tape`.

    ``index`` is the node slot on the tape when the tensor participates in
    differentiation; constants carry ``index=None``.
    """

    __slots__ = ("data", "tape", "index")
    __array_priority__ = 100

    def __init__(self, data, tape=None, index=None):
        self.data = np.asarray(data)
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def requires_grad(self):
        return self.index is not None

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class Tape:
    """Ordered record of primitive applications.

    Nodes are appended as operations execute, so every node's parents
    precede it and a single reverse sweep visits each node once.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._bindings: dict = {}

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, requires_grad=True, name="leaf"):
        value = np.asarray(value)
        if not requires_grad:
            return Tensor(value, self, None)
        self.nodes.append(Node(name, (), None))
        return Tensor(value, self, len(self.nodes) - 1)

    def constant(self, value):
        return Tensor(value, self, None)

    def bind(self, store):
        """Attach every entry of a ParamStore as a leaf; frozen ones as constants."""
        bound = {}
        for name, p in store.params.items():
            t = self.leaf(p.value, requires_grad=p.trainable, name=f"param:{name}")
            bound[name] = t
        self._bindings[id(store)] = (store, bound)
        return bound

    def record(self, op, value, inputs, vjp):
        """Append a primitive application; returns the output tensor."""
        if _DEBUG and not np.all(np.isfinite(value)):
            raise FloatingPointError(f"{op}: non-finite value in forward output")
        parents = tuple(t.index if isinstance(t, Tensor) else None for t in inputs)
        if all(p is None for p in parents):
            return Tensor(value, self, None)
        self.nodes.append(Node(op, parents, vjp))
        return Tensor(value, self, len(self.nodes) - 1)

    def gradients(self, root):
        """Reverse sweep from ``root``; returns the per-node gradient list."""
        if not isinstance(root, Tensor) or root.tape is not self:
            raise ValueError("backward: root tensor was not produced on this tape")
        if root.data.size != 1:
            raise ValueError(f"backward: root must be a scalar, got shape {root.data.shape}")
        grads = [None] * len(self.nodes)
        if root.index is None:
            return grads
        grads[root.index] = np.ones_like(root.data)
        for i in range(root.index, -1, -1):
            g = grads[i]
            node = self.nodes[i]
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if parent is None or pg is None:
                    continue
                if grads[parent] is None:
                    grads[parent] = pg
                else:
                    grads[parent] = grads[parent] + pg
        return grads

    def grad(self, root, wrt):
        """Gradients of ``root`` with respect to a list of leaf tensors."""
        grads = self.gradients(root)
        out = []
        for t in wrt:
            g = grads[t.index] if t.index is not None else None
            out.append(np.zeros_like(t.data) if g is None else g)
        return out


def backward(tape, root, store):
    """Gradient of ``root`` for every entry of ``store`` bound on ``tape``.

    Frozen entries, and entries the root does not depend on, get zeros.
    """
    if id(store) not in tape._bindings:
        raise ValueError("backward: parameter store is not bound on this tape")
    _, bound = tape._bindings[id(store)]
    grads = tape.gradients(root)
    out = {}
    for name, t in bound.items():
        g = grads[t.index] if t.index is not None else None
        out[name] = np.zeros_like(t.data) if g is None else g
    return out
