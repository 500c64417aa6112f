import copy
import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass
class Param:
    value: np.ndarray
    trainable: bool = True


class ParamStore:
    """Named parameter arrays plus non-trainable buffers (e.g. running stats).

    Frozen parameters are bound as constants on a tape, so they receive zero
    gradient and are skipped by the optimizer.
    """

    def __init__(self):
        self.params: dict[str, Param] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def add(self, name, value, trainable=True):
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        self.params[name] = Param(np.array(value), trainable)
        return self.params[name].value

    def add_buffer(self, name, value):
        if name in self.buffers:
            raise KeyError(f"duplicate buffer name {name!r}")
        self.buffers[name] = np.array(value)
        return self.buffers[name]

    def __getitem__(self, name):
        return self.params[name].value

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def names(self):
        return list(self.params)

    def trainable_names(self):
        return [k for k, p in self.params.items() if p.trainable]

    def freeze(self, *names):
        for name in names or self.params:
            self.params[name].trainable = False

    def unfreeze(self, *names):
        for name in names or self.params:
            self.params[name].trainable = True

    def num_parameters(self):
        return int(sum(p.value.size for p in self.params.values()))

    def copy(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        for p in self.params.values():
            p.value = p.value.astype(dtype)
        for k in self.buffers:
            self.buffers[k] = self.buffers[k].astype(dtype)
        return self

    def checksum(self):
        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.params[name].value).tobytes())
        for name in sorted(self.buffers):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.buffers[name]).tobytes())
        return h.hexdigest()

    def equal(self, other):
        if self.params.keys() != other.params.keys() or self.buffers.keys() != other.buffers.keys():
            return False
        return all(np.array_equal(self[k], other[k]) for k in self.params) and all(
            np.array_equal(self.buffers[k], other.buffers[k]) for k in self.buffers)
