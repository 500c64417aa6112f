"""Versioned text checkpoints: a JSON metadata line, then name/shape/values records.

Values are written with Python's shortest round-trip float repr, so a
save/load cycle reproduces every parameter bit for bit.
"""

import json

import numpy as np

from .autodiff.params import ParamStore
from .models import AuxNetSpec, ClassifierSpec, build_auxiliary, build_classifier

MAGIC = "friendly-checkpoint"
FORMAT_VERSION = 1


def _write_array(fh, tag, name, arr, trainable=None):
    shape = ",".join(str(s) for s in arr.shape)
    flag = "" if trainable is None else f" {int(trainable)}"
    fh.write(f"{tag} {name} {arr.dtype.name} {shape or '-'}{flag}\n")
    fh.write(" ".join(repr(v) for v in arr.ravel().tolist()))
    fh.write("\n")


def save_params(path, store, meta=None):
    with open(path, "w") as fh:
        fh.write(f"{MAGIC} {FORMAT_VERSION}\n")
        fh.write(json.dumps(meta or {}, sort_keys=True) + "\n")
        for name, p in store.params.items():
            _write_array(fh, "param", name, p.value, p.trainable)
        for name, buf in store.buffers.items():
            _write_array(fh, "buffer", name, buf)


def load_params(path):
    """Returns ``(ParamStore, meta)``."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if int(head[1]) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {head[1]}")
    meta = json.loads(lines[1])
    store = ParamStore()
    i = 2
    while i < len(lines) and lines[i]:
        fields = lines[i].split()
        tag, name, dtype, shape = fields[:4]
        dims = () if shape == "-" else tuple(int(s) for s in shape.split(","))
        values = np.array(lines[i + 1].split(), dtype=np.float64).astype(dtype).reshape(dims)
        if tag == "param":
            store.add(name, values, trainable=bool(int(fields[4])))
        elif tag == "buffer":
            store.add_buffer(name, values)
        else:
            raise ValueError(f"{path}: line {i + 1}: unknown record {tag!r}")
        i += 2
    return store, meta


def save_network(path, net, **meta):
    kind = "classifier" if isinstance(net.spec, ClassifierSpec) else "auxiliary"
    save_params(path, net.params, dict(meta, network=kind, spec=net.spec.to_dict()))


def load_network(path):
    """Rebuild a network from its checkpoint; returns ``(network, meta)``."""
    store, meta = load_params(path)
    spec_dict = dict(meta["spec"])
    spec_dict["input_shape"] = tuple(spec_dict["input_shape"])
    if meta.get("network") == "classifier":
        net = build_classifier(ClassifierSpec(**spec_dict), 0)
    elif meta.get("network") == "auxiliary":
        net = build_auxiliary(AuxNetSpec(**spec_dict), 0)
    else:
        raise ValueError(f"{path}: checkpoint does not describe a network")
    if set(store.params) != set(net.params.params) or set(store.buffers) != set(net.params.buffers):
        raise ValueError(f"{path}: parameter names do not match the recorded architecture")
    net.params = store
    return net, meta
