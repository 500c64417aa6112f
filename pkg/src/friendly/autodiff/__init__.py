"""Reverse-mode automatic differentiation over dense numpy arrays."""

from . import ops
from .optim import Adam, AdamState, adam_update
from .params import Param, ParamStore
from .tape import Tape, Tensor, backward, debug_enabled, set_debug

__all__ = [
    "ops", "Adam", "AdamState", "adam_update", "Param", "ParamStore",
    "Tape", "Tensor", "backward", "debug_enabled", "set_debug",
]
