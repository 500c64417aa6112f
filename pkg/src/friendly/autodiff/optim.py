from dataclasses import dataclass, field

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_update(params, grads, lr, state, t, beta1=BETA1, beta2=BETA2, eps=EPS):
    """One bias-corrected Adam step, in place, over the trainable entries of ``params``.

    Entries that are frozen or absent from ``grads`` are left untouched and
    their moment buffers do not advance.
    """
    if lr <= 0:
        raise ValueError(f"adam_update: learning rate must be positive, got {lr}")
    if t < 1:
        raise ValueError(f"adam_update: step index must be >= 1, got {t}")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.params.items():
        if not p.trainable or name not in grads:
            continue
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    state.t = t
    return params


class Adam:
    """Stateful wrapper that tracks the step counter for :func:`adam_update`."""

    def __init__(self, params, lr, beta1=BETA1, beta2=BETA2, eps=EPS):
        if lr <= 0:
            raise ValueError(f"Adam: learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState()

    def step(self, grads):
        adam_update(self.params, grads, self.lr, self.state, self.state.t + 1,
                    self.beta1, self.beta2, self.eps)

    def reset(self):
        self.state = AdamState()
