"""Training regimes: classic (ct), friendly (ft), easy-examples-first (eef) and neural friendly (nft).

All regimes share one epoch loop. Epoch ``gamma`` optionally runs a first
phase (update the simplifier, estimate per-example offsets, or pick the
easy subset) and then always runs a second phase that takes Adam steps on
the classifier over a fresh cover of mini-batches. Validation and test
data are never transformed.
"""

import copy
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import ops
from .autodiff.optim import Adam
from .autodiff.tape import Tape, backward, set_debug
from .data import TEST, TRAIN, VAL, _round_half_up, batch_plan, check_partition
from .models import simplify
from .schedule import DROPPED, UPDATE_AUX, SchedulePlan

REGIMES = ("ct", "ft", "eef", "nft")
PHASE1, PHASE2 = 1, 2


class TrainingDiverged(FloatingPointError):
    def __init__(self, gamma, records):
        super().__init__(f"training loss became non-finite at epoch {gamma}")
        self.gamma = gamma
        self.records = records


@dataclass
class RunConfig:
    regime: str
    plan: SchedulePlan
    batch_size: int = 32
    alpha: float = 1e-3
    beta: float = 1e-4
    seed: int = 0
    epochs: Optional[int] = None  # defaults to plan.gamma_max
    ft_tau_max: int = 10
    ft_step: float = 0.1
    ft_eps_stop: float = 0.01
    eef_p0: float = 0.5
    eval_every: int = 1
    reset_adam_on_drop: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if not isinstance(self.plan, SchedulePlan):
            raise ValueError("plan must be a SchedulePlan")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("learning rates alpha and beta must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs is not None and not 0 <= self.epochs <= self.plan.gamma_max:
            raise ValueError(f"epochs must lie in [0, {self.plan.gamma_max}]")
        if self.ft_tau_max < 0 or self.ft_step <= 0:
            raise ValueError("ft_tau_max must be >= 0 and ft_step > 0")
        if not 0.0 < self.eef_p0 <= 1.0:
            raise ValueError("eef_p0 must lie in (0, 1]")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    @property
    def n_epochs(self):
        return self.plan.gamma_max if self.epochs is None else self.epochs


@dataclass
class EpochRecord:
    gamma: int
    eta: float
    train_loss: float
    train_error: float
    val_error: Optional[float]
    test_error: Optional[float]
    mean_delta_sq: float
    wall_ms: float

    def to_dict(self):
        return asdict(self)


@dataclass
class Checkpoint:
    gamma: int
    val_error: Optional[float]
    params: object
    aux_params: object = None


@dataclass
class TrainResult:
    params: object
    records: list
    best: Checkpoint
    aux_params: object = None


# ------------------------------------------------------------------ losses

def _check_batch(x):
    if len(x) == 0:
        raise ValueError("empty mini-batch")


def ct_loss(main, x, y, w=None, train=False, key=(0,), buffers=None):
    """Mean cross-entropy of the classifier over the batch."""
    _check_batch(x)
    return ops.cross_entropy(main.apply(w, x, train, key, buffers), y)


def nft_loss(main, aux, x, y, eta, w=None, theta=None, train=False, key=(0,), buffers=None):
    """Mean over the batch of CE(f(s(x))) + eta * ||s(x) - x||^2."""
    _check_batch(x)
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    x_tilde = aux.apply(theta, x)
    delta = ops.sub(x_tilde, x)
    penalty = ops.mean(ops.sum(ops.square(delta), axis=1))
    ce = ops.cross_entropy(main.apply(w, x_tilde, train, key, buffers), y)
    return ops.add(ce, ops.mul(penalty, float(eta)))


def per_example_loss(main, x, y, batch_size=2048):
    out = [ops.cross_entropy(main(x[i:i + batch_size]), y[i:i + batch_size], reduction="none").data
           for i in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)


def error_rate(main, x, y):
    if len(x) == 0:
        return None
    return float(np.mean(np.argmax(main.predict(x), axis=1) != y))


# --------------------------------------------------------- friendly offsets

def ft_estimate_delta(forward, x, y, tau, step, eta, eps_stop=0.01, trace=False):
    """Per-example offsets that make ``x + delta`` easier for the classifier.

    Starting from zero, each iteration takes a gradient step of size ``step``
    on the cross-entropy of ``forward(x + delta)`` followed by the exact
    proximal step for ``eta * ||delta||^2``. Examples whose loss is already
    below ``eps_stop`` stop moving. With ``trace`` the per-example objective
    before every step is returned as well.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    x = np.asarray(x)
    delta = np.zeros_like(x)
    history = []
    shrink = 1.0 / (1.0 + 2.0 * step * eta)
    for it in range(int(tau) + 1):
        tape = Tape()
        d = tape.leaf(delta)
        per = ops.cross_entropy(forward(ops.add(x, d)), y, reduction="none")
        if trace:
            history.append(per.data + eta * np.sum(delta * delta, axis=1))
        active = per.data >= eps_stop
        if it == tau or not active.any():
            break
        (g,) = tape.grad(ops.sum(per), [d])
        moved = (delta - step * g) * shrink
        delta = np.where(active[:, None], moved, delta)
    return (delta, np.array(history)) if trace else delta


def ft_tau(cfg, eta):
    return _round_half_up(cfg.ft_tau_max * (1.0 - eta / cfg.plan.eta_max))


def eef_fraction(plan, gamma, p0):
    r = min(max((gamma - 1) / (plan.gamma_max_simp - 1), 0.0), 1.0)
    return r * (1.0 - p0) + p0


def eef_select(losses, fraction):
    """Indices (into ``losses``) of the lowest-loss fraction; ties go to the lower index."""
    k = max(1, _round_half_up(fraction * len(losses)))
    order = np.lexsort((np.arange(len(losses)), losses))
    return np.sort(order[:k])


# ------------------------------------------------------------------ engine

@dataclass
class EpochState:
    gamma: int
    phase: str
    main: object
    aux: object  # simplifier in use this epoch, or None when inputs are untouched
    record: EpochRecord
    train_inputs: np.ndarray = None


@dataclass
class Trainer:
    data: object
    main: object
    cfg: RunConfig
    aux: object = None
    on_epoch: Optional[Callable] = None  # called with EpochRecord
    on_batch: Optional[Callable] = None  # called with (gamma, phase, x_batch, indices)
    on_epoch_end: Optional[Callable] = None  # called with EpochState
    records: list = field(default_factory=list)

    def __post_init__(self):
        cfg = self.cfg
        if cfg.regime == "nft" and self.aux is None:
            raise ValueError("nft needs an auxiliary network")
        if cfg.regime != "nft" and self.aux is not None:
            raise ValueError(f"regime {cfg.regime!r} does not use an auxiliary network")
        if cfg.regime == "nft" and self.aux.spec.kind != "identity" \
                and self.aux.spec.input_dim != self.data.dim:
            raise ValueError("auxiliary network input size does not match the data")
        if self.main.spec.input_dim != self.data.dim:
            raise ValueError("classifier input size does not match the data")
        self.train_idx = self.data.indices(TRAIN)
        if len(self.train_idx) == 0:
            raise ValueError("dataset has no training examples")
        self.X, self.y = self.data.X, self.data.y
        self.opt_w = Adam(self.main.params, cfg.alpha)
        self.opt_theta = Adam(self.aux.params, cfg.beta) if self.aux is not None else None
        if cfg.debug_checks:
            set_debug(True)

    # -- phases

    def _plan(self, indices, gamma, stream):
        plan = batch_plan(indices, self.cfg.batch_size, gamma, self.cfg.seed, stream)
        if self.cfg.debug_checks:
            check_partition(plan, indices)
        return plan

    def _phase1_nft(self, gamma, eta):
        cfg, main, aux = self.cfg, self.main, self.aux
        if not aux.params.trainable_names():
            return  # nothing to update
        scratch = copy.deepcopy(main.params.buffers)
        for bi, idx in enumerate(self._plan(self.train_idx, gamma, PHASE1).batches()):
            xb, yb = self.X[idx], self.y[idx]
            if self.on_batch:
                self.on_batch(gamma, PHASE1, xb, idx)
            tape = Tape()
            theta = tape.bind(aux.params)
            loss = nft_loss(main, aux, xb, yb, eta, None, theta, True,
                            (cfg.seed, gamma, bi, PHASE1), scratch)
            if not np.isfinite(loss.data):
                raise TrainingDiverged(gamma, self.records)
            self.opt_theta.step(backward(tape, loss, aux.params))

    def _phase1_ft(self, gamma, eta):
        tau = ft_tau(self.cfg, eta)
        X = self.X[self.train_idx]
        if tau == 0:
            return np.zeros_like(X)
        return ft_estimate_delta(lambda t: self.main.apply(None, t), X, self.y[self.train_idx],
                                 tau, self.cfg.ft_step, eta, self.cfg.ft_eps_stop)

    def _phase2(self, gamma, eta, indices, transform, offsets):
        cfg, main = self.cfg, self.main
        total, count = 0.0, 0
        for bi, idx in enumerate(self._plan(indices, gamma, PHASE2).batches()):
            xb, yb = self.X[idx], self.y[idx]
            if offsets is not None:
                xb = xb + offsets[idx]
            if self.on_batch:
                self.on_batch(gamma, PHASE2, xb, idx)
            tape = Tape()
            w = tape.bind(main.params)
            key = (cfg.seed, gamma, bi, PHASE2)
            if transform is not None:
                loss = nft_loss(main, transform, xb, yb, eta, w, None, True, key)
            else:
                loss = ct_loss(main, xb, yb, w, True, key)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(gamma, self.records)
            self.opt_w.step(backward(tape, loss, main.params))
            total += value * len(idx)
            count += len(idx)
        return total / count

    # -- loop

    def run(self):
        cfg, plan = self.cfg, self.cfg.plan
        best = Checkpoint(0, None, self.main.params.copy(),
                          self.aux.params.copy() if self.aux is not None else None)
        has_val = self.data.has_split(VAL)
        for gamma in range(1, cfg.n_epochs + 1):
            t0 = time.perf_counter()
            phase = plan.phase(gamma)
            eta = plan.eta(gamma) if cfg.regime in ("ft", "nft") else 0.0
            if cfg.reset_adam_on_drop and cfg.regime in ("ft", "nft") and gamma == plan.gamma_max_simp + 1:
                self.opt_w.reset()

            transform, offsets, indices = None, None, self.train_idx
            if cfg.regime == "nft":
                if phase == UPDATE_AUX:
                    self._phase1_nft(gamma, eta)
                    transform = self.aux
            elif cfg.regime == "ft":
                if phase != DROPPED:
                    offsets = np.zeros_like(self.X)
                    offsets[self.train_idx] = self._phase1_ft(gamma, eta)
            elif cfg.regime == "eef":
                frac = 1.0 if gamma >= plan.gamma_max_simp else eef_fraction(plan, gamma, cfg.eef_p0)
                if frac < 1.0:
                    losses = per_example_loss(self.main, self.X[self.train_idx], self.y[self.train_idx])
                    indices = self.train_idx[eef_select(losses, frac)]

            train_loss = self._phase2(gamma, eta, indices, transform, offsets)

            x_train, y_train = self.X[self.train_idx], self.y[self.train_idx]
            if transform is not None:
                x_train, delta = simplify(x_train, transform)
                mean_dsq = float(np.mean(np.sum(delta * delta, axis=1)))
            elif offsets is not None:
                delta = offsets[self.train_idx]
                x_train = x_train + delta
                mean_dsq = float(np.mean(np.sum(delta * delta, axis=1)))
            else:
                mean_dsq = 0.0
            train_error = error_rate(self.main, x_train, y_train)

            val_error = test_error = None
            if gamma % cfg.eval_every == 0 or gamma == cfg.n_epochs:
                val_error = error_rate(self.main, *self.data.part(VAL))
                test_error = error_rate(self.main, *self.data.part(TEST))

            rec = EpochRecord(gamma, float(eta), float(train_loss), float(train_error),
                              val_error, test_error, mean_dsq,
                              (time.perf_counter() - t0) * 1000.0)
            self.records.append(rec)
            if has_val:
                improved = val_error is not None and (best.val_error is None or val_error < best.val_error)
            else:
                improved = True  # no validation split: keep the latest epoch
            if improved:
                best = Checkpoint(gamma, val_error, self.main.params.copy(),
                                  self.aux.params.copy() if self.aux is not None else None)
            if self.on_epoch:
                self.on_epoch(rec)
            if self.on_epoch_end:
                self.on_epoch_end(EpochState(gamma, phase, self.main, transform, rec, x_train))
        return TrainResult(self.main.params, self.records, best,
                           self.aux.params if self.aux is not None else None)


def _check_regime(cfg, regime):
    if cfg.regime != regime:
        raise ValueError(f"config regime is {cfg.regime!r}, expected {regime!r}")


def train_ct(data, model, cfg, **hooks):
    _check_regime(cfg, "ct")
    return Trainer(data, model, cfg, **hooks).run()


def train_nft(data, main_model, aux_model, cfg, **hooks):
    _check_regime(cfg, "nft")
    return Trainer(data, main_model, cfg, aux=aux_model, **hooks).run()


def train_ft(data, model, cfg, **hooks):
    _check_regime(cfg, "ft")
    return Trainer(data, model, cfg, **hooks).run()


def train_eef(data, model, cfg, **hooks):
    _check_regime(cfg, "eef")
    return Trainer(data, model, cfg, **hooks).run()


def train(data, model, cfg, aux=None, **hooks):
    """Dispatch on ``cfg.regime``."""
    return Trainer(data, model, cfg, aux=aux if cfg.regime == "nft" else None, **hooks).run()
