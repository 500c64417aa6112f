"""Datasets: synthetic generators, ``.amat`` I/O, label noise, splits and batching."""

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
TRAIN, VAL, TEST = 0, 1, 2


def rng_for(*key):
    """Generator keyed by a tuple of non-negative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def _round_half_up(x):
    return int(np.floor(x + 0.5))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    num_classes: int
    split: np.ndarray = None  # per-index codes TRAIN / VAL / TEST
    input_shape: tuple = None
    provenance: dict = field(default_factory=dict)
    y_clean: np.ndarray = None  # labels before noise injection

    def __post_init__(self):
        self.X = np.asarray(self.X)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.split is None:
            self.split = np.full(len(self.y), TRAIN, dtype=np.int8)
        if self.input_shape is None:
            self.input_shape = tuple(self.X.shape[1:])
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if self.y_clean is None:
            self.y_clean = self.y.copy()
        self.validate()

    def validate(self):
        n = len(self.y)
        if self.X.ndim != 2 or self.X.shape[0] != n:
            raise ValueError(f"X must be [n, d] with n={n}, got {self.X.shape}")
        if int(np.prod(self.input_shape)) != self.X.shape[1]:
            raise ValueError(f"input_shape {self.input_shape} does not match d={self.X.shape[1]}")
        if n and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if self.split.shape != (n,) or not np.isin(self.split, (TRAIN, VAL, TEST)).all():
            raise ValueError("split tags must assign every index to train, val or test")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")

    def __len__(self):
        return len(self.y)

    @property
    def dim(self):
        return self.X.shape[1]

    def indices(self, split):
        code = SPLITS.index(split) if isinstance(split, str) else split
        return np.flatnonzero(self.split == code)

    def part(self, split):
        idx = self.indices(split)
        return self.X[idx], self.y[idx]

    def has_split(self, split):
        return len(self.indices(split)) > 0

    def astype(self, dtype):
        return replace(self, X=self.X.astype(dtype))


# ---------------------------------------------------------------- generators

def gen_two_moons(n=300, noise_std=0.1, seed=0):
    """Two interleaving half circles of radius 1.

    Class 0 follows (cos t, sin t); class 1 follows (1 - cos t, 0.5 - sin t),
    t in [0, pi]. Gaussian noise of std ``noise_std`` is added isotropically.
    """
    if n < 2:
        raise ValueError(f"gen_two_moons: need n >= 2, got {n}")
    if noise_std < 0:
        raise ValueError("gen_two_moons: noise_std must be non-negative")
    n0 = n // 2
    n1 = n - n0
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    X = np.concatenate([
        np.stack([np.cos(t0), np.sin(t0)], axis=1),
        np.stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)], axis=1),
    ])
    y = np.concatenate([np.zeros(n0, np.int64), np.ones(n1, np.int64)])
    rng = rng_for(seed, 1)
    if noise_std > 0:
        X = X + rng.normal(0.0, noise_std, size=X.shape)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], 2, provenance={
        "source": "two_moons", "n": n, "noise_std": noise_std, "seed": seed})


def gen_blobs(n, d, num_classes, separation=4.0, noise_std=1.0, seed=0):
    """Isotropic Gaussian clusters whose centers are pairwise ``separation`` apart.

    Centers are scaled unit vectors e_k (pairwise distance exactly
    ``separation``) under a random rotation; classes are balanced.
    """
    if num_classes < 2 or d < 1 or n < num_classes:
        raise ValueError("gen_blobs: need num_classes >= 2, d >= 1 and n >= num_classes")
    if num_classes > d:
        raise ValueError("gen_blobs: num_classes must not exceed d")
    if separation <= 0 or noise_std < 0:
        raise ValueError("gen_blobs: separation must be positive and noise_std non-negative")
    rng = rng_for(seed, 2)
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    q = q * np.sign(np.diag(r))
    centers = (separation / np.sqrt(2.0)) * q[:num_classes]
    y = np.arange(n) % num_classes
    X = centers[y] + noise_std * rng.normal(size=(n, d))
    order = rng.permutation(n)
    return Dataset(X[order], y[order], num_classes, provenance={
        "source": "blobs", "n": n, "d": d, "num_classes": num_classes,
        "separation": separation, "noise_std": noise_std, "seed": seed,
        "centers": centers.tolist()})


# ------------------------------------------------------------- label noise

def inject_label_noise(ds, fraction, seed=0):
    """Replace ``round(fraction * n_train)`` training labels with a different class.

    The new label is uniform over the other ``C - 1`` classes. Validation and
    test labels are never touched; ``y_clean`` keeps the pristine labels and
    the provenance records the flipped indices.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"noise fraction must lie in [0, 1], got {fraction}")
    train = ds.indices(TRAIN)
    k = _round_half_up(fraction * len(train))
    rng = rng_for(seed, 3)
    flipped = np.sort(rng.choice(train, size=k, replace=False)) if k else np.zeros(0, np.int64)
    y = ds.y.copy()
    y[flipped] = (y[flipped] + rng.integers(1, ds.num_classes, size=k)) % ds.num_classes
    prov = dict(ds.provenance)
    prov["label_noise"] = {"fraction": fraction, "seed": seed, "flipped": flipped.tolist()}
    return replace(ds, y=y, y_clean=ds.y_clean.copy(), provenance=prov)


# ------------------------------------------------------------ amat format

def load_amat(path, n_features=784, num_classes=None, check_range=True):
    """Parse a whitespace-separated matrix: ``n_features`` reals then a label per line."""
    rows, labels = [], []
    out_of_range = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != n_features + 1:
                raise ValueError(
                    f"{path}: line {lineno}: expected {n_features + 1} fields, got {len(fields)}")
            try:
                vals = np.array(fields[:-1], dtype=np.float64)
                lab = float(fields[-1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric field") from None
            if lab != int(lab) or lab < 0:
                raise ValueError(f"{path}: line {lineno}: label {fields[-1]!r} is not a class index")
            if check_range:
                out_of_range += int(np.count_nonzero((vals < 0.0) | (vals > 1.0)))
            rows.append(vals)
            labels.append(int(lab))
    if not rows:
        raise ValueError(f"{path}: no examples")
    if out_of_range:
        warnings.warn(f"{path}: {out_of_range} feature values outside [0, 1]")
    y = np.array(labels, dtype=np.int64)
    c = num_classes if num_classes is not None else int(y.max()) + 1
    side = int(round(np.sqrt(n_features)))
    shape = (1, side, side) if side * side == n_features else (n_features,)
    return Dataset(np.stack(rows), y, c, input_shape=shape,
                   provenance={"source": "amat", "path": str(path)})


def save_amat(path, X, y):
    """Write in the ``.amat`` layout; values use shortest round-trip repr."""
    with open(path, "w") as fh:
        for row, lab in zip(np.asarray(X, dtype=np.float64), np.asarray(y)):
            fh.write(" ".join(repr(v) for v in row.tolist()))
            fh.write(f" {int(lab)}\n")


def load_amat_splits(train, test, valid=None, n_features=784, num_classes=None):
    """Assemble a dataset from separate split files (``valid`` optional)."""
    parts = [(TRAIN, load_amat(train, n_features, num_classes))]
    if valid is not None:
        parts.append((VAL, load_amat(valid, n_features, num_classes)))
    parts.append((TEST, load_amat(test, n_features, num_classes)))
    c = num_classes if num_classes is not None else max(p.num_classes for _, p in parts)
    X = np.concatenate([p.X for _, p in parts])
    y = np.concatenate([p.y for _, p in parts])
    split = np.concatenate([np.full(len(p), code, np.int8) for code, p in parts])
    return Dataset(X, y, c, split=split, input_shape=parts[0][1].input_shape, provenance={
        "source": "amat", "train": str(train), "valid": str(valid) if valid else None,
        "test": str(test)})


# ------------------------------------------------------ splits and batching

def assign_splits(ds, val_fraction=1 / 6, test_fraction=0.0, seed=0):
    """Tag a random ``val_fraction`` / ``test_fraction`` of all indices."""
    if not 0.0 <= val_fraction < 1.0 or not 0.0 <= test_fraction < 1.0 \
            or val_fraction + test_fraction >= 1.0:
        raise ValueError("split fractions must be in [0, 1) and sum below 1")
    n = len(ds)
    order = rng_for(seed, 4).permutation(n)
    n_val = _round_half_up(val_fraction * n)
    n_test = _round_half_up(test_fraction * n)
    split = np.full(n, TRAIN, dtype=np.int8)
    split[order[:n_val]] = VAL
    split[order[n_val:n_val + n_test]] = TEST
    return replace(ds, split=split)


def subsample(ds, fraction, seed=0):
    """Keep a random ``fraction`` of every split (at least one example each)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"subsample fraction must lie in (0, 1], got {fraction}")
    rng = rng_for(seed, 5)
    keep = []
    for code in (TRAIN, VAL, TEST):
        idx = ds.indices(code)
        if len(idx):
            k = max(1, _round_half_up(fraction * len(idx)))
            keep.append(np.sort(rng.choice(idx, size=k, replace=False)))
    keep = np.sort(np.concatenate(keep))
    prov = dict(ds.provenance, subsample={"fraction": fraction, "seed": seed})
    return replace(ds, X=ds.X[keep], y=ds.y[keep], y_clean=ds.y_clean[keep],
                   split=ds.split[keep], provenance=prov)


@dataclass
class BatchPlan:
    seed: int
    epoch: int
    batch_size: int
    permutation: np.ndarray
    cuts: list

    def batches(self):
        return np.split(self.permutation, self.cuts)

    def __len__(self):
        return len(self.cuts) + 1 if len(self.permutation) else 0


def batch_plan(indices, batch_size, epoch, seed, stream=0):
    """Random partition of ``indices`` into consecutive mini-batches.

    The permutation depends only on ``(seed, epoch, stream)``; the last batch
    may be smaller.
    """
    indices = np.asarray(indices)
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    if len(indices) == 0:
        raise ValueError("cannot batch an empty index set")
    if batch_size > len(indices):
        warnings.warn(f"batch size {batch_size} exceeds {len(indices)} examples; using one batch")
        batch_size = len(indices)
    perm = indices[rng_for(seed, epoch, stream, 6).permutation(len(indices))]
    cuts = list(range(batch_size, len(indices), batch_size))
    return BatchPlan(seed, epoch, batch_size, perm, cuts)


def check_partition(plan, indices):
    """Raise if the batches of ``plan`` do not partition ``indices``."""
    merged = np.concatenate(plan.batches())
    if len(merged) != len(indices) or not np.array_equal(np.sort(merged), np.sort(indices)):
        raise AssertionError("batch plan is not a partition of the training indices")


def split_and_batch(ds, val_fraction, batch_size, epoch, seed):
    """Batch plan over the training split, splitting off validation first if needed.

    Datasets that already carry a validation split keep it unchanged.
    """
    if not ds.has_split(VAL) and val_fraction > 0:
        ds = assign_splits(ds, val_fraction, 0.0, seed)
    return batch_plan(ds.indices(TRAIN), batch_size, epoch, seed)
