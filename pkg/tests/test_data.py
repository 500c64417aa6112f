import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from friendly.data import (
    TEST, TRAIN, VAL, Dataset, assign_splits, batch_plan, check_partition, gen_blobs, gen_two_moons,
    inject_label_noise, load_amat, load_amat_splits, save_amat, split_and_batch, subsample,
)


def _arc_distance(p, label):
    if label == 0:
        c, lower = np.array([0.0, 0.0]), False
    else:
        c, lower = np.array([1.0, 0.5]), True
    v = p - c
    on_half = v[1] <= 1e-12 if lower else v[1] >= -1e-12
    assert on_half
    return abs(np.hypot(*v) - 1.0)


def test_noiseless_moons_lie_on_arcs():
    ds = gen_two_moons(4, 0.0, 0)
    for x, y in zip(ds.X, ds.y):
        assert _arc_distance(x, y) < 1e-12
    ds = gen_two_moons(51, 0.0, 3)
    assert max(_arc_distance(x, y) for x, y in zip(ds.X, ds.y)) < 1e-12


def test_moons_balanced_and_seeded():
    ds = gen_two_moons(300, 0.1, 1)
    assert np.bincount(ds.y).tolist() == [150, 150]
    again = gen_two_moons(300, 0.1, 1)
    assert ds.X.tobytes() == again.X.tobytes() and ds.y.tobytes() == again.y.tobytes()
    assert gen_two_moons(300, 0.1, 2).X.tobytes() != ds.X.tobytes()


def test_moons_rejects_tiny_n():
    with pytest.raises(ValueError):
        gen_two_moons(1)


def test_blobs_nearest_center_is_perfect():
    ds = gen_blobs(1000, 10, 4, separation=20.0, noise_std=1.0, seed=0)
    centers = np.array(ds.provenance["centers"])
    pred = np.argmin(((ds.X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    assert np.mean(pred == ds.y) == 1.0


def test_blobs_geometry():
    ds = gen_blobs(40, 5, 4, separation=3.0, noise_std=0.0, seed=1)
    centers = np.array(ds.provenance["centers"])
    for k in range(4):
        assert np.all(ds.X[ds.y == k] == centers[k])
    dist = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
    assert np.allclose(dist[~np.eye(4, dtype=bool)], 3.0)
    assert gen_blobs(40, 5, 4, 3.0, 1.0, 7).X.tobytes() == gen_blobs(40, 5, 4, 3.0, 1.0, 7).X.tobytes()


@pytest.mark.parametrize("args", [(10, 3, 1), (10, 3, 4), (10, 3, 2, -1.0), (10, 3, 2, 1.0, -1.0)])
def test_blobs_invalid(args):
    with pytest.raises(ValueError):
        gen_blobs(*args)


def test_label_noise_counts():
    ds = Dataset(np.zeros((1000, 1)), np.arange(1000) % 5, 5)
    noisy = inject_label_noise(ds, 0.1, 0)
    assert np.sum(noisy.y != ds.y) == 100
    assert np.array_equal(noisy.y_clean, ds.y)
    assert sorted(noisy.provenance["label_noise"]["flipped"]) == np.flatnonzero(noisy.y != ds.y).tolist()
    assert np.array_equal(inject_label_noise(ds, 0.0, 0).y, ds.y)


def test_label_noise_binary_full_flip():
    ds = Dataset(np.zeros((10, 1)), np.arange(10) % 2, 2)
    assert np.array_equal(inject_label_noise(ds, 1.0, 3).y, 1 - ds.y)


def test_label_noise_leaves_val_test_alone():
    ds = assign_splits(gen_blobs(600, 4, 3, seed=0), 0.2, 0.2, 0)
    noisy = inject_label_noise(ds, 1.0, 0)
    for code in (VAL, TEST):
        idx = ds.indices(code)
        assert np.array_equal(noisy.y[idx], ds.y[idx])
    assert np.all(noisy.y[ds.indices(TRAIN)] != ds.y[ds.indices(TRAIN)])
    with pytest.raises(ValueError):
        inject_label_noise(ds, 1.5)


def test_amat_round_trip(tmp_path):
    X = np.array([[0.0, 0.25, 1.0, 0.1], [0.3333333333333333, 0.5, 0.75, 1e-17]])
    y = np.array([3, 0])
    save_amat(tmp_path / "a.amat", X, y)
    ds = load_amat(tmp_path / "a.amat", n_features=4)
    assert ds.X.tobytes() == X.tobytes()
    assert ds.y.tolist() == [3, 0]
    assert ds.input_shape == (1, 2, 2)


def test_amat_errors(tmp_path):
    empty = tmp_path / "empty.amat"
    empty.write_text("")
    with pytest.raises(ValueError, match="no examples"):
        load_amat(empty)
    short = tmp_path / "short.amat"
    short.write_text(" ".join(["0.5"] * 784) + "\n")
    with pytest.raises(ValueError, match="line 1"):
        load_amat(short)
    bad = tmp_path / "bad.amat"
    bad.write_text("0.1 0.2 1\n0.1 x 1\n")
    with pytest.raises(ValueError, match="line 2"):
        load_amat(bad, n_features=2)


def test_amat_out_of_range_warns(tmp_path):
    p = tmp_path / "r.amat"
    p.write_text("0.1 1.5 0\n-0.2 0.3 1\n")
    with pytest.warns(UserWarning, match="2 feature values"):
        ds = load_amat(p, n_features=2)
    assert ds.X[0, 1] == 1.5


def test_amat_splits(tmp_path):
    save_amat(tmp_path / "tr.amat", np.full((5, 4), 0.5), np.arange(5) % 2)
    save_amat(tmp_path / "te.amat", np.full((3, 4), 0.5), np.arange(3) % 2)
    ds = load_amat_splits(tmp_path / "tr.amat", tmp_path / "te.amat", n_features=4)
    assert len(ds.indices(TRAIN)) == 5 and len(ds.indices(TEST)) == 3 and not ds.has_split(VAL)


def test_batch_sizes():
    plan = batch_plan(np.arange(10), 3, epoch=1, seed=0)
    assert [len(b) for b in plan.batches()] == [3, 3, 3, 1]


def test_oversized_batch_warns():
    with pytest.warns(UserWarning):
        plan = batch_plan(np.arange(4), 10, 1, 0)
    assert [len(b) for b in plan.batches()] == [4]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(1, 64), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_batch_plan_is_a_seeded_partition(n, b, epoch, seed):
    idx = np.arange(n) * 3 + 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = batch_plan(idx, b, epoch, seed)
        again = batch_plan(idx, b, epoch, seed)
    check_partition(plan, idx)
    assert plan.permutation.tobytes() == again.permutation.tobytes()
    assert all(len(x) == min(b, n) for x in plan.batches()[:-1])


def test_split_and_batch():
    ds = gen_two_moons(60, 0.1, 0)
    plan = split_and_batch(ds, 1 / 6, 8, 2, 5)
    assert len(plan.permutation) == 50
    assert plan.permutation.tobytes() == split_and_batch(ds, 1 / 6, 8, 2, 5).permutation.tobytes()
    assert split_and_batch(ds, 1 / 6, 8, 3, 5).permutation.tobytes() != plan.permutation.tobytes()


def test_assign_splits_and_subsample():
    ds = assign_splits(gen_two_moons(300, 0.1, 0), 1 / 6, 0.2, 0)
    assert [len(ds.indices(c)) for c in (TRAIN, VAL, TEST)] == [190, 50, 60]
    small = subsample(ds, 0.1, 0)
    assert [len(small.indices(c)) for c in (TRAIN, VAL, TEST)] == [19, 5, 6]
    with pytest.raises(ValueError):
        assign_splits(ds, 0.6, 0.5)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0, 2], 2)
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan, 0.0]]), [0], 2)
