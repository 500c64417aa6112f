"""Acceptance criteria 1-9, each printed as one PASS/FAIL line.

Criteria 5 and 6 are directional claims about training dynamics on small
synthetic problems; the hyperparameters below were chosen once on the
input scale of those problems and are frozen here.
"""

import itertools
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from friendly import cli
from friendly.config import defaults, dump_config, load_config
from friendly.data import TRAIN, assign_splits, gen_blobs, gen_two_moons, inject_label_noise, save_amat
from friendly.engines import RunConfig, train
from friendly.experiment import build_dataset, build_networks, make_run_config
from friendly.exports import read_csv
from friendly.gradcheck import TOLERANCE, run_suite
from friendly.models import IDENTITY, AuxNetSpec, ClassifierSpec, build_auxiliary, build_classifier, simplify
from friendly.schedule import SchedulePlan, eta_at


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def strip_wall(text):
    lines = text.splitlines()
    return [lines[0]] + [json.dumps(dict(json.loads(x), wall_ms=None)) for x in lines[1:]]


def moons(seed=0, n=300):
    return assign_splits(gen_two_moons(n, 0.1, seed), 1 / 6, 0.2, seed)


# 1 ---------------------------------------------------------------------

def test_1_gradient_suite():
    t0 = time.perf_counter()
    worst = run_suite(range(20))
    dt = time.perf_counter() - t0
    from friendly.autodiff.ops import PRIMITIVES

    covered = set(PRIMITIVES) <= set(worst) and {"loss:ct", "loss:nft_theta", "loss:nft_w"} <= set(worst)
    name, err = max(worst.items(), key=lambda kv: kv[1])
    ok = covered and err < TOLERANCE and dt < 30.0
    verdict(1, ok, f"{len(worst)} checks x 20 seeds, worst {name}={err:.2e} < {TOLERANCE}, {dt:.1f}s < 30s")


# 2 ---------------------------------------------------------------------

def test_2_schedule_exactness():
    plan = SchedulePlan(200, 170, 1000.0)
    hand = eta_at(SchedulePlan(10, 5, 1000.0), 3)
    sweep = [eta_at(plan, g) for g in range(1, 201)]
    ok = (eta_at(plan, 1) == 0.0 and eta_at(plan, 170) == 1000.0 and hand == 750.0
          and all(e == 1000.0 for e in sweep[169:])
          and all(a <= b for a, b in zip(sweep, sweep[1:])))
    verdict(2, ok, f"eta(1)=0, eta(simp)=eta_max, clamp, hand value {hand}, monotone over 200 epochs")


# 3 ---------------------------------------------------------------------

def test_3_ct_equals_identity_nft():
    ds = moons(0)
    plan = SchedulePlan(50, 40, 0.05)

    def losses(regime, aux=None, **kw):
        net = build_classifier(ClassifierSpec("toy_2d", (2,), 2), 0)
        return [r.train_loss for r in train(ds, net, RunConfig(regime, plan, alpha=1e-2, **kw), aux=aux).records]

    ct = losses("ct")
    nft = losses("nft", IDENTITY)
    ft = losses("ft", ft_tau_max=0)
    d_nft = max(abs(a - b) for a, b in zip(ct, nft))
    d_ft = max(abs(a - b) for a, b in zip(ct, ft))
    ok = len(ct) == len(nft) == len(ft) == 50 and d_nft < 1e-9 and d_ft < 1e-9
    verdict(3, ok, f"50 epochs, max |CT-NFT(identity)|={d_nft:.1e}, max |CT-FT(tau=0)|={d_ft:.1e} < 1e-9")


# 4 ---------------------------------------------------------------------

def test_4_drop_guarantee():
    ds = moons(1)
    net = build_classifier(ClassifierSpec("toy_2d", (2,), 2), 1)
    aux = build_auxiliary(AuxNetSpec("fc_residual", (2,), hidden=16), [1, 1])
    seen = {"late": 0, "bad": 0}

    def on_batch(gamma, phase, xb, idx):
        if gamma > 30:
            seen["late"] += 1
            seen["bad"] += xb.tobytes() != ds.X[idx].tobytes()

    res = train(ds, net, RunConfig("nft", SchedulePlan(50, 30, 0.05), alpha=1e-2, beta=1e-2, seed=1),
                aux=aux, on_batch=on_batch)
    late = [r.mean_delta_sq for r in res.records[30:]]
    active = min(r.mean_delta_sq for r in res.records[1:30])  # the simplifier did act before the drop
    ok = seen["late"] > 0 and seen["bad"] == 0 and all(v == 0.0 for v in late) and active > 0
    verdict(4, ok, f"{seen['late']} batches after epoch 30 bit-identical to raw data, "
                   f"mean_delta_sq==0 on {len(late)} epochs (min {active:.1e} on epochs 2-30)")


# 5 ---------------------------------------------------------------------

@pytest.mark.slow
def test_5_early_dynamics_on_noisy_moons():
    t0 = time.perf_counter()
    means = {}
    for regime in ("ct", "nft"):
        tr, te = [], []
        for s in range(5):
            ds = inject_label_noise(assign_splits(gen_two_moons(600, 0.1, s), 1 / 6, 0.2, s), 0.2, s)
            net = build_classifier(ClassifierSpec("toy_2d", (2,), 2, hidden=16), s)
            aux = build_auxiliary(AuxNetSpec("fc_residual", (2,), hidden=32), [s, 1]) if regime == "nft" else None
            rc = RunConfig(regime, SchedulePlan(50, 40, 0.05), batch_size=32, alpha=1e-2, beta=1e-2, seed=s)
            recs = train(ds, net, rc, aux=aux).records[1:10]  # epochs 2..10
            tr.append(np.mean([r.train_error for r in recs]))
            te.append(np.mean([r.test_error for r in recs]))
        means[regime] = (float(np.mean(tr)), float(np.mean(te)))
    dt = time.perf_counter() - t0
    (ct_tr, ct_te), (nft_tr, nft_te) = means["ct"], means["nft"]
    ok = nft_tr < ct_tr and nft_te > ct_te and dt < 300
    verdict(5, ok, f"epochs 2-10, 5 seeds: train NFT {nft_tr:.4f} < CT {ct_tr:.4f}; "
                   f"test NFT {nft_te:.4f} > CT {ct_te:.4f}; {dt:.0f}s < 300s")


# 6 ---------------------------------------------------------------------

@pytest.mark.slow
def test_6_noisy_label_trend_on_blobs():
    t0 = time.perf_counter()
    gmax = 40

    def run(regime, s, eta=1.0, simp=2):
        ds = inject_label_noise(assign_splits(gen_blobs(4000, 20, 4, 3.0, 1.0, s), 1 / 6, 0.2, s), 0.4, s)
        net = build_classifier(ClassifierSpec("fc_a", (20,), 4, hidden=128), s)
        aux = build_auxiliary(AuxNetSpec("fc_residual", (20,), hidden=64), [s, 1]) if regime == "nft" else None
        rc = RunConfig(regime, SchedulePlan(gmax, simp, eta), batch_size=64, alpha=1e-3, beta=1e-3, seed=s)
        res = train(ds, net, rc, aux=aux)
        return res.best.val_error, res.records[res.best.gamma - 1].test_error

    ct = [run("ct", s) for s in range(5)]
    cells = {}
    for eta, frac in itertools.product((0.02, 0.1, 0.5), (0.25, 0.5, 0.85)):
        simp = int(np.floor(frac * gmax + 0.5))
        cells[(eta, simp)] = [run("nft", s, eta, simp) for s in range(5)]
    win = min(cells, key=lambda k: np.mean([v for v, _ in cells[k]]))
    wins = sum(n[1] <= c[1] for n, c in zip(cells[win], ct))
    dt = time.perf_counter() - t0
    nft_t = " ".join(f"{t:.3f}" for _, t in cells[win])
    ct_t = " ".join(f"{t:.3f}" for _, t in ct)
    verdict(6, wins >= 4 and dt < 1200,
            f"winner eta_max={win[0]} gamma_max_simp={win[1]}; NFT<=CT in {wins}/5 seeds "
            f"(NFT {nft_t} | CT {ct_t}); {dt:.0f}s < 1200s")


# 7 ---------------------------------------------------------------------

def _synthetic_amat(dirpath, n_train=1200, n_test=300, seed=0):
    """28x28 images in [0, 1]: a class-dependent bar over a textured background."""
    rng = np.random.default_rng(seed)

    def make(n):
        y = rng.integers(0, 10, n)
        X = rng.uniform(0.0, 0.6, size=(n, 28, 28))
        for i, c in enumerate(y):
            r = 2 + 2 * c
            X[i, r:r + 3, 4:24] = 1.0
        return X.reshape(n, 784), y

    for name, n in (("train", n_train), ("test", n_test)):
        X, y = make(n)
        save_amat(dirpath / f"synthetic_{name}.amat", X, y)
    return dirpath / "synthetic_train.amat", dirpath / "synthetic_test.amat"


def _extended_config(train_path, test_path):
    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "mnist_back_image.ini")
    cfg = cfg.override("data", "amat_train", str(train_path)).override("data", "amat_test", str(test_path))
    real = bool(os.environ.get("FRIENDLY_AMAT_DIR"))
    if not real:
        cfg = (cfg.override("schedule", "gamma_max", 4).override("schedule", "gamma_max_simp", 3)
               .override("grid", "eta_max", [0.05, 0.5]).override("grid", "gamma_max_simp_frac", [0.75])
               .override("grid", "beta", [1e-3]).override("experiment", "seeds", [0]))
    return cfg


def test_7_extended_mode_completes(tmp_path):
    amat_dir = os.environ.get("FRIENDLY_AMAT_DIR")
    if amat_dir:
        tr = Path(amat_dir) / "mnist_background_images_train.amat"
        te = Path(amat_dir) / "mnist_background_images_test.amat"
        source = "user-supplied mnist-back-image"
    else:
        tr, te = _synthetic_amat(tmp_path)
        source = "synthetic 28x28 .amat"
    cfg = _extended_config(tr, te)
    (tmp_path / "ext.ini").write_text(dump_config(cfg))
    t0 = time.perf_counter()
    rc = cli.main(["grid", "--config", str(tmp_path / "ext.ini"), "--out", str(tmp_path / "g")])
    dt = time.perf_counter() - t0
    _, cols, rows = read_csv(tmp_path / "g" / "grid_summary.csv")
    cells = [dict(zip(cols, r)) for r in rows]
    winner = next((c for c in cells if c["winner"] == "1"), None)
    ok = rc == 0 and winner is not None
    eta, dsq = float("nan"), []
    if ok:
        eta = float(winner["eta_max"])
        simp = int(winner["gamma_max_simp"])
        seed = cfg["experiment"]["seeds"][0]
        log = tmp_path / "g" / "cells" / f"cell{int(winner['cell']):03d}_seed{seed}" / f"epochs_seed{seed}.ndjson"
        recs = [json.loads(x) for x in log.read_text().splitlines()[1:]]
        dsq = [r["mean_delta_sq"] for r in recs if 2 <= r["gamma"] <= simp]
        ok = np.isfinite(eta) and bool(dsq) and all(v > 0 for v in dsq)
    verdict(7, ok, f"{source}, cnn_a sigma=0.5, 10% subsample, {len(cells)}-cell grid in {dt:.0f}s; "
                   f"winning eta_max={eta}, mean_delta_sq during simplification "
                   f"min={min(dsq) if dsq else float('nan'):.2e} > 0")


# 8 ---------------------------------------------------------------------

def test_8_determinism(tmp_path):
    base = load_config(Path(__file__).resolve().parents[1] / "configs" / "toy.ini")
    base = base.override("schedule", "gamma_max", 12).override("schedule", "gamma_max_simp", 8) \
               .override("schedule", "eta_max", 0.05).override("experiment", "export_frames", [])
    same = []
    for regime in ("ct", "ft", "eef", "nft"):
        cfg = base.override("training", "regime", regime)
        path = tmp_path / f"{regime}.ini"
        path.write_text(dump_config(cfg))
        logs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{regime}_{rep}"
            assert cli.main(["train", "--config", str(path), "--out", str(out)]) == 0
            logs.append(strip_wall((out / "epochs_seed0.ndjson").read_text()))
        same.append(logs[0] == logs[1] and len(logs[0]) == 13)
    verdict(8, all(same), "ct, ft, eef, nft: repeated train runs give identical NDJSON modulo wall_ms")


# 9 ---------------------------------------------------------------------

def test_9_frame_exports(tmp_path):
    frames = [1, 10, 25, 40, 51]
    cfg = (defaults().override("schedule", "gamma_max", 51).override("schedule", "gamma_max_simp", 45)
           .override("schedule", "eta_max", 0.05).override("training", "alpha", 1e-2)
           .override("training", "beta", 1e-2).override("models", "aux_hidden", 16)
           .override("experiment", "export_frames", frames).override("experiment", "seeds", [0]))
    (tmp_path / "f.ini").write_text(dump_config(cfg))
    assert cli.main(["train", "--config", str(tmp_path / "f.ini"), "--out", str(tmp_path / "run")]) == 0
    fdir = tmp_path / "run" / "frames_seed0"
    exist = all((fdir / f"{k}_g{g}.csv").exists() for g in frames for k in ("boundary", "points"))

    # replay the run in-process: the simplifier at each frame must reproduce the exported points
    ds = build_dataset(cfg)
    x, _ = ds.part(TRAIN)
    main, aux = build_networks(cfg, ds, 0)
    checks = {}

    def on_epoch_end(state):
        if state.gamma in frames:
            xt, delta = simplify(x, state.aux)
            _, _, rows = read_csv(fdir / f"points_g{state.gamma}.csv")
            pts = np.array(rows, dtype=float)
            checks[state.gamma] = (np.array_equal(x + delta, xt) and np.array_equal(pts[:, 2:4], xt)
                                   and np.array_equal(pts[:, 0:2], x))

    train(ds, main, make_run_config(cfg, 0), aux=aux, on_epoch_end=on_epoch_end)
    _, _, last = read_csv(fdir / "points_g51.csv")
    last = np.array(last, dtype=float)
    coincide = np.array_equal(last[:, 0:2], last[:, 2:4])
    _, _, mid = read_csv(fdir / "points_g40.csv")
    moved = not np.array_equal(np.array(mid, dtype=float)[:, 0:2], np.array(mid, dtype=float)[:, 2:4])
    ok = exist and len(checks) == 5 and all(checks.values()) and coincide and moved
    verdict(9, ok, f"frames {frames} written; x+delta==x_tilde exactly at every frame; "
                   f"final-frame points coincide with originals (gamma=40 points moved: {moved})")
