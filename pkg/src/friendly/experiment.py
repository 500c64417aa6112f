"""Config-driven runs: build data and networks, train, write NDJSON/CSV/checkpoints, run grids."""

import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import save_network
from .data import (
    TRAIN, VAL, _round_half_up, assign_splits, gen_blobs, gen_two_moons, inject_label_noise,
    load_amat_splits, rng_for, subsample,
)
from .engines import RunConfig, Trainer
from .exports import write_boundary, write_csv, write_points
from .models import AuxNetSpec, ClassifierSpec, build_auxiliary, build_classifier
from .schedule import SchedulePlan

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "config_hash", "regime", "seed", "status", "epochs", "best_gamma", "best_val_error",
    "best_test_error", "final_train_error", "final_val_error", "final_test_error",
]
EEF_NOTE = "eef participation rule is an approximation of the easy-examples-first baseline"


def _split_train_for_val(ds, val_fraction, seed):
    train = ds.indices(TRAIN)
    n_val = _round_half_up(val_fraction * len(train))
    pick = rng_for(seed, 4).permutation(train)[:n_val]
    split = ds.split.copy()
    split[pick] = VAL
    return replace(ds, split=split)


def build_dataset(cfg):
    d = cfg["data"]
    src = d["source"]
    if src == "two_moons":
        ds = gen_two_moons(d["n"], d["noise_std"], d["seed"])
        ds = assign_splits(ds, d["val_fraction"], d["test_fraction"], d["seed"])
    elif src == "blobs":
        ds = gen_blobs(d["n"], d["d"], d["num_classes"], d["separation"], d["noise_std"], d["seed"])
        ds = assign_splits(ds, d["val_fraction"], d["test_fraction"], d["seed"])
    elif src == "amat":
        if not d["amat_train"] or not d["amat_test"]:
            raise ValueError("[data] amat source needs amat_train and amat_test")
        ds = load_amat_splits(d["amat_train"], d["amat_test"], d["amat_valid"], d["n_features"])
        if not ds.has_split(VAL):
            ds = _split_train_for_val(ds, d["val_fraction"], d["seed"])
    else:
        raise ValueError(f"[data] unknown source {src!r}")
    if d["subsample"] < 1.0:
        ds = subsample(ds, d["subsample"], d["seed"])
    if d["label_noise"] > 0:
        ds = inject_label_noise(ds, d["label_noise"], d["seed"])
    return ds.astype(np.dtype(cfg["models"]["dtype"]))


def build_networks(cfg, ds, seed):
    m = cfg["models"]
    dtype = np.dtype(m["dtype"])
    main = build_classifier(ClassifierSpec(m["classifier"], ds.input_shape, ds.num_classes,
                                           m["scale"], m["hidden"], m["dropout"]), seed, dtype)
    aux = None
    if cfg["training"]["regime"] == "nft":
        aux = build_auxiliary(AuxNetSpec(m["aux"], ds.input_shape, m["aux_hidden"], m["aux_n_f"],
                                         m["aux_depth"], m["aux_scale"], m["aux_residual"],
                                         m["aux_activation"]), [seed, 1], dtype)
        if m["aux_frozen"]:
            aux.params.freeze()
    return main, aux


def make_run_config(cfg, seed):
    s, t = cfg["schedule"], cfg["training"]
    plan = SchedulePlan(s["gamma_max"], s["gamma_max_simp"], s["eta_max"])
    return RunConfig(
        regime=t["regime"], plan=plan, batch_size=t["batch_size"], alpha=t["alpha"],
        beta=t["beta"], seed=seed, epochs=t["epochs"], ft_tau_max=t["ft_tau_max"],
        ft_step=t["ft_step"], ft_eps_stop=t["ft_eps_stop"], eef_p0=t["eef_p0"],
        eval_every=t["eval_every"], reset_adam_on_drop=t["reset_adam_on_drop"],
        debug_checks=cfg["experiment"]["debug_checks"] or os.environ.get("FRIENDLY_DEBUG_CHECKS") == "1",
    )


def _header(cfg, seed):
    head = {"config_hash": cfg.hash(), "version": __version__, "regime": cfg["training"]["regime"],
            "seed": seed}
    if cfg["training"]["regime"] == "eef":
        head["note"] = EEF_NOTE
    return head


def run_single(cfg, seed, out_dir, ds=None):
    """Train one seed and write its artifacts; returns the summary row as a dict.

    Epoch records are streamed to ``epochs_seed<seed>.ndjson`` so a
    diverging run leaves its partial log behind before the error propagates.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg) if ds is None else ds
    main, aux = build_networks(cfg, ds, seed)
    rc = make_run_config(cfg, seed)
    h = cfg.hash()
    exp = cfg["experiment"]
    frames = {int(g) for g in exp["export_frames"]}
    frame_dir = out / f"frames_seed{seed}"
    x_train, y_train = ds.part(TRAIN)

    def on_epoch_end(state):
        if state.gamma in frames and ds.dim == 2:
            frame_dir.mkdir(exist_ok=True)
            extra = {"gamma": state.gamma, "phase": state.phase}
            write_boundary(frame_dir / f"boundary_g{state.gamma}.csv", state.main,
                           exp["frame_grid_res"], exp["frame_bounds"], h, **extra)
            write_points(frame_dir / f"points_g{state.gamma}.csv", x_train, y_train,
                         state.aux, h, **extra)

    log_path = out / f"epochs_seed{seed}.ndjson"
    with open(log_path, "w") as fh:
        fh.write(json.dumps({"header": _header(cfg, seed)}, sort_keys=True) + "\n")

        def on_epoch(rec):
            fh.write(json.dumps(rec.to_dict()) + "\n")
            fh.flush()

        result = Trainer(ds, main, rc, aux=aux, on_epoch=on_epoch, on_epoch_end=on_epoch_end).run()

    best = result.best
    save_network(out / f"best_seed{seed}.ckpt", _with_params(main, best.params),
                 config_hash=h, version=__version__, gamma=best.gamma)
    save_network(out / f"final_seed{seed}.ckpt", main, config_hash=h, version=__version__,
                 gamma=len(result.records))
    if aux is not None:
        save_network(out / f"best_aux_seed{seed}.ckpt", _with_params(aux, best.aux_params),
                     config_hash=h, version=__version__, gamma=best.gamma)
        save_network(out / f"final_aux_seed{seed}.ckpt", aux, config_hash=h,
                     version=__version__, gamma=len(result.records))
    last = result.records[-1] if result.records else None
    best_rec = result.records[best.gamma - 1] if best.gamma else None
    return {
        "config_hash": h, "regime": rc.regime, "seed": seed, "status": "ok",
        "epochs": len(result.records), "best_gamma": best.gamma,
        "best_val_error": best.val_error,
        "best_test_error": best_rec.test_error if best_rec else None,
        "final_train_error": last.train_error if last else None,
        "final_val_error": last.val_error if last else None,
        "final_test_error": last.test_error if last else None,
    }


def _with_params(net, params):
    clone = type(net)(net.spec, params, net._forward)
    return clone


def _row(d):
    return ["" if d.get(c) is None else d[c] for c in SUMMARY_COLUMNS]


def aggregate(rows):
    """Mean and population std of best val/test errors over the ok rows."""
    ok = [r for r in rows if r["status"] == "ok" and r["best_val_error"] is not None]
    if not ok:
        return {"n_seeds": 0, "mean_val": None, "std_val": None, "mean_test": None, "std_test": None}
    val = np.array([r["best_val_error"] for r in ok], dtype=float)
    test = np.array([np.nan if r["best_test_error"] is None else r["best_test_error"] for r in ok])
    return {"n_seeds": len(ok), "mean_val": float(val.mean()), "std_val": float(val.std()),
            "mean_test": float(np.mean(test)), "std_test": float(np.std(test))}


def write_summary(out_dir, cfg, rows):
    out = Path(out_dir)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, [_row(r) for r in rows], cfg.hash())
    agg = aggregate(rows)
    cols = ["config_hash", "n_seeds", "mean_val", "std_val", "mean_test", "std_test"]
    write_csv(out / "aggregate.csv", cols, [[cfg.hash()] + [
        "" if agg[c] is None else agg[c] for c in cols[1:]]], cfg.hash(), std="population")
    return agg


def run_train(cfg, out_dir, seeds=None):
    seeds = list(cfg["experiment"]["seeds"] if seeds is None else seeds)
    ds = build_dataset(cfg)
    rows = [run_single(cfg, s, Path(out_dir), ds) for s in seeds]
    write_summary(out_dir, cfg, rows)
    return rows


# -------------------------------------------------------------------- grid

def grid_cells(cfg):
    """Cell configs in lexicographic (eta_max, gamma_max_simp, beta) order."""
    g = cfg["grid"]
    gmax = cfg["schedule"]["gamma_max"]
    cells = []
    for eta, frac, beta in itertools.product(sorted(g["eta_max"]), sorted(g["gamma_max_simp_frac"]),
                                             sorted(g["beta"])):
        simp = _round_half_up(frac * gmax)
        c = cfg.override("schedule", "eta_max", float(eta))
        c = c.override("schedule", "gamma_max_simp", simp)
        c = c.override("training", "beta", float(beta))
        cells.append(({"eta_max": float(eta), "gamma_max_simp": simp, "beta": float(beta)}, c))
    return cells


def _grid_job(args):
    cell_id, params, cell_cfg, seed, out_dir = args
    try:
        row = run_single(cell_cfg, seed, Path(out_dir) / "cells" / f"cell{cell_id:03d}_seed{seed}")
    except Exception as exc:  # a failing cell must not stop the grid
        row = {"config_hash": cell_cfg.hash(), "regime": cell_cfg["training"]["regime"],
               "seed": seed, "status": f"failed: {type(exc).__name__}: {exc}"}
    return dict(row, cell=cell_id, **params)


def run_grid(cfg, out_dir, jobs=1, seeds=None):
    """One run per (cell, seed); returns ``(run_rows, cell_rows, winner_index)``."""
    seeds = sorted(cfg["experiment"]["seeds"] if seeds is None else seeds)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = grid_cells(cfg)
    jobs_list = [(i, p, c, s, str(out)) for i, (p, c) in enumerate(cells) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_grid_job, jobs_list))
    else:
        runs = [_grid_job(j) for j in jobs_list]
    axis_cols = ["cell", "eta_max", "gamma_max_simp", "beta"]
    write_csv(out / "grid_runs.csv", axis_cols + SUMMARY_COLUMNS,
              [[r[c] for c in axis_cols] + _row(r) for r in runs], cfg.hash())
    cell_rows = []
    for i, (p, c) in enumerate(cells):
        agg = aggregate([r for r in runs if r["cell"] == i])
        cell_rows.append(dict(p, cell=i, config_hash=c.hash(), **agg))
    winner = select_winner(cell_rows)
    cols = axis_cols + ["config_hash", "n_seeds", "mean_val", "std_val", "mean_test", "std_test", "winner"]
    write_csv(out / "grid_summary.csv", cols,
              [[("" if r[c] is None else r[c]) for c in cols[:-1]] + [int(r["cell"] == winner)]
               for r in cell_rows], cfg.hash(), std="population")
    return runs, cell_rows, winner


def select_winner(cell_rows):
    """Cell with the lowest mean validation error; ties go to the earliest cell."""
    best, best_val = None, None
    for r in cell_rows:
        if r["mean_val"] is None:
            continue
        if best_val is None or r["mean_val"] < best_val:
            best, best_val = r["cell"], r["mean_val"]
    return best
