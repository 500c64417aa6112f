"""``friendly`` command line: train, grid, exports, gradcheck and dataset generation."""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_network
from .config import ConfigError, defaults, load_config
from .data import SPLITS, TEST, TRAIN, VAL, load_amat, save_amat
from .engines import TrainingDiverged
from .exports import perturbation_table, write_boundary, write_csv, write_points
from .models import IDENTITY

log = logging.getLogger("friendly")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _config(args):
    cfg = load_config(args.config) if args.config else defaults()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.override("experiment", "seeds", [args.seed])
    if os.environ.get("FRIENDLY_DEBUG_CHECKS") == "1":
        cfg = cfg.override("experiment", "debug_checks", True)
    return cfg.validate()


def cmd_train(args):
    from .experiment import run_train

    cfg = _config(args)
    rows = run_train(cfg, args.out)
    for r in rows:
        print(f"seed={r['seed']} best_gamma={r['best_gamma']} best_val_error={r['best_val_error']} "
              f"best_test_error={r['best_test_error']}")
    return EXIT_OK


def cmd_grid(args):
    from .experiment import run_grid

    cfg = _config(args)
    runs, cells, winner = run_grid(cfg, args.out, jobs=args.jobs)
    failed = [r for r in runs if r["status"] != "ok"]
    print(f"{len(runs)} runs over {len(cells)} cells, {len(failed)} failed; winner cell={winner}")
    if winner is not None:
        w = cells[winner]
        print(f"winner eta_max={w['eta_max']} gamma_max_simp={w['gamma_max_simp']} beta={w['beta']} "
              f"mean_val={w['mean_val']} mean_test={w['mean_test']}")
    return EXIT_OK


def _training_points(cfg):
    from .experiment import build_dataset

    ds = build_dataset(cfg)
    return ds.part(TRAIN)


def cmd_export_boundary(args):
    main, meta = load_network(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    h = meta.get("config_hash")
    write_boundary(out / "boundary.csv", main, args.grid_res, args.bounds, h)
    if args.aux_checkpoint or args.config:
        aux = load_network(args.aux_checkpoint)[0] if args.aux_checkpoint else IDENTITY
        x, y = _training_points(_config(args))
        write_points(out / "points.csv", x, y, aux, h)
    return EXIT_OK


def cmd_export_perturbations(args):
    aux, meta = load_network(args.aux_checkpoint)
    if args.data:
        ds = load_amat(args.data, n_features=int(np.prod(aux.spec.input_shape)))
        x, y = ds.X, ds.y
    else:
        x, y = _training_points(_config(args))
    cols, rows = perturbation_table(x, y, aux, args.k, args.sample_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "perturbations.csv", cols, rows, meta.get("config_hash"))
    return EXIT_OK


def cmd_gradcheck(args):
    from .gradcheck import TOLERANCE, report

    seed = 0 if args.seed is None else args.seed
    return EXIT_OK if report(seed=seed, n_seeds=args.n_seeds, tol=TOLERANCE) else EXIT_FAIL


def cmd_gen_data(args):
    from .experiment import build_dataset

    cfg = _config(args)
    ds = build_dataset(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for code in (TRAIN, VAL, TEST):
        if ds.has_split(code):
            x, y = ds.part(code)
            path = out / f"{cfg['experiment']['name']}_{SPLITS[code]}.amat"
            save_amat(path, x, y)
            print(f"{path}: {len(y)} examples")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="friendly", description=__doc__)
    p.add_argument("--version", action="version", version=f"friendly {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, fn, help, out_required=True):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="experiment config file (INI)")
        sp.add_argument("--out", required=out_required, default=None, help="output directory")
        sp.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
        sp.set_defaults(fn=fn)
        return sp

    command("train", cmd_train, "train one configuration over its seeds")
    g = command("grid", cmd_grid, "grid search over eta_max, gamma_max_simp and beta")
    g.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    eb = command("export-boundary", cmd_export_boundary, "decision boundary and transformed points")
    eb.add_argument("--checkpoint", required=True)
    eb.add_argument("--aux-checkpoint")
    eb.add_argument("--grid-res", type=int, default=50)
    eb.add_argument("--bounds", type=float, nargs=4, default=[-1.5, 2.5, -1.0, 1.5],
                    metavar=("X1_LO", "X1_HI", "X2_LO", "X2_HI"))

    ep = command("export-perturbations", cmd_export_perturbations, "x, delta and x_tilde for k examples")
    ep.add_argument("--checkpoint", help="main network checkpoint (recorded for provenance only)")
    ep.add_argument("--aux-checkpoint", required=True)
    ep.add_argument("--data", help=".amat file to sample from (default: the config's training split)")
    ep.add_argument("--k", type=int, default=16)
    ep.add_argument("--sample-seed", type=int, default=0)

    gc = command("gradcheck", cmd_gradcheck, "finite-difference gradient suite", out_required=False)
    gc.add_argument("--n-seeds", type=int, default=20)

    command("gen-data", cmd_gen_data, "write the config's dataset as .amat splits")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"friendly {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"friendly {args.command}: training diverged at gamma={exc.gamma}; "
              f"partial logs kept in {args.out}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
