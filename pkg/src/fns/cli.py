"""Command-line surface: dataset, lfa, train, solve, sweep, verify, flow.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import families
from .checkpoint import (
    load_checkpoint,
    model_from_checkpoint,
    model_to_checkpoint,
    save_checkpoint,
)
from .config import ExperimentConfig, parse_config
from .corrector import apply_corrector, reciprocal_symbol_scale
from .dataset import dataset_generate, dataset_load
from .errors import (
    CorruptCheckpoint,
    DomainError,
    EmptyPartition,
    FnsError,
    GridMismatch,
    NonPositiveCoefficient,
    SchemaError,
    VersionMismatch,
    ZeroDiagonal,
    ZeroRhs,
)
from .hybrid import emit_corrector, solve_report, summarize_sweep, sweep_scales
from .lfa import jacobi_symbol, partition_frequencies, sampled_symbol
from .relax import SmootherSpec, smooth
from .stencils import apply_stencil
from .training import DirectModel, MetaModel, RegionSplitModel, train
from .util import fmt, write_csv
from .verify import audit


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_VALIDATION_ERRORS = (DomainError, GridMismatch, NonPositiveCoefficient, ZeroDiagonal,
                      EmptyPartition, SchemaError, ZeroRhs, VersionMismatch,
                      CorruptCheckpoint)


def _ensure_dir(path) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def _representative(cfg: ExperimentConfig):
    grid = families.make_grid(cfg.pde, cfg.n)
    params = families.sample_params(cfg.pde, cfg.seed, 0)
    return families.build_item(cfg.pde, params, grid, rhs_seed=cfg.seed + 1)


def _fresh_model(cfg: ExperimentConfig, rep_item):
    grid = rep_item.stencil.grid
    if cfg.mode == "meta":
        return MetaModel(cfg.variant if cfg.variant != "region_split" else "conv",
                         channels=cfg.channels, depth=cfg.depth, ksize=cfg.ksize,
                         seed=cfg.seed)
    if cfg.variant == "region_split":
        scales = families.region_scales(rep_item.stencil, rep_item.mask)
        return RegionSplitModel(grid, "diagonal", depth=cfg.depth, ksize=cfg.ksize,
                                scales=scales, seed=cfg.seed)
    scale = reciprocal_symbol_scale(rep_item.stencil)
    return DirectModel(grid, cfg.variant, depth=cfg.depth, ksize=cfg.ksize,
                       scale=scale, seed=cfg.seed)


def _model_for_run(cfg: ExperimentConfig, checkpoint_path, rep_item):
    if checkpoint_path:
        return model_from_checkpoint(load_checkpoint(checkpoint_path))
    return _fresh_model(cfg, rep_item)


def _corrector_for(model, item):
    rscales = (families.region_scales(item.stencil, item.mask)
               if item.mask is not None else None)
    return emit_corrector(model, item, scale=reciprocal_symbol_scale(item.stencil),
                          region_scales=rscales)


def _item_from_flags(args, fam_name, grid, mu_index=0):
    params = families.sample_params(fam_name, args.seed, mu_index)
    for key in ("xi", "eps", "wx", "wy", "m"):
        if getattr(args, key, None) is not None:
            params[key] = getattr(args, key)
    if getattr(args, "theta_frac", None) is not None:
        params["theta"] = args.theta_frac * np.pi
    if getattr(args, "coeff_seed", None) is not None:
        params["coeff_seed"] = args.coeff_seed
    if getattr(args, "blocks", None) is not None:
        params["blocks"] = args.blocks
    return families.build_item(fam_name, params, grid, rhs_seed=args.seed + 1)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_dataset(args) -> int:
    cfg = parse_config(args.config)
    out = args.out or os.path.join(cfg.out_dir, "dataset.csv")
    _ensure_dir(out)
    n = dataset_generate(cfg, out, materialize=args.materialize)
    print(f"wrote {n} records to {out}")
    return 0


def _cmd_lfa(args) -> int:
    fam = families.family(args.pde)
    grid = families.make_grid(args.pde, args.n)
    item = _item_from_flags(args, args.pde, grid)
    spec = SmootherSpec("jacobi", args.omega if args.omega is not None else fam.smoother.omega,
                        args.sweeps if args.sweeps is not None else fam.smoother.sweeps)
    if item.stencil.is_constant():
        sym = jacobi_symbol(spec, item.stencil)
    else:
        sym = sampled_symbol(spec, item.stencil, sample_stride=args.stride)
    mode = args.partition_mode or fam.partition_mode
    param = args.partition_param if args.partition_param is not None else fam.partition_param
    mask = partition_frequencies(sym, mode=mode, param=param)
    if grid.ndim == 2:
        t1, t2 = sym.thetas()
        vals, labels = sym.values, mask.h_labels
    else:
        t1 = sym.thetas()[0][None, :]
        t2 = np.zeros_like(t1)
        vals, labels = sym.values[None, :], mask.h_labels[None, :]
    rows = []
    for j in range(vals.shape[0]):
        for i in range(vals.shape[1]):
            v = vals[j, i]
            rows.append([t1[j, i], t2[j, i], v.real, v.imag, abs(v),
                         "H" if labels[j, i] else "B"])
    _ensure_dir(args.out)
    write_csv(args.out, ["theta1", "theta2", "re", "im", "modulus", "label"], rows)
    print(f"mu_B = {fmt(mask.mu_B)}  eps_B = {fmt(mask.eps_B)}  rows = {len(rows)}")
    return 0


def _cmd_train(args) -> int:
    cfg = parse_config(args.config)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ds_path = args.dataset or os.path.join(cfg.out_dir, "dataset.csv")
    if not os.path.exists(ds_path):
        dataset_generate(cfg, ds_path)
    items = dataset_load(cfg, ds_path)
    rep = items[0] if items else _representative(cfg)
    model = _fresh_model(cfg, rep)
    ck_period = cfg.train.lr_halving_period

    def snapshot(row):
        epoch, value, lr, k = row
        if epoch % ck_period == 0:
            ck = model_to_checkpoint(model, epoch=epoch, loss=value,
                                     mask_labels=_mask_labels(rep))
            save_checkpoint(os.path.join(cfg.out_dir, f"checkpoint_{epoch:05d}.fns"), ck)

    _, history = train(items, model, cfg.smoother, cfg.train, log=snapshot)
    loss_csv = os.path.join(cfg.out_dir, "loss_history.csv")
    write_csv(loss_csv, ["epoch", "loss", "lr", "K"], history)
    final = model_to_checkpoint(model, epoch=cfg.train.epochs, loss=history[-1][1],
                                mask_labels=_mask_labels(rep))
    ck_path = os.path.join(cfg.out_dir, "checkpoint.fns")
    save_checkpoint(ck_path, final)
    print(f"final loss {fmt(history[-1][1])} after {cfg.train.epochs} epochs; "
          f"checkpoint at {ck_path}")
    return 0


def _mask_labels(item):
    return None if item.mask is None else item.mask.labels.astype(np.uint8)


def _cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    if args.n:
        cfg.n = args.n
    grid = families.make_grid(cfg.pde, cfg.n)
    params = families.sample_params(cfg.pde, cfg.seed, args.mu_index)
    item = families.build_item(cfg.pde, params, grid, rhs_seed=cfg.seed + 1)
    model = _model_for_run(cfg, args.checkpoint, item)
    hc = _corrector_for(model, item)
    f = families.system_rhs(args.rhs, grid, item.stencil, seed=args.rhs_seed)
    rep = solve_report(item.stencil, f, cfg.smoother, hc, tol=args.tol, maxit=args.maxit)
    _ensure_dir(args.out)
    hist = rep.residual_history
    rows = [[k, hist[k], hist[k] / hist[0], hist[k] / hist[k - 1] if k else 1.0]
            for k in range(len(hist))]
    write_csv(args.out, ["step", "residual", "rel_residual", "ratio"], rows)
    print(f"iterations = {rep.iterations}  converged = {rep.converged}  "
          f"contraction = {fmt(rep.contraction_estimate)}")
    return 0 if rep.converged else 2


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    scales = [int(s) for s in args.scales.split(",") if s]
    if not scales:
        raise DomainError("--scales needs a comma-separated list of grid sizes")
    rep_item = _representative(cfg)
    model = _model_for_run(cfg, args.checkpoint, rep_item)
    rows = sweep_scales(cfg.pde, model, scales, n_mu=args.n_mu, tol=args.tol,
                        maxit=args.maxit, seed=cfg.seed, rhs_kind=args.rhs)
    _ensure_dir(args.out)
    write_csv(args.out, ["scale", "mu_id", "iterations", "contraction", "converged"],
              [[r["scale"], r["mu_id"], r["iterations"], r["contraction"],
                int(r["converged"])] for r in rows])
    for s in summarize_sweep(rows):
        print(f"n = {s['scale']:>4}  iterations = {s['mean']:.2f} +- {s['std']:.2f}  "
              f"all_converged = {s['all_converged']}")
    return 0


def _cmd_verify(args) -> int:
    fam = families.family(args.pde)
    grid = families.make_grid(args.pde, args.n)
    params = families.sample_params(args.pde, args.seed, args.mu_index)
    item = families.build_item(args.pde, params, grid, rhs_seed=args.seed + 1)
    if args.checkpoint:
        model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    else:
        cfg = ExperimentConfig(pde=args.pde, n=args.n, seed=args.seed,
                               variant=fam.variant, mode="direct")
        model = _fresh_model(cfg, item)
    hc = _corrector_for(model, item)
    spec = SmootherSpec("jacobi", args.omega if args.omega is not None else fam.smoother.omega,
                        args.sweeps if args.sweeps is not None else fam.smoother.sweeps)
    report = audit(item.stencil, spec, hc,
                   partition_mode=args.partition_mode or fam.partition_mode,
                   partition_param=args.partition_param
                   if args.partition_param is not None else fam.partition_param)
    text = "\n".join(report.lines())
    print(text)
    if args.out:
        _ensure_dir(args.out + ".txt")
        with open(args.out + ".txt", "w") as fh:
            fh.write(text + "\n")
        pairs = [["mu_B", report.mu_B], ["eps_B", report.eps_B], ["mu_H", report.mu_H],
                 ["C_bound", report.C_bound], ["eps_v", report.eps_v],
                 ["eps_lambda", report.eps_lambda], ["eta", report.eta],
                 ["max_support", report.max_support],
                 ["eig_condition", report.eig_condition],
                 ["empirical_contraction", report.empirical_contraction],
                 ["consistent", int(report.consistent)],
                 ["n_breaches", len(report.breaches)]]
        write_csv(args.out + ".csv", ["key", "value"], pairs)
    return 0


def _cmd_flow(args) -> int:
    cfg = parse_config(args.config)
    grid = families.make_grid(cfg.pde, cfg.n)
    params = families.sample_params(cfg.pde, cfg.seed, args.mu_index)
    item = families.build_item(cfg.pde, params, grid, rhs_seed=cfg.seed + 1)
    model = _model_for_run(cfg, args.checkpoint, item)
    hc = _corrector_for(model, item)
    f = families.system_rhs(args.rhs, grid, item.stencil, seed=cfg.seed)
    u = np.zeros(grid.shape, dtype=complex)
    if cfg.smoother.sweeps > 0:
        u = smooth(cfg.smoother, item.stencil, u, f)
    r = f - apply_stencil(item.stencil, u)
    target = hc.parts[0] if hc.variant == "region_split" else hc
    _, act = apply_corrector(target, r, capture=True)
    rows = []
    stages = [("post_f_inv", act.post_f_inv), ("post_c_star", act.post_c_star),
              ("post_lambda", act.post_lambda), ("post_c", act.post_c)]
    for name, z in stages:
        z2 = np.atleast_2d(z)
        for j in range(z2.shape[0]):
            for i in range(z2.shape[1]):
                v = z2[j, i]
                rows.append([name, j, i, v.real, v.imag, abs(v)])
    _ensure_dir(args.out)
    write_csv(args.out, ["stage", "row", "col", "re", "im", "modulus"], rows)
    print(f"wrote {len(rows)} activation samples to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    p = _Parser(prog="fns", description="FFT-based hybrid iterative solver laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dataset", help="generate a dataset CSV")
    d.add_argument("--config", required=True)
    d.add_argument("--out")
    d.add_argument("--materialize", action="store_true")

    l = sub.add_parser("lfa", help="emit the smoother-symbol CSV over the lattice")
    l.add_argument("--pde", required=True)
    l.add_argument("--n", type=int, required=True)
    l.add_argument("--omega", type=float)
    l.add_argument("--sweeps", type=int)
    l.add_argument("--stride", type=int, default=4)
    l.add_argument("--xi", type=float)
    l.add_argument("--theta-frac", dest="theta_frac", type=float)
    l.add_argument("--eps", type=float)
    l.add_argument("--wx", type=float)
    l.add_argument("--wy", type=float)
    l.add_argument("--m", type=float)
    l.add_argument("--blocks", type=int)
    l.add_argument("--coeff-seed", dest="coeff_seed", type=int)
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--partition-mode", dest="partition_mode")
    l.add_argument("--partition-param", dest="partition_param", type=float)
    l.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a corrector per the config schedule")
    t.add_argument("--config", required=True)
    t.add_argument("--dataset")

    s = sub.add_parser("solve", help="run one hybrid solve and dump the residuals")
    s.add_argument("--config", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--rhs", default="f3",
                   choices=["f1", "f2", "f3", "f4", "normal"])
    s.add_argument("--rhs-seed", dest="rhs_seed", type=int, default=0)
    s.add_argument("--mu-index", dest="mu_index", type=int, default=0)
    s.add_argument("--n", type=int)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--maxit", type=int, default=500)
    s.add_argument("--out", required=True)

    w = sub.add_parser("sweep", help="iteration counts across grid sizes")
    w.add_argument("--config", required=True)
    w.add_argument("--checkpoint")
    w.add_argument("--scales", required=True)
    w.add_argument("--n-mu", dest="n_mu", type=int, default=10)
    w.add_argument("--rhs", default="f3")
    w.add_argument("--tol", type=float, default=1e-6)
    w.add_argument("--maxit", type=int, default=500)
    w.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="assumption audit and the contraction bound")
    v.add_argument("--pde", required=True)
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--checkpoint")
    v.add_argument("--omega", type=float)
    v.add_argument("--sweeps", type=int)
    v.add_argument("--partition-mode", dest="partition_mode")
    v.add_argument("--partition-param", dest="partition_param", type=float)
    v.add_argument("--mu-index", dest="mu_index", type=int, default=0)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")

    fl = sub.add_parser("flow", help="dump corrector activations for one residual")
    fl.add_argument("--config", required=True)
    fl.add_argument("--checkpoint")
    fl.add_argument("--rhs", default="f3")
    fl.add_argument("--mu-index", dest="mu_index", type=int, default=0)
    fl.add_argument("--out", required=True)
    return p


_DISPATCH = {
    "dataset": _cmd_dataset,
    "lfa": _cmd_lfa,
    "train": _cmd_train,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "flow": _cmd_flow,
}


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _DISPATCH[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FnsError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
