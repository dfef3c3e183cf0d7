#!/usr/bin/env python3
"""Offline figure generation from the solver CLI's CSV outputs.

Usage: python3 plots/render.py --job job.json

A job is a JSON object:
    {"kind": "heatmap" | "lines" | "bars" | "flow-panel",
     "input": "path.csv"            (or a list of paths for "lines"),
     "output": "figure.png",
     "title": "..."                 (optional),
     "labels": ["..."]              (optional, one per input for "lines")}

Expected column schemas (headers as written by the fns CLI):
    heatmap:    theta1, theta2, re, im, modulus[, label]   (fns lfa)
    lines:      step, residual, rel_residual[, ratio]      (fns solve)
                or epoch, loss[, lr, K]                    (fns train)
    bars:       scale, mu_id, iterations[, ...]            (fns sweep)
    flow-panel: stage, row, col, re, im, modulus           (fns flow)

Images are deterministic: fixed figure sizes, fixed colormap, no timestamps.
Exit codes: 0 success, 1 schema/usage error, 2 I/O or rendering failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class SchemaError(Exception):
    pass


_CMAP = "viridis"
_DPI = 120


def read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a header row")
    return rows[0], rows[1:]


def _need(header, cols, path):
    missing = [c for c in cols if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}; header is {header}")
    return [header.index(c) for c in cols]


def _col(rows, idx, cast=float):
    return np.array([cast(r[idx]) for r in rows])


def render_heatmap(job):
    path = job["input"]
    header, rows = read_csv(path)
    it1, it2, imod = _need(header, ["theta1", "theta2", "modulus"], path)
    t1 = _col(rows, it1)
    t2 = _col(rows, it2)
    mod = _col(rows, imod)
    u1 = np.unique(t1)
    u2 = np.unique(t2)
    grid = np.full((u2.size, u1.size), np.nan)
    j = np.searchsorted(u2, t2)
    i = np.searchsorted(u1, t1)
    grid[j, i] = mod
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    mesh = ax.pcolormesh(u1, u2, grid, cmap=_CMAP, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="modulus")
    ax.set_xlabel(r"$\theta_1$")
    ax.set_ylabel(r"$\theta_2$")
    ax.set_title(job.get("title", "symbol modulus"))
    return fig


def render_lines(job):
    paths = job["input"] if isinstance(job["input"], list) else [job["input"]]
    labels = job.get("labels") or [str(p) for p in paths]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for path, label in zip(paths, labels):
        header, rows = read_csv(path)
        if "rel_residual" in header:
            ix, iy = _need(header, ["step", "rel_residual"], path)
        elif "residual" in header:
            ix, iy = _need(header, ["step", "residual"], path)
        elif "loss" in header:
            ix, iy = _need(header, ["epoch", "loss"], path)
        else:
            raise SchemaError(f"{path}: expected residual-history or loss-history columns,"
                              f" got {header}")
        ax.semilogy(_col(rows, ix), np.maximum(_col(rows, iy), 1e-300), label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("value")
    ax.grid(True, which="both", alpha=0.3)
    if len(paths) > 1:
        ax.legend()
    ax.set_title(job.get("title", "convergence history"))
    return fig


def render_bars(job):
    path = job["input"]
    header, rows = read_csv(path)
    isc, iit = _need(header, ["scale", "iterations"], path)
    scale = _col(rows, isc)
    its = _col(rows, iit)
    xs = np.unique(scale)
    mean = np.array([its[scale == x].mean() for x in xs])
    std = np.array([its[scale == x].std() for x in xs])
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.errorbar(xs, mean, yerr=std, fmt="o-", capsize=4)
    ax.set_xlabel("grid size n")
    ax.set_ylabel("iterations")
    ax.set_xscale("log", base=2)
    ax.grid(True, alpha=0.3)
    ax.set_title(job.get("title", "iterations vs scale"))
    return fig


def render_flow_panel(job):
    path = job["input"]
    header, rows = read_csv(path)
    ist, ir, ic, imod = _need(header, ["stage", "row", "col", "modulus"], path)
    stages = []
    for r in rows:
        if r[ist] not in stages:
            stages.append(r[ist])
    fig, axes = plt.subplots(1, len(stages), figsize=(3.2 * len(stages), 3.2))
    axes = np.atleast_1d(axes)
    for ax, stage in zip(axes, stages):
        sel = [r for r in rows if r[ist] == stage]
        jj = _col(sel, ir, int)
        ii = _col(sel, ic, int)
        mm = _col(sel, imod)
        grid = np.zeros((jj.max() + 1, ii.max() + 1))
        grid[jj, ii] = mm
        im = ax.imshow(np.fft.fftshift(grid), cmap=_CMAP, origin="lower")
        ax.set_title(stage, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.suptitle(job.get("title", "corrector flow"))
    return fig


_KINDS = {
    "heatmap": render_heatmap,
    "lines": render_lines,
    "bars": render_bars,
    "flow-panel": render_flow_panel,
}


def render(job) -> str:
    """Render one job dict; returns the output path."""
    kind = job.get("kind")
    if kind not in _KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}; choose from {sorted(_KINDS)}")
    if "input" not in job or "output" not in job:
        raise SchemaError("job needs 'input' and 'output' paths")
    fig = _KINDS[kind](job)
    fig.savefig(job["output"], dpi=_DPI, metadata={"Software": None})
    plt.close(fig)
    return job["output"]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--job", required=True, help="path to the JSON job file")
    try:
        args = ap.parse_args(argv)
    except SystemExit:
        return 1
    try:
        with open(args.job) as fh:
            job = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load job: {exc}", file=sys.stderr)
        return 1
    try:
        out = render(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except (OSError, IOError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
