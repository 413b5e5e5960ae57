"""Render consensus-admm CSV artifacts into figures.

Reads the trajectory CSVs (columns k, err_x, err_u_G2, rho_k, rho_bar_k)
and the results CSVs (one row per run) written by the simulator, and
turns them into the standard study figures.  A JSON figure spec selects
the kind, the inputs, and the output image:

    {
      "kind": "error_vs_k",
      "inputs": ["out/traj_ab12_p0.01_s0.csv", "..."],
      "output": "figs/error.svg",
      "labels": ["p=0.01"],      # optional, defaults parsed from filenames
      "log_y": true,             # optional, defaults per kind
      "c_t": 0.42,               # optional, rho_vs_c marker
      "bins": 20                 # optional, errorbar_vs_kappaG
    }

Rendering is read-only over its inputs and deterministic: identical
inputs produce byte-identical SVG output.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "consensus-admm-plots"

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("error_vs_k", "rhobar_vs_k", "rho_vs_c", "errorbar_vs_kappaG")


class RenderError(Exception):
    """Bad or missing input; carries the offending path."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    labels: tuple[str, ...] | None = None
    log_y: bool | None = None
    c_t: float | None = None
    bins: int = 20

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("figure spec needs at least one input CSV")
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise ValueError("labels must match inputs one to one")

    @classmethod
    def from_json(cls, text: str) -> "FigureSpec":
        d = json.loads(text)
        return cls(
            kind=d["kind"],
            inputs=tuple(d["inputs"]),
            output=d["output"],
            labels=tuple(d["labels"]) if d.get("labels") else None,
            log_y=d.get("log_y"),
            c_t=d.get("c_t"),
            bins=int(d.get("bins", 20)),
        )


@dataclass(frozen=True)
class RenderResult:
    output: str
    n_curves: int


def read_csv_columns(path) -> dict[str, list[str]]:
    p = Path(path)
    if not p.exists():
        raise RenderError(p, "no such file")
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise RenderError(p, "empty CSV")
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                cols[name].append(row[name])
    if not next(iter(cols.values()), []):
        raise RenderError(p, "CSV has a header but no rows")
    return cols


def numeric(cols, name, path) -> np.ndarray:
    if name not in cols:
        raise RenderError(path, f"missing column {name!r}")
    try:
        return np.array(
            [float(v) if v != "" else np.nan for v in cols[name]]
        )
    except ValueError as exc:
        raise RenderError(path, f"non-numeric value in column {name!r}: {exc}") from exc


_TAG_PREFIXES = (
    ("theta", "theta="),
    ("kf", "kappa_f="),
    ("Ld", "L_d="),
    ("p", "p="),
    ("c", "c#"),
)


def label_from_filename(path) -> str:
    """Derive a legend label from the tag parts of a trajectory filename."""
    parts = Path(path).stem.split("_")
    mids = [q for q in parts[2:] if not re.fullmatch(r"s\d+", q)]
    out = []
    for q in mids:
        if q in ("admm", "dgd"):
            out.append(q.upper())
            continue
        for prefix, pretty in _TAG_PREFIXES:
            if q.startswith(prefix) and len(q) > len(prefix):
                out.append(pretty + q[len(prefix):])
                break
        else:
            out.append(q)
    return ", ".join(out) if out else Path(path).stem


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, spec: FigureSpec) -> None:
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fmt = out.suffix.lstrip(".").lower() or "svg"
    # a fixed metadata date keeps SVG output reproducible
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(out, format=fmt, metadata=metadata)
    plt.close(fig)


def _render_trajectories(spec: FigureSpec, column: str, ylabel: str) -> RenderResult:
    fig, ax = _new_axes()
    labels = spec.labels or [label_from_filename(p) for p in spec.inputs]
    n = 0
    for path, label in zip(spec.inputs, labels):
        cols = read_csv_columns(path)
        k = numeric(cols, "k", path)
        y = numeric(cols, column, path)
        keep = ~np.isnan(y)
        if not keep.any():
            raise RenderError(path, f"column {column!r} has no values")
        ax.plot(k[keep], y[keep], label=label)
        n += 1
    if spec.log_y or (spec.log_y is None and column == "err_x"):
        ax.set_yscale("log")
    ax.set_xlabel("iteration k")
    ax.set_ylabel(ylabel)
    ax.legend()
    _save(fig, spec)
    return RenderResult(output=spec.output, n_curves=n)


def render_error_vs_k(spec: FigureSpec) -> RenderResult:
    return _render_trajectories(spec, "err_x", "distance to optimum")


def render_rhobar_vs_k(spec: FigureSpec) -> RenderResult:
    return _render_trajectories(spec, "rho_bar_k", "running geometric-average rate")


def render_rho_vs_c(spec: FigureSpec) -> RenderResult:
    fig, ax = _new_axes()
    n = 0
    for path in spec.inputs:
        cols = read_csv_columns(path)
        c = numeric(cols, "c", path)
        rho = numeric(cols, "rho_bar", path)
        keep = ~(np.isnan(c) | np.isnan(rho))
        if not keep.any():
            raise RenderError(path, "no (c, rho_bar) rows")
        order = np.argsort(c[keep])
        c_sorted, rho_sorted = c[keep][order], rho[keep][order]
        ax.plot(c_sorted, rho_sorted, marker="o", ms=3,
                label=label_from_filename(path) if len(spec.inputs) > 1 else None)
        c_star = float(c_sorted[np.argmin(rho_sorted)])
        ax.axvline(c_star, color="tab:green", ls="--", label=f"c* = {c_star:.4g}")
        n += 1
    if spec.c_t is not None:
        ax.axvline(spec.c_t, color="tab:red", ls=":", label=f"c_t = {spec.c_t:.4g}")
    ax.set_xscale("log")
    ax.set_xlabel("penalty c")
    ax.set_ylabel("terminal running-average rate")
    ax.legend()
    _save(fig, spec)
    return RenderResult(output=spec.output, n_curves=n)


def render_errorbar_vs_kappaG(spec: FigureSpec) -> RenderResult:
    fig, ax = _new_axes()
    kG_all, rho_all, rho_t_all = [], [], []
    for path in spec.inputs:
        cols = read_csv_columns(path)
        kG = numeric(cols, "kappa_G", path)
        rho = numeric(cols, "rho_bar", path)
        rho_t = numeric(cols, "rho_t", path)
        keep = ~(np.isnan(kG) | np.isnan(rho))
        if not keep.any():
            raise RenderError(path, "no (kappa_G, rho_bar) rows")
        kG_all.append(kG[keep])
        rho_all.append(rho[keep])
        rho_t_all.append(rho_t[keep])
    kG = np.concatenate(kG_all)
    rho = np.concatenate(rho_all)
    rho_t = np.concatenate(rho_t_all)

    # equal-width bins in log kappa_G; whiskers span per-bin min/max
    logk = np.log10(kG)
    edges = np.linspace(logk.min(), logk.max() + 1e-12, spec.bins + 1)
    centers, means, lo, hi = [], [], [], []
    for b in range(spec.bins):
        mask = (logk >= edges[b]) & (logk < edges[b + 1])
        if not mask.any():
            continue
        centers.append(10 ** ((edges[b] + edges[b + 1]) / 2))
        means.append(rho[mask].mean())
        lo.append(means[-1] - rho[mask].min())
        hi.append(rho[mask].max() - means[-1])
    ax.errorbar(centers, means, yerr=[lo, hi], fmt="o-", ms=3, capsize=3,
                label="measured rate (min/mean/max)")
    order = np.argsort(kG)
    ax.plot(kG[order], rho_t[order], "--", color="tab:red", label="certified bound")
    ax.set_xscale("log")
    ax.set_xlabel("graph condition number")
    ax.set_ylabel("terminal running-average rate")
    ax.legend()
    _save(fig, spec)
    return RenderResult(output=spec.output, n_curves=len(centers))


_RENDERERS = {
    "error_vs_k": render_error_vs_k,
    "rhobar_vs_k": render_rhobar_vs_k,
    "rho_vs_c": render_rho_vs_c,
    "errorbar_vs_kappaG": render_errorbar_vs_kappaG,
}


def render(spec: FigureSpec) -> RenderResult:
    """Render one figure; returns the output path and curve count."""
    return _RENDERERS[spec.kind](spec)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="admm-render")
    parser.add_argument("--spec", required=True, help="JSON figure spec file")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_json(Path(args.spec).read_text())
        result = render(spec)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(result.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
