"""Artifact writers: delimited output, JSON reports, and figures.

Everything here is deterministic: fixed 12-significant-digit number
formatting, sorted JSON keys, no timestamps, and figure metadata stripped,
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .ergodic import ConvenientReport, DensityTrace, IntersectionRow, StaircaseTrial, RecurrenceHit

_FIG_DPI = 100


def fmt_number(v) -> str:
    """Canonical cell format: integers bare, reals at 12 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_number(v) if not isinstance(v, str) else v
                              for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if np.isnan(v) else v
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, obj: dict) -> Path:
    path.write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def write_manifest(path: Path, config: dict) -> Path:
    """Run manifest: config echo plus library version.  Wall time is kept
    out so reruns are byte-identical."""
    return write_json(path, {"config": config, "version": __version__})


def _new_fig():
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=_FIG_DPI)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def fig_trace(trace: DensityTrace, predicted: Optional[float], path: Path,
              ylabel: str = "ratio") -> Path:
    fig, ax = _new_fig()
    ax.plot(trace.ts, trace.ratios, marker="o", ms=3, lw=1, label="empirical")
    if predicted is not None:
        ax.axhline(predicted, color="C3", ls="--", lw=1, label="predicted")
    ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend()
    return _save(fig, path)


def fig_intersection(rows: Sequence[IntersectionRow], path: Path) -> Path:
    fig, ax = _new_fig()
    trials = [r.trial for r in rows]
    ax.plot(trials, [r.predicted for r in rows], "o", ms=4, label="predicted")
    ax.plot(trials, [r.empirical for r in rows], "x", ms=5, label="empirical")
    ax.set_xlabel("trial")
    ax.set_ylabel("intersection density")
    ax.legend()
    return _save(fig, path)


def fig_staircase(trials: Sequence[StaircaseTrial], path: Path) -> Path:
    fig, ax = _new_fig()
    for t in trials:
        if t.steps:
            ax.plot([s.k for s in t.steps], [s.g_norm for s in t.steps],
                    marker="o", ms=3, lw=1, alpha=0.6)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("|g|")
    return _save(fig, path)


def fig_hits(hits: Sequence[RecurrenceHit], path: Path) -> Path:
    fig, ax = _new_fig()
    ax.plot([h.g_norm for h in hits], [h.internal_norm for h in hits],
            ".", ms=2, alpha=0.5)
    ax.set_xlabel("|g|")
    ax.set_ylabel("internal displacement")
    return _save(fig, path)


def fig_convenient(report: ConvenientReport, path: Path) -> Path:
    fig, ax = _new_fig()
    ns = [r.n for r in report.rows]
    ax.loglog(ns, [r.eps for r in report.rows], marker="o", ms=3, lw=1,
              label="measured eps_n")
    ax.set_xlabel("n")
    ax.set_ylabel("eps_n")
    ax.legend()
    return _save(fig, path)


def fig_bars(labels: Sequence[str], values: Sequence[float], path: Path,
             errs: Optional[Sequence[float]] = None,
             ylabel: str = "value") -> Path:
    fig, ax = _new_fig()
    x = np.arange(len(labels))
    ax.bar(x, values, yerr=errs, capsize=4, width=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def fig_points(points: np.ndarray, path: Path) -> Path:
    fig, ax = _new_fig()
    if points.shape[1] == 1:
        ax.plot(points[:, 0], np.zeros(len(points)), "|", ms=12)
        ax.set_yticks([])
        ax.set_xlabel("x")
    else:
        ax.plot(points[:, 0], points[:, 1], ".", ms=3)
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
        ax.set_aspect("equal")
    return _save(fig, path)


def fig_gap_histogram(gaps: np.ndarray, path: Path) -> Path:
    fig, ax = _new_fig()
    ax.hist(gaps, bins=40)
    ax.set_xlabel("nearest-neighbor distance")
    ax.set_ylabel("count")
    return _save(fig, path)


def density_trace_rows(trace: DensityTrace) -> List[Sequence]:
    return trace.rows()


DENSITY_HEADER = ["t", "count", "volume", "ratio"]
INTERSECTION_HEADER = ["trial", "predicted", "empirical", "rel_err"]
STAIRCASE_HEADER = ["trial", "k", "eps", "g_norm", "internal_norm", "patch_dist_max"]
