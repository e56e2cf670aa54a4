"""Config-driven experiment runner.

`meyerlab run <config>` executes one named experiment from a JSON (canonical)
or TOML config and writes CSV/JSON artifacts, a figure, and a manifest into
the output directory.  Identical (config, seed) runs produce byte-identical
artifacts regardless of MEYERLAB_THREADS.  Exit codes: 0 all assertions
pass, 1 an assertion or experiment fails, 2 configuration problems.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import report
from .errors import ConfigError, MeyerlabError
from .euclid import Box, box_intersect, centered_box
from .cutproject import (
    Scheme,
    TransversalPoint,
    _sample_transversal,
    internal_infimum_trace,
    intersection_window,
    load_scheme,
    model_set,
    predicted_density,
)
from .pointset import (
    accumulation_margin,
    approx_subgroup_witness,
    covering_radius,
    difference_set,
    iterated_sumset,
    min_gap,
    nearest_distances,
)
from .transverse import (
    box_indicator_fn,
    stages_check,
    verify_transverse_identity,
)
from .ergodic import (
    ConvenientSequence,
    geometric_grid,
    intersection_trial,
    lower_density,
    poincare_trial,
    recurrence_search,
    transversal_average,
    verify_convenient,
)

Assertion = Tuple[str, bool, str]

EXPERIMENTS = (
    "gen", "check-delone", "check-approx-lattice", "density",
    "intersect-density", "recurrence", "poincare", "ergodic-avg",
    "transverse-identity", "stages-check", "verify-convenient",
)


@dataclass(frozen=True)
class ExperimentConfig:
    scheme_path: str
    experiment: str
    params: dict
    output_dir: str
    raw: dict


@dataclass(frozen=True)
class RunReport:
    artifacts: List[Path]
    assertions: List[Assertion]
    wall_time: float

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.assertions)


def _threads() -> int:
    raw = os.environ.get("MEYERLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MEYERLAB_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _map_trials(fn: Callable, items: Sequence) -> List:
    """Order-preserving map; worker count never changes results."""
    n = _threads()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _trial_seeds(seed: int, trials: int) -> List[int]:
    return [int(child.generate_state(1)[0])
            for child in np.random.SeedSequence(seed).spawn(trials)]


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------

# kinds: posint, posreal, real, vec, posvec, box, vecs
_SCHEMAS: Dict[str, Dict[str, Tuple[str, bool]]] = {
    "gen": {"seed": ("posint", True), "t": ("posreal", True),
            "w": ("vec", False), "eta": ("posreal", False)},
    "check-delone": {"seed": ("posint", True), "t": ("posreal", True),
                     "w": ("vec", False), "eta": ("posreal", False),
                     "grid_step": ("posreal", False)},
    "check-approx-lattice": {"seed": ("posint", True), "t": ("posreal", True),
                             "w": ("vec", False), "eta": ("posreal", False),
                             "radius": ("posreal", False),
                             "power_radius": ("posreal", False),
                             "witness_radii": ("posvec", False)},
    "density": {"seed": ("posint", True), "t_max": ("posreal", True),
                "w": ("vec", False), "eta": ("posreal", False),
                "grid_count": ("posint", False), "t_grid": ("posvec", False),
                "tol": ("posreal", False)},
    "intersect-density": {"seed": ("posint", True), "r": ("posint", True),
                          "trials": ("posint", True), "t_max": ("posreal", True),
                          "grid_count": ("posint", False),
                          "t_grid": ("posvec", False),
                          "eta": ("posreal", False), "tol": ("posreal", False)},
    "recurrence": {"seed": ("posint", True), "r": ("posint", True),
                   "trials": ("posint", True), "eps": ("posreal", True),
                   "min_norm": ("posreal", True), "t_max": ("posreal", True),
                   "eta": ("posreal", False), "count_tol": ("posreal", False)},
    "poincare": {"seed": ("posint", True), "trials": ("posint", True),
                 "eps_schedule": ("posvec", True), "eta": ("posreal", False),
                 "t_max": ("posreal", False)},
    "ergodic-avg": {"seed": ("posint", True), "t_max": ("posreal", True),
                    "box": ("box", True), "w": ("vec", False),
                    "eta": ("posreal", False), "grid_count": ("posint", False),
                    "t_grid": ("posvec", False), "tol": ("posreal", False)},
    "transverse-identity": {"seed": ("posint", True),
                            "n_samples": ("posint", True),
                            "box_g": ("box", True), "box_w": ("box", True),
                            "value": ("real", False),
                            "z_max": ("posreal", False)},
    "stages-check": {"seed": ("posint", True), "r": ("posint", True),
                     "n_samples": ("posint", True), "t": ("posreal", False),
                     "A": ("box", True), "ws": ("vecs", False),
                     "eta": ("posreal", False),
                     "probe_side": ("posreal", False),
                     "hit_side": ("posreal", False),
                     "rel_tol": ("posreal", False)},
    "verify-convenient": {"seed": ("posint", True), "d": ("posint", True),
                          "t_min": ("posreal", True), "t_max": ("posreal", True),
                          "grid_count": ("posint", False),
                          "n_max": ("posint", True)},
}


def _check_kind(exp: str, key: str, value, kind: str) -> None:
    def fail(need: str) -> None:
        raise ConfigError(f"param '{key}' of experiment '{exp}' must be {need}")

    if kind == "posint":
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            fail("a positive integer")
    elif kind == "posreal":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
            fail("a positive number")
    elif kind == "real":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
    elif kind == "vec":
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in value)):
            fail("a list of numbers")
    elif kind == "posvec":
        _check_kind(exp, key, value, "vec")
        if not all(v > 0 for v in value):
            fail("a list of positive numbers")
    elif kind == "box":
        if (not isinstance(value, dict) or set(value) != {"lo", "hi"}):
            fail('{"lo": [...], "hi": [...]}')
        _check_kind(exp, key, value["lo"], "vec")
        _check_kind(exp, key, value["hi"], "vec")
        if len(value["lo"]) != len(value["hi"]):
            fail("a box with matching lo/hi lengths")
    elif kind == "vecs":
        if not isinstance(value, list) or not value:
            fail("a list of vectors")
        for v in value:
            _check_kind(exp, key, v, "vec")
    else:  # pragma: no cover - schema typo guard
        raise AssertionError(kind)


def validate_params(experiment: str, params: dict) -> None:
    schema = _SCHEMAS[experiment]
    for key in params:
        if key not in schema:
            raise ConfigError(
                f"unknown param '{key}' for experiment '{experiment}'")
    for key, (kind, required) in schema.items():
        if key not in params:
            if required:
                raise ConfigError(
                    f"experiment '{experiment}' requires param '{key}'")
            continue
        _check_kind(experiment, key, params[key], kind)


def load_config(path: str) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        if p.suffix.lower() == ".toml":
            with open(p, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            raw = json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"config does not parse: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table/object")
    allowed = {"scheme_path", "experiment", "params", "output_dir"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown config key '{key}'")
    for key in ("scheme_path", "experiment", "output_dir"):
        if key not in raw or not isinstance(raw[key], str):
            raise ConfigError(f"config key '{key}' must be a string")
    if raw["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{raw['experiment']}'")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("config key 'params' must be a table/object")
    validate_params(raw["experiment"], params)
    return ExperimentConfig(scheme_path=raw["scheme_path"],
                            experiment=raw["experiment"], params=params,
                            output_dir=raw["output_dir"], raw=raw)


def _box_param(value: dict) -> Box:
    return Box(value["lo"], value["hi"])


def _default_eta(scheme: Scheme) -> float:
    return 0.05 * float(np.min(scheme.window.sides))


def _pick_w(scheme: Scheme, params: dict) -> TransversalPoint:
    if "w" in params:
        return TransversalPoint.of(scheme, np.asarray(params["w"], dtype=float))
    rng = np.random.default_rng(params["seed"])
    return _sample_transversal(scheme, rng, params.get("eta", _default_eta(scheme)))


def _grid(scheme_dim: int, params: dict) -> ConvenientSequence:
    if "t_grid" in params:
        return ConvenientSequence(scheme_dim, np.asarray(params["t_grid"], dtype=float))
    t_max = float(params["t_max"])
    count = int(params.get("grid_count", 16))
    t_min = max(10.0, t_max / 100.0)
    return geometric_grid(t_min, t_max, count, scheme_dim)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------


def _run_gen(scheme: Scheme, params: dict, outdir: Path):
    z = _pick_w(scheme, params)
    patch = model_set(scheme, z, centered_box(float(params["t"]), scheme.d))
    rows = [tuple(c) + tuple(x) for c, x in zip(patch.coeffs, patch.points)]
    header = [f"c{i}" for i in range(scheme.dim_total)] + \
             [f"x{i}" for i in range(scheme.d)]
    arts = [report.write_csv(outdir / "points.csv", header, rows),
            report.fig_points(patch.points, outdir / "points.png"),
            report.write_json(outdir / "report.json",
                              {"w": z.w, "size": patch.size,
                               "predicted_density": predicted_density(scheme)})]
    return [("nonempty patch", patch.size > 0, f"{patch.size} points")], arts


def _run_check_delone(scheme: Scheme, params: dict, outdir: Path):
    z = _pick_w(scheme, params)
    t = float(params["t"])
    patch = model_set(scheme, z, centered_box(t, scheme.d))
    gap = min_gap(patch)
    inner = centered_box(0.9 * t, scheme.d)
    step = float(params.get("grid_step", t / 500.0))
    cover = covering_radius(patch, inner, step)
    emp = patch.size / (2.0 * t) ** scheme.d
    arts = [report.write_json(outdir / "report.json",
                              {"w": z.w, "size": patch.size, "min_gap": gap,
                               "covering_radius": cover,
                               "empirical_density": emp,
                               "predicted_density": predicted_density(scheme)}),
            report.fig_gap_histogram(nearest_distances(patch), outdir / "gaps.png")]
    checks = [("uniformly discrete", gap > 0.0, f"min gap {gap:.6g}"),
              ("relatively dense", np.isfinite(cover) and cover < t,
               f"covering radius {cover:.6g}")]
    return checks, arts


def _run_check_approx_lattice(scheme: Scheme, params: dict, outdir: Path):
    z = _pick_w(scheme, params)
    t = float(params["t"])
    patch = model_set(scheme, z, centered_box(t, scheme.d))
    # half-integer default so exact-lattice schemes truncate symmetrically
    radius = float(params.get("radius", min(100.5, t)))
    lam = difference_set(patch, radius)
    power_radius = float(params.get("power_radius", radius / 3.2))
    lam3 = iterated_sumset(lam, 3, power_radius)
    margin = accumulation_margin(lam3, lam3, power_radius)
    witness_radii = [float(v) for v in params.get("witness_radii", [25.0, 50.0])]
    if 2.0 * max(witness_radii) > radius:
        raise ConfigError("witness_radii: doubling the largest value must stay "
                          "within radius (got %g vs %g)"
                          % (max(witness_radii), radius))
    witnesses = [approx_subgroup_witness(lam, wr) for wr in witness_radii]
    gap_lam = min_gap(lam)
    gap_lam3 = min_gap(lam3)
    f_sizes = [len(w.F) for w in witnesses]
    arts = [report.write_json(outdir / "report.json", {
                "w": z.w, "lambda_size": lam.size, "lambda3_size": lam3.size,
                "min_gap_lambda": gap_lam, "min_gap_lambda3": gap_lam3,
                "accumulation_margin": margin,
                "witness_radii": witness_radii, "witness_f_sizes": f_sizes,
                "witness_ok": [w.ok for w in witnesses]}),
            report.fig_bars(["gap" , "gap^3", "margin"],
                            [gap_lam, gap_lam3, margin], outdir / "gaps.png")]
    checks = [
        ("difference set uniformly discrete", gap_lam > 0, f"{gap_lam:.6g}"),
        ("third power uniformly discrete", gap_lam3 > 0, f"{gap_lam3:.6g}"),
        ("no accumulation at 0", margin > 0, f"{margin:.6g}"),
        ("witness succeeds at every radius", all(w.ok for w in witnesses),
         f"|F| = {f_sizes}"),
        ("witness size radius-stable", len(set(f_sizes)) == 1, f"{f_sizes}"),
    ]
    return checks, arts


def _run_density(scheme: Scheme, params: dict, outdir: Path):
    z = _pick_w(scheme, params)
    seq = _grid(scheme.d, params)
    trace = lower_density(partial(model_set, scheme, z), seq)
    pred = predicted_density(scheme)
    rel = abs(trace.estimate - pred) / pred
    tol = float(params.get("tol", 0.01))
    arts = [report.write_csv(outdir / "trace.csv", report.DENSITY_HEADER, trace.rows()),
            report.fig_trace(trace, pred, outdir / "trace.png", "density"),
            report.write_json(outdir / "report.json",
                              {"w": z.w, "estimate": trace.estimate,
                               "predicted": pred, "rel_err": rel})]
    return [("density matches window volume", rel <= tol,
             f"rel err {rel:.6g} vs tol {tol:g}")], arts


def _run_intersect_density(scheme: Scheme, params: dict, outdir: Path):
    r = int(params["r"])
    trials = int(params["trials"])
    seq = _grid(scheme.d, params)
    eta = float(params.get("eta", _default_eta(scheme)))
    tol = float(params.get("tol", 0.02))
    seeds = _trial_seeds(int(params["seed"]), trials)
    rows = _map_trials(
        lambda it: intersection_trial(scheme, r, seq, it[1], eta, trial=it[0]),
        list(enumerate(seeds)))
    max_rel = max(row.rel_err for row in rows)
    arts = [report.write_csv(outdir / "table.csv", report.INTERSECTION_HEADER,
                             [(row.trial, row.predicted, row.empirical, row.rel_err)
                              for row in rows]),
            report.fig_intersection(rows, outdir / "table.png"),
            report.write_json(outdir / "report.json",
                              {"r": r, "trials": trials, "eta": eta,
                               "max_rel_err": max_rel,
                               "min_predicted": min(row.predicted for row in rows)})]
    checks = [("all predicted densities positive",
               all(row.predicted > 0 for row in rows),
               f"min {min(row.predicted for row in rows):.6g}"),
              ("empirical within tolerance of predicted", max_rel <= tol,
               f"max rel err {max_rel:.6g} vs tol {tol:g}")]
    return checks, arts


def _recurrence_trial(scheme: Scheme, r: int, eps: float, min_norm: float,
                      t_max: float, eta: float, item):
    trial, seed = item
    rng = np.random.default_rng(seed)
    zs = [_sample_transversal(scheme, rng, eta) for _ in range(r)]
    hits = recurrence_search(scheme, zs, eps, min_norm, t_max,
                             diag_limit=3 if trial == 0 else 0)
    vol = box_intersect(intersection_window(scheme, zs),
                        centered_box(eps, scheme.m)).volume
    expected = (2.0 * t_max) ** scheme.d * vol / scheme.covolume
    return trial, zs, hits, expected


def _run_recurrence(scheme: Scheme, params: dict, outdir: Path):
    r = int(params["r"])
    trials = int(params["trials"])
    eps = float(params["eps"])
    min_norm = float(params["min_norm"])
    t_max = float(params["t_max"])
    eta = float(params.get("eta", _default_eta(scheme)))
    if eta <= eps:
        raise ConfigError("param 'eta' must exceed 'eps' to guarantee hits")
    count_tol = float(params.get("count_tol", 0.25))
    seeds = _trial_seeds(int(params["seed"]), trials)
    results = _map_trials(
        partial(_recurrence_trial, scheme, r, eps, min_norm, t_max, eta),
        list(enumerate(seeds)))
    table = []
    ok_all = True
    max_internal = 0.0
    worst_count = 0.0
    for trial, zs, hits, expected in results:
        n = len(hits)
        ok_all &= n >= 1
        mi = max(h.internal_norm for h in hits)
        max_internal = max(max_internal, mi)
        rel = abs(n - expected) / expected
        worst_count = max(worst_count, rel)
        table.append((trial, n, expected, rel, min(h.g_norm for h in hits), mi))
    first = results[0][2]
    arts = [report.write_csv(outdir / "trials.csv",
                             ["trial", "n_hits", "expected", "rel_err",
                              "min_g_norm", "max_internal"], table),
            report.write_csv(outdir / "hits.csv",
                             ["g_norm", "internal_norm", "patch_dist_max"],
                             [(h.g_norm, h.internal_norm,
                               float(np.nanmax(h.patch_dists))
                               if np.any(np.isfinite(h.patch_dists)) else float("nan"))
                              for h in first[:200]]),
            report.fig_hits(first, outdir / "hits.png"),
            report.write_json(outdir / "report.json",
                              {"trials": trials, "r": r, "eps": eps,
                               "min_norm": min_norm, "t_max": t_max,
                               "all_trials_hit": bool(ok_all),
                               "max_internal_norm": max_internal,
                               "worst_count_rel_err": worst_count})]
    checks = [("every trial finds a simultaneous return", ok_all,
               f"{trials} trials"),
              ("internal displacement below eps", max_internal < eps,
               f"max {max_internal:.6g} < {eps:g}"),
              ("hit counts near the window-volume prediction",
               worst_count <= count_tol,
               f"worst rel err {worst_count:.6g} vs tol {count_tol:g}")]
    return checks, arts


def _run_poincare(scheme: Scheme, params: dict, outdir: Path):
    trials = int(params["trials"])
    schedule = [float(v) for v in params["eps_schedule"]]
    eta = float(params.get("eta", _default_eta(scheme)))
    t_max = float(params.get("t_max", 1.0e5))
    if schedule and eta <= schedule[0]:
        raise ConfigError("param 'eta' must exceed the largest eps")
    seeds = _trial_seeds(int(params["seed"]), trials)
    results = _map_trials(
        lambda it: poincare_trial(scheme, schedule, it[1], eta, t_max, trial=it[0]),
        list(enumerate(seeds)))
    rows = [(t.trial, s.k, s.eps, s.g_norm, s.internal_norm, s.patch_dist)
            for t in results for s in t.steps]
    complete = all(t.complete for t in results)
    arts = [report.write_csv(outdir / "staircase.csv", report.STAIRCASE_HEADER, rows),
            report.fig_staircase(results, outdir / "staircase.png"),
            report.write_json(outdir / "report.json",
                              {"trials": trials, "eps_schedule": schedule,
                               "t_max": t_max, "all_complete": complete})]
    return [("every staircase completes", complete,
             f"{trials} trials x {len(schedule)} steps")], arts


def _run_ergodic_avg(scheme: Scheme, params: dict, outdir: Path):
    z = _pick_w(scheme, params)
    seq = _grid(scheme.d, params)
    box = _box_param(params["box"])
    if box.dim != scheme.m:
        raise ConfigError("param 'box' must have the window dimension")
    lo, hi = box.lo, box.hi

    def f(ws: np.ndarray) -> np.ndarray:
        return np.all((ws >= lo) & (ws < hi), axis=1).astype(float)

    trace = transversal_average(scheme, z, f, seq)
    pred = box_intersect(box, scheme.window).volume / scheme.covolume
    rel = abs(trace.estimate - pred) / pred if pred else abs(trace.estimate)
    tol = float(params.get("tol", 0.01))
    arts = [report.write_csv(outdir / "trace.csv", report.DENSITY_HEADER, trace.rows()),
            report.fig_trace(trace, pred, outdir / "trace.png", "average"),
            report.write_json(outdir / "report.json",
                              {"w": z.w, "estimate": trace.estimate,
                               "predicted": pred, "rel_err": rel})]
    return [("transversal average matches the window integral", rel <= tol,
             f"rel err {rel:.6g} vs tol {tol:g}")], arts


def _run_transverse_identity(scheme: Scheme, params: dict, outdir: Path):
    f = box_indicator_fn(_box_param(params["box_g"]), _box_param(params["box_w"]),
                         value=float(params.get("value", 1.0)))
    rep = verify_transverse_identity(scheme, f, int(params["n_samples"]),
                                     int(params["seed"]))
    z_max = float(params.get("z_max", 4.0))
    arts = [report.write_json(outdir / "report.json", rep.to_dict()),
            report.fig_bars(["lhs", "rhs"], [rep.lhs, rep.rhs],
                            outdir / "identity.png",
                            errs=[rep.stderr, 0.0], ylabel="mass")]
    return [("periodized average matches the plane integral",
             abs(rep.z) <= z_max, f"z = {rep.z:.4g}")], arts


def _run_stages_check(scheme: Scheme, params: dict, outdir: Path):
    r = int(params["r"])
    if "ws" in params:
        zs = [TransversalPoint.of(scheme, np.asarray(w, dtype=float))
              for w in params["ws"]]
    else:
        rng = np.random.default_rng(int(params["seed"]))
        eta = float(params.get("eta", _default_eta(scheme)))
        zs = [_sample_transversal(scheme, rng, eta) for _ in range(r)]
    rep = stages_check(scheme, r, zs, _box_param(params["A"]),
                       int(params["n_samples"]), int(params["seed"]),
                       t=float(params.get("t", 1.0e4)),
                       probe_side=params.get("probe_side"),
                       hit_side=params.get("hit_side"))
    rel_tol = float(params.get("rel_tol", 0.02))
    arts = [report.write_json(outdir / "report.json", rep.to_dict()),
            report.fig_bars(["direct", "staged", "analytic"],
                            [rep.direct_estimate, rep.staged_estimate, rep.analytic],
                            outdir / "stages.png", ylabel="product mass")]
    return [("direct and staged estimates agree",
             rep.rel_deviation <= rel_tol,
             f"rel dev {rep.rel_deviation:.6g} vs tol {rel_tol:g}")], arts


def _run_verify_convenient(scheme: Scheme, params: dict, outdir: Path):
    seq = geometric_grid(float(params["t_min"]), float(params["t_max"]),
                         int(params.get("grid_count", 16)), int(params["d"]))
    rep = verify_convenient(seq, int(params["n_max"]))
    arts = [report.write_csv(outdir / "rows.csv",
                             ["n", "delta", "eps", "containment_ok", "degenerate"],
                             [(r.n, r.delta, r.eps, int(r.containment_ok),
                               int(r.degenerate)) for r in rep.rows]),
            report.fig_convenient(rep, outdir / "eps.png"),
            report.write_json(outdir / "report.json", rep.to_dict())]
    return [("box family is a convenient sequence", rep.ok,
             f"n up to {params['n_max']}")], arts


_RUNNERS = {
    "gen": _run_gen,
    "check-delone": _run_check_delone,
    "check-approx-lattice": _run_check_approx_lattice,
    "density": _run_density,
    "intersect-density": _run_intersect_density,
    "recurrence": _run_recurrence,
    "poincare": _run_poincare,
    "ergodic-avg": _run_ergodic_avg,
    "transverse-identity": _run_transverse_identity,
    "stages-check": _run_stages_check,
    "verify-convenient": _run_verify_convenient,
}


def run(config: ExperimentConfig) -> RunReport:
    scheme = load_scheme(config.scheme_path)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    assertions, artifacts = _RUNNERS[config.experiment](scheme, config.params, outdir)
    artifacts.append(report.write_manifest(outdir / "manifest.json", config.raw))
    return RunReport(artifacts=artifacts, assertions=assertions,
                     wall_time=time.perf_counter() - t0)


def validate_scheme_diagnostics(path: str) -> dict:
    scheme = load_scheme(path)
    t_values = [10.0, 100.0, 1000.0]
    trace = internal_infimum_trace(scheme, t_values)
    final = trace[-1][1]
    return {
        "d": scheme.d, "m": scheme.m,
        "covolume": scheme.covolume,
        "window_volume": scheme.window.volume,
        "predicted_density": predicted_density(scheme),
        "internal_infimum_trace": trace,
        "internal_projection": "exact-lattice directions" if final < 1e-12
                               else "dense (infimum decreasing)",
    }


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    rep = run(config)
    for path in rep.artifacts:
        print(f"artifact: {path}")
    for label, ok, detail in rep.assertions:
        print(f"{'PASS' if ok else 'FAIL'}: {label} ({detail})")
    print(f"wall time: {rep.wall_time:.2f}s")
    return 0 if rep.ok else 1


def _cmd_validate(args: argparse.Namespace) -> int:
    diag = validate_scheme_diagnostics(args.scheme)
    for key in ("d", "m", "covolume", "window_volume", "predicted_density",
                "internal_projection"):
        print(f"{key}: {diag[key]}")
    for t, v in diag["internal_infimum_trace"]:
        print(f"  min |gamma*| for |p(gamma)| < {t:g}: {v:.6g}")
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    scheme = load_scheme(args.scheme)
    vals = [float(v) for v in args.box]
    if len(vals) != 2 * scheme.d:
        raise ConfigError(f"--box needs {2 * scheme.d} numbers (lo hi per axis)")
    box = Box(vals[0::2], vals[1::2])
    w = np.asarray([float(v) for v in args.offset], dtype=float)
    z = TransversalPoint.of(scheme, w)
    patch = model_set(scheme, z, box)
    header = [f"c{i}" for i in range(scheme.dim_total)] + \
             [f"x{i}" for i in range(scheme.d)]
    lines = [",".join(header)]
    for c, x in zip(patch.coeffs, patch.points):
        lines.append(",".join([str(int(v)) for v in c]
                              + [report.fmt_number(v) for v in x]))
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"artifact: {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meyerlab",
        description="model-set experiments: generation, diagnostics, and "
                    "measure-theoretic verification runs")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a config-driven experiment")
    p_run.add_argument("config")
    p_run.set_defaults(fn=_cmd_run)
    p_val = sub.add_parser("validate", help="print scheme diagnostics")
    p_val.add_argument("scheme")
    p_val.set_defaults(fn=_cmd_validate)
    p_gen = sub.add_parser("gen", help="write the model set in a box as CSV")
    p_gen.add_argument("scheme")
    p_gen.add_argument("--box", nargs="+", required=True,
                       metavar="LO HI", help="lo hi per physical axis")
    p_gen.add_argument("--offset", nargs="+", required=True, metavar="W",
                       help="window parameter (m numbers)")
    p_gen.add_argument("-o", "--output", default=None)
    p_gen.set_defaults(fn=_cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MeyerlabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if args.command != "run" else 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
