"""Scenario runner: validated configs in, deterministic artifacts out.

A scenario is a TOML (or JSON) file with a `kind`, module-specific settings,
an output directory and a seed.  Running one produces a JSON report that
embeds the fully resolved config and backend (so identical config + seed
reproduce byte-identical reports), a CSV table of the main data, and SVG
plots where the kind has a natural picture.

Exit codes: 0 all declared checks pass, 1 a check failed (artifacts are still
written), 2 usage or validation error (no artifacts).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

from . import model, renorm, selection, stats
from .model import ModelParams, build_model
from .numerics import FLOAT_BACKEND, RATIONAL_BACKEND, as_fraction

EXIT_PASS = 0
EXIT_CHECK_FAIL = 1
EXIT_USAGE = 2

OUTPUT_ROOT_ENV = "FOLDLAB_OUTPUT_ROOT"

KINDS = (
    "model-build", "thickness", "gap", "selection",
    "renorm-verify", "henon-scan", "emergence", "historic",
)
PLOT_KINDS = ("phase", "cantor", "heatmap", "dw")


class ConfigError(ValueError):
    """Invalid scenario config; `errors` lists every violated field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"JSON parse error: {exc}"]) from exc
    try:
        import tomllib as toml
    except ModuleNotFoundError:  # Python 3.10
        import tomli as toml
    try:
        return toml.loads(text.decode("utf-8"))
    except (toml.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([f"TOML parse error: {exc}"]) from exc


def _exact(value):
    """Parse a number that must be exact (accepted as '1/100000000')."""
    return as_fraction(value)


# field name -> (checker, required, default); checkers return an error string
# or None and may normalize the value in place via the returned tuple
def _is_int(lo=None, hi=None):
    def check(v):
        if not isinstance(v, int) or isinstance(v, bool):
            return "expected an integer"
        if lo is not None and v < lo:
            return f"must be >= {lo}"
        if hi is not None and v > hi:
            return f"must be <= {hi}"
        return None
    return check


def _is_number(lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "expected a number"
        if lo is not None and not v > lo:
            return f"must be > {lo}"
        if hi is not None and not v < hi:
            return f"must be < {hi}"
        return None
    return check


def _is_exact_number(v):
    try:
        value = _exact(v)
    except (TypeError, ValueError, ZeroDivisionError):
        return "expected a number or an exact-rational string like '1/100'"
    if not 0 < value < 1:
        return "must be a scale strictly between 0 and 1"
    return None


def _is_backend(v):
    if v not in (FLOAT_BACKEND, RATIONAL_BACKEND):
        return f"expected '{FLOAT_BACKEND}' or '{RATIONAL_BACKEND}'"
    return None


def _is_choice(*options):
    def check(v):
        if v not in options:
            return "expected one of " + ", ".join(map(repr, options))
        return None
    return check


def _is_str(v):
    return None if isinstance(v, str) else "expected a string"


def _is_bool(v):
    return None if isinstance(v, bool) else "expected true/false"


def _is_pair(v):
    if (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                    for x in v) and v[0] < v[1]):
        return None
    return "expected [lo, hi] with lo < hi"


def _is_vector(n):
    def check(v):
        if (isinstance(v, (list, tuple)) and len(v) == n
                and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                        for x in v)):
            return None
        return f"expected a list of {n} numbers"
    return check


_COMMON = {
    "kind": (_is_choice(*KINDS), True, None),
    "output": (_is_str, False, None),  # default: the kind
    "seed": (_is_int(0), False, 0),
}

_SCHEMAS: Dict[str, Dict[str, tuple]] = {
    "model-build": {
        "N": (_is_int(2, 64), True, None),
        "delta": (_is_exact_number, True, None),
        "backend": (_is_backend, False, FLOAT_BACKEND),
        "strict": (_is_bool, False, True),
    },
    "thickness": {
        "N": (_is_int(2, 64), True, None),
        "delta": (_is_exact_number, True, None),
        "strict": (_is_bool, False, False),
        "depth": (_is_int(1, 8), True, None),
        "side": (_is_choice("stable", "unstable"), False, "stable"),
        "thickness_rtol": (_is_number(0.0), False, 0.01),
        "gap_rtol": (_is_number(0.0), False, 0.001),
    },
    "gap": {
        "N": (_is_int(2, 64), True, None),
        "delta": (_is_exact_number, True, None),
        "strict": (_is_bool, False, False),
        "depth": (_is_int(1, 8), True, None),
        "trials": (_is_int(1, 100000), False, 100),
    },
    "selection": {
        "N": (_is_int(2, 64), True, None),
        "delta": (_is_exact_number, True, None),
        "delta0": (_is_number(0.0, 1.0), False, 0.05),
        "steps": (_is_int(0, 32), False, 4),
        "backend": (_is_backend, False, RATIONAL_BACKEND),
    },
    "renorm-verify": {
        "N": (_is_int(2, 64), True, None),
        "delta": (_is_exact_number, True, None),
        "delta0": (_is_number(0.0, 1.0), False, 0.05),
        "steps": (_is_int(0, 32), False, 4),
        "backend": (_is_backend, False, RATIONAL_BACKEND),
        "cloud_blocks": (_is_int(0, 8), False, 0),
    },
    "henon-scan": {
        "b": (_is_number(-1.0, 1.0), False, 0.0),
        "p": (_is_vector(5), False, [0.0, 0.0, 0.0, 0.0, 0.0]),
        "x_range": (_is_pair, False, [-1.3, 1.3]),
        "y_range": (_is_pair, False, [-0.3, 0.3]),
        "grid": (_is_int(2, 512), False, 41),
        "steps": (_is_int(1, 100000), False, 400),
    },
    "emergence": {
        "max_period": (_is_int(1, 16), False, 12),
        "horizon": (_is_int(2, 64), False, 24),
        "eps_pow_min": (_is_int(1, 32), False, 3),
        "eps_pow_max": (_is_int(1, 32), False, 8),
        "slope_range": (_is_pair, False, None),
    },
    "historic": {
        "source": (_is_choice("periodic", "blocks"), True, None),
        "points": (lambda v: None if (isinstance(v, list) and len(v) >= 1
                                      and all(_is_pair(x) is None or _is_vector(2)(x) is None
                                              for x in v))
                   else "expected a list of [x, y] points", True, None),
        "length": (_is_int(2, 10**7), False, 4096),
        "n0": (_is_int(1), False, 8),
        "ratio": (_is_number(1.0), False, 1.5),
        "amplitude_min": (_is_number(0.0), False, stats.AMPLITUDE_MIN),
    },
}


def validate_config(cfg) -> dict:
    """Return the resolved config (defaults filled in) or raise ConfigError
    listing every violated field."""
    errors = []
    if not isinstance(cfg, dict):
        raise ConfigError(["config must be a table/object"])
    kind = cfg.get("kind")
    err = _COMMON["kind"][0](kind) if kind is not None else "missing"
    if err:
        raise ConfigError([f"kind: {err}"])
    schema = dict(_COMMON)
    schema.update(_SCHEMAS[kind])
    resolved = {}
    for name, (check, required, default) in schema.items():
        if name in cfg:
            err = check(cfg[name])
            if err:
                errors.append(f"{name}: {err}")
            else:
                resolved[name] = cfg[name]
        elif required:
            errors.append(f"{name}: missing required field")
        elif default is not None or name == "seed":
            resolved[name] = default
    for name in cfg:
        if name not in schema:
            errors.append(f"{name}: unknown field for kind {kind!r}")
    if kind == "emergence" and not errors:
        if resolved["eps_pow_min"] >= resolved["eps_pow_max"]:
            errors.append("eps_pow_min: must be smaller than eps_pow_max")
    if errors:
        raise ConfigError(sorted(errors))
    resolved.setdefault("output", kind)
    return resolved


# ---------------------------------------------------------------------------
# scenario runners: each returns (report dict, csv rows)
# ---------------------------------------------------------------------------


def _model_params(cfg) -> ModelParams:
    return ModelParams.create(
        cfg["N"], _exact(cfg["delta"]),
        backend=cfg.get("backend", FLOAT_BACKEND),
        strict=cfg.get("strict", True),
    )


def _geometry(system) -> dict:
    """Float geometry of boxes and fold boxes, for phase plots."""
    params = system.params
    branches = []
    for j in range(1, params.N + 1):
        lo, hi = params.interval(j)
        branches.append({"label": model.generator_label(j),
                         "x": [float(lo), float(hi)]})
    folds = []
    for j in range(1, params.N):
        box = system.fold(model.fold_label(j)).box
        (x0, x1), (y0, y1) = box.x_interval(), (box.y_lo, box.y_hi)
        folds.append({"label": model.fold_label(j),
                      "x": [float(x0), float(x1)], "y": [float(y0), float(y1)]})
    return {"hull": [-1.0, 1.0], "branches": branches, "folds": folds}


def _run_model_build(cfg, rng):
    params = _model_params(cfg)
    system = build_model(params)
    data = {
        "geometry": _geometry(system),
        "p_margin": float(params.p_margin()),
        "dissipation_margin": model.dissipation_margin(params),
        "slope": float(params.slope),
    }
    checks = {"boxes_disjoint": True, "dissipative": data["dissipation_margin"] > 0}
    rows = [["label", "x_lo", "x_hi", "y_lo", "y_hi"]]
    for b in data["geometry"]["branches"]:
        rows.append([b["label"], b["x"][0], b["x"][1], -1.0, 1.0])
    for f in data["geometry"]["folds"]:
        rows.append([f["label"], f["x"][0], f["x"][1], f["y"][0], f["y"][1]])
    return {"data": data, "checks": checks}, rows


def _run_thickness(cfg, rng):
    params = _model_params(cfg)
    approx = model.cantor_approx(cfg["side"], cfg["depth"], params)
    gaps = approx.los[1:] - approx.his[:-1]
    measured_gap = float(gaps.max())
    closed_gap = model.stable_gap_size(params)
    t_err = abs(approx.thickness - approx.closed_form) / approx.closed_form
    g_err = abs(measured_gap - closed_gap) / closed_gap
    checks = {
        "thickness_matches": t_err <= cfg["thickness_rtol"],
        "gap_matches": cfg["side"] != "stable" or g_err <= cfg["gap_rtol"],
    }
    data = {
        "side": cfg["side"], "depth": cfg["depth"],
        "thickness": approx.thickness, "thickness_closed_form": approx.closed_form,
        "thickness_rel_error": t_err,
        "gap": measured_gap, "gap_closed_form": closed_gap, "gap_rel_error": g_err,
        "intervals": [[float(a), float(b)] for a, b in zip(approx.los, approx.his)],
    }
    rows = [["lo", "hi"]] + data["intervals"]
    return {"data": data, "checks": checks}, rows


def _run_gap(cfg, rng):
    params = _model_params(cfg)
    ks = model.cantor_approx("stable", cfg["depth"], params)
    ku = model.cantor_approx("unstable", cfg["depth"], params)
    failures = []
    for trial in range(cfg["trials"]):
        p = params.random_p(rng)
        for j, pj in enumerate(p, start=1):
            verdict = model.gap_check(ku.translate(float(pj)), ks)
            if verdict != model.INTERSECT:
                failures.append({"trial": trial, "j": j, "verdict": verdict})
    data = {
        "trials": cfg["trials"], "depth": cfg["depth"],
        "thickness_product": ks.thickness * ku.thickness,
        "failures": failures,
    }
    checks = {"thickness_product_exceeds_one": data["thickness_product"] > 1.0,
              "all_translates_intersect": not failures}
    rows = [["trial", "j", "verdict"]]
    rows += [[f["trial"], f["j"], f["verdict"]] for f in failures]
    return {"data": data, "checks": checks}, rows


def _selection_run(cfg):
    params = _model_params(cfg)
    system = build_model(params)
    sched = selection.ScheduleParams(delta0=cfg["delta0"])
    return params, selection.run_selection(
        system, params.centered_p(), sched=sched, max_steps=cfg["steps"])


def _selection_report(run) -> dict:
    state = run.state
    return {
        "steps_completed": state.step,
        "word_lengths": [len(w.letters) for w in state.words],
        "newton_steps": state.newton_steps,
        "certificates": [
            {"name": c.name, "step": c.step, "passed": c.passed,
             "bound_log": c.bound_log, "measured_log": c.measured_log,
             "note": c.note}
            for c in state.certificates
        ],
        "total_displacement_log": run.total_displacement.log,
        "displacement_bound_log": run.displacement_bound.log,
        "converged": run.converged,
    }


def _run_selection(cfg, rng):
    params, run = _selection_run(cfg)
    data = _selection_report(run)
    data["geometry"] = _geometry(run.state.system)
    checks = {
        "all_certificates": all(c.passed for c in run.state.certificates),
        "displacement_bounded": run.total_displacement <= run.displacement_bound,
        "requested_steps": run.state.step >= cfg["steps"],
    }
    rows = [["name", "step", "passed", "bound_log", "measured_log"]]
    rows += [[c["name"], c["step"], c["passed"], c["bound_log"], c["measured_log"]]
             for c in data["certificates"]]
    return {"data": data, "checks": checks}, rows


def _run_renorm_verify(cfg, rng):
    params, run = _selection_run(cfg)
    chain = renorm.Chain.from_selection(run)
    report = chain_report = renorm.verify_chain(chain)
    data = json.loads(chain_report.to_json())
    data["selection"] = _selection_report(run)
    data["renormalized_samples"] = _renorm_samples(chain, chain_report)
    if cfg["cloud_blocks"] > 0 and chain_report.passed:
        cloud = renorm.iterate_cloud(chain, blocks=cfg["cloud_blocks"])
        data["cloud"] = {
            "J": cloud.J,
            "shrink_step": cloud.shrink_step,
            "itinerary_matches": cloud.itinerary_matches,
            "no_fold_revisit": cloud.no_fold_revisit,
            "decaying_blocks": cloud.decaying_blocks,
        }
    checks = {"hypotheses": report.passed}
    if "cloud" in data:
        checks["cloud"] = all(data["cloud"][k] for k in
                              ("itinerary_matches", "no_fold_revisit", "decaying_blocks"))
    rows = [["j", "cond_i", "cond_ii", "cond_iii", "identity_error",
             "inclusion_margin"]]
    for r in chain_report.records:
        rows.append([r.j, r.cond_i, r.cond_ii, r.cond_iii, r.identity_error,
                     r.inclusion_margin])
    return {"data": data, "checks": checks}, rows


def _renorm_samples(chain, report, grid: int = 7) -> list:
    """Chart-square samples and their images under each verified
    renormalized map, for the phase overlays."""
    out = []
    for rec in report.records:
        if not (rec.inclusion_checked and rec.inclusion_passed):
            continue
        rmap = renorm.renormalized_map(rec.j, chain)
        r = renorm.CHART_RADIUS
        pts, imgs = [], []
        for a in range(grid):
            for b in range(grid):
                X = -r + 2 * r * a / (grid - 1)
                Y = -r + 2 * r * b / (grid - 1)
                Xi, Yi = rmap(X, Y)
                pts.append([X, Y])
                imgs.append([float(Xi), float(Yi)])
        out.append({"j": rec.j, "points": pts, "images": imgs})
    return out


def _run_henon_scan(cfg, rng):
    hp = model.HenonParams(b=cfg["b"], p=tuple(cfg["p"]))
    scan = model.henon_scan(
        hp, tuple(cfg["x_range"]), tuple(cfg["y_range"]),
        grid=cfg["grid"], steps=cfg["steps"])
    bounded = int((scan < 0).sum())
    data = {
        "b": cfg["b"], "p": list(cfg["p"]),
        "x_range": list(cfg["x_range"]), "y_range": list(cfg["y_range"]),
        "grid": cfg["grid"], "steps": cfg["steps"],
        "bounded_count": bounded,
        "escape": scan.tolist(),
    }
    checks = {"bounded_region_nonempty": bounded > 0}
    if cfg["b"] == 0.0 and all(v == 0.0 for v in cfg["p"]):
        f = model.henon_map(hp)
        checks["fixed_point"] = f(1.0, 0.0) == (1.0, 0.0)
        checks["critical_values"] = (
            model.degree6_critical_values_exact()
            == [Fraction(v) for v in (-1, 1, -1, 1, -1)])
    rows = [["row"] + list(range(cfg["grid"]))]
    rows += [[i] + line for i, line in enumerate(data["escape"])]
    return {"data": data, "checks": checks}, rows


def _run_emergence(cfg, rng):
    family = stats.periodic_shift_measures((0, 1), cfg["max_period"], cfg["horizon"])
    eps_grid = [2.0 ** -k for k in range(cfg["eps_pow_min"], cfg["eps_pow_max"] + 1)]
    report = stats.emergence_order(family, eps_grid)
    data = report.as_dict()
    data["family_size"] = len(family)
    checks = {"counts_nondecreasing": True}
    if cfg.get("slope_range"):
        lo, hi = cfg["slope_range"]
        checks["slope_in_range"] = lo <= report.slope <= hi
    rows = [["eps", "count"]] + [[e, c] for e, c in zip(report.eps_grid, report.counts)]
    return {"data": data, "checks": checks}, rows


def _run_historic(cfg, rng):
    pts = [tuple(map(float, p)) for p in cfg["points"]]
    n = cfg["length"]
    if cfg["source"] == "periodic":
        orbit = [pts[k % len(pts)] for k in range(n)]
    else:  # doubling blocks alternating between the given points
        orbit, block, which = [], 1, 0
        while len(orbit) < n:
            orbit.extend([pts[which % len(pts)]] * block)
            block *= 2
            which += 1
        orbit = orbit[:n]
    verdict = stats.historic_detector(
        orbit, n0=cfg["n0"], amplitude_min=cfg["amplitude_min"], ratio=cfg["ratio"])
    data = {
        "historic": verdict.historic,
        "amplitude": verdict.amplitude,
        "amplitude_min": verdict.amplitude_min,
        "schedule": verdict.schedule,
        "distances": verdict.distances,
        "note": verdict.note,
    }
    checks = {"verdict_computed": True}
    rows = [["window", "n"]] + [[k, n_] for k, n_ in enumerate(verdict.schedule)]
    return {"data": data, "checks": checks}, rows


_RUNNERS = {
    "model-build": _run_model_build,
    "thickness": _run_thickness,
    "gap": _run_gap,
    "selection": _run_selection,
    "renorm-verify": _run_renorm_verify,
    "henon-scan": _run_henon_scan,
    "emergence": _run_emergence,
    "historic": _run_historic,
}


# ---------------------------------------------------------------------------
# artifact emission
# ---------------------------------------------------------------------------


def _output_root(override: Optional[str]) -> Path:
    if override:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _jsonable(cfg: dict) -> dict:
    out = {}
    for k, v in cfg.items():
        if isinstance(v, Fraction):
            v = f"{v.numerator}/{v.denominator}"
        out[k] = v
    return out


def run_scenario(config_path, output_root: Optional[str] = None) -> int:
    """Execute one scenario config; returns the process exit code."""
    try:
        cfg = validate_config(load_config(config_path))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    outdir = _output_root(output_root) / cfg["output"]
    rng = random.Random(cfg["seed"])
    try:
        result, rows = _RUNNERS[cfg["kind"]](cfg, rng)
    except Exception as exc:  # preserve partial context for diagnosis
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "error.json").write_text(json.dumps(
            {"config": _jsonable(cfg), "error": f"{type(exc).__name__}: {exc}"},
            indent=2, sort_keys=True))
        print(f"scenario failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAIL
    report = {
        "kind": cfg["kind"],
        "config": _jsonable(cfg),
        "backend": cfg.get("backend", FLOAT_BACKEND),
        "checks": result["checks"],
        "data": result["data"],
    }
    outdir.mkdir(parents=True, exist_ok=True)
    report_path = outdir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(outdir / "data.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    emit_plots(report, _default_plot_kinds(cfg["kind"]), outdir)
    ok = all(report["checks"].values())
    for name, passed in sorted(report["checks"].items()):
        print(f"[{'PASS' if passed else 'FAIL'}] {cfg['kind']}: {name}")
    print(f"artifacts in {outdir}")
    return EXIT_PASS if ok else EXIT_CHECK_FAIL


def _default_plot_kinds(kind: str) -> List[str]:
    return {
        "model-build": ["phase"],
        "thickness": ["cantor"],
        "selection": ["phase"],
        "renorm-verify": ["phase"],
        "henon-scan": ["heatmap"],
        "historic": ["dw"],
    }.get(kind, [])


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_phase(report, outdir: Path) -> List[Path]:
    geom = report.get("data", {}).get("geometry")
    written = []
    plt = _figure()
    if geom:
        fig, ax = plt.subplots(figsize=(6, 6))
        for b in geom["branches"]:
            ax.add_patch(plt.Rectangle(
                (b["x"][0], geom["hull"][0]), b["x"][1] - b["x"][0],
                geom["hull"][1] - geom["hull"][0], fill=False,
                edgecolor="tab:blue"))
            ax.annotate(b["label"], (b["x"][0], geom["hull"][1]), fontsize=7)
        for f in geom["folds"]:
            ax.add_patch(plt.Rectangle(
                (f["x"][0], f["y"][0]), f["x"][1] - f["x"][0],
                f["y"][1] - f["y"][0], fill=True, alpha=0.4, color="tab:red"))
        ax.set_xlim(-1.1, 1.1)
        ax.autoscale_view()
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title("branch boxes and fold boxes")
        path = outdir / "phase.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    for sample in report.get("data", {}).get("renormalized_samples", []):
        fig, ax = plt.subplots(figsize=(5, 5))
        xs, ys = zip(*sample["points"])
        ax.scatter(xs, ys, s=4, label="chart square", color="tab:blue")
        xi, yi = zip(*sample["images"])
        ax.scatter(xi, yi, s=4, label="image", color="tab:orange")
        ax.legend()
        ax.set_title(f"renormalized map at index {sample['j']}")
        path = outdir / f"renormalized_{sample['j']}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def _plot_cantor(report, outdir: Path) -> List[Path]:
    intervals = report.get("data", {}).get("intervals")
    if not intervals:
        return []
    plt = _figure()
    fig, ax = plt.subplots(figsize=(8, 2))
    for lo, hi in intervals:
        ax.plot([lo, hi], [0, 0], lw=6, color="tab:blue", solid_capstyle="butt")
    ax.set_yticks([])
    ax.set_title(f"level-{report['data'].get('depth', '?')} intervals")
    path = outdir / "cantor.svg"
    fig.savefig(path)
    plt.close(fig)
    return [path]


def _plot_heatmap(report, outdir: Path) -> List[Path]:
    data = report.get("data", {})
    if "escape" not in data:
        return []
    import numpy as np
    plt = _figure()
    scan = np.array(data["escape"], dtype=float)
    scan[scan < 0] = np.nan  # bounded samples
    x0, x1 = data["x_range"]
    y0, y1 = data["y_range"]
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(scan, origin="lower", extent=(x0, x1, y0, y1),
                   aspect="auto", cmap="viridis")
    fig.colorbar(im, ax=ax, label="escape time (blank = bounded)")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    path = outdir / "heatmap.svg"
    fig.savefig(path)
    plt.close(fig)
    return [path]


def _plot_dw(report, outdir: Path) -> List[Path]:
    data = report.get("data", {})
    if "distances" not in data or not data.get("schedule"):
        return []
    plt = _figure()
    sched = data["schedule"]
    late = sched[len(sched) // 2:]
    dist = data["distances"]
    fig, ax = plt.subplots(figsize=(6, 4))
    # distance of each late window to the first late window
    ax.plot(late, [row[0] for row in dist], marker="o")
    ax.axhline(data["amplitude_min"], color="tab:red", ls="--",
               label="amplitude threshold")
    ax.set_xscale("log")
    ax.set_xlabel("window length n")
    ax.set_ylabel("W1 distance to first late window")
    ax.legend()
    path = outdir / "dw.svg"
    fig.savefig(path)
    plt.close(fig)
    return [path]


_PLOTTERS = {
    "phase": _plot_phase,
    "cantor": _plot_cantor,
    "heatmap": _plot_heatmap,
    "dw": _plot_dw,
}


def emit_plots(report: dict, kinds, outdir) -> List[Path]:
    """Emit the requested plot kinds from a report; unknown kinds are listed
    and skipped."""
    outdir = Path(outdir)
    written, skipped = [], []
    for kind in kinds:
        plotter = _PLOTTERS.get(kind)
        if plotter is None:
            skipped.append(kind)
            continue
        outdir.mkdir(parents=True, exist_ok=True)
        written.extend(plotter(report, outdir))
    if skipped:
        print("skipped unknown plot kinds: " + ", ".join(skipped), file=sys.stderr)
    return written


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="foldlab",
        description="scenario runner for the folding-horseshoe laboratory")
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--output-root", default=None,
                       help=f"artifact root (default $" + OUTPUT_ROOT_ENV + " or ./runs)")
    p_plot = sub.add_parser("plot", help="re-emit plots from a report")
    p_plot.add_argument("report")
    p_plot.add_argument("--kinds", nargs="*", default=list(PLOT_KINDS))
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.command == "run":
        return run_scenario(args.config, args.output_root)
    if args.command == "plot":
        path = Path(args.report)
        if not path.exists():
            print(f"report not found: {path}", file=sys.stderr)
            return EXIT_USAGE
        try:
            report = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            print(f"report parse error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        written = emit_plots(report, args.kinds, path.parent)
        for w in written:
            print(w)
        return EXIT_PASS
    if args.command == "validate":
        try:
            validate_config(load_config(args.config))
        except ConfigError as exc:
            for e in exc.errors:
                print(f"config error: {e}", file=sys.stderr)
            return EXIT_USAGE
        print("config ok")
        return EXIT_PASS
    parser.print_help()
    return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
