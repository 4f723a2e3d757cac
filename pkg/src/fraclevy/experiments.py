"""Config-driven experiments and plot-data emission for run directories."""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path
from typing import List, Optional

import numpy as np

from .chaos import BasisSpec, ChaosElement, probe_set
from .config import build_measure, build_model, config_hash
from .flp_simulate import covariance_oracle, empirical_moments, simulate_flp_paths
from .frac_ops import rl_fractional_integral
from .grid import GridFunction, TimeGrid, indicator
from .io import MANIFEST, add_to_manifest, read_csv, read_manifest, write_csv, write_json, write_manifest
from .levy_models import sample_increments, second_moment
from .sde import SdeProblem, WickAffineCoefficient, holder_noise_check, picard_solve, validate_coefficients
from .stochastic_integral import wiener_integral_pathwise
from .volterra import VolterraProblem, kernel_preset, solve_volterra

OUTPUT_ROOT_ENV = "FRACLEVY_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "fraclevy_runs"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


def run_directory(cfg: dict, out: Optional[str] = None) -> Path:
    """``--out`` wins, then ``output.dir``, then ``$FRACLEVY_OUTPUT_ROOT/<kind>-<hash>``."""
    if out:
        return Path(out)
    if cfg["output"]["dir"]:
        return Path(cfg["output"]["dir"])
    return output_root() / f"{cfg['experiment']['kind']}-{config_hash(cfg)[:12]}"


def _grid(cfg) -> TimeGrid:
    g = cfg["grid"]
    return TimeGrid.from_step(float(g["t_min"]), float(g["t_max"]), float(g["h"]))


def _measure_or_none(cfg):
    model = build_model(cfg)
    return model, (None if model.finite_activity else build_measure(cfg))


def _basis(cfg) -> BasisSpec:
    s = cfg["solver"]
    e = cfg["experiment"]
    grid = TimeGrid(float(s["basis_t_min"]), float(e["horizon"]), int(s["basis_cells"]))
    return BasisSpec(grid, build_measure(cfg), int(s["order"]), s["mark_mode"])


def _simulate(cfg, run_dir: Path) -> dict:
    e = cfg["experiment"]
    model, measure = _measure_or_none(cfg)
    paths = simulate_flp_paths(
        model, float(e["beta"]), _grid(cfg), int(e["n_paths"]), int(e["seed"]), times=e["times"], measure=measure, history=e["history"]
    )
    n_keep = min(paths.n_paths, int(cfg["output"]["max_paths_csv"]))
    write_csv(
        run_dir / "paths.csv",
        ("t", "path_id", "value"),
        ((t, i, paths.values[i, j]) for j, t in enumerate(paths.times) for i in range(n_keep)),
    )
    rows = empirical_moments(paths)
    write_csv(run_dir / "moments.csv", ("t", "mean", "var", "stderr"), ((r.t, r.mean, r.variance, r.stderr_mean) for r in rows))
    write_csv(run_dir / "variance.csv", ("t", "var", "stderr_var"), ((r.t, r.variance, r.stderr_variance) for r in rows))
    rep = paths.report
    summary = {
        "m2": measure.m2 if measure is not None else second_moment(model),
        "history_horizon": rep.horizon,
        "relative_tail": float(rep.relative_tail),
        "discrete_variance_ratio": float(rep.discrete_ratio),
    }
    return {"files": ["paths.csv", "moments.csv", "variance.csv"], "summary": summary}


def _integrand(cfg, grid: TimeGrid) -> GridFunction:
    ig = cfg["experiment"]["integrand"]
    if ig["kind"] == "indicator":
        return indicator(grid, float(ig.get("t", grid.t_max)))
    c, r = float(ig.get("center", 0.5)), float(ig.get("radius", 0.4))

    def bump(t):
        z = (np.asarray(t) - c) / r
        out = np.zeros_like(z, dtype=np.float64)
        inside = np.abs(z) < 1
        out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
        return out

    return GridFunction.from_callable(grid, bump)


def _wiener(cfg, run_dir: Path) -> dict:
    e = cfg["experiment"]
    grid = _grid(cfg)
    model, measure = _measure_or_none(cfg)
    g = _integrand(cfg, grid)
    inc = sample_increments(model, grid, int(e["seed"]), int(e["n_paths"]), measure)
    vals = wiener_integral_pathwise(g, float(e["beta"]), inc)
    write_csv(run_dir / "wiener.csv", ("path_id", "value"), enumerate(vals))
    m2 = measure.m2 if measure is not None else second_moment(model)
    k = rl_fractional_integral(g, float(e["beta"]), "minus")
    n = vals.size
    var = float(vals.var(ddof=1))
    c = vals - vals.mean()
    se = float(np.sqrt(max(np.mean(c**4) - var**2 * (n - 3) / (n - 1), 0.0) / n))
    summary = {"variance": var, "stderr_var": se, "oracle_var": m2 * k.l2_norm() ** 2, "mean": float(vals.mean())}
    return {"files": ["wiener.csv"], "summary": summary}


def _kernel(params: dict):
    params = dict(params)
    return kernel_preset(params.pop("preset"), **params)


def _export_solution(cfg, run_dir: Path, sol, basis, probes) -> List[str]:
    """S-transform table at the probes plus sparse chaos dumps at evenly spaced nodes."""
    vals = [sol.s_transform(e) for e in probes]
    write_csv(
        run_dir / "s_table.csv",
        ("t", "eta_id", "value"),
        ((t, i, vals[i][m]) for m, t in enumerate(sol.times) for i in range(len(probes))),
    )
    files = ["s_table.csv"]
    n_dump = int(cfg["output"]["chaos_dumps"])
    if n_dump:
        nodes = np.unique(np.linspace(0, sol.times.size - 1, n_dump).round().astype(int))
        for m in nodes:
            name = f"chaos/U_{m:05d}.txt"
            p = run_dir / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_bytes(sol.element(int(m)).to_text().encode())
            files.append(name)
    return files


def _solution_summary(sol) -> dict:
    return {
        "iterations": int(sol.iterations),
        "update_norms": [float(x) for x in sol.update_norms],
        "overflow": bool(sol.overflow),
        "certified": bool(sol.certified),
        "dropped": float(sol.dropped),
    }


def _volterra(cfg, run_dir: Path) -> dict:
    e, s = cfg["experiment"], cfg["solver"]
    basis = _basis(cfg)
    prob = VolterraProblem(basis, float(e["beta"]), float(e["horizon"]), int(e["n_steps"]), float(e["a"]), _kernel(e["b"]), _kernel(e["sigma"]))
    probes = probe_set(basis, int(s["n_probes"]), int(s["probe_seed"]))
    if s["backend"] == "s_collocation":
        sol = solve_volterra(prob, "s_collocation", probes=probes)
        write_csv(
            run_dir / "s_table.csv",
            ("t", "eta_id", "value"),
            ((t, i, sol.values[i, m]) for m, t in enumerate(sol.times) for i in range(len(probes))),
        )
        return {"files": ["s_table.csv"], "summary": {"backend": "s_collocation"}}
    sol = solve_volterra(prob, s["backend"], tol=float(s["tol"]), max_iter=int(s["max_iter"]), p=float(s["p"]))
    files = _export_solution(cfg, run_dir, sol, basis, probes)
    summary = _solution_summary(sol)
    summary["backend"] = s["backend"]
    return {"files": files, "summary": summary}


def _sde(cfg, run_dir: Path) -> dict:
    e, s = cfg["experiment"], cfg["solver"]
    basis = _basis(cfg)
    drift = WickAffineCoefficient.make(basis, float(e["drift"].get("c0", 0.0)), float(e["drift"].get("c1", 0.0)))
    diff = WickAffineCoefficient.make(basis, float(e["diffusion"].get("c0", 0.0)), float(e["diffusion"].get("c1", 0.0)))
    prob = SdeProblem(ChaosElement.constant(basis, float(e["U0"])), drift, diff, float(e["beta"]), float(e["horizon"]), int(e["n_steps"]))
    p = float(s["p"])
    rep = validate_coefficients(prob, p)
    sol = picard_solve(prob, tol=float(s["tol"]), max_iter=int(s["max_iter"]), p=p, report=rep)
    probes = probe_set(basis, int(s["n_probes"]), int(s["probe_seed"]))
    files = _export_solution(cfg, run_dir, sol, basis, probes)
    summary = _solution_summary(sol)
    summary["coefficients"] = {k: float(v) for k, v in rep.__dict__.items()}
    return {"files": files, "summary": summary}


RUNNERS = {"simulate": _simulate, "wiener": _wiener, "volterra": _volterra, "sde": _sde}


def run_experiment(cfg: dict, out: Optional[str] = None) -> Path:
    """Execute the configured experiment and write its run directory with a manifest."""
    run_dir = run_directory(cfg, out)
    run_dir.mkdir(parents=True, exist_ok=True)
    res = RUNNERS[cfg["experiment"]["kind"]](cfg, run_dir)
    write_json(run_dir / "summary.json", res["summary"])
    files = res["files"] + ["summary.json"]
    write_manifest(run_dir, cfg, config_hash(cfg), cfg["experiment"]["seed"], files, {"kind": cfg["experiment"]["kind"]})
    return run_dir


def emit_plotdata(run_dir) -> List[str]:
    """Tidy plot-ready CSVs under ``<run>/plotdata``; returns their names relative to the run."""
    run_dir = Path(run_dir)
    if not (run_dir / MANIFEST).is_file():
        raise FileNotFoundError(f"missing manifest: {run_dir / MANIFEST} (not a run directory)")
    man = read_manifest(run_dir)
    cfg = man["config"]
    kind = man["kind"]
    beta = float(cfg["experiment"]["beta"])
    out = []
    pd = run_dir / "plotdata"
    pd.mkdir(exist_ok=True)
    summary = json.loads((run_dir / "summary.json").read_text())
    if kind == "simulate":
        shutil.copyfile(run_dir / "paths.csv", pd / "paths.csv")
        out.append("plotdata/paths.csv")
        _, rows = read_csv(run_dir / "variance.csv")
        m2 = float(summary["m2"])
        write_csv(
            pd / "variance_vs_t.csv",
            ("t", "empirical_var", "oracle_var", "stderr"),
            ((float(t), float(v), covariance_oracle(float(t), float(t), beta, m2) if float(t) > 0 else 0.0, float(se)) for t, v, se in rows),
        )
        out.append("plotdata/variance_vs_t.csv")
    if kind in ("volterra", "sde"):
        if "update_norms" in summary:
            write_csv(pd / "picard_decay.csv", ("iteration", "update_norm"), enumerate(summary["update_norms"], start=1))
            out.append("plotdata/picard_decay.csv")
        shutil.copyfile(run_dir / "s_table.csv", pd / "s_table.csv")
        out.append("plotdata/s_table.csv")
    fit = holder_noise_check(beta, float(cfg["solver"]["p"]))
    write_csv(
        pd / "hoelder_fit.csv",
        ("beta", "delta", "sq_norm", "fitted", "slope"),
        ((beta, d, v, float(np.exp(fit.intercept) * d**fit.slope), fit.slope) for d, v in zip(fit.deltas, fit.sq_norms)),
    )
    out.append("plotdata/hoelder_fit.csv")
    add_to_manifest(run_dir, out)
    return out
