"""Experiment configuration and the epsilon sweep.

A sweep solves the cell problems once, then for every epsilon solves the
oscillating problem (and the homogenized one on the same grid), runs the
enabled analyses and writes plot-ready CSV files plus ``summary.json``.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import analysis, cell, dumps, nodal, solver, twoscale
from .coefficients import CoefficientField, validate
from .errors import ConfigurationError, HomogLabError

log = logging.getLogger(__name__)

ANALYSES = ("approx", "doubling", "nodal", "cell-only")
BOUNDARIES = ("default", "linear", "quadratic")
JOBS_ENV = "HOMOG_LAB_JOBS"

PROFILE_R_MIN = 1.0 / 64.0
PSI_R_MIN = 1.0 / 16.0
NODAL_WINDOW = 1.0

APPROX_COLUMNS = ("eps", "family", "h", "m", "sup_err_B34", "sup_err_corrected_B34", "normalizer",
                  "normalized_err", "energy_err", "energy_err_corrected", "c1_proxy")
DOUBLING_COLUMNS = ("eps", "family", "shape", "center_x", "center_y", "r", "ratio")
PSI_COLUMNS = ("r", "psi")
DENSITY_COLUMNS = ("eps", "center_x", "center_y", "r", "F")


@dataclass
class ExperimentConfig:
    family: dict
    eps_list: list = dc_field(default_factory=lambda: [0.25, 0.125, 0.0625, 0.03125])
    cell_n: int = 256
    box_half_width: float = 2.5
    points_per_eps: int = solver.POINTS_PER_EPS
    h_max: float = 1.0 / 64.0
    boundary: dict = dc_field(default_factory=lambda: {"name": "default", "kappa": 0.3})
    analyses: list = dc_field(default_factory=lambda: ["approx", "doubling", "nodal"])
    output_dir: str = "out"
    cell_tol: float = 1e-10
    solve_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        self.eps_list = [float(e) for e in self.eps_list]
        self.family = CoefficientField.from_spec(self.family).to_spec()
        self.boundary = dict(self.boundary)
        self.analyses = list(self.analyses)
        self.validate()

    def validate(self):
        if not self.eps_list:
            raise ConfigurationError("eps_list is empty")
        if any(e <= 0 for e in self.eps_list) or any(a <= b for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ConfigurationError(f"eps_list must be positive and strictly decreasing: {self.eps_list}")
        bad = set(self.analyses) - set(ANALYSES)
        if bad or not self.analyses:
            raise ConfigurationError(f"unknown analyses {sorted(bad)}; choose from {ANALYSES}")
        if self.boundary.get("name") not in BOUNDARIES:
            raise ConfigurationError(f"boundary name must be one of {BOUNDARIES}")
        if not isinstance(self.cell_n, int) or self.cell_n < 8 or self.cell_n & (self.cell_n - 1):
            raise ConfigurationError(f"cell_n must be a power of two >= 8, got {self.cell_n}")
        if not (0 < self.cell_tol <= 1e-6 and 0 < self.solve_tol <= 1e-8):
            raise ConfigurationError("tolerances out of range")
        # grids are built (and the resolution rule enforced) before any solve
        for eps in self.eps_list:
            self.grid_for(eps)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "family" not in data:
            raise ConfigurationError("config needs a 'family' entry")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def coefficient_field(self) -> CoefficientField:
        return CoefficientField.from_spec(self.family)

    def spacing(self, eps: float) -> float:
        return min(eps / self.points_per_eps, self.h_max)

    def grid_for(self, eps: float) -> solver.BoxGrid:
        grid = solver.BoxGrid.from_spacing(self.box_half_width, self.spacing(eps))
        if not self.coefficient_field().is_constant:
            grid.check_resolution(eps)
        return grid

    def boundary_function(self):
        name = self.boundary["name"]
        kappa = float(self.boundary.get("kappa", 0.3))
        if name == "linear":
            return lambda x1, x2: x1
        if name == "quadratic":
            return lambda x1, x2: x1 * x1 - x2 * x2
        return lambda x1, x2: x1 + kappa * (x1 * x1 - x2 * x2)


@dataclass
class CellResult:
    chi: cell.CorrectorSet
    a_hat: cell.HomogenizedTensor
    flux: cell.FluxCorrector
    flux_mean: float
    lam: float


@dataclass
class SweepReport:
    approx: list = dc_field(default_factory=list)
    doubling: list = dc_field(default_factory=list)
    psi: dict = dc_field(default_factory=dict)
    densities: list = dc_field(default_factory=list)
    summary: dict = dc_field(default_factory=dict)
    failures: list = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_cell(config: ExperimentConfig) -> CellResult:
    field = config.coefficient_field()
    lam = validate(field, 64).lambda_min
    chi = cell.solve_cell(field, config.cell_n, config.cell_tol)
    a_hat = cell.homogenized(field, chi)
    b = cell.flux_field(field, chi, a_hat)
    phi = cell.flux_corrector(b)
    return CellResult(chi, a_hat, phi, float(np.abs(b.mean(axis=(2, 3))).max()), lam)


def profile_depth(h: float) -> int:
    """Number of dyadic ratios from r = 1 with r/2 >= 8h and r >= 1/64."""
    depth = int(math.floor(math.log2(1.0 / (analysis.MIN_RADIUS_CELLS * h)) + 1e-9))
    return max(1, min(depth, int(round(math.log2(1.0 / PROFILE_R_MIN))) + 1))


def run_eps(config: ExperimentConfig, cres: CellResult, eps: float, dump_dir: Path | None = None) -> dict:
    """Every enabled analysis for one epsilon; returns plain rows."""
    field = config.coefficient_field()
    fam = field.label
    grid = config.grid_for(eps)
    bfun = config.boundary_function()
    out: dict = {"eps": eps, "h": grid.h, "m": grid.m, "timings": {}}
    enabled = set(config.analyses)
    if enabled == {"cell-only"}:
        return out

    t0 = time.perf_counter()
    u_eps = solver.solve_dirichlet(field, eps, grid, bfun, tol=config.solve_tol)
    out["timings"]["solve"] = time.perf_counter() - t0
    out["residual"] = u_eps.residual
    if dump_dir is not None:
        dumps.dump_box(dump_dir / f"u_eps_{eps:.6g}.box", u_eps)
    lam = cres.lam
    a_hat = cres.a_hat.a_hat

    if "approx" in enabled:
        t0 = time.perf_counter()
        u0 = twoscale.homogenized_solution(cres.a_hat, grid, bfun, tol=config.solve_tol)
        expansion = twoscale.corrected_expansion(u0, cres.chi, eps)
        rep = twoscale.approximation_report(u_eps, u0, expansion, eps)
        out["approx"] = {
            "eps": eps, "family": fam, "h": grid.h, "m": grid.m,
            "sup_err_B34": rep.sup_err_B34, "sup_err_corrected_B34": rep.sup_err_corrected_B34,
            "normalizer": rep.normalizer, "normalized_err": rep.normalized_err,
            "energy_err": twoscale.energy_seminorm(u_eps, u0),
            "energy_err_corrected": twoscale.energy_seminorm(u_eps, expansion),
            "c1_proxy": twoscale.c1_proxy(u0, rep.normalizer),
        }
        if dump_dir is not None:
            dumps.dump_box(dump_dir / f"u0_{eps:.6g}.box", u0)
        del u0, expansion
        out["timings"]["approx"] = time.perf_counter() - t0

    if "doubling" in enabled:
        t0 = time.perf_counter()
        depth = profile_depth(grid.h)
        n_const = analysis.doubling_constant(u_eps, lam)
        rows = []
        ball = analysis.doubling_profile(u_eps, (0.0, 0.0), "ball", 1.0, depth, eps=eps, n_constant=n_const)
        ell = analysis.doubling_profile(u_eps, (0.0, 0.0), "ellipsoid", 1.0, depth, a_hat=a_hat, eps=eps,
                                        n_constant=n_const)
        translated = [ball]
        for c in analysis.center_grid(0.5 * math.sqrt(lam)):
            if c == (0.0, 0.0):
                continue
            translated.append(analysis.doubling_profile(u_eps, c, "ball", 1.0, depth, lam=lam, eps=eps,
                                                        n_constant=n_const))
        for prof in [ell] + translated:
            for r, q in zip(prof.radii, prof.ratios):
                rows.append({"eps": eps, "family": fam, "shape": prof.shape.value, "center_x": prof.center[0],
                             "center_y": prof.center[1], "r": r, "ratio": q})
        r_lo = max(PSI_R_MIN, analysis.MIN_RADIUS_CELLS * grid.h)
        psi = analysis.three_spheres_profile(u_eps, math.log2(r_lo), 0.0, steps=9)
        out["doubling"] = rows
        out["psi"] = [{"r": r, "psi": p} for r, p in zip(psi.r_values, psi.psi)]
        out["doubling_summary"] = {
            "n_constant": n_const,
            "max_ratio": ball.max_ratio,
            "ellipsoid_max_ratio": ell.max_ratio,
            "translated_max_ratio": max(p.max_ratio for p in translated),
            "vanishing_order": analysis.vanishing_order_estimate(ball) if len(ball.ratios) > 1 else float("nan"),
            "psi_convexity_defect": psi.convexity_defect,
            "sub_eps_max_ratio": max([q for q, s in zip(ball.ratios, ball.sub_eps) if s], default=float("nan")),
        }
        out["timings"]["doubling"] = time.perf_counter() - t0

    if "nodal" in enabled:
        t0 = time.perf_counter()
        curve = nodal.extract_nodal(u_eps, window=NODAL_WINDOW)
        if dump_dir is not None:
            dumps.write_segments(dump_dir / f"nodal_{eps:.6g}.csv", curve)
        centers = [(0.0, 0.0)] + [c for c in analysis.center_grid(0.5 * math.sqrt(lam), 3) if c != (0.0, 0.0)]
        small = []
        r = eps
        while r >= nodal.MIN_RADIUS_CELLS * grid.h * (1 - 1e-12):
            small.append(r)
            r /= 2.0
        rep = nodal.nodal_report(curve, eps, lam, centers, small)
        out["densities"] = [{"eps": eps, "center_x": c[0], "center_y": c[1], "r": r, "F": f}
                            for c, r, f in rep.densities]
        at_eps = [f for c, r, f in rep.densities[1:] if r == eps]
        below = [f for c, r, f in rep.densities[1:] if r < eps]
        sing = nodal.singular_candidates(u_eps, solver.gradient(u_eps))
        out["nodal_summary"] = {
            "f_main": rep.f_main,
            "cap_at_eps": max(at_eps) if at_eps else float("nan"),
            "max_below_eps": max(below) if below else float("nan"),
            "singular_clusters": len(sing.points),
        }
        out["timings"]["nodal"] = time.perf_counter() - t0
    return out


def _task(args):
    config, cres, eps, dump_dir = args
    try:
        return run_eps(config, cres, eps, dump_dir)
    except HomogLabError as exc:
        log.error("eps=%g failed: %s", eps, exc)
        return {"eps": eps, "error": f"{type(exc).__name__}: {exc}"}


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def _key(eps: float) -> str:
    return dumps.fmt(eps)


def _trend_slope(eps_vals, f_vals) -> float:
    if len(eps_vals) < 2:
        return float("nan")
    return float(np.polyfit(np.log(1.0 / np.asarray(eps_vals)), np.asarray(f_vals), 1)[0])


def run_sweep(config: ExperimentConfig, out_dir=None, jobs: int | None = None,
              dump_fields: bool = False, write: bool = True) -> SweepReport:
    """Run every epsilon of ``config`` and write CSV/JSON outputs to ``out_dir``."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    out_path = Path(out_dir or config.output_dir)
    if write:
        out_path.mkdir(parents=True, exist_ok=True)
    dump_dir = out_path if (dump_fields and write) else None

    t_start = time.perf_counter()
    cres = run_cell(config)
    t_cell = time.perf_counter() - t_start
    if write:
        write_cell_json(out_path / "cell.json", cres)
        if dump_fields:
            dumps.dump_torus(out_path / "chi1.torus", cres.chi.chi1)
            dumps.dump_torus(out_path / "chi2.torus", cres.chi.chi2)

    tasks = [(config, cres, eps, dump_dir) for eps in config.eps_list]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    # merged in eps order regardless of completion order
    results.sort(key=lambda r: -r["eps"])

    rep = SweepReport()
    for res in results:
        if "error" in res:
            rep.failures.append({"eps": res["eps"], "error": res["error"]})
            continue
        if "approx" in res:
            rep.approx.append(res["approx"])
        rep.doubling.extend(res.get("doubling", []))
        if "psi" in res:
            rep.psi[res["eps"]] = res["psi"]
        rep.densities.extend(res.get("densities", []))

    incl = solver.ellipsoid_inclusion_check(solver.Ellipsoid.from_tensor(cres.a_hat.a_hat), seed=config.seed)
    rep.summary = _summary(config, cres, results, t_cell, time.perf_counter() - t_start)
    rep.summary["ellipsoid_inclusion"] = asdict(incl) | {"passed": incl.passed}
    if write:
        _write_outputs(out_path, rep)
    return rep


def _summary(config, cres, results, t_cell, t_total) -> dict:
    good = [r for r in results if "error" not in r]
    a = cres.a_hat.a_hat
    summary: dict = {
        "family": config.family,
        "lambda": cres.lam,
        "a_hat": {"a11": a.a11, "a12": a.a12, "a22": a.a22},
        "rate_slope": float("nan"),
        "max_doubling_ratio_by_eps": {},
        "f_main_by_eps": {},
        "f_main_trend_slope": float("nan"),
    }
    approx = [r["approx"] for r in good if "approx" in r]
    if approx:
        summary["normalized_err_by_eps"] = {_key(r["eps"]): r["normalized_err"] for r in approx}
        summary["c1_proxy_by_eps"] = {_key(r["eps"]): r["c1_proxy"] for r in approx}
        if len(approx) >= 3 and all(r["normalized_err"] > 0 for r in approx):
            summary["rate_slope"] = twoscale.rate_fit([(r["eps"], r["normalized_err"]) for r in approx])
    dbl = [(r["eps"], r["doubling_summary"]) for r in good if "doubling_summary" in r]
    if dbl:
        summary["max_doubling_ratio_by_eps"] = {_key(e): s["max_ratio"] for e, s in dbl}
        for key in ("ellipsoid_max_ratio", "translated_max_ratio", "n_constant", "psi_convexity_defect",
                    "vanishing_order", "sub_eps_max_ratio"):
            summary[f"{key}_by_eps"] = {_key(e): s[key] for e, s in dbl}
        ratios = [s["max_ratio"] for _, s in dbl]
        summary["doubling_uniformity_factor"] = max(ratios) / min(ratios)
    nod = [(r["eps"], r["nodal_summary"]) for r in good if "nodal_summary" in r]
    if nod:
        summary["f_main_by_eps"] = {_key(e): s["f_main"] for e, s in nod}
        summary["f_main_trend_slope"] = _trend_slope([e for e, _ in nod], [s["f_main"] for _, s in nod])
        summary["nodal_cap_at_eps_by_eps"] = {_key(e): s["cap_at_eps"] for e, s in nod}
        summary["nodal_max_below_eps_by_eps"] = {_key(e): s["max_below_eps"] for e, s in nod}
        summary["singular_clusters_by_eps"] = {_key(e): s["singular_clusters"] for e, s in nod}
    summary["failures"] = [{"eps": r["eps"], "error": r["error"]} for r in results if "error" in r]
    summary["environment"] = {
        "grids": {_key(r["eps"]): {"h": r["h"], "m": r["m"]} for r in good},
        "cell_n": config.cell_n,
        "cell_tol": config.cell_tol,
        "solve_tol": config.solve_tol,
        "cell_residual": cres.chi.residual_norm,
        "flux_divergence_residual": cres.flux.divergence_residual,
        "wall_times": {"cell": t_cell, "total": t_total,
                       **{_key(r["eps"]): r["timings"] for r in good}},
    }
    return summary


def write_cell_json(path, cres: CellResult):
    a = cres.a_hat.a_hat
    payload = {
        "a11": a.a11, "a12": a.a12, "a22": a.a22,
        "lambda_hat_min": cres.a_hat.lambda_hat_min, "lambda_hat_max": cres.a_hat.lambda_hat_max,
        "lambda": cres.lam,
        "corrector_residual": cres.chi.residual_norm,
        "chi_sup": [cres.chi.chi1.sup(), cres.chi.chi2.sup()],
        "flux_mean_max": cres.flux_mean,
        "flux_divergence_residual": cres.flux.divergence_residual,
        "grid_n": cres.chi.grid_n,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _write_outputs(out: Path, rep: SweepReport):
    if rep.approx:
        dumps.write_csv(out / "approx.csv", APPROX_COLUMNS, rep.approx)
    if rep.doubling:
        dumps.write_csv(out / "doubling.csv", DOUBLING_COLUMNS, rep.doubling)
    for eps, rows in rep.psi.items():
        dumps.write_csv(out / f"psi_eps_{eps:.6g}.csv", PSI_COLUMNS, rows)
    if rep.densities:
        dumps.write_csv(out / "nodal_density.csv", DENSITY_COLUMNS, rep.densities)
    (out / "summary.json").write_text(json.dumps(_json_safe(rep.summary), indent=2, sort_keys=True) + "\n")
