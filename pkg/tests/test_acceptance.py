"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that conftest prints in the terminal
summary. Criteria 4, 7, 9 and 11 share the full TrigProduct(0.5) sweep
(eps = 1/4 ... 1/32, about 1.5 minutes per run on one core).
"""

import csv
import json
import math
from collections import defaultdict

import numpy as np
import pytest

from homog_lab.analysis import doubling_profile, three_spheres_profile, vanishing_order_estimate
from homog_lab.cell import flux_corrector, flux_field, homogenized, solve_cell
from homog_lab.coefficients import CoefficientField, SymMatrix2
from homog_lab.harness import ExperimentConfig, run_sweep
from homog_lab.nodal import extract_nodal, nodal_length_in_ball
from homog_lab.solver import (BoxGrid, DiscreteField, Ellipsoid, ball_average_sq, ellipsoid_average_sq,
                              ellipsoid_inclusion_check, solve_dirichlet)

from oracles import laminate_tensor


def record(log, k, ok, detail):
    log[k] = (bool(ok), detail)
    assert ok, detail


def poly_field(fn, h):
    grid = BoxGrid.from_spacing(2.5, h)
    X1, X2 = grid.mesh()
    return DiscreteField(grid, fn(X1, X2))


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_sweep")
    cfg = ExperimentConfig.from_dict({"family": {"family": "trig_product", "mu": 0.5}})
    rep = run_sweep(cfg, out, jobs=1)
    summary = json.loads((out / "summary.json").read_text())
    return cfg, out, rep, summary


def test_criterion_01_laminate_tensor(acceptance_log):
    harmonic, arithmetic = laminate_tensor(0.5)
    f = CoefficientField.laminate(0.5)
    a = homogenized(f, solve_cell(f, 256)).a_hat
    g = CoefficientField.rotated_laminate(0.5, math.pi / 4)
    b = homogenized(g, solve_cell(g, 256))
    errs = [abs(a.a11 - harmonic), abs(a.a22 - arithmetic),
            abs(b.lambda_hat_min - harmonic), abs(b.lambda_hat_max - arithmetic)]
    record(acceptance_log, 1, max(errs) <= 1e-3,
           f"a11={a.a11:.6f} a22={a.a22:.6f} rotated eig=({b.lambda_hat_min:.6f}, {b.lambda_hat_max:.6f}) "
           f"max err {max(errs):.2e} <= 1e-3")


def test_criterion_02_constant_coefficients(acceptance_log):
    a0 = (0.8, 0.2, 0.6)
    f = CoefficientField.constant(*a0)
    chi = solve_cell(f, 256)
    a = homogenized(f, chi)
    b = flux_field(f, chi, a)
    phi = flux_corrector(b)
    chi_sup = max(chi.chi1.sup(), chi.chi2.sup())
    a_err = max(abs(a.a_hat.a11 - a0[0]), abs(a.a_hat.a12 - a0[1]), abs(a.a_hat.a22 - a0[2]))
    b_sup = float(np.abs(b).max())
    phi_sup = max(phi.stored[1].sup(), phi.stored[2].sup())
    # B and phi are differences of equal floats; "identically zero" is read at the 1e-12 level used for A_hat
    ok = chi_sup <= 1e-10 and a_err <= 1e-12 and b_sup <= 1e-12 and phi_sup <= 1e-12
    record(acceptance_log, 2, ok,
           f"|chi|={chi_sup:.1e} |A_hat-A0|={a_err:.1e} |B|={b_sup:.1e} |phi|={phi_sup:.1e}")


def test_criterion_03_flux_corrector(acceptance_log):
    f = CoefficientField.trig_product(0.5)
    res = {}
    for n in (256, 512):
        chi = solve_cell(f, n)
        phi = flux_corrector(flux_field(f, chi, homogenized(f, chi)))
        res[n] = phi.divergence_residual
        antisym = all(np.array_equal(phi.phi(2, 1, j).values, -phi.phi(1, 2, j).values)
                      and not phi.phi(1, 1, j).values.any() and not phi.phi(2, 2, j).values.any() for j in (1, 2))
    factor = res[256] / res[512]
    record(acceptance_log, 3, antisym and res[256] <= 1e-4 and factor >= 3.0,
           f"residual n=256 {res[256]:.2e} (<= 1e-4), n=512 {res[512]:.2e}, factor {factor:.2f} (>= 3), "
           f"antisymmetric={antisym}")


def test_criterion_04_approximation_rate(acceptance_log, sweep):
    cfg, _, rep, summary = sweep
    errs = [r["normalized_err"] for r in rep.approx]
    slope = summary["rate_slope"]
    decreasing = len(errs) == len(cfg.eps_list) and all(a > b for a, b in zip(errs, errs[1:]))
    record(acceptance_log, 4, rep.ok and decreasing and slope is not None and 0.8 <= slope <= 1.2,
           f"slope {slope:.4f} in [0.8, 1.2]; errors {', '.join(f'{e:.3e}' for e in errs)} strictly decreasing")


def test_criterion_05_doubling_oracles(acceptance_log):
    h = 1 / 128
    lin = doubling_profile(poly_field(lambda a, b: a, h), depth=4)
    quad = doubling_profile(poly_field(lambda a, b: a * a - b * b, h), depth=4)
    dev_lin = max(abs(q / 4 - 1) for q in lin.ratios)
    dev_quad = max(abs(q / 16 - 1) for q in quad.ratios)
    o1, o2 = vanishing_order_estimate(lin), vanishing_order_estimate(quad)
    ok = dev_lin <= 0.03 and dev_quad <= 0.03 and abs(o1 - 1) <= 0.05 and abs(o2 - 2) <= 0.05
    record(acceptance_log, 5, ok,
           f"x1 ratios within {dev_lin:.1e}, x1^2-x2^2 within {dev_quad:.1e} (<= 3%); orders {o1:.4f}, {o2:.4f}")


def test_criterion_06_three_spheres(acceptance_log):
    grid = BoxGrid.from_spacing(2.5, 1 / 128)
    u = solve_dirichlet(CoefficientField.identity(), 1.0, grid, lambda a, b: a + 0.3 * (a * a - b * b))
    prof = three_spheres_profile(u, -4.0, 0.0, steps=9)
    w = three_spheres_profile(poly_field(lambda a, b: a * a - b * b, 1 / 128), -4.0, 0.0, steps=9)
    slope_dev = float(np.abs(w.slopes() - 4.0).max())
    record(acceptance_log, 6, prof.convexity_defect >= -1e-3 and slope_dev <= 0.05,
           f"harmonic defect {prof.convexity_defect:.2e} (>= -1e-3) on r in [1/16, 1]; "
           f"Re z^2 slope deviation {slope_dev:.1e} (<= 0.05)")


def test_criterion_07_uniform_doubling(acceptance_log, sweep):
    _, out, rep, summary = sweep
    by_center = defaultdict(lambda: defaultdict(float))
    with open(out / "doubling.csv") as fh:
        for row in csv.DictReader(fh):
            if row["shape"] != "ball" or not 1 / 64 <= float(row["r"]) <= 1:
                continue
            key = (float(row["center_x"]), float(row["center_y"]))
            eps = float(row["eps"])
            by_center[eps][key] = max(by_center[eps][key], float(row["ratio"]))
    center = [by_center[e][(0.0, 0.0)] for e in sorted(by_center)]
    spread = max(center) / min(center)
    worst = max(max(v / c[(0.0, 0.0)], c[(0.0, 0.0)] / v) for c in by_center.values() for v in c.values())
    n_centers = min(len(c) for c in by_center.values())
    ok = rep.ok and len(by_center) == 4 and n_centers == 25 and spread <= 1.5 and worst <= 2.0
    record(acceptance_log, 7, ok,
           f"center max ratio {min(center):.4f}..{max(center):.4f} across eps, factor {spread:.4f} (<= 1.5); "
           f"{n_centers} translated centers within factor {worst:.4f} (<= 2)")


def test_criterion_08_nodal_oracles(acceptance_log):
    lin = extract_nodal(poly_field(lambda a, b: a, 1 / 64), window=1.0)
    lin_err = max(abs(nodal_length_in_ball(lin, (0, 0), r) - 2 * r) / r for r in (0.25, 0.5, 1.0))
    cross = extract_nodal(poly_field(lambda a, b: a * a - b * b, 1 / 256), window=1.2)
    cross_len = nodal_length_in_ball(cross, (0, 0), 1.0)
    errs = [abs(extract_nodal(poly_field(lambda a, b: a * a + b * b - 0.25, h), window=1.0).total_length() - math.pi)
            for h in (1 / 32, 1 / 64, 1 / 128)]
    order = min(math.log2(errs[k] / errs[k + 1]) for k in range(2))
    ok = lin_err <= 1e-6 and abs(cross_len / 4 - 1) <= 0.01 and order >= 1.5
    record(acceptance_log, 8, ok,
           f"line rel err {lin_err:.1e} (<= 1e-6); crossing length {cross_len:.5f} (4 +- 1%); circle order {order:.2f}")


def test_criterion_09_uniform_nodal(acceptance_log, sweep):
    _, _, rep, summary = sweep
    f = summary["f_main_by_eps"]
    vals = list(f.values())
    ratio = max(vals) / min(vals)
    slope = summary["f_main_trend_slope"]
    ok = rep.ok and len(vals) == 4 and ratio <= 2.0 and slope <= 0.05
    record(acceptance_log, 9, ok,
           f"f_main {min(vals):.4f}..{max(vals):.4f}, max/min {ratio:.4f} (<= 2); trend slope {slope:.4f} (<= 0.05)")


def test_criterion_10_ellipsoid_inclusion(acceptance_log):
    f = CoefficientField.laminate(0.5)
    a_hat = homogenized(f, solve_cell(f, 256)).a_hat
    rep = ellipsoid_inclusion_check(Ellipsoid.from_tensor(a_hat, (0.1, -0.2), 0.8), 10_000, seed=0)
    u = poly_field(lambda a, b: np.sin(3 * a) * np.exp(b) + a * b, 1 / 64)
    same = all(ellipsoid_average_sq(u, Ellipsoid.from_tensor(SymMatrix2(1.0, 0.0, 1.0), c, r))
               == ball_average_sq(u, c, r) for c, r in [((0, 0), 1.0), ((0.2, -0.1), 0.5)])
    record(acceptance_log, 10, rep.passed and same,
           f"inclusion failures inner={rep.inner_failures} outer={rep.outer_failures} of {rep.n_samples}; "
           f"identity ellipse == ball bitwise: {same}")


def test_criterion_11_determinism(acceptance_log, sweep, tmp_path):
    cfg, out, _, _ = sweep
    run_sweep(cfg, tmp_path, jobs=1)
    first = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
    second = {p.name: p.read_bytes() for p in sorted(tmp_path.glob("*.csv"))}
    differing = sorted(k for k in first if first[k] != second.get(k))
    ok = bool(first) and first.keys() == second.keys() and not differing
    record(acceptance_log, 11, ok, f"{len(first)} CSV files compared, differing: {differing or 'none'}")
