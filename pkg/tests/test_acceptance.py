"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one ``criterion k: PASS|FAIL`` line, printed in the
terminal summary, before asserting.
"""

import json
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import golden

from conftest import ACCEPTANCE, TIMINGS
from plasmafb import freeboundary as fb
from plasmafb.cli import main
from plasmafb.config import RunConfig
from plasmafb.functional import beta, cap_b
from plasmafb.grid import build_grid
from plasmafb.nehari import (
    decompose,
    energy_on_ray,
    fibering_s,
    nehari_residual,
    project_nehari,
    projected_energy,
)
from plasmafb.functional import energy_J
from plasmafb.solver import energy_identity_check
from plasmafb.verify import homogeneity_radii, oracle_compare, weiss_radii, weiss_vertices
from plasmafb.weiss import homogeneity_test, monotonicity_report, weiss_deficit, weiss_density

SQ2 = np.sqrt(2.0)


def record(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[k] = line
    print(line)
    return ok


def random_w_field(grid, rng):
    X, Y = grid.coords
    c = rng.uniform(-0.3, 0.3, 2)
    rad = rng.uniform(0.3, 0.6)
    amp = rng.uniform(1.5, 6.0)
    q = ((X - c[0]) ** 2 + (Y - c[1]) ** 2) / rad**2
    v = amp * np.clip(1 - q, 0, None) ** 2 * (1 + 0.2 * rng.standard_normal(X.shape))
    return np.where(grid.interior, v, 0.0)


def ray_argmax(grid, v, p):
    """Golden-section maximizer of the ray energy, bracketed by a log scan."""
    s = np.geomspace(1e-3, 1e3, 241)
    e = np.array([energy_on_ray(grid, v, p, x) for x in s])
    k = int(np.argmax(e))
    return golden(lambda x: -energy_on_ray(grid, v, p, x), brack=(s[k - 1], s[k], s[k + 1]),
                  tol=1e-12)


def test_criterion_1_mollifier():
    t0 = time.perf_counter()
    mass, _ = quad(beta, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    t = np.linspace(-1.0, 2.0, 10_001)
    b = beta(t)
    ok_range = bool(b.min() >= 0.0 and b.max() <= 2.0)
    exact = cap_b(0.0) == 0.0 and cap_b(1.0) == 1.0
    dt = time.perf_counter() - t0
    ok = abs(mass - 1.0) <= 1e-10 and ok_range and exact and dt < 1.0
    record(1, ok, f"|mass-1|={abs(mass - 1):.1e} range=[{b.min():.3f},{b.max():.3f}] "
                  f"B(0)=0,B(1)=1 {exact} time={dt:.2f}s")
    assert ok


def test_criterion_2_nehari():
    grid = build_grid("disk", 1.0, 129)
    rng = np.random.default_rng(2024)
    p = 4.0
    worst = dict(idem=0.0, scale=0.0, golden=0.0, energy=0.0)
    t0 = time.perf_counter()
    for _ in range(100):
        v = random_w_field(grid, rng)
        pv = project_nehari(grid, v, p)
        worst["idem"] = max(worst["idem"], np.abs(project_nehari(grid, pv, p) - pv).max())
        d = decompose(v)
        for t in (0.1, 10.0):
            w = project_nehari(grid, d.v_minus + t * d.v_plus, p)
            worst["scale"] = max(worst["scale"], np.abs(w - pv).max())
        worst["golden"] = max(worst["golden"], abs(fibering_s(grid, v, p) - ray_argmax(grid, v, p)))
        e = projected_energy(grid, v, p)
        worst["energy"] = max(worst["energy"], abs(e - energy_J(grid, pv, p)) / abs(e))
    dt = time.perf_counter() - t0
    ok = (worst["idem"] <= 1e-12 and worst["scale"] <= 1e-12 and worst["golden"] <= 1e-6
          and worst["energy"] <= 1e-10 and dt < 30.0)
    record(2, ok, "idem={idem:.1e} scale={scale:.1e} golden={golden:.1e} energy={energy:.1e}"
                  .format(**worst) + f" time={dt:.1f}s")
    assert ok


def test_criterion_3_solver(solved257_fine):
    grid, u, trace, cfg = solved257_fine
    assert cfg.schedule(grid.h).eps_min == pytest.approx(max(2 * grid.h, 0.003))
    res = max(r.residual for r in trace.records)
    levels = trace.levels
    nres = nehari_residual(grid, u, cfg.p)
    dt = TIMINGS["solved257_fine"]
    ok = (res <= 1e-8 and bool(np.all(levels > 0)) and nres <= 1e-3 and u.max() > 1.0
          and dt <= 600.0)
    record(3, ok, f"levels={len(trace.records)} max residual={res:.1e} min c_eps={levels.min():.4f} "
                  f"nehari={nres:.1e} max u={u.max():.4f} time={dt:.0f}s")
    assert ok


def test_criterion_4_oracle(solved129, solved257):
    t0 = time.perf_counter()
    res = {}
    for key, (grid, u, trace, cfg) in (("129", solved129), ("257", solved257)):
        res[key] = oracle_compare(RunConfig(n=cfg.n), grid, u, trace)
    dt = time.perf_counter() - t0 + TIMINGS["solved129"] + TIMINGS["solved257"]
    a, b = res["129"], res["257"]
    ok = (b["linf"] <= 0.02 and b["radius_discrepancy"] <= 2 * b["h"]
          and a["linf"] / b["linf"] >= 1.5
          and a["radius_discrepancy"] / b["radius_discrepancy"] >= 1.5 and dt <= 900.0)
    record(4, ok, f"linf {a['linf']:.4f}->{b['linf']:.4f} "
                  f"radius {a['radius_discrepancy']:.2e}->{b['radius_discrepancy']:.2e} "
                  f"(2h={2 * b['h']:.4f}) time={dt:.0f}s")
    assert ok


def test_criterion_5_energy_identity(solved257):
    grid, u, _, cfg = solved257
    r = energy_identity_check(grid, u, cfg.p)
    ok = r <= 0.02
    record(5, ok, f"relative residual={r:.2e}")
    assert ok


def _slope_median(solved):
    grid, u, _, cfg = solved
    return fb.slope_table(grid, u, band=cfg.schedule(grid.h).eps_min).median_error


def test_criterion_6_viscosity(solved129, solved257):
    m129, m257 = _slope_median(solved129), _slope_median(solved257)
    ok = m257 <= 0.1 and m257 <= m129
    record(6, ok, f"median |a^2-b^2-2|: n=129 {m129:.4f}, n=257 {m257:.4f}")
    assert ok


def _geometry(solved):
    grid, u, _, _ = solved
    curve = fb.extract_free_boundary(grid, u)
    dens = fb.density_ratios(grid, u, curve)
    return dict(
        c=fb.nondegeneracy_constant(grid, u),
        gamma=fb.sup_growth_constant(grid, u, curve),
        dmin=float(dens.plus_fraction.min()),
        dmax=float(dens.plus_fraction.max()),
        per=float(dens.perimeter_density.max()),
        h=grid.h,
    )


def test_criterion_7_geometry(solved129, solved257):
    a, b = _geometry(solved129), _geometry(solved257)
    stable = {k: abs(a[k] - b[k]) <= 0.2 * abs(b[k]) for k in ("c", "gamma", "dmin", "dmax", "per")}
    ok = (b["c"] > 0.05 and b["gamma"] >= b["c"] - 2 * b["h"] and b["dmin"] >= 0.1
          and b["dmax"] <= 0.9 and b["per"] <= 10.0 and all(stable.values()))
    record(7, ok, "c {0:.3f}->{1:.3f} gamma {2:.3f}->{3:.3f} density [{4:.3f},{5:.3f}]->[{6:.3f},{7:.3f}] "
                  "perimeter {8:.3f}->{9:.3f}".format(a["c"], b["c"], a["gamma"], b["gamma"],
                                                      a["dmin"], a["dmax"], b["dmin"], b["dmax"],
                                                      a["per"], b["per"]))
    assert ok


def test_criterion_8_weiss(solved257):
    t0 = time.perf_counter()
    g = build_grid("disk", 1.0, 257)
    X, Y = g.coords
    th = 0.4
    nu = np.array([np.cos(th), np.sin(th)])
    x0 = np.array([0.011, -0.006])
    t = (X - x0[0]) * nu[0] + (Y - x0[1]) * nu[1]
    w2 = 1.0 + 2.0 * np.maximum(t, 0) - SQ2 * np.maximum(-t, 0)
    radii = 8 * g.h * SQ2 ** np.arange(4)
    psi_err = max(abs(weiss_density(g, w2, x0, r) - np.pi / 2) for r in radii)
    deficit = weiss_deficit(g, w2, x0, radii[0], radii[-1])

    grid, u, _, cfg = solved257
    curve = fb.extract_free_boundary(grid, u)
    delta0 = fb.boundary_gap(grid, curve)
    wr = weiss_radii(grid, delta0)
    hr = homogeneity_radii(grid, delta0, cfg.schedule(grid.h).eps_min)
    verts = weiss_vertices(curve, 3)
    mono = [monotonicity_report(grid, u, curve.vertices[v], wr, p=cfg.p).passed for v in verts]
    homog = []
    for v in verts:
        dev = [homogeneity_test(fb.blow_up(grid, u, curve.vertices[v], r)) for r in hr]
        homog.append(bool(np.all(np.diff(dev) < 0)))
    dt = time.perf_counter() - t0
    ok = (psi_err <= 1e-2 and deficit <= 1e-6 and len(verts) == 3 and all(mono)
          and len(hr) >= 2 and all(homog) and dt < 120.0)
    record(8, ok, f"|psi-pi/2|={psi_err:.4f} deficit={deficit:.1e} monotone={mono} "
                  f"({len(wr)} radii) homogeneity decreasing={homog} ({len(hr)} radii) time={dt:.1f}s")
    assert ok


def test_criterion_9_determinism(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["solve", "--out", str(o)]) for o in outs]
    same = {name: (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            for name in ("u.csv", "report.json")}
    json.loads((outs[0] / "report.json").read_text())
    ok = codes == [0, 0] and all(same.values())
    record(9, ok, f"exit codes={codes} bitwise identical={same}")
    assert ok
