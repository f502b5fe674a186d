"""The 13 acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
Runtime budgets are part of each criterion.
"""
from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE
from test_mesh import MESHES, _brute_ring
from test_reconstruction import EXACT_MESHES, _random_poly, uniform_face_weights
from wlseno import kernels, stability
from wlseno.config import RunConfig
from wlseno.harness import cell_averages, convergence_study, run_preset
from wlseno.laws import Euler
from wlseno.mesh import ring_members
from wlseno.reconstruction import ReconstructionConfig, Reconstructor
from wlseno.solver import FiniteVolumeSolver, SolverConfig, rk3_step

pytestmark = pytest.mark.slow


def record(num: int, title: str, ok: bool, detail: str, seconds: float, budget: float) -> None:
    within = seconds < budget
    passed = bool(ok and within)
    line = f"criterion {num:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}; {seconds:.1f} s (budget {budget:g} s)"
    ACCEPTANCE[num] = line
    print(line)
    assert passed, line


def fmt(values) -> str:
    return ", ".join(f"{v:.3g}" for v in values)


def full_rank_cells(recon: Reconstructor) -> np.ndarray:
    """Cells whose unweighted stencil system determines every coefficient."""
    full = np.zeros(recon.n_cells, dtype=bool)
    for bk in recon.buckets:
        w = bk.mask.astype(float)
        rhs = np.zeros(bk.members.shape + (1,))
        _, rank, _ = kernels.wls_solve(bk.A, np.arange(bk.cells.size), w, rhs, recon.config.rank_tol)
        full[bk.cells] = rank == recon.p
    return full


def study(name, levels, norm="linf", **cfg):
    report = convergence_study(name, levels, RunConfig(**cfg))
    failures = [r["failure"] for r in report.rows if r.get("failure")]
    errors = [r[norm] for r in report.rows if not r.get("failure")]
    return report.slopes(norm), errors, failures


def test_criterion_01_five_cell_closed_form():
    t0 = time.perf_counter()
    target = np.array([2, -13, 47, 27, -3]) / 60.0
    worst = 0.0
    for seed in range(5):
        w = np.random.default_rng(100 + seed).uniform(0.01, 100.0, 5)
        worst = max(worst, float(np.abs(uniform_face_weights(5, w) - target).max()))
    record(1, "five-cell weights (2,-13,47,27,-3)/60", worst <= 1e-12, f"max deviation {worst:.2e} over 5 weight sets",
           time.perf_counter() - t0, 1.0)


def test_criterion_02_seven_cell_rationals():
    t0 = time.perf_counter()
    got = uniform_face_weights(7, [float(x) for x in stability.smooth_weights(7)])
    checks = {0: Fraction(66771, 87380), 1: Fraction(38388551, 94894680)}
    rel = max(abs(got[3 + k] - float(v)) / float(v) for k, v in checks.items())
    record(2, "seven-cell smooth-weight rationals", rel <= 1e-9, f"max relative deviation {rel:.2e}",
           time.perf_counter() - t0, 1.0)


def test_criterion_03_cfl_numbers():
    t0 = time.perf_counter()
    five = stability.max_cfl(stability.five_cell_scheme())
    seven = stability.max_cfl(stability.seven_cell_scheme())
    ok = abs(five - 1.44) <= 0.01 and abs(seven - 1.67) <= 0.01
    record(3, "RK3 CFL numbers", ok, f"five-cell {five:.4f}, seven-cell {seven:.4f}", time.perf_counter() - t0, 5.0)


def test_criterion_04_reconstruction_convergence():
    t0 = time.perf_counter()
    levels = [32, 64, 128, 256]
    report = convergence_study("recon1d-discontinuous", levels, RunConfig())
    smooth = report.slopes("linf_smooth")
    near = report.slopes("linf_near")
    ok = min(smooth) >= 4.7 and min(near) >= 3.7
    detail = f"smooth slopes {fmt(smooth)} (>= 4.7), near slopes {fmt(near)} (>= 3.7)"
    record(4, "1-D reconstruction of split sin/cos", ok, detail, time.perf_counter() - t0, 10.0)


def test_criterion_05_wave1d():
    t0 = time.perf_counter()
    levels = [32, 64, 128, 256]
    uni, _, f1 = study("wave1d-smooth", levels)
    non, _, f2 = study("wave1d-nonuniform", levels)
    ok = not (f1 or f2) and min(uni) >= 4.7 and min(non) >= 4.0
    detail = f"uniform slopes {fmt(uni)} (>= 4.7), perturbed slopes {fmt(non)} (>= 4.0)"
    record(5, "1-D wave equation", ok, detail, time.perf_counter() - t0, 120.0)


def test_criterion_06_burgers1d():
    t0 = time.perf_counter()
    slopes, errs, fails = study("burgers1d", [64, 128, 256, 512])
    shock = run_preset("burgers1d-shock", 512)
    l1 = shock.metrics.get("l1", np.inf)
    tv, tv_ref = shock.metrics.get("tv", np.inf), shock.metrics.get("tv_reference", 0.0)
    ok = not fails and min(slopes) >= 4.7 and shock.failure is None and l1 < 5e-3 and tv <= 1.1 * tv_ref
    detail = (f"t=1 slopes {fmt(slopes)} (>= 4.7); t=1.4 L1 {l1:.3g} (< 5e-3), "
              f"TV {tv:.6g} vs exact {tv_ref:.6g} (<= +10%)")
    record(6, "1-D Burgers", ok, detail, time.perf_counter() - t0, 180.0)


def test_criterion_07_sod():
    t0 = time.perf_counter()
    res = run_preset("sod", 400)
    detail = (f"density L1 {res.metrics.get('density_l1', np.nan):.3g} (< 1e-2), "
              f"flags {res.flags}" + (f", {res.failure}" if res.failure else ""))
    record(7, "Sod shock tube", res.passed, detail, time.perf_counter() - t0, 120.0)


def test_criterion_08_blast():
    t0 = time.perf_counter()
    res = run_preset("blast", 800)
    if res.failure:
        detail = res.failure
    else:
        detail = f"relative density L1 {res.metrics['density_rel_l1']:.3g} (< 0.05), flags {res.flags}"
    record(8, "interacting blast waves", res.passed, detail, time.perf_counter() - t0, 300.0)


def test_criterion_09_wave2d():
    t0 = time.perf_counter()
    levels = [8, 16, 32]
    non, _, f1 = study("wave2d", levels)
    uni, _, f2 = study("wave2d-uniform", levels)
    ok = not (f1 or f2) and all(1.7 <= s <= 2.6 for s in non) and min(uni) >= 3.3
    detail = f"non-uniform degree-2 slopes {fmt(non)} (in [1.7, 2.6]), uniform degree-3 slopes {fmt(uni)} (>= 3.3)"
    record(9, "2-D wave on triangulations", ok, detail, time.perf_counter() - t0, 600.0)


def test_criterion_10_vortex():
    t0 = time.perf_counter()
    slopes, errs, fails = study("vortex2d", [10, 20, 40])
    ok = not fails and min(slopes) >= 4.0
    detail = f"density L-inf {fmt(errs)}, slopes {fmt(slopes)} (>= 4.0)"
    record(10, "2-D isentropic vortex", ok, detail, time.perf_counter() - t0, 1200.0)


def test_criterion_11_explosions():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("explosion2d", "explosion3d"):
        res = run_preset(name)
        ok &= res.passed
        parts.append(f"{name} " + (res.failure or f"relative L1 {res.metrics['density_rel_l1']:.3g}"))
    record(11, "2-D/3-D explosion vs radial reference", ok, "; ".join(parts) + " (< 0.05)",
           time.perf_counter() - t0, 1800.0)


def test_criterion_12_wave3d():
    t0 = time.perf_counter()
    levels = [8, 12, 16]
    s3, e3, f3 = study("wave3d", levels, degree=2)
    s4, e4, f4 = study("wave3d", levels, degree=3)
    ratio = e4[-1] / e3[-1] if e3 and e4 and len(e3) == len(e4) else np.inf
    ok = not (f3 or f4) and min(s3) >= 2.6 and min(s4) >= 2.6 and ratio <= 0.7
    detail = (f"degree-2 slopes {fmt(s3)}, degree-3 slopes {fmt(s4)} (>= 2.6); "
              f"finest error ratio {ratio:.3g} (<= 0.7)")
    record(12, "3-D wave on tetrahedra", ok, detail, time.perf_counter() - t0, 1800.0)


def test_criterion_13_property_suites():
    t0 = time.perf_counter()
    failures = []
    rng = np.random.default_rng(13)

    # polynomial exactness, 1/2/3-D, on every cell whose system has full rank
    worst, excluded = 0.0, 0
    for dim, make in EXACT_MESHES.items():
        mesh = make()
        for degree in (1, 2, 3):
            f = _random_poly(dim, degree, rng)
            ubar = cell_averages(mesh, f, degree=8)[:, 0]
            recon = Reconstructor(mesh, ReconstructionConfig(degree=degree))
            full = full_rank_cells(recon)
            excluded += int((~full).sum())
            err = np.abs(recon.face_values(ubar)[..., 0] - f(recon.face_points))[full].max()
            worst = max(worst, err / max(1.0, np.abs(ubar).max()))
    if worst > 1e-10:
        failures.append(f"exactness {worst:.2e}")

    # AHF involution and ring equivalence on meshes of at most 500 elements
    for name in ("square", "disk", "cube"):
        mesh = MESHES[name]()
        assert mesh.n_cells <= 500
        k = mesh.dim + 1
        e, f = np.nonzero(mesh.sibhfs >= 0)
        e2, f2 = np.divmod(mesh.sibhfs[e, f], k)
        if not np.array_equal(mesh.sibhfs[e2, f2], e * k + f):
            failures.append(f"involution on {name}")
        step = Fraction(1, mesh.dim)
        for cell in rng.choice(mesh.n_cells, 3, replace=False):
            for depth in (step, 2 * step, 1 + step):
                if ring_members(mesh, int(cell), depth).tolist() != _brute_ring(mesh, int(cell), depth):
                    failures.append(f"ring {name} cell {cell} depth {depth}")

    # discrete conservation per step
    mesh = MESHES["square"]()
    law = Euler(dim=2)
    rho = cell_averages(mesh, lambda x: 1.0 + 0.3 * np.sin(x[..., 0]) * np.cos(x[..., 1]))[:, 0]
    u = law.conserved(rho, np.full((mesh.n_cells, 2), 0.4), rho**1.4)
    solver = FiniteVolumeSolver(mesh, law, SolverConfig(recon=ReconstructionConfig(degree=2)))
    drift = 0.0
    for _ in range(5):
        before = mesh.measures @ u
        u = rk3_step(solver.rhs, u, solver.stable_dt(u, 0.5))
        drift = max(drift, float(np.abs(mesh.measures @ u - before).max()))
    if drift > 1e-11:
        failures.append(f"conservation drift {drift:.2e}")

    # argmin against the normal equations
    dev = 0.0
    for _ in range(50):
        n, p = rng.integers(8, 40), rng.integers(1, 8)
        A, b = rng.normal(size=(n, p)), rng.normal(size=(n, 2))
        w = rng.uniform(0.1, 10.0, n)
        WA = w[:, None] * A
        ref = np.linalg.solve(WA.T @ WA, WA.T @ (w[:, None] * b))
        for backend in kernels.available_backends():
            coef, _, _ = kernels.wls_solve(A[None], np.zeros(1, dtype=np.int64), w[None], b[None], backend=backend)
            dev = max(dev, float(np.abs(coef[0] - ref).max() / max(1.0, np.abs(ref).max())))
    if dev > 1e-9:
        failures.append(f"argmin deviation {dev:.2e}")

    # eigensystem reproduces the flux Jacobian
    jac = 0.0
    for dim in (1, 2, 3):
        law = Euler(dim=dim)
        states = law.conserved(rng.uniform(0.1, 10, 100), rng.uniform(-3, 3, (100, dim)), rng.uniform(0.1, 10, 100))
        normals = rng.normal(size=(100, dim))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        R, lam, L = law.eigensystem(states, normals)
        J = law.jacobian(states, normals)
        jac = max(jac, float(np.abs(np.einsum("bij,bj,bjk->bik", R, lam, L) - J).max() / np.abs(J).max()))
    if jac > 1e-10:
        failures.append(f"eigensystem deviation {jac:.2e}")

    detail = "all properties hold" if not failures else "; ".join(failures)
    detail += f" (exactness {worst:.1e} with {excluded} rank-deficient cells skipped, conservation {drift:.1e}, argmin {dev:.1e}, R Lambda L {jac:.1e})"
    record(13, "property suites", not failures, detail, time.perf_counter() - t0, 120.0)
