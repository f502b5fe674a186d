"""Benchmark presets, reference solutions, error norms and convergence studies."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from wlseno import fixtures
from wlseno.config import RunConfig
from wlseno.errors import InstabilityError
from wlseno.geometry import simplex_rule
from wlseno.laws import Advection, Burgers, ConservationLaw, Euler, RadialEuler, conserved_from_primitive
from wlseno.mesh import AhfMesh, interval_mesh
from wlseno.reconstruction import Reconstructor
from wlseno.riemann import exact_riemann
from wlseno.solver import FiniteVolumeSolver, SolverConfig

__all__ = [
    "PRESETS",
    "ConvergenceReport",
    "RunResult",
    "burgers_exact",
    "cell_averages",
    "convergence_study",
    "error_norms",
    "run_preset",
    "spherical_reference",
    "total_variation",
    "write_convergence_csv",
    "write_solution_csv",
    "write_summary",
]

log = logging.getLogger(__name__)


# {{{ helpers


def cell_averages(mesh: AhfMesh, func: Callable[[np.ndarray], np.ndarray], degree: int = 8) -> np.ndarray:
    """Quadrature cell averages of ``func(x)`` with x of shape (..., dim); returns (N, ncomp)."""
    bary, w = simplex_rule(mesh.dim, degree)
    x = np.einsum("qk,ekd->eqd", bary, mesh.all_cell_vertices)
    vals = np.asarray(func(x), dtype=float)
    if vals.ndim == 2:
        vals = vals[..., None]
    return np.einsum("eqc,q->ec", vals, w)


def perturbed_nodes(lo: float, hi: float, n: int, amount: float, seed: int) -> np.ndarray:
    """Uniform nodes with interior nodes moved by up to ``amount`` * spacing."""
    x = np.linspace(lo, hi, n + 1)
    if amount:
        rng = np.random.default_rng(seed)
        x[1:-1] += rng.uniform(-amount, amount, n - 1) * (hi - lo) / n
    return x


def total_variation(values: np.ndarray, periodic: bool = False) -> float:
    v = np.asarray(values, dtype=float)
    tv = float(np.abs(np.diff(v)).sum())
    return tv + float(abs(v[0] - v[-1])) if periodic else tv


def error_norms(mesh: AhfMesh, values: np.ndarray, reference: np.ndarray, mask=None) -> dict[str, float]:
    """L-infinity and volume-weighted L1 (``sum |e| |tau| / |Omega|``) errors."""
    err = np.abs(np.asarray(values) - np.asarray(reference))
    meas = mesh.measures
    if mask is not None:
        err, meas = err[mask], meas[mask]
    return {"linf": float(err.max()), "l1": float((err * meas).sum() / meas.sum())}


def mesh_spacing(mesh: AhfMesh) -> float:
    if mesh.dim == 1:
        return float(mesh.measures.mean())
    return float((mesh.measures.sum() / mesh.n_cells) ** (1.0 / mesh.dim))


def _interval_averages(nodes: np.ndarray, antiderivative: Callable) -> np.ndarray:
    return (antiderivative(nodes[1:]) - antiderivative(nodes[:-1])) / np.diff(nodes)


# }}}


# {{{ reference solutions


def burgers_exact(x, tau: float, amp: float = 0.7, mean: float = 0.3, k: float = 1.0) -> np.ndarray:
    """Entropy solution of ``u_t + u u_s = 0`` with ``u(s, 0) = mean + amp sin(k s)``.

    Before breaking the characteristic relation ``x = xi + tau u0(xi)`` is
    solved by bisection; afterwards the Hopf-Lax minimization picks the
    entropy root.
    """
    x = np.asarray(x, dtype=float)
    u0 = lambda s: mean + amp * np.sin(k * s)  # noqa: E731
    lo_u, hi_u = mean - amp, mean + amp
    if tau == 0.0:
        return u0(x)
    t_break = 1.0 / (amp * k)
    lo = x - tau * hi_u
    hi = x - tau * lo_u
    if tau < t_break:
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            g = mid + tau * u0(mid) - x
            lo = np.where(g < 0.0, mid, lo)
            hi = np.where(g < 0.0, hi, mid)
        xi = 0.5 * (lo + hi)
        return u0(xi)
    # Hopf-Lax: minimize U0(xi) + (x - xi)^2 / (2 tau) over the window
    U0 = lambda s: mean * s - amp / k * np.cos(k * s)  # noqa: E731
    flat = x.ravel()
    out = np.empty_like(flat)
    m = 4001
    frac = np.linspace(0.0, 1.0, m)
    for a in range(0, flat.size, 256):
        xs = flat[a : a + 256]
        l, h = xs - tau * hi_u, xs - tau * lo_u
        xi = l[:, None] + (h - l)[:, None] * frac[None, :]
        G = U0(xi) + (xs[:, None] - xi) ** 2 / (2.0 * tau)
        best = xi[np.arange(xs.size), np.argmin(G, axis=1)]
        step = (h - l) / (m - 1)
        # golden-section polish inside the sampled bracket
        a_, b_ = best - step, best + step
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        for _ in range(60):
            c_ = b_ - gr * (b_ - a_)
            d_ = a_ + gr * (b_ - a_)
            Gc = U0(c_) + (xs - c_) ** 2 / (2.0 * tau)
            Gd = U0(d_) + (xs - d_) ** 2 / (2.0 * tau)
            left = Gc < Gd
            b_ = np.where(left, d_, b_)
            a_ = np.where(left, a_, c_)
        out[a : a + 256] = (xs - 0.5 * (a_ + b_)) / tau
    return out.reshape(x.shape)


def _radial_initial(r, inner, outer, r0, gamma=1.4):
    inside = r <= r0
    rho = np.where(inside, inner[0], outer[0])
    p = np.where(inside, inner[2], outer[2])
    return rho, p


@lru_cache(maxsize=8)
def _spherical_cached(dim: int, inner, outer, r0, radius, t_final, fine_n, degree, cfl):
    law = RadialEuler(1, 1.4, symmetry_dim=dim)
    nodes = np.linspace(0.0, radius, fine_n + 1)
    mesh = interval_mesh(nodes)
    left = (mesh.line_order[0], 0)
    tags = dict(mesh.boundary_tags)
    tags[left] = "reflective"
    mesh = AhfMesh(mesh.dim, mesh.points, mesh.elems, mesh.sibhfs, mesh.v2hf, tags, mesh.hf_shift, mesh.vertex_class, None)
    # exact averages of the piecewise-constant data
    frac_in = np.clip((r0 - nodes[:-1]) / np.diff(nodes), 0.0, 1.0)
    rho = frac_in * inner[0] + (1 - frac_in) * outer[0]
    E = frac_in * inner[2] / 0.4 + (1 - frac_in) * outer[2] / 0.4
    u0 = np.column_stack([rho, np.zeros_like(rho), E])
    cfg = RunConfig()
    solver = FiniteVolumeSolver(mesh, law, SolverConfig(recon=cfg.recon(degree, stencil_size_1d=7)))
    u, _ = solver.integrate(u0, t_final, cfl)
    centers = 0.5 * (nodes[1:] + nodes[:-1])
    rho, vel, p = law.primitive(u)
    return centers, rho, vel[:, 0], p


def spherical_reference(
    initial=((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 0.2),
    t_final: float = 0.1,
    fine_n: int = 4000,
    *,
    dim: int = 3,
    radius: float = 1.0,
    degree: int = 4,
    cfl: float = 0.6,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Radial (r, rho, u, p) of a symmetric explosion from the 1-D source-term system.

    Cells cover [0, radius] so cell centers start at dr/2; r = 0 is a
    reflective wall and the outer end is a copy boundary.
    """
    inner, outer, r0 = initial
    return _spherical_cached(dim, tuple(inner), tuple(outer), float(r0), float(radius), float(t_final), int(fine_n), degree, cfl)


# }}}


# {{{ presets


@dataclass
class RunResult:
    preset: str
    resolution: int
    mesh: AhfMesh
    law: ConservationLaw | None
    solution: np.ndarray
    reference: np.ndarray | None
    metrics: dict[str, float] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)
    steps: int = 0
    seconds: float = 0.0
    t_final: float = 0.0
    failure: str | None = None

    @property
    def h(self) -> float:
        return mesh_spacing(self.mesh)

    @property
    def passed(self) -> bool:
        return self.failure is None and all(self.flags.values())


@dataclass(frozen=True)
class ProblemPreset:
    name: str
    dim: int
    law: Callable[[], ConservationLaw | None]
    make_mesh: Callable[[int, RunConfig], AhfMesh]
    initial: Callable[[AhfMesh], np.ndarray]
    t_final: float
    degree: int
    resolution: int
    cfl: float
    reference: Callable[[AhfMesh, float, RunConfig], np.ndarray] | None = None
    evaluate: Callable[["ProblemPreset", RunResult, RunConfig], None] | None = None
    coarse_h: float | None = None
    match_time_order: bool = False
    characteristic: bool | None = None
    recon_defaults: dict = field(default_factory=dict)
    description: str = ""


PRESETS: dict[str, ProblemPreset] = {}


def register(p: ProblemPreset) -> ProblemPreset:
    PRESETS[p.name] = p
    return p


def _sin_avg(k, shift=0.0):
    # averages of sin(k (x - shift))
    return lambda nodes: _interval_averages(nodes, lambda x: -np.cos(k * (x - shift)) / k)


def _default_eval(p: ProblemPreset, res: RunResult, cfg: RunConfig) -> None:
    if res.reference is None:
        return
    res.metrics.update(error_norms(res.mesh, res.solution[:, 0], res.reference[:, 0]))
    if cfg.l1_bound is not None:
        res.flags["l1_below_bound"] = res.metrics["l1"] < cfg.l1_bound


# 1-D reconstruction of piecewise smooth data (no time stepping)

SPLIT = 0.6


def _recon_exact(x):
    return np.where(x <= SPLIT, np.sin(np.pi * x), np.cos(np.pi * x))


def _recon_avg(nodes):
    F = lambda x: np.where(  # noqa: E731
        x <= SPLIT,
        -np.cos(np.pi * x) / np.pi,
        -np.cos(np.pi * SPLIT) / np.pi + (np.sin(np.pi * x) - np.sin(np.pi * SPLIT)) / np.pi,
    )
    return _interval_averages(nodes, F)


def _recon_eval_factory(discontinuous: bool):
    def evaluate(p: ProblemPreset, res: RunResult, cfg: RunConfig) -> None:
        mesh = res.mesh
        nodes = mesh.points[:, 0]
        recon = Reconstructor(mesh, cfg.recon(res_degree(p, cfg), stencil_size_1d=7))
        fv = recon.face_values(res.solution)[:, :, 0, 0]  # (N, 2)
        x = recon.face_points[:, :, 0, 0]
        exact = _recon_exact(x) if discontinuous else np.sin(np.pi * x)
        err = np.abs(fv - exact)
        if not discontinuous:
            res.metrics.update({"linf": float(err.max()), "linf_smooth": float(err.max())})
            return
        jump_cell = int(np.searchsorted(nodes, SPLIT) - 1)
        touches = np.array([jump_cell in st.tolist() for st in recon.stencils])
        # the jump cell and its two neighbors keep fewer smooth cells than unknowns
        keep = np.abs(np.arange(mesh.n_cells) - jump_cell) >= 2
        res.metrics["linf_near"] = float(err[keep].max())
        res.metrics["linf_smooth"] = float(err[~touches].max())
        res.metrics["linf"] = res.metrics["linf_near"]

    return evaluate


def res_degree(p: ProblemPreset, cfg: RunConfig) -> int:
    return cfg.degree or p.degree


def _recon_mesh(n, cfg):
    return interval_mesh(np.linspace(0.0, 1.0, n + 1), tag=None)


for _name, _disc in (("recon1d-smooth", False), ("recon1d-discontinuous", True)):
    register(
        ProblemPreset(
            name=_name,
            dim=1,
            law=lambda: None,
            make_mesh=_recon_mesh,
            initial=(lambda m: _recon_avg(m.points[:, 0])[:, None])
            if _disc
            else (lambda m: _sin_avg(np.pi)(m.points[:, 0])[:, None]),
            t_final=0.0,
            degree=4,
            resolution=32,
            cfl=0.0,
            evaluate=_recon_eval_factory(_disc),
            recon_defaults={"stencil_size_1d": 7},
            description="face-value reconstruction of " + ("sin/cos split at 0.6" if _disc else "sin(pi x)"),
        )
    )


# 1-D linear wave


def _wave1d_mesh(perturb_default):
    def make(n, cfg):
        amount = cfg.perturb if cfg.perturb is not None else perturb_default
        return interval_mesh(perturbed_nodes(-1.0, 1.0, n, amount, cfg.seed), periodic=True)

    return make


def _nodes_of(mesh):
    # nodes in cell order for interval meshes built by interval_mesh
    return np.r_[mesh.points[mesh.elems[:, 0], 0], mesh.points[mesh.elems[-1, 1], 0]]


def _wave1d_ref_nodes(mesh, t, cfg):
    return _sin_avg(np.pi, t)(_nodes_of(mesh))[:, None]


for _name, _pert in (("wave1d-smooth", 0.0), ("wave1d-nonuniform", 0.3)):
    register(
        ProblemPreset(
            name=_name,
            dim=1,
            law=lambda: Advection((1.0,)),
            make_mesh=_wave1d_mesh(_pert),
            initial=lambda m: _sin_avg(np.pi)(_nodes_of(m))[:, None],
            t_final=1.0,
            degree=4,
            resolution=64,
            cfl=0.8,
            reference=_wave1d_ref_nodes,
            evaluate=_default_eval,
            coarse_h=2.0 / 32,
            match_time_order=True,
            recon_defaults={"stencil_size_1d": 7},
            description="u_t + u_x = 0, sin(pi x) on [-1, 1], periodic",
        )
    )


def _wave_disc_initial(mesh):
    nodes = _nodes_of(mesh)

    def F(x):
        # antiderivative of the piecewise initial data
        a, b = -0.2, 0.3
        s = lambda y: -np.cos(np.pi * y) / np.pi  # noqa: E731
        return np.where(
            x < a, s(x), np.where(x <= b, s(a) + 0.5 * (x - a), s(a) + 0.5 * (b - a) + s(x) - s(b))
        )

    return _interval_averages(nodes, F)[:, None]


def _wave_disc_ref(mesh, t, cfg):
    # the exact solution is the initial data translated by t; sub-cell midpoint sums
    nodes = _nodes_of(mesh)
    L = 2.0
    x = nodes - t
    out = np.empty(nodes.size - 1)
    fine = 64
    for i in range(nodes.size - 1):
        s = np.linspace(x[i], x[i + 1], fine + 1)
        mids = 0.5 * (s[1:] + s[:-1])
        y = (mids + 1.0) % L - 1.0
        vals = np.where((y >= -0.2) & (y <= 0.3), 0.5, np.sin(np.pi * y))
        out[i] = vals.mean()
    return out[:, None]


def _tv_eval_wave(p, res, cfg):
    _default_eval(p, res, cfg)
    tv0 = total_variation(p.initial(res.mesh)[:, 0], periodic=True)
    tv = total_variation(res.solution[:, 0], periodic=True)
    res.metrics.update({"tv": tv, "tv_initial": tv0})
    res.flags["tv_bounded"] = tv <= tv0 + 0.05


register(
    ProblemPreset(
        name="wave1d-discontinuous",
        dim=1,
        law=lambda: Advection((1.0,)),
        make_mesh=_wave1d_mesh(0.0),
        initial=_wave_disc_initial,
        t_final=0.5,
        degree=4,
        resolution=200,
        cfl=0.8,
        reference=_wave_disc_ref,
        evaluate=_tv_eval_wave,
        recon_defaults={"stencil_size_1d": 7},
        description="piecewise sin / 0.5 plateau advected to t = 0.5",
    )
)


# 1-D Burgers


def _burgers1d_mesh(n, cfg):
    amount = cfg.perturb or 0.0
    return interval_mesh(perturbed_nodes(0.0, 2.0 * np.pi, n, amount, cfg.seed), periodic=True)


def _burgers1d_initial(mesh):
    return _interval_averages(_nodes_of(mesh), lambda x: 0.3 * x - 0.7 * np.cos(x))[:, None]


def _burgers1d_ref(mesh, t, cfg):
    return cell_averages(mesh, lambda x: burgers_exact(x[..., 0], t), degree=15)


def _burgers_shock_eval(p, res, cfg):
    _default_eval(p, res, cfg)
    tv_ref = total_variation(res.reference[:, 0], periodic=True)
    tv = total_variation(res.solution[:, 0], periodic=True)
    res.metrics.update({"tv": tv, "tv_reference": tv_ref})
    res.flags["tv_within_10pct"] = tv <= 1.1 * tv_ref


for _name, _t, _ev in (("burgers1d", 1.0, _default_eval), ("burgers1d-shock", 1.4, _burgers_shock_eval)):
    register(
        ProblemPreset(
            name=_name,
            dim=1,
            law=lambda: Burgers(1),
            make_mesh=_burgers1d_mesh,
            initial=_burgers1d_initial,
            t_final=_t,
            degree=4,
            resolution=128 if _t == 1.0 else 512,
            cfl=0.8,
            reference=_burgers1d_ref,
            evaluate=_ev,
            coarse_h=2.0 * np.pi / 64,
            match_time_order=_t == 1.0,
            recon_defaults={"stencil_size_1d": 7},
            description=f"u_t + (u^2/2)_x = 0, 0.3 + 0.7 sin x, t = {_t}",
        )
    )


# 1-D Euler


def _riemann_setup(mesh, states, split_points, gamma=1.4):
    """Exact cell averages of piecewise-constant primitive data."""
    nodes = _nodes_of(mesh)
    law = Euler(1, gamma)
    cons = [law.conserved(np.array(s[0]), np.array(s[1]), np.array(s[2])) for s in states]
    edges = [-np.inf, *split_points, np.inf]
    out = np.zeros((nodes.size - 1, 3))
    dx = np.diff(nodes)
    for k, c in enumerate(cons):
        lo = np.clip(nodes[:-1], edges[k], edges[k + 1])
        hi = np.clip(nodes[1:], edges[k], edges[k + 1])
        out += ((hi - lo) / dx)[:, None] * c[None, :]
    return out


SOD = ((1.0, 0.0, 1.0), (0.125, 0.0, 0.1))


def _sod_mesh(n, cfg):
    amount = cfg.perturb if cfg.perturb is not None else 0.3
    return interval_mesh(perturbed_nodes(-5.0, 5.0, n, amount, cfg.seed), tag="none")


def _sod_ref(mesh, t, cfg):
    sol = exact_riemann(*SOD)
    law = Euler(1)

    def prim(x):
        rho, u, p = sol.sample(x[..., 0] / t)
        return law.conserved(rho, u, p)

    return cell_averages(mesh, prim, degree=15)


def _sod_eval(p, res, cfg):
    rho = res.solution[:, 0]
    ref = res.reference[:, 0]
    res.metrics.update({f"density_{k}": v for k, v in error_norms(res.mesh, rho, ref).items()})
    res.metrics["l1"] = res.metrics["density_l1"]
    res.metrics["linf"] = res.metrics["density_linf"]
    law = Euler(1)
    r, _, pr = law.primitive(res.solution)
    jump = SOD[0][0] - SOD[1][0]
    res.metrics["density_max"] = float(rho.max())
    res.metrics["density_min"] = float(rho.min())
    res.flags["density_l1_below_1e-2"] = res.metrics["density_l1"] < (cfg.l1_bound or 1e-2)
    res.flags["positive"] = bool(np.all(r > 0) and np.all(pr > 0))
    res.flags["no_new_extrema"] = bool(rho.max() <= 1.0 + 0.01 * jump and rho.min() >= 0.125 - 0.01 * jump)


register(
    ProblemPreset(
        name="sod",
        dim=1,
        law=lambda: Euler(1),
        make_mesh=_sod_mesh,
        initial=lambda m: _riemann_setup(m, [(1.0, 0.0, 1.0), (0.125, 0.0, 0.1)], [0.0]),
        t_final=1.0,
        degree=4,
        resolution=400,
        cfl=0.6,
        reference=_sod_ref,
        evaluate=_sod_eval,
        characteristic=True,
        recon_defaults={"stencil_size_1d": 7},
        description="Sod shock tube on a perturbed grid of [-5, 5]",
    )
)


BLAST_STATES = [(1.0, 0.0, 1000.0), (1.0, 0.0, 0.01), (1.0, 0.0, 100.0)]


def _blast_mesh(n, cfg):
    return interval_mesh(np.linspace(0.0, 1.0, n + 1), tag="reflective")


def _blast_initial(mesh):
    return _riemann_setup(mesh, BLAST_STATES, [0.1, 0.9])


@lru_cache(maxsize=2)
def _blast_fine(n: int, t: float, cfl: float, degree: int) -> tuple[np.ndarray, np.ndarray]:
    mesh = _blast_mesh(n, RunConfig())
    solver = FiniteVolumeSolver(mesh, Euler(1), SolverConfig(recon=RunConfig().recon(degree, stencil_size_1d=9)))
    u, _ = solver.integrate(_blast_initial(mesh), t, cfl)
    return _nodes_of(mesh), u


def _blast_ref(mesh, t, cfg):
    fine_nodes, fine = _blast_fine(cfg.fine_n, t, 0.6, 4)
    nodes = _nodes_of(mesh)
    # conservative restriction: integrate the fine piecewise-constant profile
    cum = np.concatenate([np.zeros((1, 3)), np.cumsum(fine * np.diff(fine_nodes)[:, None], axis=0)])
    integral = np.stack([np.interp(nodes, fine_nodes, cum[:, c]) for c in range(3)], axis=1)
    return np.diff(integral, axis=0) / np.diff(nodes)[:, None]


def _blast_eval(p, res, cfg):
    rho, ref = res.solution[:, 0], res.reference[:, 0]
    norms = error_norms(res.mesh, rho, ref)
    rel = norms["l1"] / float((np.abs(ref) * res.mesh.measures).sum() / res.mesh.measures.sum())
    res.metrics.update({"density_l1": norms["l1"], "density_rel_l1": rel, "l1": norms["l1"], "linf": norms["linf"]})
    res.flags["rel_l1_below_5pct"] = rel < 0.05
    r, _, pr = Euler(1).primitive(res.solution)
    res.flags["positive"] = bool(np.all(r > 0) and np.all(pr > 0))


register(
    ProblemPreset(
        name="blast",
        dim=1,
        law=lambda: Euler(1),
        make_mesh=_blast_mesh,
        initial=_blast_initial,
        t_final=0.038,
        degree=4,
        resolution=800,
        cfl=0.6,
        reference=_blast_ref,
        evaluate=_blast_eval,
        characteristic=True,
        recon_defaults={"stencil_size_1d": 9},
        description="interacting blast waves with reflective walls (fine-grid self-reference)",
    )
)


# 2-D and 3-D scalar problems


def _plane_wave(dim, k=np.pi / 2):
    def f(x, t=0.0):
        return np.sin(k * (x.sum(axis=-1) - dim * t))

    return f


def _wave_md_ref(dim):
    f = _plane_wave(dim)
    return lambda mesh, t, cfg: cell_averages(mesh, lambda x: f(x, t))


def _burgers_md_initial(mesh):
    return cell_averages(mesh, lambda x: 0.3 + 0.7 * np.sin(np.pi / 2 * x.sum(axis=-1)))


def _burgers_md_ref(mesh, t, cfg):
    d = mesh.dim
    return cell_averages(mesh, lambda x: burgers_exact(x.sum(axis=-1), d * t, k=np.pi / 2))


def _fixture_maker(kind):
    return lambda n, cfg: fixtures.load_fixture(kind, n)


register(
    ProblemPreset(
        name="wave2d",
        dim=2,
        law=lambda: Advection((1.0, 1.0)),
        make_mesh=_fixture_maker("square-nonuniform"),
        initial=lambda m: cell_averages(m, _plane_wave(2)),
        t_final=1.0,
        degree=2,
        resolution=16,
        cfl=0.6,
        reference=_wave_md_ref(2),
        evaluate=_default_eval,
        description="u_t + u_x + u_y = 0 on a non-uniform periodic triangulation of [-2, 2]^2",
    )
)
register(
    ProblemPreset(
        name="wave2d-uniform",
        dim=2,
        law=lambda: Advection((1.0, 1.0)),
        make_mesh=_fixture_maker("square-uniform"),
        initial=lambda m: cell_averages(m, _plane_wave(2)),
        t_final=1.0,
        degree=3,
        resolution=16,
        cfl=0.6,
        reference=_wave_md_ref(2),
        evaluate=_default_eval,
        coarse_h=4.0 / 8,
        match_time_order=True,
        description="u_t + u_x + u_y = 0 on a uniform periodic triangulation of [-2, 2]^2",
    )
)
register(
    ProblemPreset(
        name="burgers2d",
        dim=2,
        law=lambda: Burgers(2),
        make_mesh=_fixture_maker("square-nonuniform"),
        initial=_burgers_md_initial,
        t_final=0.5,
        degree=3,
        resolution=16,
        cfl=0.6,
        reference=_burgers_md_ref,
        evaluate=_default_eval,
        description="2-D Burgers, 0.3 + 0.7 sin(pi (x + y) / 2), t = 0.5",
    )
)
register(
    ProblemPreset(
        name="wave3d",
        dim=3,
        law=lambda: Advection((1.0, 1.0, 1.0)),
        make_mesh=_fixture_maker("cube"),
        initial=lambda m: cell_averages(m, _plane_wave(3)),
        t_final=1.0,
        degree=2,
        resolution=8,
        cfl=0.4,
        reference=_wave_md_ref(3),
        evaluate=_default_eval,
        coarse_h=4.0 / 4,
        match_time_order=True,
        description="u_t + u_x + u_y + u_z = 0 on a periodic tetrahedral mesh of [-2, 2]^3",
    )
)
register(
    ProblemPreset(
        name="burgers3d",
        dim=3,
        law=lambda: Burgers(3),
        make_mesh=_fixture_maker("cube"),
        initial=_burgers_md_initial,
        t_final=0.5,
        degree=2,
        resolution=8,
        cfl=0.4,
        reference=_burgers_md_ref,
        evaluate=_default_eval,
        description="3-D Burgers, 0.3 + 0.7 sin(pi (x + y + z) / 2), t = 0.5",
    )
)


# 2-D Euler: isentropic vortex and explosions

VORTEX_BETA = 5.0


def _vortex_state(x, t=0.0, gamma=1.4, length=10.0):
    xb = (x[..., 0] - t - 5.0 + 0.5 * length) % length - 0.5 * length
    yb = (x[..., 1] - t - 5.0 + 0.5 * length) % length - 0.5 * length
    r2 = xb * xb + yb * yb
    du = VORTEX_BETA / (2 * np.pi) * np.exp(0.5 * (1.0 - r2))
    dT = -(gamma - 1.0) * VORTEX_BETA**2 / (8.0 * gamma * np.pi**2) * np.exp(1.0 - r2)
    T = 1.0 + dT
    rho = T ** (1.0 / (gamma - 1.0))
    p = rho**gamma
    vel = np.stack([1.0 - du * yb, 1.0 + du * xb], axis=-1)
    return conserved_from_primitive(rho, vel, p, gamma)


register(
    ProblemPreset(
        name="vortex2d",
        dim=2,
        law=lambda: Euler(2),
        make_mesh=_fixture_maker("vortex-square"),
        initial=lambda m: cell_averages(m, _vortex_state),
        t_final=1.0,
        degree=4,
        resolution=20,
        cfl=0.5,
        reference=lambda m, t, cfg: cell_averages(m, lambda x: _vortex_state(x, t)),
        evaluate=_default_eval,
        coarse_h=10.0 / 10,
        match_time_order=True,
        characteristic=False,
        description="isentropic vortex (beta = 5) convected by (1, 1) on a periodic [0, 10]^2",
    )
)


EXPLOSION = ((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 0.2)


def _explosion_initial(mesh):
    inner, outer, r0 = EXPLOSION
    d = mesh.dim

    def f(x):
        r = np.linalg.norm(x, axis=-1)
        rho, p = _radial_initial(r, inner, outer, r0)
        return conserved_from_primitive(rho, np.zeros(r.shape + (d,)), p)

    return cell_averages(mesh, f)


def _explosion_ref(mesh, t, cfg):
    r, rho, u, p = spherical_reference(EXPLOSION, t, cfg.fine_n, dim=mesh.dim)

    def f(x):
        rr = np.linalg.norm(x, axis=-1)
        R = np.interp(rr, r, rho)
        U = np.interp(rr, r, u)
        P = np.interp(rr, r, p)
        with np.errstate(invalid="ignore", divide="ignore"):
            dirs = np.where(rr[..., None] > 0, x / np.maximum(rr, 1e-300)[..., None], 0.0)
        return conserved_from_primitive(R, U[..., None] * dirs, P)

    return cell_averages(mesh, f, degree=6)


def _explosion_eval(p, res, cfg):
    rho, ref = res.solution[:, 0], res.reference[:, 0]
    norms = error_norms(res.mesh, rho, ref)
    mean_ref = float((np.abs(ref) * res.mesh.measures).sum() / res.mesh.measures.sum())
    rel = norms["l1"] / mean_ref
    res.metrics.update({"density_l1": norms["l1"], "density_rel_l1": rel, "l1": norms["l1"], "linf": norms["linf"]})
    res.flags["rel_l1_below_5pct"] = rel < 0.05
    r, _, pr = Euler(p.dim).primitive(res.solution)
    res.flags["positive"] = bool(np.all(r > 0) and np.all(pr > 0))


register(
    ProblemPreset(
        name="explosion2d",
        dim=2,
        law=lambda: Euler(2),
        make_mesh=_fixture_maker("disk"),
        initial=_explosion_initial,
        t_final=0.1,
        degree=2,
        resolution=40,
        cfl=0.5,
        reference=_explosion_ref,
        evaluate=_explosion_eval,
        characteristic=True,
        description="cylindrical explosion in the unit disk against the radial reference",
    )
)
register(
    ProblemPreset(
        name="explosion3d",
        dim=3,
        law=lambda: Euler(3),
        make_mesh=_fixture_maker("ball"),
        initial=_explosion_initial,
        t_final=0.1,
        degree=2,
        resolution=16,
        cfl=0.4,
        reference=_explosion_ref,
        evaluate=_explosion_eval,
        characteristic=True,
        description="spherical explosion in the unit ball against the radial reference",
    )
)


# }}}


# {{{ drivers


def run_preset(name: str, resolution: int | None = None, config: RunConfig | None = None) -> RunResult:
    """Integrate a preset to its final time and score it against its reference.

    Instability is reported in ``RunResult.failure`` (with the time of failure)
    rather than raised.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    p = PRESETS[name]
    cfg = config or RunConfig()
    n = resolution or p.resolution
    t_final = p.t_final if cfg.t_final is None else cfg.t_final
    degree = res_degree(p, cfg)
    mesh = p.make_mesh(n, cfg)
    u0 = p.initial(mesh)
    law = p.law()
    start = time.perf_counter()
    result = RunResult(name, n, mesh, law, u0, None, t_final=t_final)
    if law is not None and t_final > 0.0:
        sc = SolverConfig(
            recon=cfg.recon(degree, **p.recon_defaults),
            characteristic=cfg.characteristic if cfg.characteristic is not None else p.characteristic,
            local_lf=cfg.local_lf,
        )
        solver = FiniteVolumeSolver(mesh, law, sc)
        match = p.match_time_order if cfg.match_time_order is None else cfg.match_time_order
        dt_scale = 1.0
        if match and p.coarse_h:
            power = (degree + 1) / 3.0 - 1.0
            dt_scale = min(1.0, (mesh_spacing(mesh) / p.coarse_h) ** power) if power > 0 else 1.0
        try:
            u, steps = solver.integrate(u0, t_final, cfg.cfl or p.cfl, dt_scale=dt_scale)
        except InstabilityError as exc:
            result.failure = f"instability: {exc}"
            result.seconds = time.perf_counter() - start
            result.flags["completed"] = False
            return result
        result.solution, result.steps = u, steps
    result.flags["completed"] = True
    if p.reference is not None:
        result.reference = p.reference(mesh, t_final, cfg)
    (p.evaluate or _default_eval)(p, result, cfg)
    result.seconds = time.perf_counter() - start
    return result


@dataclass
class ConvergenceReport:
    preset: str
    rows: list[dict] = field(default_factory=list)

    @staticmethod
    def slope(e1: float, e2: float, h1: float, h2: float) -> float:
        return math.log(e1 / e2) / math.log(h1 / h2)

    def slopes(self, norm: str = "linf") -> list[float]:
        ok = [r for r in self.rows if r.get("failure") is None]
        return [self.slope(a[norm], b[norm], a["h"], b["h"]) for a, b in zip(ok, ok[1:])]

    def table(self) -> list[dict]:
        out = []
        prev = None
        for r in self.rows:
            row = dict(r)
            for norm in ("linf", "l1"):
                row[f"slope_{norm}"] = (
                    self.slope(prev[norm], r[norm], prev["h"], r["h"])
                    if prev is not None and r.get("failure") is None and norm in r
                    else float("nan")
                )
            if r.get("failure") is None:
                prev = r
            out.append(row)
        return out


def _level(args):
    name, n, cfg, metric_keys = args
    res = run_preset(name, n, cfg)
    row = {"resolution": n, "cells": res.mesh.n_cells, "h": res.h, "failure": res.failure, "seconds": res.seconds}
    for k, v in res.metrics.items():
        row[k] = v
    return row


def convergence_study(name: str, resolutions, config: RunConfig | None = None, *, jobs: int = 1) -> ConvergenceReport:
    """Run a preset on each resolution; failed levels are recorded and skipped."""
    resolutions = list(resolutions)
    if len(resolutions) < 3:
        raise ValueError("a convergence study needs at least 3 resolutions")
    cfg = config or RunConfig()
    args = [(name, n, cfg, None) for n in resolutions]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_level, args))
    else:
        rows = []
        for a in args:
            try:
                rows.append(_level(a))
            except Exception as exc:  # keep going with the remaining levels
                log.warning("level %s failed: %s", a[1], exc)
                rows.append({"resolution": a[1], "failure": str(exc)})
    return ConvergenceReport(name, rows)


# }}}


# {{{ output


def write_solution_csv(result: RunResult, path: Path) -> None:
    mesh, u = result.mesh, result.solution
    coords = ["x", "y", "z"][: mesh.dim]
    law = result.law
    ncomp = u.shape[1]
    if isinstance(law, Euler):
        names = ["rho", *[f"m{c}" for c in coords], "E"]
        vel_names = [f"v{c}" for c in coords]
        extra = ["rho_prim", *vel_names, "p"]
        rho, vel, p = law.primitive(u)
        extra_vals = np.column_stack([rho, vel, p])
    else:
        names = ["u"] if ncomp == 1 else [f"u{k}" for k in range(ncomp)]
        extra, extra_vals = [], np.zeros((u.shape[0], 0))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*coords, *names, *extra])
        for c, row, ex in zip(mesh.centroids, u, extra_vals):
            w.writerow([*(f"{v:.12g}" for v in c), *(f"{v:.15g}" for v in row), *(f"{v:.15g}" for v in ex)])


def write_convergence_csv(report: ConvergenceReport, path: Path) -> None:
    table = report.table()
    keys = ["resolution", "cells", "h", "linf", "l1", "slope_linf", "slope_l1"]
    extra = sorted({k for r in table for k in r} - set(keys) - {"failure", "seconds"})
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*keys, *extra, "seconds", "failure"])
        for r in table:
            w.writerow([r.get(k, "") for k in keys + extra] + [r.get("seconds", ""), r.get("failure") or ""])


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_summary(path: Path, items: dict) -> None:
    """Machine-readable ``key = value`` summary."""
    with Path(path).open("w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_fmt(v)}\n")


def result_summary(result: RunResult) -> dict:
    out = {
        "preset": result.preset,
        "resolution": result.resolution,
        "cells": result.mesh.n_cells,
        "t_final": result.t_final,
        "steps": result.steps,
        "seconds": result.seconds,
        "status": "failed" if result.failure else "ok",
    }
    if result.failure:
        out["failure"] = result.failure
    out.update({f"error_{k}": v for k, v in result.metrics.items()})
    out.update({f"pass_{k}": v for k, v in result.flags.items()})
    out["pass"] = result.passed
    return out


# }}}
