"""Finite-volume semi-discretization with Lax-Friedrichs fluxes and TVD RK3 stepping."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from wlseno.errors import BoundaryError, InadmissibleStateError, InstabilityError
from wlseno.laws import ConservationLaw
from wlseno.mesh import AhfMesh
from wlseno.reconstruction import ReconstructionConfig, Reconstructor

__all__ = [
    "FiniteVolumeSolver",
    "SolverConfig",
    "apply_boundary",
    "euler_characteristic_reconstruct",
    "numerical_flux_lf",
    "rk3_step",
    "semi_discrete_rhs",
    "stable_dt",
]

log = logging.getLogger(__name__)

# Shu-Osher form: (weight of u^n, weight of previous stage, weight of dt L(stage))
RK3_STAGES = ((1.0, 0.0, 1.0), (0.75, 0.25, 0.25), (1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0))


@dataclass(frozen=True)
class SolverConfig:
    recon: ReconstructionConfig = ReconstructionConfig()
    characteristic: bool | None = None  # None: use it when the law provides an eigensystem
    local_lf: bool = False
    dt_cap: float = 1.0


def numerical_flux_lf(law: ConservationLaw, u_minus, u_plus, normal, alpha) -> np.ndarray:
    """``1/2 [(F(u-) + F(u+)) . n - alpha (u+ - u-)]``."""
    u_minus = np.asarray(u_minus, dtype=float)
    u_plus = np.asarray(u_plus, dtype=float)
    normal = np.asarray(normal, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim:
        alpha = alpha[..., None]
    return 0.5 * (law.normal_flux(u_minus, normal) + law.normal_flux(u_plus, normal) - alpha * (u_plus - u_minus))


def apply_boundary(law: ConservationLaw, tags, u_minus: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Exterior states u+ for boundary facets from their interior traces.

    ``reflective`` mirrors the normal velocity; ``none`` and ``outflow``
    copy the interior state.
    """
    out = np.empty_like(u_minus)
    tags = np.asarray(tags, dtype=object)
    for tag in set(tags.tolist()):
        sel = tags == tag
        if tag == "reflective":
            out[sel] = law.reflect(u_minus[sel], normals[sel])
        elif tag in ("none", "outflow"):
            out[sel] = u_minus[sel]
        elif tag is None:
            raise BoundaryError("boundary facet has no condition")
        else:
            raise BoundaryError(f"unknown boundary condition {tag!r}")
    return out


def rk3_step(rhs: Callable[[np.ndarray], np.ndarray], u: np.ndarray, dt: float) -> np.ndarray:
    """One TVD RK3 step: all stage coefficients are nonnegative."""
    k1 = u + dt * rhs(u)
    k2 = 0.75 * u + 0.25 * k1 + 0.25 * dt * rhs(k1)
    return u / 3.0 + 2.0 / 3.0 * k2 + 2.0 / 3.0 * dt * rhs(k2)


class FiniteVolumeSolver:
    """Cell-average evolution ``d u_i/dt = -1/|tau_i| sum_f int_f F.n``."""

    def __init__(self, mesh: AhfMesh, law: ConservationLaw, config: SolverConfig | None = None):
        self.mesh = mesh
        self.law = law
        self.config = config or SolverConfig()
        self.recon = Reconstructor(mesh, self.config.recon, reflect=law.reflect)
        self.characteristic = (
            self.config.characteristic if self.config.characteristic is not None else law.characteristic
        )
        if self.characteristic and not hasattr(law, "left_right"):
            raise ValueError("characteristic reconstruction needs a law with an eigensystem")
        pairs = mesh.interior_facet_pairs()
        self.pairs = pairs
        bhf = mesh.boundary_half_facets()
        self.boundary = np.array(bhf, dtype=np.int64).reshape(-1, 2)
        missing = [hf for hf in bhf if hf not in mesh.boundary_tags]
        if missing:
            raise BoundaryError(f"boundary facet {missing[0]} has no condition")
        self.boundary_tags = [mesh.boundary_tags[hf] for hf in bhf]
        self.normals = mesh.all_facet_normals
        self.weights = self.recon.face_weights  # (N, nf, nq), includes facet measure
        self.inv_measure = 1.0 / mesh.measures
        self.centers = mesh.centroids[:, :]
        self.length = (
            np.diff(mesh.all_cell_vertices[:, :, 0], axis=1)[:, 0] if mesh.dim == 1 else mesh.inradii
        )
        self.n_rhs = 0

    # {{{ spatial operator

    def face_values(self, u: np.ndarray) -> np.ndarray:
        if self.characteristic:
            return self.recon.characteristic_face_values(u, self.law.left_right)
        return self.recon.face_values(u)

    def rhs(self, u: np.ndarray) -> np.ndarray:
        self.n_rhs += 1
        mesh, law = self.mesh, self.law
        N, nc = u.shape
        uf = self.face_values(u)  # (N, nf, nq, nc)
        speed = self.law.max_wave_speed(u)
        alpha = float(speed.max())
        out = np.zeros((N, nc))
        if self.pairs.size:
            e, f, e2, f2 = self.pairs.T
            um = uf[e, f]
            up = uf[e2, f2]
            n = np.broadcast_to(self.normals[e, f][:, None, :], um.shape[:-1] + (mesh.dim,))
            a = np.maximum(speed[e], speed[e2])[:, None] if self.config.local_lf else alpha
            flux = numerical_flux_lf(law, um, up, n, a)
            total = np.einsum("fq,fqc->fc", self.weights[e, f], flux)
            for c in range(nc):
                out[:, c] -= np.bincount(e, total[:, c], minlength=N)
                out[:, c] += np.bincount(e2, total[:, c], minlength=N)
        if self.boundary.size:
            e, f = self.boundary.T
            um = uf[e, f]
            n = np.broadcast_to(self.normals[e, f][:, None, :], um.shape[:-1] + (mesh.dim,))
            tags = np.repeat(np.array(self.boundary_tags, dtype=object), um.shape[1]).reshape(um.shape[:2])
            up = apply_boundary(law, tags.ravel(), um.reshape(-1, nc), n.reshape(-1, mesh.dim)).reshape(um.shape)
            a = speed[e][:, None] if self.config.local_lf else alpha
            flux = numerical_flux_lf(law, um, up, n, a)
            total = np.einsum("fq,fqc->fc", self.weights[e, f], flux)
            for c in range(nc):
                out[:, c] -= np.bincount(e, total[:, c], minlength=N)
        out *= self.inv_measure[:, None]
        src = law.source(u, self.centers[:, 0] if mesh.dim == 1 else self.centers)
        if src is not None:
            out += src
        return out

    # }}}

    def stable_dt(self, u: np.ndarray, sigma: float) -> float:
        speed = self.law.max_wave_speed(u)
        with np.errstate(divide="ignore"):
            local = np.where(speed > 0.0, self.length / speed, np.inf)
        dt = sigma * float(local.min())
        return dt if np.isfinite(dt) else self.config.dt_cap

    def integrate(
        self,
        u0: np.ndarray,
        t_final: float,
        sigma: float,
        *,
        dt_scale: float = 1.0,
        callback: Callable[[float, np.ndarray], None] | None = None,
    ) -> tuple[np.ndarray, int]:
        """March to ``t_final``; the last step is shortened to land on it exactly.

        Raises :class:`InstabilityError` on non-finite or non-physical states.
        """
        u = np.array(u0, dtype=float)
        t = 0.0
        steps = 0

        def checked_rhs(v: np.ndarray) -> np.ndarray:
            # stage states must be admissible too; a bad one would poison the frames
            self.law.check(v)
            return self.rhs(v)

        while t < t_final * (1.0 - 1e-14):
            dt = min(self.stable_dt(u, sigma) * dt_scale, t_final - t)
            try:
                u = rk3_step(checked_rhs, u, dt)
                self.law.check(u)
            except (InadmissibleStateError, FloatingPointError) as exc:
                raise InstabilityError(str(exc), t + dt) from exc
            t += dt
            steps += 1
            if callback is not None:
                callback(t, u)
        log.debug("integrated to t=%g in %d steps", t, steps)
        return u, steps


def semi_discrete_rhs(mesh: AhfMesh, law: ConservationLaw, field, recon_config: ReconstructionConfig, **kw) -> np.ndarray:
    u = np.asarray(field, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    solver = FiniteVolumeSolver(mesh, law, SolverConfig(recon=recon_config, **kw))
    return solver.rhs(u)


def stable_dt(mesh: AhfMesh, law: ConservationLaw, field, sigma_user: float, dt_cap: float = 1.0) -> float:
    u = np.asarray(field, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    speed = law.max_wave_speed(u)
    length = np.diff(mesh.all_cell_vertices[:, :, 0], axis=1)[:, 0] if mesh.dim == 1 else mesh.inradii
    with np.errstate(divide="ignore"):
        local = np.where(speed > 0.0, length / speed, np.inf)
    dt = sigma_user * float(local.min())
    return dt if np.isfinite(dt) else dt_cap


def euler_characteristic_reconstruct(mesh: AhfMesh, field, cell: int, recon_config: ReconstructionConfig, law) -> np.ndarray:
    """Facet quadrature values of ``cell`` reconstructed in characteristic variables."""
    recon = Reconstructor(mesh, replace(recon_config), reflect=law.reflect)
    return recon.characteristic_face_values(np.asarray(field, dtype=float), law.left_right)[cell]
