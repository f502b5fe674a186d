"""Conservation laws: linear advection, Burgers and the compressible Euler system.

States are arrays of shape (..., ncomp). Directions are unit normals of shape
(..., dim). Every law provides the normal flux ``F(u) . n``, a wave-speed
bound, and boundary reflection; Euler also provides its eigensystem along a
direction and a geometric source for radially symmetric flow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wlseno.errors import InadmissibleStateError

__all__ = [
    "Advection",
    "Burgers",
    "ConservationLaw",
    "Euler",
    "RadialEuler",
    "conserved_from_primitive",
    "primitive_from_conserved",
]


class ConservationLaw:
    dim: int
    ncomp: int
    characteristic: bool = False

    def normal_flux(self, u: np.ndarray, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flux(self, u: np.ndarray) -> np.ndarray:
        """Physical flux, shape (..., ncomp, dim)."""
        eye = np.eye(self.dim)
        return np.stack([self.normal_flux(u, np.broadcast_to(e, u.shape[:-1] + (self.dim,))) for e in eye], axis=-1)

    def max_wave_speed(self, u: np.ndarray) -> np.ndarray:
        """Bound on |eigenvalues| of the flux Jacobian over all directions, per state."""
        raise NotImplementedError

    def reflect(self, u: np.ndarray, n: np.ndarray) -> np.ndarray:
        return u.copy()

    def check(self, u: np.ndarray) -> None:
        if not np.all(np.isfinite(u)):
            raise InadmissibleStateError("non-finite state")

    def source(self, u: np.ndarray, x: np.ndarray) -> np.ndarray | None:
        return None


@dataclass(frozen=True)
class Advection(ConservationLaw):
    velocity: tuple[float, ...] = (1.0,)

    @property
    def dim(self) -> int:
        return len(self.velocity)

    ncomp = 1

    def normal_flux(self, u, n):
        return u * (np.asarray(n) @ np.asarray(self.velocity, dtype=float))[..., None]

    def max_wave_speed(self, u):
        return np.full(u.shape[:-1], float(np.linalg.norm(self.velocity)))


@dataclass(frozen=True)
class Burgers(ConservationLaw):
    """``u_t + sum_k (u^2/2)_{x_k} = 0``."""

    dim: int = 1
    ncomp = 1

    def normal_flux(self, u, n):
        return 0.5 * u * u * np.asarray(n).sum(axis=-1)[..., None]

    def max_wave_speed(self, u):
        return np.abs(u[..., 0]) * np.sqrt(self.dim)


def primitive_from_conserved(u: np.ndarray, gamma: float = 1.4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho, velocity (..., dim), p)."""
    rho = u[..., 0]
    vel = u[..., 1:-1] / rho[..., None]
    p = (gamma - 1.0) * (u[..., -1] - 0.5 * rho * np.einsum("...k,...k->...", vel, vel))
    return rho, vel, p


def conserved_from_primitive(rho, vel, p, gamma: float = 1.4) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    vel = np.asarray(vel, dtype=float)
    if vel.ndim == rho.ndim:
        vel = vel[..., None]
    p = np.asarray(p, dtype=float)
    E = p / (gamma - 1.0) + 0.5 * rho * np.einsum("...k,...k->...", vel, vel)
    return np.concatenate([rho[..., None], rho[..., None] * vel, E[..., None]], axis=-1)


def _tangents(n: np.ndarray) -> list[np.ndarray]:
    """Orthonormal vectors completing ``n`` to a right-handed basis."""
    dim = n.shape[-1]
    if dim == 2:
        return [np.stack([-n[..., 1], n[..., 0]], axis=-1)]
    # pick the axis least aligned with n for a stable cross product
    a = np.zeros_like(n)
    idx = np.argmin(np.abs(n), axis=-1)
    np.put_along_axis(a, idx[..., None], 1.0, axis=-1)
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    return [t1, np.cross(n, t1)]


@dataclass(frozen=True)
class Euler(ConservationLaw):
    """Compressible Euler equations for an ideal gas, conserved (rho, rho v, E)."""

    dim: int = 1
    gamma: float = 1.4
    characteristic = True

    @property
    def ncomp(self) -> int:
        return self.dim + 2

    def primitive(self, u):
        return primitive_from_conserved(u, self.gamma)

    def conserved(self, rho, vel, p):
        return conserved_from_primitive(rho, vel, p, self.gamma)

    def sound_speed(self, u):
        rho, _, p = self.primitive(u)
        with np.errstate(invalid="ignore"):
            return np.sqrt(self.gamma * p / rho)

    def check(self, u):
        super().check(u)
        rho, _, p = self.primitive(u)
        if np.any(rho <= 0.0) or np.any(p <= 0.0):
            raise InadmissibleStateError(
                f"non-physical state: min density {rho.min():.3g}, min pressure {p.min():.3g}"
            )

    def normal_flux(self, u, n):
        rho, vel, p = self.primitive(u)
        n = np.broadcast_to(n, vel.shape)
        vn = np.einsum("...k,...k->...", vel, n)
        out = np.empty(np.broadcast_shapes(u.shape, vn.shape + (self.ncomp,)))
        out[..., 0] = rho * vn
        out[..., 1:-1] = u[..., 1:-1] * vn[..., None] + p[..., None] * n
        out[..., -1] = (u[..., -1] + p) * vn
        return out

    def max_wave_speed(self, u):
        _, vel, _ = self.primitive(u)
        return np.linalg.norm(vel, axis=-1) + self.sound_speed(u)

    def reflect(self, u, n):
        """Mirror state across a wall with unit normal ``n``: normal velocity negated."""
        out = u.copy()
        m = u[..., 1:-1]
        mn = np.einsum("...k,...k->...", m, n)
        out[..., 1:-1] = m - 2.0 * mn[..., None] * n
        return out

    def jacobian(self, u, n):
        """Flux Jacobian d(F.n)/du, shape (..., ncomp, ncomp)."""
        g = self.gamma
        rho, vel, p = self.primitive(u)
        n = np.broadcast_to(n, vel.shape)
        H = (u[..., -1] + p) / rho
        vn = np.einsum("...k,...k->...", vel, n)
        q2 = np.einsum("...k,...k->...", vel, vel)
        d, m = self.dim, self.ncomp
        J = np.zeros(vn.shape + (m, m))
        J[..., 0, 1 : 1 + d] = n
        J[..., 1 : 1 + d, 0] = 0.5 * (g - 1.0) * q2[..., None] * n - vel * vn[..., None]
        J[..., 1 : 1 + d, 1 : 1 + d] = (
            vn[..., None, None] * np.eye(d)
            + vel[..., :, None] * n[..., None, :]
            - (g - 1.0) * n[..., :, None] * vel[..., None, :]
        )
        J[..., 1 : 1 + d, -1] = (g - 1.0) * n
        J[..., -1, 0] = vn * (0.5 * (g - 1.0) * q2 - H)
        J[..., -1, 1 : 1 + d] = H[..., None] * n - (g - 1.0) * vel * vn[..., None]
        J[..., -1, -1] = g * vn
        return J

    def eigensystem(self, u, n):
        """``(R, Lambda, L)`` with ``R diag(Lambda) L = jacobian(u, n)`` and ``L = R^{-1}``.

        Columns of R: acoustic wave ``v.n - c``, entropy wave, shear waves,
        acoustic wave ``v.n + c``.
        """
        rho, vel, p = self.primitive(u)
        n = np.broadcast_to(n, vel.shape).astype(float)
        c = np.sqrt(self.gamma * p / rho)
        H = (u[..., -1] + p) / rho
        vn = np.einsum("...k,...k->...", vel, n)
        q2 = np.einsum("...k,...k->...", vel, vel)
        d, m = self.dim, self.ncomp
        R = np.zeros(vn.shape + (m, m))
        lam = np.zeros(vn.shape + (m,))
        R[..., 0, 0] = 1.0
        R[..., 1 : 1 + d, 0] = vel - c[..., None] * n
        R[..., -1, 0] = H - c * vn
        lam[..., 0] = vn - c
        R[..., 0, 1] = 1.0
        R[..., 1 : 1 + d, 1] = vel
        R[..., -1, 1] = 0.5 * q2
        lam[..., 1] = vn
        for j, t in enumerate(_tangents(n) if d > 1 else []):
            R[..., 1 : 1 + d, 2 + j] = t
            R[..., -1, 2 + j] = np.einsum("...k,...k->...", vel, t)
            lam[..., 2 + j] = vn
        R[..., 0, -1] = 1.0
        R[..., 1 : 1 + d, -1] = vel + c[..., None] * n
        R[..., -1, -1] = H + c * vn
        lam[..., -1] = vn + c
        return R, lam, np.linalg.inv(R)

    def left_right(self, u, n):
        R, _, L = self.eigensystem(u, n)
        return L, R


@dataclass(frozen=True)
class RadialEuler(Euler):
    """1-D Euler in the radial coordinate of a ``d``-dimensional symmetric flow.

    The geometric source is ``-(d - 1)/r (rho u, rho u^2, u (E + p))``.
    """

    symmetry_dim: int = 3

    def source(self, u, x):
        r = np.asarray(x, dtype=float).reshape(u.shape[:-1])
        rho, vel, p = self.primitive(u)
        v = vel[..., 0]
        s = np.empty_like(u)
        s[..., 0] = rho * v
        s[..., 1] = rho * v * v
        s[..., 2] = v * (u[..., 2] + p)
        return -((self.symmetry_dim - 1) / r)[..., None] * s
