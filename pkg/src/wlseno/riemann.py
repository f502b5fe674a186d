"""Exact solution of the 1-D Euler Riemann problem for an ideal gas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wlseno.errors import InadmissibleStateError

__all__ = ["RiemannSolution", "exact_riemann", "exact_riemann_reference"]


def _pressure_function(p, rho, pk, ck, gamma):
    """Velocity jump across a shock or rarefaction and its derivative in p."""
    if p > pk:
        A = 2.0 / ((gamma + 1.0) * rho)
        B = (gamma - 1.0) / (gamma + 1.0) * pk
        s = np.sqrt(A / (p + B))
        return (p - pk) * s, s * (1.0 - 0.5 * (p - pk) / (p + B))
    r = (p / pk) ** ((gamma - 1.0) / (2.0 * gamma))
    f = 2.0 * ck / (gamma - 1.0) * (r - 1.0)
    return f, (p / pk) ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho * ck)


@dataclass(frozen=True)
class RiemannSolution:
    left: tuple[float, float, float]
    right: tuple[float, float, float]
    gamma: float
    p_star: float
    u_star: float

    def sample(self, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rho, u, p) at similarity coordinates ``xi = x / t``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.array([self._sample_one(s) for s in xi.ravel()]).reshape(xi.shape + (3,))
        return out[..., 0], out[..., 1], out[..., 2]

    def _sample_one(self, s):
        g = self.gamma
        ps, us = self.p_star, self.u_star
        if s <= us:
            rho, u, p = self.left
            c = np.sqrt(g * p / rho)
            if ps > p:
                ratio = ps / p
                sl = u - c * np.sqrt((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g))
                if s <= sl:
                    return rho, u, p
                rs = rho * (ratio + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * ratio + 1.0)
                return rs, us, ps
            cs = c * (ps / p) ** ((g - 1.0) / (2.0 * g))
            if s <= u - c:
                return rho, u, p
            if s >= us - cs:
                return rho * (ps / p) ** (1.0 / g), us, ps
            k = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * c) * (u - s)
            return rho * k ** (2.0 / (g - 1.0)), 2.0 / (g + 1.0) * (c + 0.5 * (g - 1.0) * u + s), p * k ** (2.0 * g / (g - 1.0))
        rho, u, p = self.right
        c = np.sqrt(g * p / rho)
        if ps > p:
            ratio = ps / p
            sr = u + c * np.sqrt((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g))
            if s >= sr:
                return rho, u, p
            rs = rho * (ratio + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * ratio + 1.0)
            return rs, us, ps
        cs = c * (ps / p) ** ((g - 1.0) / (2.0 * g))
        if s >= u + c:
            return rho, u, p
        if s <= us + cs:
            return rho * (ps / p) ** (1.0 / g), us, ps
        k = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * c) * (u - s)
        return rho * k ** (2.0 / (g - 1.0)), 2.0 / (g + 1.0) * (-c + 0.5 * (g - 1.0) * u + s), p * k ** (2.0 * g / (g - 1.0))


def exact_riemann(left, right, gamma: float = 1.4, tol: float = 1e-12, max_iter: int = 100) -> RiemannSolution:
    """Solve for the star state by Newton iteration on the pressure function."""
    rl, ul, pl = map(float, left)
    rr, ur, pr = map(float, right)
    if min(rl, pl, rr, pr) <= 0.0:
        raise InadmissibleStateError("Riemann states need positive density and pressure")
    cl = np.sqrt(gamma * pl / rl)
    cr = np.sqrt(gamma * pr / rr)
    if 2.0 * (cl + cr) / (gamma - 1.0) <= ur - ul:
        raise InadmissibleStateError("initial states generate a vacuum")
    # two-rarefaction guess
    z = (gamma - 1.0) / (2.0 * gamma)
    p = ((cl + cr - 0.5 * (gamma - 1.0) * (ur - ul)) / (cl / pl**z + cr / pr**z)) ** (1.0 / z)
    p = max(p, 1e-14 * max(pl, pr))
    for _ in range(max_iter):
        fl, dl = _pressure_function(p, rl, pl, cl, gamma)
        fr, dr = _pressure_function(p, rr, pr, cr, gamma)
        step = (fl + fr + ur - ul) / (dl + dr)
        p_new = max(p - step, 1e-3 * p)
        change = abs(p_new - p) / (0.5 * (p_new + p))
        p = p_new
        if change < tol:
            break
    fl, _ = _pressure_function(p, rl, pl, cl, gamma)
    fr, _ = _pressure_function(p, rr, pr, cr, gamma)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    return RiemannSolution((rl, ul, pl), (rr, ur, pr), gamma, p, u)


def exact_riemann_reference(left, right, gamma, x_over_t):
    return exact_riemann(left, right, gamma).sample(x_over_t)
