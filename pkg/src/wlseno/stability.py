"""Linear (von Neumann) stability of WLS schemes for ``u_t + u_x = 0`` with RK3.

Uniform-grid schemes are built in exact rational arithmetic, so the grid
spacing cancels and the face-value weights come out as fractions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from wlseno.errors import RankDeficientError

__all__ = [
    "LinearScheme",
    "amplification",
    "discrete_spectrum",
    "face_weights_from_wls",
    "five_cell_scheme",
    "fourier_symbol",
    "max_cfl",
    "real_axis_limit",
    "scheme_from_wls",
    "seven_cell_scheme",
    "smooth_weights",
    "stability_boundary",
    "write_points_csv",
]


@dataclass(frozen=True)
class LinearScheme:
    """Flux difference ``u-_{i+1/2} - u-_{i-1/2} = sum_j c_j u_{i+j}``."""

    offsets: tuple[int, ...]
    coefficients: tuple[Fraction | float, ...]

    def as_array(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.offsets), np.array([float(c) for c in self.coefficients])

    def consistency(self) -> float:
        return float(sum(self.coefficients))


def _solve_exact(M: list[list[Fraction]], b: list[list[Fraction]]) -> list[list[Fraction]]:
    """Gauss-Jordan elimination over the rationals, ``M X = b``."""
    n = len(M)
    aug = [row[:] + rhs[:] for row, rhs in zip(M, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise RankDeficientError("singular normal equations")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * c for a, c in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def face_weights_from_wls(n: int, weights: Sequence | None = None, degree: int = 4, left: int | None = None):
    """Exact weights of ``u-_{i+1/2}`` on a uniform n-cell stencil.

    Rows are cell averages of ``(x - x_{i+1/2})^k / k!`` with unit spacing;
    ``weights`` multiply the rows (default all ones). Returns
    ``(offsets, weights)`` with offsets relative to cell i.
    """
    p = degree + 1
    if n < p:
        raise RankDeficientError(f"{n} cells cannot determine {p} coefficients")
    left = (n - 1) // 2 if left is None else left
    offsets = list(range(-left, n - left))
    w = [Fraction(1)] * n if weights is None else [Fraction(x) for x in weights]
    # cell j spans [j - 1, j] in the coordinate centred at the right face of cell i
    A = [
        [Fraction(j**(k + 1) - (j - 1) ** (k + 1), math.factorial(k + 1)) for k in range(p)]
        for j in offsets
    ]
    w2 = [x * x for x in w]
    normal = [[sum(w2[r] * A[r][a] * A[r][b] for r in range(n)) for b in range(p)] for a in range(p)]
    rhs = [[w2[r] * A[r][a] for r in range(n)] for a in range(p)]
    sol = _solve_exact(normal, rhs)
    return tuple(offsets), tuple(sol[0])


def scheme_from_wls(n: int, weights: Sequence | None = None, degree: int = 4) -> LinearScheme:
    offsets, fw = face_weights_from_wls(n, weights, degree)
    coef: dict[int, Fraction] = {}
    for j, c in zip(offsets, fw):
        coef[j] = coef.get(j, Fraction(0)) + c
        coef[j - 1] = coef.get(j - 1, Fraction(0)) - c
    keys = sorted(coef)
    return LinearScheme(tuple(keys), tuple(coef[k] for k in keys))


def smooth_weights(n: int, alpha: Fraction = Fraction(3, 2)) -> tuple[Fraction, ...]:
    """Weights produced by linear data on a uniform grid with no epsilon term.

    The indicator of a cell ``k`` steps away is ``k^2`` (times dx^2); the
    center takes its nearest neighbors' value times ``alpha``.
    """
    left = (n - 1) // 2
    return tuple(alpha if j == 0 else Fraction(1, j * j) for j in range(-left, n - left))


def five_cell_scheme() -> LinearScheme:
    return scheme_from_wls(5, None, 4)


def seven_cell_scheme() -> LinearScheme:
    return scheme_from_wls(7, smooth_weights(7), 4)


def fourier_symbol(scheme: LinearScheme, theta) -> np.ndarray:
    """``z(theta) = sum_j c_j exp(-i j theta)``: the orientation-reversed symbol.

    With it the semi-discrete mode amplitude obeys ``a' = -(1/dx) z a``.
    """
    off, c = scheme.as_array()
    theta = np.asarray(theta, dtype=float)
    return np.exp(-1j * np.multiply.outer(theta, off)) @ c


def discrete_spectrum(scheme: LinearScheme, samples: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """``(theta_k, -z(theta_k))`` on ``samples + 1`` points covering [0, 2 pi]."""
    theta = np.linspace(0.0, 2.0 * np.pi, samples + 1)
    return theta, -fourier_symbol(scheme, theta)


def amplification(z) -> np.ndarray:
    """RK3 amplification factor ``g(z) = 1 + z + z^2/2 + z^3/6``."""
    z = np.asarray(z)
    return 1.0 + z * (1.0 + z * (0.5 + z / 6.0))


def max_cfl(
    scheme: LinearScheme,
    samples: int = 4096,
    *,
    bracket: tuple[float, float] = (0.0, 4.0),
    width: float = 1e-4,
    tol: float = 1e-12,
) -> float:
    """Largest sigma with ``|g(sigma S)| <= 1 + tol`` on the discrete spectrum S.

    Found by interval bisection. Returns the upper bracket end when every
    sigma in it is stable, and 0 when even tiny sigma is unstable.
    """
    _, spec = discrete_spectrum(scheme, samples)

    def stable(sigma: float) -> bool:
        return bool(np.all(np.abs(amplification(sigma * spec)) <= 1.0 + tol))

    lo, hi = bracket
    if stable(hi):
        return hi
    if not stable(max(lo, width * 1e-3)):
        return 0.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return lo


def stability_boundary(samples: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Roots of ``z^3 + 3 z^2 + 6 z + 6 - 6 e^{i phi} = 0`` for uniform phi.

    Returns ``(phi, roots)`` with roots of shape (samples, 3), each polished
    by Newton steps on ``g(z) - e^{i phi}``.
    """
    if samples < 3:
        raise ValueError("need at least 3 samples")
    phi = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    roots = np.empty((samples, 3), dtype=complex)
    for k, ph in enumerate(phi):
        roots[k] = np.roots([1.0, 3.0, 6.0, 6.0 - 6.0 * np.exp(1j * ph)])
    target = np.exp(1j * phi)[:, None]
    for _ in range(3):
        dg = 1.0 + roots + 0.5 * roots**2
        ok = np.abs(dg) > 1e-8
        roots = np.where(ok, roots - (amplification(roots) - target) / np.where(ok, dg, 1.0), roots)
    order = np.argsort(roots.imag, axis=1, kind="stable")
    return phi, np.take_along_axis(roots, order, axis=1)


def real_axis_limit() -> float:
    """Negative real point where ``|g| = 1`` (RK3's real stability limit)."""
    lo, hi = -3.0, -1.0
    f = lambda x: abs(amplification(x)) - 1.0  # noqa: E731
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_points_csv(path, param, points) -> None:
    """CSV with columns theta_or_phi, re, im; one row per point."""
    param = np.asarray(param, dtype=float)
    points = np.asarray(points)
    if points.ndim == 2:
        param = np.repeat(param, points.shape[1])
        points = points.ravel()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_or_phi", "re", "im"])
        for t, z in zip(param, points):
            w.writerow([f"{t:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])
