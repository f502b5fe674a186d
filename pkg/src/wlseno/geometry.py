"""Cell measures, monomial moments and quadrature on intervals, triangles and tetrahedra."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from wlseno.errors import DegenerateCellError

__all__ = [
    "FaceQuadrature",
    "MomentTable",
    "cell_moments",
    "face_quadrature",
    "facet_rule",
    "monomial_matrix",
    "multi_indices",
    "n_coeffs",
    "simplex_measure",
    "simplex_rule",
]


# {{{ multi-indices


@lru_cache(maxsize=None)
def multi_indices(dim: int, max_degree: int) -> tuple[tuple[int, ...], ...]:
    """Graded multi-indices of total degree <= max_degree.

    Within a degree the ordering is lexicographically descending, so in 2-D
    degree 2 reads (2,0), (1,1), (0,2).
    """
    out: list[tuple[int, ...]] = []
    for q in range(max_degree + 1):
        out.extend(_compositions(q, dim))
    return tuple(out)


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first, *rest))
    return out


def n_coeffs(dim: int, degree: int) -> int:
    return comb(degree + dim, dim)


@lru_cache(maxsize=None)
def _factorial_scale(dim: int, max_degree: int) -> np.ndarray:
    return np.array(
        [1.0 / np.prod([factorial(k) for k in idx]) for idx in multi_indices(dim, max_degree)]
    )


def monomial_matrix(dx: np.ndarray, max_degree: int) -> np.ndarray:
    """Scaled Taylor monomials prod(dx_i**k_i / k_i!) for every multi-index.

    ``dx`` has shape (..., dim); the result has shape (..., n_coeffs).
    """
    dx = np.asarray(dx, dtype=float)
    dim = dx.shape[-1]
    idx = multi_indices(dim, max_degree)
    powers = np.ones(dx.shape[:-1] + (dim, max_degree + 1))
    for k in range(1, max_degree + 1):
        powers[..., k] = powers[..., k - 1] * dx
    out = np.ones(dx.shape[:-1] + (len(idx),))
    for col, ks in enumerate(idx):
        for axis, k in enumerate(ks):
            if k:
                out[..., col] *= powers[..., axis, k]
    return out * _factorial_scale(dim, max_degree)


# }}}


# {{{ quadrature rules


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss-Jacobi rule on the reference simplex, exact to ``degree``.

    Returns barycentric coordinates (nq, dim + 1) and weights summing to 1, so
    an integral is ``measure * sum(w * f(x))``.
    """
    n = max(1, (degree + 2) // 2)
    if dim == 1:
        x, w = roots_legendre(n)
        s = 0.5 * (x + 1.0)
        return np.column_stack([1.0 - s, s]), 0.5 * w

    # s_k in [0,1] with Jacobi weight (1 - s)^(dim - 1 - k)
    nodes, weights = [], []
    for k in range(dim):
        alpha = dim - 1 - k
        x, w = roots_jacobi(n, alpha, 0.0)
        nodes.append(0.5 * (x + 1.0))
        weights.append(w / 2.0 ** (alpha + 1))
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for k, wk in enumerate(np.meshgrid(*weights, indexing="ij")):
        wgrid = wgrid * wk
    s = [g.ravel() for g in grids]
    ref = np.zeros((s[0].size, dim))
    scale = np.ones_like(s[0])
    for k in range(dim):
        ref[:, k] = s[k] * scale
        scale = scale * (1.0 - s[k])
    bary = np.column_stack([1.0 - ref.sum(axis=1), ref])
    w = wgrid.ravel() * factorial(dim)
    return bary, w


_SQ15 = np.sqrt(15.0)


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


@lru_cache(maxsize=None)
def _triangle_symmetric(degree: int) -> tuple[np.ndarray, np.ndarray]:
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    if degree == 2:
        pts = [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)]
        return np.array(pts), np.full(3, 1 / 3)
    if degree <= 4:
        a1, w1 = 0.4459484909159648863183, 0.2233815896780114656950
        a2, w2 = 0.09157621350977074345957, 0.1099517436553218676383
        pts = _orbit3(a1) + _orbit3(a2)
        return np.array(pts), np.array([w1] * 3 + [w2] * 3)
    if degree == 5:
        a1, w1 = (6.0 + _SQ15) / 21.0, (155.0 + _SQ15) / 1200.0
        a2, w2 = (6.0 - _SQ15) / 21.0, (155.0 - _SQ15) / 1200.0
        pts = [(1 / 3, 1 / 3, 1 / 3)] + _orbit3(a1) + _orbit3(a2)
        return np.array(pts), np.array([0.225] + [w1] * 3 + [w2] * 3)
    return simplex_rule(2, degree)


def facet_rule(facet_dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points and unit-sum weights on a facet of dimension 0, 1 or 2."""
    if facet_dim == 0:
        return np.ones((1, 1)), np.ones(1)
    if facet_dim == 1:
        n = max(1, (degree + 2) // 2)
        x, w = roots_legendre(n)
        s = 0.5 * (x + 1.0)
        return np.column_stack([1.0 - s, s]), 0.5 * w
    if facet_dim == 2:
        return _triangle_symmetric(degree)
    raise ValueError(f"unsupported facet dimension {facet_dim}")


# }}}


# {{{ measures


def simplex_measure(verts: np.ndarray) -> np.ndarray:
    """Signed length/area/volume of simplices given as (..., dim + 1, dim)."""
    verts = np.asarray(verts, dtype=float)
    dim = verts.shape[-1]
    edges = verts[..., 1:, :] - verts[..., :1, :]
    if dim == 1:
        return edges[..., 0, 0]
    return np.linalg.det(edges) / factorial(dim)


def facet_measure(verts: np.ndarray) -> np.ndarray:
    """Unsigned measure of facets given as (..., dim, dim) in dim-space."""
    verts = np.asarray(verts, dtype=float)
    dim = verts.shape[-1]
    if dim == 1:
        return np.ones(verts.shape[:-2])
    if dim == 2:
        return np.linalg.norm(verts[..., 1, :] - verts[..., 0, :], axis=-1)
    e1 = verts[..., 1, :] - verts[..., 0, :]
    e2 = verts[..., 2, :] - verts[..., 0, :]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=-1)


def inradius(verts: np.ndarray, facet_verts: np.ndarray) -> np.ndarray:
    """Inradius of simplices; in 1-D the cell length (the time-step length scale)."""
    vol = np.abs(simplex_measure(verts))
    dim = verts.shape[-1]
    if dim == 1:
        return vol
    return dim * vol / facet_measure(facet_verts).sum(axis=-1)


# }}}


# {{{ moments and face quadrature


@dataclass(frozen=True)
class MomentTable:
    """Factorial-scaled monomial integrals of one cell about ``center``."""

    center: np.ndarray
    cell: int
    indices: tuple[tuple[int, ...], ...]
    moments: np.ndarray
    measure: float

    @property
    def averages(self) -> np.ndarray:
        """The moments divided by the cell measure: one row of the Taylor system."""
        return self.moments / self.measure

    def __getitem__(self, index: tuple[int, ...]) -> float:
        return float(self.moments[self.indices.index(tuple(index))])


def moment_rows(
    cell_verts: np.ndarray, centers: np.ndarray, max_degree: int, chunk: int = 16384
) -> np.ndarray:
    """Cell averages of the scaled monomials for many (cell, center) pairs.

    ``cell_verts`` is (B, dim + 1, dim), ``centers`` is (B, dim). Uses a
    quadrature rule exact for total degree ``max_degree``. Rows are
    processed ``chunk`` at a time to bound the size of the point table.
    """
    cell_verts = np.asarray(cell_verts, dtype=float)
    centers = np.asarray(centers, dtype=float)
    dim = cell_verts.shape[-1]
    bary, w = simplex_rule(dim, max(max_degree, 1))
    out = np.empty((cell_verts.shape[0], n_coeffs(dim, max_degree)))
    for lo in range(0, cell_verts.shape[0], chunk):
        x = np.einsum("qk,bkd->bqd", bary, cell_verts[lo : lo + chunk])
        dx = x - centers[lo : lo + chunk, None, :]
        out[lo : lo + chunk] = np.einsum("q,bqp->bp", w, monomial_matrix(dx, max_degree))
    return out


def cell_moments(mesh, cell: int, center, max_degree: int, shift=None) -> MomentTable:
    """Monomial moments of ``cell`` about ``center``.

    ``shift`` translates the cell (periodic images) before integrating.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    verts = mesh.cell_vertices(cell)
    if shift is not None:
        verts = verts + np.asarray(shift, dtype=float)
    measure = float(simplex_measure(verts))
    if not measure > 0.0:
        raise DegenerateCellError(f"cell {cell} has non-positive measure {measure}")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    row = moment_rows(verts[None], center[None], max_degree)[0]
    return MomentTable(
        center=center,
        cell=cell,
        indices=multi_indices(mesh.dim, max_degree),
        moments=row * measure,
        measure=measure,
    )


@dataclass(frozen=True)
class FaceQuadrature:
    points: np.ndarray
    weights: np.ndarray
    unit_normal: np.ndarray

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def face_quadrature(mesh, cell: int, local_facet: int, rule_degree: int) -> FaceQuadrature:
    """Quadrature on one facet of ``cell`` with the outward unit normal."""
    if rule_degree < 1:
        raise ValueError("rule_degree must be >= 1")
    fverts = mesh.facet_vertices(cell, local_facet)
    bary, w = facet_rule(mesh.dim - 1, rule_degree)
    normal = mesh.facet_normals(cell)[local_facet]
    measure = float(facet_measure(fverts))
    return FaceQuadrature(points=bary @ fverts, weights=w * measure, unit_normal=normal)


# }}}
