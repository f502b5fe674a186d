"""WLS-ENO reconstruction: indicators, weights, Taylor systems and their solution.

Each cell gets one Taylor polynomial fitted to the cell averages of its
stencil by weighted least squares. Weights are inverse non-smoothness
indicators, so cells across a discontinuity barely influence the fit.

The single-cell functions (:func:`assemble`, :func:`solve`, ...) follow the
algorithm step by step. :class:`Reconstructor` runs the same algorithm for a
whole mesh at once, with geometry precomputed and the solves batched through
:mod:`wlseno.kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg as sla

from wlseno import kernels
from wlseno.errors import BoundaryError, DegenerateCellError, RankDeficientError
from wlseno.geometry import (
    facet_rule,
    moment_rows,
    monomial_matrix,
    multi_indices,
    n_coeffs,
    simplex_measure,
)
from wlseno.mesh import (
    AhfMesh,
    Stencil,
    interval_stencil,
    ring_members,
    stencil_for_degree,
)

__all__ = [
    "IndicatorSet",
    "ReconstructionConfig",
    "ReconstructionPolynomial",
    "Reconstructor",
    "WlsSystem",
    "assemble",
    "compute_indicators",
    "rebalance_stencil",
    "reconstruct_face_values",
    "solve",
    "weights_from_indicators",
]


@dataclass(frozen=True)
class ReconstructionConfig:
    degree: int = 2
    epsilon: float = 1e-2
    alpha_boost: float = 1.5
    multiplier: float = 1.5
    max_depth: Fraction = Fraction(4)
    rank_tol: float = 1e-10
    rebalance: bool = False
    weight_component: int = 0
    stencil_size_1d: int | None = None
    quad_degree: int | None = None
    char_frame: str = "face"

    @property
    def rule_degree(self) -> int:
        return self.quad_degree or self.degree + 1


# {{{ single-cell algorithm


@dataclass(frozen=True)
class IndicatorSet:
    beta: np.ndarray
    epsilon: float
    h: float
    alpha_boost: float = 1.5


def _center_adjacent(mesh: AhfMesh, stencil: Stencil) -> np.ndarray:
    nbrs = set(mesh.face_neighbors(stencil.center).tolist())
    return np.array([m in nbrs for m in stencil.members])


def compute_indicators(
    field,
    stencil: Stencil,
    epsilon: float,
    h: float,
    *,
    mesh: AhfMesh | None = None,
    adjacent=None,
    component: int = 0,
    alpha_boost: float = 1.5,
) -> IndicatorSet:
    """Non-smoothness indicators ``(u_j - u_i)^2 + eps h^2`` over a stencil.

    The center's own indicator is the minimum over its face-adjacent members
    (``adjacent`` mask, or derived from ``mesh``).
    """
    u = np.asarray(field, dtype=float)
    if u.ndim > 1:
        u = u[:, component]
    vals = u[list(stencil.members)]
    beta = (vals - vals[0]) ** 2 + epsilon * h * h
    if adjacent is None:
        if mesh is None:
            raise ValueError("need mesh or adjacent mask to find the center's neighbors")
        adjacent = _center_adjacent(mesh, stencil)
    adjacent = np.asarray(adjacent, dtype=bool).copy()
    adjacent[0] = False
    if adjacent.any():
        beta[0] = beta[adjacent].min()
    elif len(beta) > 1:
        beta[0] = beta[1:].min()
    return IndicatorSet(beta=beta, epsilon=epsilon, h=h, alpha_boost=alpha_boost)


def weights_from_indicators(ind: IndicatorSet) -> np.ndarray:
    w = 1.0 / ind.beta
    w[0] *= ind.alpha_boost
    return w


@dataclass
class WlsSystem:
    """Weighted Taylor system ``min || W (A v - u) ||`` for one cell."""

    matrix: np.ndarray
    rhs: np.ndarray
    weights: np.ndarray
    center: np.ndarray
    degree: int
    dim: int
    rank_tol: float = 1e-10

    @cached_property
    def scaled(self) -> np.ndarray:
        return self.weights[:, None] * self.matrix * self.scaling[None, :]

    @cached_property
    def scaling(self) -> np.ndarray:
        wa = self.weights[:, None] * self.matrix
        norms = np.linalg.norm(wa, axis=0)
        return np.where(norms > 0.0, 1.0 / np.where(norms > 0.0, norms, 1.0), 1.0)

    @cached_property
    def factorization(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Reduced pivoted QR ``W A S E = Q R`` as (Q, R, permutation)."""
        return sla.qr(self.scaled, mode="economic", pivoting=True)

    @property
    def rank(self) -> int:
        rd = np.abs(np.diag(self.factorization[1]))
        if rd.size == 0 or rd[0] == 0.0:
            return 0
        ok = rd >= self.rank_tol * rd[0]
        return int(rd.size if ok.all() else np.argmin(ok))


def _cell_center(mesh: AhfMesh, cell: int) -> np.ndarray:
    if mesh.dim == 1:
        return mesh.cell_vertices(cell)[1].copy()
    return mesh.centroids[cell].copy()


def _member_rows(mesh: AhfMesh, stencil: Stencil, center, degree: int) -> np.ndarray:
    members = np.array(stencil.members)
    verts = mesh.all_cell_vertices[members] + mesh.image_shift(stencil.center, members)[:, None, :]
    meas = simplex_measure(verts)
    if np.any(~(meas > 0.0)):
        raise DegenerateCellError(f"stencil of cell {stencil.center} has a zero-measure member")
    centers = np.broadcast_to(np.asarray(center, dtype=float), (members.size, mesh.dim))
    return moment_rows(verts, centers, degree)


def assemble(
    mesh: AhfMesh,
    cell: int,
    stencil: Stencil,
    field,
    degree: int,
    center=None,
    config: ReconstructionConfig | None = None,
    *,
    h: float | None = None,
) -> WlsSystem:
    config = config or ReconstructionConfig(degree=degree)
    if center is None:
        center = _cell_center(mesh, cell)
    p = n_coeffs(mesh.dim, degree)
    if len(stencil) < p:
        raise ValueError(f"stencil has {len(stencil)} cells, fewer than {p} coefficients")
    A = _member_rows(mesh, stencil, center, degree)
    u = np.asarray(field, dtype=float)
    rhs = u[list(stencil.members)]
    if h is None:
        h = float(mesh.mean_edge_lengths[list(stencil.members)].mean())
    ind = compute_indicators(
        u,
        stencil,
        config.epsilon,
        h,
        mesh=mesh,
        component=config.weight_component,
        alpha_boost=config.alpha_boost,
    )
    return WlsSystem(
        matrix=A,
        rhs=rhs,
        weights=weights_from_indicators(ind),
        center=np.atleast_1d(np.asarray(center, dtype=float)),
        degree=degree,
        dim=mesh.dim,
        rank_tol=config.rank_tol,
    )


@dataclass(frozen=True)
class ReconstructionPolynomial:
    """Taylor coefficients (scaled derivatives) about ``center``."""

    center: np.ndarray
    coefficients: np.ndarray
    degree: int
    dim: int
    rank: int | None = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        basis = monomial_matrix(x - self.center, self.degree)
        return basis @ self.coefficients

    def gradient(self) -> np.ndarray:
        """First derivatives at the center."""
        return self.coefficients[1 : 1 + self.dim]

    @property
    def indices(self):
        return multi_indices(self.dim, self.degree)


def solve(system: WlsSystem) -> ReconstructionPolynomial:
    """Pivoted-QR solve of the scaled weighted system with rank truncation."""
    rhs = system.rhs if system.rhs.ndim == 2 else system.rhs[:, None]
    coef, rank, _ = kernels.wls_solve(
        system.matrix[None], np.zeros(1, dtype=np.int64), system.weights[None], rhs[None],
        system.rank_tol,
    )
    if rank[0] == 0:
        raise RankDeficientError("weighted system has numerical rank 0")
    c = coef[0] if system.rhs.ndim == 2 else coef[0, :, 0]
    return ReconstructionPolynomial(system.center, c, system.degree, system.dim, int(rank[0]))


def _stencil_for(mesh: AhfMesh, cell: int, config: ReconstructionConfig) -> Stencil:
    if mesh.dim == 1 and config.stencil_size_1d:
        return interval_stencil(mesh, cell, config.stencil_size_1d)
    return stencil_for_degree(
        mesh, cell, config.degree, multiplier=config.multiplier, max_depth=config.max_depth
    )


def _enlarge(mesh: AhfMesh, stencil: Stencil) -> Stencil:
    if mesh.dim == 1:
        return interval_stencil(mesh, stencil.center, len(stencil) + 2)
    depth = stencil.ring_depth + Fraction(1, mesh.dim)
    members = ring_members(mesh, stencil.center, depth)
    ordered = (stencil.center, *[int(m) for m in members if m != stencil.center])
    return Stencil(stencil.center, ordered, depth)


def _face_points(mesh: AhfMesh, cell: int, rule_degree: int) -> list[np.ndarray]:
    bary, _ = facet_rule(mesh.dim - 1, rule_degree)
    fv = mesh.all_facet_vertices[cell]
    return [bary @ fv[f] for f in range(mesh.dim + 1)]


def reconstruct_face_values(
    mesh: AhfMesh, field, cell: int, degree: int, config: ReconstructionConfig | None = None
) -> np.ndarray:
    """u^- at every facet quadrature point of ``cell``: shape (nfacets, nq[, ncomp])."""
    config = config or ReconstructionConfig(degree=degree)
    stencil = _stencil_for(mesh, cell, config)
    try:
        poly = solve(assemble(mesh, cell, stencil, field, degree, config=config))
    except RankDeficientError:
        stencil = _enlarge(mesh, stencil)
        poly = solve(assemble(mesh, cell, stencil, field, degree, config=config))
    if config.rebalance:
        new = rebalance_stencil(mesh, cell, stencil, poly, field, config)
        if new is not stencil:
            poly = solve(assemble(mesh, cell, new, field, degree, config=config))
    return np.stack([poly(x) for x in _face_points(mesh, cell, config.rule_degree)])


def _out_of_range(values: np.ndarray, lo: float, hi: float) -> bool:
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    return bool(np.any(values < lo - tol) or np.any(values > hi + tol))


def rebalance_stencil(
    mesh: AhfMesh,
    cell: int,
    stencil: Stencil,
    polynomial: ReconstructionPolynomial,
    field,
    config: ReconstructionConfig | None = None,
) -> Stencil:
    """Re-select a stencil balanced across the plane orthogonal to the gradient.

    Triggered only when a reconstructed facet value leaves the range of the
    stencil averages. Returns ``stencil`` itself when nothing changes.
    """
    config = config or ReconstructionConfig(degree=polynomial.degree)
    u = np.asarray(field, dtype=float)
    scalar = u[:, config.weight_component] if u.ndim > 1 else u
    coef = polynomial.coefficients
    coef = coef[:, config.weight_component] if coef.ndim > 1 else coef
    poly = ReconstructionPolynomial(polynomial.center, coef, polynomial.degree, polynomial.dim)
    vals = scalar[list(stencil.members)]
    face = np.concatenate([np.ravel(poly(x)) for x in _face_points(mesh, cell, config.rule_degree)])
    if not _out_of_range(face, vals.min(), vals.max()):
        return stencil
    grad = np.atleast_1d(poly.gradient())
    gnorm = np.linalg.norm(grad)
    if not gnorm > 1e-14 * max(1.0, np.abs(vals).max()):
        return stencil
    enlarged = _enlarge(mesh, stencil)
    new = balanced_subset(mesh, cell, np.array(enlarged.members), grad / gnorm)
    p = n_coeffs(mesh.dim, polynomial.degree)
    if new.size < p:
        return stencil
    ordered = (cell, *[int(m) for m in new if m != cell])
    return Stencil(cell, ordered, enlarged.ring_depth)


def balanced_subset(mesh: AhfMesh, cell: int, members: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Members whose counts on the two sides of the plane differ by at most one.

    The plane passes through the center's centroid with normal ``direction``;
    on the fuller side the cells nearest the centroid are kept.
    """
    others = members[members != cell]
    rel = mesh.centroids[others] + mesh.image_shift(cell, others) - mesh.centroids[cell]
    side = rel @ direction
    dist = np.linalg.norm(rel, axis=1)
    plus = others[side > 0.0][np.argsort(dist[side > 0.0], kind="stable")]
    minus = others[side <= 0.0][np.argsort(dist[side <= 0.0], kind="stable")]
    k = min(plus.size, minus.size)
    plus = plus[: k + 1] if plus.size > k else plus
    minus = minus[: k + 1] if minus.size > k else minus
    if plus.size == k + 1 and minus.size == k + 1:
        # both sides were fuller than k; keep them equal
        if dist_of(mesh, cell, plus[-1]) <= dist_of(mesh, cell, minus[-1]):
            minus = minus[:k]
        else:
            plus = plus[:k]
    return np.array(sorted([cell, *plus.tolist(), *minus.tolist()]), dtype=np.int64)


def dist_of(mesh: AhfMesh, cell: int, other: int) -> float:
    rel = mesh.centroids[other] + mesh.image_shift(cell, np.array([other]))[0] - mesh.centroids[cell]
    return float(np.linalg.norm(rel))


# }}}


# {{{ batched engine


@dataclass
class _Bucket:
    cells: np.ndarray  # (Nb,)
    members: np.ndarray  # (Nb, n) indices into the extended field (ghosts >= N)
    mask: np.ndarray  # (Nb, n) valid members
    adjacent: np.ndarray  # (Nb, n) face neighbors of the center
    A: np.ndarray  # (Nb, n, p)
    h: np.ndarray  # (Nb,)


@dataclass
class _Ghosts:
    source: np.ndarray  # (G,) mesh cell mirrored into the ghost
    kind: list[str]  # boundary tag per ghost
    normal: np.ndarray  # (G, dim) outward normal of the wall


def _bucket_size(n: int) -> int:
    return n if n <= 8 else 4 * ((n + 3) // 4)


class Reconstructor:
    """Whole-mesh WLS-ENO reconstruction with precomputed geometry.

    ``face_values(u)`` returns u^- at every facet quadrature point, shape
    (N, nfacets, nq, ncomp). In 1-D the polynomial of cell i is expanded at
    its right face, so that face's value is the leading coefficient.
    """

    def __init__(self, mesh: AhfMesh, config: ReconstructionConfig, *, reflect: Callable | None = None):
        self.mesh = mesh
        self.config = config
        self.reflect = reflect
        self.dim = mesh.dim
        self.p = n_coeffs(mesh.dim, config.degree)
        self.n_cells = mesh.n_cells
        self.centers = np.array([_cell_center(mesh, c) for c in range(mesh.n_cells)]) if mesh.dim == 1 else mesh.centroids.copy()
        self.ghosts = _Ghosts(np.zeros(0, dtype=np.int64), [], np.zeros((0, mesh.dim)))
        stencils, ghost_verts = self._build_stencils()
        self.stencils = stencils
        self._ghost_verts = ghost_verts
        self.buckets = self._build_buckets(stencils)
        self.face_basis, self.face_points, self.face_weights = self._build_face_basis()
        # cell across each facet; boundary facets point back at the cell itself
        sib = mesh.sibhfs
        self.facet_neighbors = np.where(sib >= 0, sib // (mesh.dim + 1), np.arange(mesh.n_cells)[:, None])

    # {{{ setup

    def _build_stencils(self) -> tuple[list[np.ndarray], np.ndarray]:
        mesh, config = self.mesh, self.config
        if mesh.dim != 1:
            out = []
            for c in range(mesh.n_cells):
                st = _stencil_for(mesh, c, config)
                out.append(np.array(st.members, dtype=np.int64))
            return out, np.zeros((0, 2, 1))
        return self._build_stencils_1d()

    def _build_stencils_1d(self):
        mesh, config = self.mesh, self.config
        ncell = mesh.n_cells
        n = config.stencil_size_1d or len(stencil_for_degree(mesh, 0, config.degree))
        left = (n - 1) // 2
        order = mesh.line_order
        if mesh.period is not None:
            out = []
            for pos, c in enumerate(order):
                idx = np.arange(pos - left, pos - left + n) % ncell
                out.append(np.array([c, *order[idx[idx != pos]]], dtype=np.int64))
            return out, np.zeros((0, 2, 1))

        ends = [(order[0], 0), (order[-1], 1)]
        tags = [mesh.boundary_tags.get(hf) for hf in ends]
        nghost = max(left, n - 1 - left)
        sources, kinds, normals, gverts = [], [], [], []
        ghost_index = {}
        for side, ((cell, lf), tag) in enumerate(zip(ends, tags)):
            if tag is None:
                continue
            x_wall = mesh.points[mesh.elems[cell, lf], 0]
            for k in range(nghost):
                src = order[k] if side == 0 else order[ncell - 1 - k]
                xl, xr = mesh.points[mesh.elems[src], 0]
                ghost_index[(side, k)] = ncell + len(sources)
                sources.append(src)
                kinds.append(tag)
                normals.append([-1.0] if side == 0 else [1.0])
                gverts.append([[2 * x_wall - xr], [2 * x_wall - xl]])
        self.ghosts = _Ghosts(np.array(sources, dtype=np.int64), kinds, np.array(normals).reshape(-1, 1))
        out = []
        for pos, c in enumerate(order):
            start = pos - left
            if tags[0] is None:
                start = max(start, 0)
            if tags[1] is None:
                start = min(start, ncell - n)
            members = [c]
            for q in range(start, start + n):
                if q == pos:
                    continue
                if q < 0:
                    members.append(ghost_index[(0, -q - 1)])
                elif q >= ncell:
                    members.append(ghost_index[(1, q - ncell)])
                else:
                    members.append(order[q])
            out.append(np.array(members, dtype=np.int64))
        return out, np.array(gverts, dtype=float).reshape(-1, 2, 1)

    def _member_geometry(self, center: int, members: np.ndarray) -> np.ndarray:
        mesh = self.mesh
        N = mesh.n_cells
        real = members < N
        verts = np.empty((members.size, mesh.dim + 1, mesh.dim))
        verts[real] = mesh.all_cell_vertices[members[real]]
        if mesh.period is not None:
            verts[real] += mesh.image_shift(center, members[real])[:, None, :]
        if (~real).any():
            verts[~real] = self._ghost_verts[members[~real] - N]
        return verts

    def _adjacent(self, center: int, members: np.ndarray) -> np.ndarray:
        mesh = self.mesh
        if mesh.dim == 1:
            verts = self._member_geometry(center, members)
            xl, xr = mesh.all_cell_vertices[center, :, 0]
            tol = 1e-12 * max(1.0, abs(xl), abs(xr))
            touch = (np.abs(verts[:, 1, 0] - xl) < tol) | (np.abs(verts[:, 0, 0] - xr) < tol)
            touch[0] = False
            return touch
        nbrs = mesh.face_neighbors(center)
        adj = np.isin(members, nbrs)
        adj[0] = False
        return adj

    def _build_buckets(self, stencils: list[np.ndarray]) -> list[_Bucket]:
        groups: dict[int, list[int]] = {}
        for c, st in enumerate(stencils):
            groups.setdefault(_bucket_size(st.size), []).append(c)
        return [self._make_bucket(np.array(cells), [stencils[c] for c in cells], n) for n, cells in sorted(groups.items())]

    def _make_bucket(self, cells: np.ndarray, stencils: list[np.ndarray], n: int) -> _Bucket:
        mesh, degree = self.mesh, self.config.degree
        Nb = cells.size
        members = np.empty((Nb, n), dtype=np.int64)
        mask = np.zeros((Nb, n), dtype=bool)
        adjacent = np.zeros((Nb, n), dtype=bool)
        verts = np.empty((Nb, n, mesh.dim + 1, mesh.dim))
        h = np.empty(Nb)
        edge = mesh.mean_edge_lengths
        for b, (c, st) in enumerate(zip(cells, stencils)):
            k = st.size
            members[b, :k] = st
            members[b, k:] = c
            mask[b, :k] = True
            adjacent[b, :k] = self._adjacent(c, st)
            v = self._member_geometry(c, st)
            verts[b, :k] = v
            verts[b, k:] = v[0]
            if mesh.dim == 1:
                h[b] = np.mean(v[:, 1, 0] - v[:, 0, 0])
            else:
                h[b] = edge[st[st < mesh.n_cells]].mean()
        meas = simplex_measure(verts)
        if np.any(~(meas > 0.0)):
            raise DegenerateCellError("zero-measure stencil member")
        centers = np.repeat(self.centers[cells], n, axis=0)
        A = moment_rows(verts.reshape(Nb * n, mesh.dim + 1, mesh.dim), centers, degree)
        return _Bucket(cells, members, mask, adjacent, A.reshape(Nb, n, self.p), h)

    def _build_face_basis(self):
        mesh = self.mesh
        nf = mesh.dim + 1
        bary, w = facet_rule(mesh.dim - 1, self.config.rule_degree)
        nq = w.size
        fv = mesh.all_facet_vertices  # (N, nf, dim, dim)
        points = np.einsum("qk,efkd->efqd", bary, fv)
        # interior facets share the quadrature points of the lower half-facet
        pairs = mesh.interior_facet_pairs()
        if pairs.size:
            e, f, e2, f2 = pairs.T
            points[e2, f2] = points[e, f] - mesh.hf_shift[e, f][:, None, :]
        basis = monomial_matrix(points - self.centers[:, None, None, :], self.config.degree)
        weights = w[None, None, :] * mesh.facet_measures[:, :, None]
        return basis, points, weights

    # }}}

    # {{{ evaluation

    def extend(self, u: np.ndarray) -> np.ndarray:
        """Append ghost-cell states to the field (1-D walls)."""
        g = self.ghosts
        if g.source.size == 0:
            return u
        ghost = u[g.source].copy()
        for kind in set(g.kind):
            sel = np.array([k == kind for k in g.kind])
            if kind == "reflective" and self.reflect is not None:
                ghost[sel] = self.reflect(ghost[sel], g.normal[sel])
            elif kind not in ("reflective", "none", "outflow"):
                raise BoundaryError(f"unknown boundary tag {kind!r}")
        return np.concatenate([u, ghost])

    def _weights(self, bucket: _Bucket, s: np.ndarray) -> np.ndarray:
        """Weights from indicators; ``s`` is the scalar field on members (..., Nb, n)."""
        cfg = self.config
        eh2 = cfg.epsilon * bucket.h**2
        beta = (s - s[..., :1]) ** 2 + eh2[:, None]
        big = np.where(bucket.adjacent, beta, np.inf).min(axis=-1)
        fallback = np.where(bucket.mask[:, 1:], beta[..., 1:], np.inf).min(axis=-1)
        center = np.where(np.isfinite(big), big, fallback)
        beta[..., 0] = center
        w = 1.0 / beta
        w[..., 0] *= cfg.alpha_boost
        return np.where(bucket.mask, w, 0.0)

    def coefficients(self, u: np.ndarray, component: int | None = None) -> np.ndarray:
        """Taylor coefficients of every cell, shape (N, p, ncomp).

        All components share the weights computed from ``component``.
        """
        u = np.asarray(u, dtype=float)
        scalar_input = u.ndim == 1
        if scalar_input:
            u = u[:, None]
        comp = self.config.weight_component if component is None else component
        ue = self.extend(u)
        out = np.empty((self.n_cells, self.p, u.shape[1]))
        for bk in self.buckets:
            vals = ue[bk.members]
            w = self._weights(bk, vals[..., comp])
            coef, rank, _ = kernels.wls_solve(bk.A, np.arange(bk.cells.size), w, vals, self.config.rank_tol)
            if np.any(rank == 0):
                raise RankDeficientError("reconstruction system has rank zero")
            out[bk.cells] = coef
        if self.config.rebalance:
            self._rebalance(u, out, comp)
        return out

    def face_values(self, u: np.ndarray, component: int | None = None) -> np.ndarray:
        """u^- at every facet quadrature point, shape (N, nfacets, nq, ncomp)."""
        coef = self.coefficients(u, component)
        return np.einsum("efqp,epc->efqc", self.face_basis, coef)

    def characteristic_face_values(self, u: np.ndarray, left_right: Callable) -> np.ndarray:
        """Face values reconstructed field-by-field in characteristic variables.

        ``left_right(states, normals)`` returns ``(L, R)`` eigenvector matrices
        of the flux Jacobian in direction ``normals``. With ``char_frame="face"``
        each facet gets its own frame, frozen at the mean of the two cells
        sharing it; with ``"cell"`` the frame is frozen at the cell average
        (one frame in 1-D, one per facet normal in multi-D). Each
        characteristic field gets its own indicators and weights.
        """
        mesh = self.mesh
        u = np.asarray(u, dtype=float)
        ue = self.extend(u)
        N, ncomp = u.shape
        nf = mesh.dim + 1
        if self.config.char_frame == "face":
            ndir = nf
            states = 0.5 * (u[:, None, :] + u[self.facet_neighbors])
            normals = mesh.all_facet_normals
        elif self.config.char_frame == "cell":
            ndir = 1 if mesh.dim == 1 else nf
            states = np.repeat(u[:, None, :], ndir, axis=1)
            normals = mesh.all_facet_normals if mesh.dim > 1 else np.ones((N, 1, 1))
        else:
            raise ValueError(f"unknown characteristic frame {self.config.char_frame!r}")
        L, R = left_right(states.reshape(N * ndir, ncomp), normals.reshape(N * ndir, mesh.dim))
        L = L.reshape(N, ndir, ncomp, ncomp)
        R = R.reshape(N, ndir, ncomp, ncomp)
        out = np.empty((N, nf, self.face_basis.shape[2], ncomp))
        for bk in self.buckets:
            Nb, n = bk.members.shape
            vals = ue[bk.members]  # (Nb, n, c)
            char = np.einsum("bdij,bnj->bdin", L[bk.cells], vals)  # (Nb, ndir, comp, n)
            w = self._weights(bk, char.transpose(1, 2, 0, 3)).transpose(2, 0, 1, 3)
            B = Nb * ndir * ncomp
            coef, rank, _ = kernels.wls_solve(
                bk.A,
                np.repeat(np.arange(Nb), ndir * ncomp),
                w.reshape(B, n),
                char.reshape(B, n, 1),
                self.config.rank_tol,
            )
            if np.any(rank == 0):
                raise RankDeficientError("reconstruction system has rank zero")
            coef = coef.reshape(Nb, ndir, ncomp, self.p)
            basis = self.face_basis[bk.cells]  # (Nb, nf, nq, p)
            if ndir == 1:
                cf = np.einsum("bfqp,bip->bfqi", basis, coef[:, 0])
                out[bk.cells] = np.einsum("bij,bfqj->bfqi", R[bk.cells, 0], cf)
            else:
                cf = np.einsum("bfqp,bfip->bfqi", basis, coef)
                out[bk.cells] = np.einsum("bfij,bfqj->bfqi", R[bk.cells], cf)
        return out

    # }}}

    # {{{ rebalancing

    def _rebalance(self, u: np.ndarray, coef: np.ndarray, comp: int) -> None:
        mesh = self.mesh
        faces = np.einsum("efqp,ep->efq", self.face_basis, coef[:, :, comp]).reshape(self.n_cells, -1)
        ue = self.extend(u)
        for bk in self.buckets:
            vals = np.where(bk.mask, ue[bk.members, comp], np.nan)
            lo = np.nanmin(vals, axis=1)
            hi = np.nanmax(vals, axis=1)
            tol = 1e-12 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
            f = faces[bk.cells]
            bad = np.any(f < (lo - tol)[:, None], axis=1) | np.any(f > (hi + tol)[:, None], axis=1)
            for b in np.nonzero(bad)[0]:
                c = int(bk.cells[b])
                members = bk.members[b][bk.mask[b]]
                if mesh.dim == 1 or np.any(members >= mesh.n_cells):
                    continue
                grad = coef[c, 1 : 1 + mesh.dim, comp]
                gnorm = np.linalg.norm(grad)
                if not gnorm > 0.0:
                    continue
                depth = _ring_depth_of(mesh, c, members)
                enlarged = ring_members(mesh, c, depth + Fraction(1, mesh.dim))
                new = balanced_subset(mesh, c, enlarged, grad / gnorm)
                if new.size < self.p:
                    continue
                new = np.array([c, *[m for m in new if m != c]], dtype=np.int64)
                coef[c] = self._solve_cell(c, new, ue, comp)

    def _solve_cell(self, c: int, members: np.ndarray, ue: np.ndarray, comp: int) -> np.ndarray:
        verts = self._member_geometry(c, members)
        A = moment_rows(verts, np.repeat(self.centers[c : c + 1], members.size, axis=0), self.config.degree)
        bk = _Bucket(
            np.array([c]),
            members[None],
            np.ones((1, members.size), dtype=bool),
            self._adjacent(c, members)[None],
            A[None],
            np.array([self.mesh.mean_edge_lengths[members].mean()]),
        )
        vals = ue[members][None]
        w = self._weights(bk, vals[..., comp])
        coef, rank, _ = kernels.wls_solve(A[None], np.zeros(1, dtype=np.int64), w, vals, self.config.rank_tol)
        return coef[0]

    # }}}


def _ring_depth_of(mesh: AhfMesh, cell: int, members: np.ndarray) -> Fraction:
    step = Fraction(1, mesh.dim)
    depth = step
    target = set(members.tolist())
    while depth <= 8:
        if set(ring_members(mesh, cell, depth).tolist()) >= target:
            return depth
        depth += step
    return depth


# }}}
