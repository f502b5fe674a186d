"""Array-based half-facet (AHF) meshes of intervals, triangles and tetrahedra.

A half-facet is encoded as ``elem * (dim + 1) + local_facet``; local facet
``k`` is the facet opposite local vertex ``k`` (in 1-D, facet 0 is the left
endpoint and facet 1 the right one). Boundary half-facets have sibling -1.

Periodic meshes identify boundary vertices that differ by a period vector.
Those identified vertices share a *vertex class*, and all adjacency is
expressed in terms of classes, so ring queries cross periodic boundaries
without ghost elements. Each half-facet keeps a shift that maps its
sibling's coordinates into its own frame.
"""
from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import ceil
from pathlib import Path

import numpy as np

from wlseno.errors import MeshError, UnsupportedDepthError
from wlseno.geometry import facet_measure, inradius, n_coeffs, simplex_measure

__all__ = [
    "AhfMesh",
    "Stencil",
    "build_mesh",
    "interval_mesh",
    "interval_stencil",
    "read_mesh",
    "ring_neighbors",
    "stencil_for_degree",
    "write_mesh",
]

FACET_VERTS = {
    1: ((0,), (1,)),
    2: ((1, 2), (2, 0), (0, 1)),
    3: ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)),
}


@dataclass(frozen=True, eq=False)
class AhfMesh:
    dim: int
    points: np.ndarray
    elems: np.ndarray
    sibhfs: np.ndarray
    v2hf: np.ndarray
    boundary_tags: dict[tuple[int, int], str]
    hf_shift: np.ndarray
    vertex_class: np.ndarray
    period: np.ndarray | None = None

    @property
    def n_cells(self) -> int:
        return self.elems.shape[0]

    @property
    def n_facets_per_cell(self) -> int:
        return self.dim + 1

    def __len__(self) -> int:
        return self.n_cells

    # {{{ half-facet helpers

    def sibling(self, cell: int, local_facet: int) -> tuple[int, int] | None:
        hf = int(self.sibhfs[cell, local_facet])
        if hf < 0:
            return None
        return divmod(hf, self.dim + 1)

    def is_boundary(self, cell: int, local_facet: int) -> bool:
        return self.sibhfs[cell, local_facet] < 0

    def boundary_half_facets(self) -> list[tuple[int, int]]:
        e, f = np.nonzero(self.sibhfs < 0)
        return list(zip(e.tolist(), f.tolist()))

    def interior_facet_pairs(self) -> np.ndarray:
        """(nf, 4) array of (elem, local, sib_elem, sib_local), each facet once."""
        e, f = np.nonzero(self.sibhfs >= 0)
        e2, f2 = np.divmod(self.sibhfs[e, f], self.dim + 1)
        keep = (e < e2) | ((e == e2) & (f < f2))
        return np.column_stack([e[keep], f[keep], e2[keep], f2[keep]])

    # }}}

    # {{{ geometry

    def cell_vertices(self, cell: int) -> np.ndarray:
        return self.points[self.elems[cell]]

    def facet_vertices(self, cell: int, local_facet: int) -> np.ndarray:
        return self.points[self.elems[cell, list(FACET_VERTS[self.dim][local_facet])]]

    @cached_property
    def all_cell_vertices(self) -> np.ndarray:
        return self.points[self.elems]

    @cached_property
    def all_facet_vertices(self) -> np.ndarray:
        """(ne, dim + 1, dim, dim) vertex coordinates of every local facet."""
        table = np.array(FACET_VERTS[self.dim])
        return self.points[self.elems[:, table]]

    @cached_property
    def measures(self) -> np.ndarray:
        return simplex_measure(self.all_cell_vertices)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.all_cell_vertices.mean(axis=1)

    @cached_property
    def facet_measures(self) -> np.ndarray:
        return facet_measure(self.all_facet_vertices)

    @cached_property
    def inradii(self) -> np.ndarray:
        return inradius(self.all_cell_vertices, self.all_facet_vertices)

    @cached_property
    def mean_edge_lengths(self) -> np.ndarray:
        v = self.all_cell_vertices
        k = self.dim + 1
        lengths = [
            np.linalg.norm(v[:, b] - v[:, a], axis=-1) for a in range(k) for b in range(a + 1, k)
        ]
        return np.mean(lengths, axis=0)

    @cached_property
    def all_facet_normals(self) -> np.ndarray:
        """(ne, dim + 1, dim) outward unit normals."""
        fv = self.all_facet_vertices
        if self.dim == 1:
            n = np.empty((self.n_cells, 2, 1))
            n[:, 0, 0] = -1.0
            n[:, 1, 0] = 1.0
            return n
        if self.dim == 2:
            d = fv[..., 1, :] - fv[..., 0, :]
            n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
        else:
            n = np.cross(fv[..., 1, :] - fv[..., 0, :], fv[..., 2, :] - fv[..., 0, :])
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        # orient away from the opposite vertex
        opposite = self.all_cell_vertices
        outward = np.einsum("efd,efd->ef", n, fv[..., 0, :] - opposite)
        return n * np.where(outward < 0.0, -1.0, 1.0)[..., None]

    def facet_normals(self, cell: int) -> np.ndarray:
        return self.all_facet_normals[cell]

    # }}}

    # {{{ adjacency (AHF traversal)

    @cached_property
    def _class_elems(self) -> np.ndarray:
        return self.vertex_class[self.elems]

    def vertex_star(self, vertex: int) -> np.ndarray:
        """Elements incident to ``vertex`` (periodic images included), sorted."""
        return self._stars[self.vertex_class[vertex]]

    @cached_property
    def _stars(self) -> dict[int, np.ndarray]:
        k = self.dim + 1
        celems = self._class_elems
        stars: dict[int, np.ndarray] = {}
        for v in range(self.points.shape[0]):
            cv = int(self.vertex_class[v])
            if cv in stars or self.v2hf[v] < 0:
                continue
            start = int(self.v2hf[v]) // k
            seen = {start}
            queue = [start]
            while queue:
                e = queue.pop()
                (local,) = np.nonzero(celems[e] == cv)
                for i in local.tolist():
                    for lf in range(k):
                        if lf == i:
                            continue
                        hf = self.sibhfs[e, lf]
                        if hf >= 0:
                            e2 = int(hf) // k
                            if e2 not in seen:
                                seen.add(e2)
                                queue.append(e2)
            stars[cv] = np.array(sorted(seen), dtype=np.int64)
        return stars

    @cached_property
    def _face_nbrs(self) -> list[np.ndarray]:
        k = self.dim + 1
        out = []
        for e in range(self.n_cells):
            s = self.sibhfs[e]
            out.append(np.unique(s[s >= 0] // k))
        return out

    @cached_property
    def _vertex_nbrs(self) -> list[np.ndarray]:
        celems = self._class_elems
        stars = self._stars
        return [
            np.unique(np.concatenate([stars[int(c)] for c in celems[e]]))
            for e in range(self.n_cells)
        ]

    @cached_property
    def _edge_nbrs(self) -> list[np.ndarray]:
        celems = self._class_elems
        stars = self._stars
        k = self.dim + 1
        out = []
        for e in range(self.n_cells):
            parts = [
                np.intersect1d(stars[int(celems[e, a])], stars[int(celems[e, b])], assume_unique=True)
                for a in range(k)
                for b in range(a + 1, k)
            ]
            out.append(np.unique(np.concatenate(parts)))
        return out

    def face_neighbors(self, cell: int) -> np.ndarray:
        return self._face_nbrs[cell]

    def edge_neighbors(self, cell: int) -> np.ndarray:
        if self.dim < 3:
            return self._face_nbrs[cell] if self.dim == 2 else self._vertex_nbrs[cell]
        return self._edge_nbrs[cell]

    def vertex_neighbors(self, cell: int) -> np.ndarray:
        return self._vertex_nbrs[cell]

    # }}}

    # {{{ 1-D ordering

    @cached_property
    def line_order(self) -> np.ndarray:
        """Cells of a 1-D mesh from left to right."""
        if self.dim != 1:
            raise MeshError("line_order is only defined for 1-D meshes")
        left_bdry = np.nonzero(self.sibhfs[:, 0] < 0)[0]
        start = int(left_bdry[0]) if left_bdry.size else int(np.argmin(self.points[self.elems[:, 0], 0]))
        order = [start]
        e = start
        for _ in range(self.n_cells - 1):
            hf = self.sibhfs[e, 1]
            if hf < 0:
                break
            e = int(hf) // 2
            if e == start:
                break
            order.append(e)
        if len(order) != self.n_cells:
            raise MeshError("1-D mesh is not a single connected line")
        return np.array(order, dtype=np.int64)

    @cached_property
    def line_position(self) -> np.ndarray:
        pos = np.empty(self.n_cells, dtype=np.int64)
        pos[self.line_order] = np.arange(self.n_cells)
        return pos

    # }}}

    def image_shift(self, center: int, members: np.ndarray) -> np.ndarray:
        """Translations placing each member next to ``center`` (minimum image)."""
        members = np.asarray(members)
        shift = np.zeros((members.size, self.dim))
        if self.period is None:
            return shift
        d = self.centroids[members] - self.centroids[center]
        for a, length in enumerate(self.period):
            if length > 0:
                shift[:, a] = -np.round(d[:, a] / length) * length
        return shift


# {{{ construction


def _facet_keys(celems: np.ndarray, dim: int) -> np.ndarray:
    table = np.array(FACET_VERTS[dim])
    keys = np.sort(celems[:, table], axis=-1)
    return keys.reshape(-1, dim)


def _merge_periodic(points: np.ndarray, elems: np.ndarray, dim: int, period) -> np.ndarray:
    nv = points.shape[0]
    parent = np.arange(nv)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    keys = _facet_keys(elems, dim)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    bverts = np.unique(uniq[counts == 1])
    scale = float(np.ptp(points, axis=0).max()) or 1.0
    tol = 1e-8 * scale
    for axis, length in enumerate(period):
        if not length:
            continue
        table: dict[tuple, int] = {}
        for v in bverts.tolist():
            table[tuple(np.round(points[v] / tol).astype(np.int64))] = v
        for v in bverts.tolist():
            target = points[v].copy()
            target[axis] += length
            w = table.get(tuple(np.round(target / tol).astype(np.int64)))
            if w is None:
                # tolerate rounding at a bin edge
                for dv in np.ndindex(*(3,) * dim):
                    probe = np.round(target / tol).astype(np.int64) + np.array(dv) - 1
                    w = table.get(tuple(probe))
                    if w is not None:
                        break
            if w is not None:
                ra, rb = find(v), find(w)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(v) for v in range(nv)], dtype=np.int64)


def build_mesh(
    vertices,
    elements,
    boundary_spec: Mapping[tuple[int, int], str] | Callable | None = None,
    *,
    periodic=None,
    default_tag: str | None = None,
) -> AhfMesh:
    """Build an AHF mesh from coordinates and simplex connectivity.

    ``boundary_spec`` maps boundary half-facets ``(elem, local)`` to a tag, or
    is a callable ``(centroid, normal) -> tag``. ``periodic`` gives a period
    length per axis (0 or None for a non-periodic axis).
    """
    points = np.asarray(vertices, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    elems = np.asarray(elements, dtype=np.int64)
    dim = points.shape[1]
    if dim not in FACET_VERTS:
        raise MeshError(f"unsupported dimension {dim}")
    if elems.ndim != 2 or elems.shape[1] != dim + 1:
        raise MeshError(f"elements must have {dim + 1} vertices each")
    nv, ne, k = points.shape[0], elems.shape[0], dim + 1
    if elems.size and (elems.min() < 0 or elems.max() >= nv):
        raise MeshError("element references a vertex id out of range")

    meas = simplex_measure(points[elems])
    bad = np.nonzero(~(meas > 0.0))[0]
    if bad.size:
        raise MeshError(f"inverted or degenerate element {int(bad[0])} (measure {meas[bad[0]]:.3g})")

    period_arr = None
    if periodic is not None:
        period_arr = np.array([float(p or 0.0) for p in periodic])
        if period_arr.size != dim:
            raise MeshError("periodic must give one period per axis")
        vclass = _merge_periodic(points, elems, dim, period_arr)
        if not period_arr.any():
            period_arr = None
    else:
        vclass = np.arange(nv, dtype=np.int64)

    keys = _facet_keys(vclass[elems], dim)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if counts.size and counts.max() > 2:
        raise MeshError("non-manifold facet shared by more than two elements")
    order = np.argsort(inverse, kind="stable")
    sibhfs = np.full(ne * k, -1, dtype=np.int64)
    grouped = inverse[order]
    starts = np.searchsorted(grouped, np.arange(counts.size))
    pair = counts == 2
    a = order[starts[pair]]
    b = order[starts[pair] + 1]
    sibhfs[a] = b
    sibhfs[b] = a
    sibhfs = sibhfs.reshape(ne, k)

    # translation mapping the sibling facet onto this one
    table = np.array(FACET_VERTS[dim])
    fcent = points[elems[:, table]].mean(axis=2)
    hf_shift = np.zeros((ne, k, dim))
    e, f = np.nonzero(sibhfs >= 0)
    e2, f2 = np.divmod(sibhfs[e, f], k)
    if period_arr is not None:
        s = fcent[e, f] - fcent[e2, f2]
        s[np.abs(s) < 1e-9 * max(1.0, float(period_arr.max()))] = 0.0
        hf_shift[e, f] = s

    # vertex anchors, preferring boundary half-facets
    v2hf = np.full(nv, -1, dtype=np.int64)
    for lf in range(k):
        for j in FACET_VERTS[dim][lf]:
            v2hf[elems[:, j]] = np.arange(ne) * k + lf
    be, bf = np.nonzero(sibhfs < 0)
    for lf_e, lf_f in zip(be.tolist(), bf.tolist()):
        for j in FACET_VERTS[dim][lf_f]:
            v2hf[elems[lf_e, j]] = lf_e * k + lf_f

    tags: dict[tuple[int, int], str] = {}
    normals = None
    for hf in zip(be.tolist(), bf.tolist()):
        tag = None
        if callable(boundary_spec):
            if normals is None:
                normals = AhfMesh(
                    dim, points, elems, sibhfs, v2hf, {}, hf_shift, vclass, period_arr
                ).all_facet_normals
            tag = boundary_spec(fcent[hf], normals[hf])
        elif boundary_spec is not None:
            tag = boundary_spec.get(hf)
        if tag is None:
            tag = default_tag
        if tag is not None:
            tags[hf] = str(tag)

    return AhfMesh(dim, points, elems, sibhfs, v2hf, tags, hf_shift, vclass, period_arr)


def interval_mesh(nodes, *, periodic: bool = False, tag: str | None = "none") -> AhfMesh:
    """1-D mesh from increasing node coordinates; cells are consecutive nodes."""
    nodes = np.asarray(nodes, dtype=float)
    if np.any(np.diff(nodes) <= 0.0):
        raise MeshError("interval nodes must be strictly increasing")
    n = nodes.size - 1
    elems = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    period = [nodes[-1] - nodes[0]] if periodic else None
    return build_mesh(nodes[:, None], elems, periodic=period, default_tag=None if periodic else tag)


# }}}


# {{{ stencils


@dataclass(frozen=True)
class Stencil:
    center: int
    members: tuple[int, ...]
    ring_depth: Fraction
    saturated: bool = False

    def __len__(self) -> int:
        return len(self.members)

    def __post_init__(self):
        if self.members[0] != self.center or len(set(self.members)) != len(self.members):
            raise ValueError("stencil members must be unique with the center first")


def _as_depth(depth) -> Fraction:
    if isinstance(depth, Fraction):
        return depth
    if isinstance(depth, float):
        return Fraction(depth).limit_denominator(6)
    return Fraction(depth)


def _depth_step(dim: int) -> Fraction:
    return Fraction(1, dim) if dim > 1 else Fraction(1)


def ring_members(mesh: AhfMesh, cell: int, depth) -> np.ndarray:
    """Sorted cell ids of the fractional ring neighborhood (center included)."""
    depth = _as_depth(depth)
    if depth < 0 or (depth / _depth_step(mesh.dim)).denominator != 1:
        raise UnsupportedDepthError(f"depth {depth} unsupported in {mesh.dim}-D")
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    whole = depth.numerator // depth.denominator
    frac = depth - whole
    members = {cell}
    frontier = [cell]
    for _ in range(whole):
        new: set[int] = set()
        for c in frontier:
            new.update(mesh.vertex_neighbors(c).tolist())
        new -= members
        members |= new
        frontier = sorted(new)
    if frac:
        if mesh.dim == 2 or frac == Fraction(1, 3):
            nbrs = mesh.face_neighbors
        else:
            nbrs = mesh.edge_neighbors
        for c in frontier:
            members.update(nbrs(c).tolist())
    return np.array(sorted(members), dtype=np.int64)


def ring_neighbors(mesh: AhfMesh, cell: int, depth) -> Stencil:
    members = ring_members(mesh, cell, depth)
    ordered = (cell, *[int(m) for m in members if m != cell])
    return Stencil(cell, ordered, _as_depth(depth))


def interval_stencil(mesh: AhfMesh, cell: int, n: int, left: int | None = None) -> Stencil:
    """1-D stencil of ``n`` cells with ``left`` of them to the left of ``cell``.

    Non-periodic meshes slide the window inward at the ends (one-sided stencil).
    """
    if mesh.dim != 1:
        raise MeshError("interval_stencil needs a 1-D mesh")
    ncell = mesh.n_cells
    n = min(n, ncell)
    if left is None:
        left = (n - 1) // 2
    pos = int(mesh.line_position[cell])
    start = pos - left
    if mesh.period is None:
        start = min(max(start, 0), ncell - n)
        idx = np.arange(start, start + n)
    else:
        idx = np.arange(start, start + n) % ncell
    cells = mesh.line_order[idx]
    ordered = (cell, *sorted(int(c) for c in cells if c != cell))
    return Stencil(cell, ordered, Fraction(max(left, n - 1 - left)))


def stencil_for_degree(
    mesh: AhfMesh,
    cell: int,
    degree: int,
    *,
    multiplier: float = 1.5,
    max_depth=4,
) -> Stencil:
    """Smallest ring whose size reaches ``multiplier`` times the coefficient count.

    In 1-D the stencil is the symmetric window of 2*ceil(m/2) + 1 cells (seven
    cells for degree four).
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    m = n_coeffs(mesh.dim, degree)
    if mesh.dim == 1:
        half = ceil(m / 2)
        n = 2 * half + 1
        st = interval_stencil(mesh, cell, n)
        return Stencil(st.center, st.members, st.ring_depth, saturated=len(st) < n)
    step = _depth_step(mesh.dim)
    target = multiplier * m
    depth = step
    max_depth = _as_depth(max_depth)
    members = ring_members(mesh, cell, depth)
    while members.size < target:
        if depth + step > max_depth or members.size == mesh.n_cells:
            st = ring_neighbors(mesh, cell, depth)
            return Stencil(st.center, st.members, depth, saturated=True)
        depth += step
        members = ring_members(mesh, cell, depth)
    return ring_neighbors(mesh, cell, depth)


# }}}


# {{{ ascii i/o


def write_mesh(mesh: AhfMesh, path) -> None:
    """Write ``dim nv ne``, coordinates, 1-based connectivity and facet tags."""
    lines = [f"{mesh.dim} {mesh.points.shape[0]} {mesh.n_cells}"]
    lines += [" ".join(f"{x:.17g}" for x in p) for p in mesh.points]
    lines += [" ".join(str(int(v) + 1) for v in e) for e in mesh.elems]
    if mesh.period is not None:
        lines.append("periodic " + " ".join(f"{x:.17g}" for x in mesh.period))
    for (e, f), tag in sorted(mesh.boundary_tags.items()):
        lines.append(f"facet {e + 1} {f + 1} {tag}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, *, default_tag: str | None = None) -> AhfMesh:
    with open(path) as fh:
        header = fh.readline().split()
        dim, nv, ne = (int(x) for x in header[:3])
        pts = np.loadtxt(fh, max_rows=nv, ndmin=2)
        elems = np.loadtxt(fh, max_rows=ne, dtype=np.int64, ndmin=2) - 1
        tags: dict[tuple[int, int], str] = {}
        period = None
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "facet":
                tags[(int(parts[1]) - 1, int(parts[2]) - 1)] = parts[3]
            elif parts[0] == "periodic":
                period = [float(x) for x in parts[1:]]
            else:
                raise MeshError(f"unrecognized mesh line: {line.strip()!r}")
    return build_mesh(pts.reshape(nv, dim), elems, tags, periodic=period, default_tag=default_tag)


# }}}
