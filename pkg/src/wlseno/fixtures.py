"""Deterministic benchmark meshes: periodic squares and cubes, a disk and a ball.

Shipped copies live in ``wlseno/data/meshes``; ``python -m wlseno.fixtures``
regenerates them. Any other resolution is generated on demand.
"""
from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from wlseno.mesh import AhfMesh, build_mesh, read_mesh, write_mesh

__all__ = [
    "FIXTURE_LEVELS",
    "ball_mesh",
    "cube_mesh",
    "disk_mesh",
    "load_fixture",
    "square_mesh",
]

# Kuhn subdivision of the unit cube: one tetrahedron per permutation of the axes
_KUHN = [
    (0, *[sum(1 << a for a in perm[: k + 1]) for k in range(3)])
    for perm in itertools.permutations(range(3))
]


def _orient(points: np.ndarray, elems: np.ndarray) -> np.ndarray:
    d = points.shape[1]
    v = points[elems]
    det = np.linalg.det(v[:, 1:] - v[:, :1])
    flip = det < 0
    elems = elems.copy()
    elems[flip, d - 1], elems[flip, d] = elems[flip, d].copy(), elems[flip, d - 1].copy()
    return elems


def _periodic_perturbation(n: int, dim: int, amount: float, seed: int) -> np.ndarray:
    """Node displacements on an n^dim lattice, wrapped so opposite sides agree."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-amount, amount, size=(n,) * dim + (dim,))
    idx = np.indices((n + 1,) * dim) % n
    return base[tuple(idx)]


def square_mesh(
    n: int,
    *,
    lower: float = -2.0,
    length: float = 4.0,
    perturb: float = 0.0,
    diagonals: str = "uniform",
    seed: int = 7,
) -> AhfMesh:
    """Periodic triangulation of a square from an n x n lattice.

    ``perturb`` moves each node by up to that fraction of the spacing;
    ``diagonals`` is ``"uniform"`` (all the same way) or ``"random"``.
    """
    h = length / n
    grid = np.stack(np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij"), axis=-1).astype(float)
    if perturb:
        grid = grid + _periodic_perturbation(n, 2, perturb, seed)
    points = (lower + h * grid).reshape(-1, 2)
    vid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    rng = np.random.default_rng(seed + 1)
    flip = rng.random((n, n)) < 0.5 if diagonals == "random" else np.zeros((n, n), dtype=bool)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = vid[i, j], vid[i + 1, j], vid[i + 1, j + 1], vid[i, j + 1]
            tris += [(a, b, d), (b, c, d)] if flip[i, j] else [(a, b, c), (a, c, d)]
    elems = _orient(points, np.array(tris))
    return build_mesh(points, elems, periodic=[length, length])


def cube_mesh(n: int, *, lower: float = -2.0, length: float = 4.0, perturb: float = 0.0, seed: int = 11) -> AhfMesh:
    """Periodic Kuhn (6 tetrahedra per cube) mesh of an n^3 lattice."""
    h = length / n
    grid = np.stack(np.meshgrid(*[np.arange(n + 1)] * 3, indexing="ij"), axis=-1).astype(float)
    if perturb:
        grid = grid + _periodic_perturbation(n, 3, perturb, seed)
    points = (lower + h * grid).reshape(-1, 3)
    vid = np.arange((n + 1) ** 3).reshape((n + 1,) * 3)
    corner = np.array([[(k >> a) & 1 for a in range(3)] for k in range(8)])
    ijk = np.indices((n, n, n)).reshape(3, -1).T
    verts = vid[tuple((ijk[:, None, :] + corner[None]).transpose(2, 0, 1))]  # (n^3, 8)
    elems = verts[:, np.array(_KUHN)].reshape(-1, 4)
    return build_mesh(points, _orient(points, elems), periodic=[length] * 3)


def disk_mesh(n: int, *, radius: float = 1.0, seed: int = 5, tag: str = "reflective") -> AhfMesh:
    """Delaunay triangulation of concentric node rings; ``n`` nodes across the diameter."""
    h = 2.0 * radius / n
    rng = np.random.default_rng(seed)
    rings = int(round(radius / h))
    pts = [np.zeros((1, 2))]
    for k in range(1, rings + 1):
        r = radius * k / rings
        m = max(6, int(round(2.0 * np.pi * r / h)))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        ang = phase + 2.0 * np.pi * np.arange(m) / m
        pts.append(r * np.column_stack([np.cos(ang), np.sin(ang)]))
    points = np.concatenate(pts)
    elems = _orient(points, Delaunay(points).simplices.astype(np.int64))
    return build_mesh(points, elems, default_tag=tag)


def ball_mesh(n: int, *, radius: float = 1.0, tag: str = "reflective") -> AhfMesh:
    """Kuhn mesh of the cube ``[-radius, radius]^3`` (n cells per side) clipped to the ball.

    Tetrahedra with centroid inside the ball are kept, so the boundary is
    a staircase approximation of the sphere.
    """
    h = 2.0 * radius / n
    grid = np.stack(np.meshgrid(*[np.arange(n + 1)] * 3, indexing="ij"), axis=-1).astype(float)
    points = (-radius + h * grid).reshape(-1, 3)
    vid = np.arange((n + 1) ** 3).reshape((n + 1,) * 3)
    corner = np.array([[(k >> a) & 1 for a in range(3)] for k in range(8)])
    ijk = np.indices((n, n, n)).reshape(3, -1).T
    verts = vid[tuple((ijk[:, None, :] + corner[None]).transpose(2, 0, 1))]
    elems = verts[:, np.array(_KUHN)].reshape(-1, 4)
    keep = np.linalg.norm(points[elems].mean(axis=1), axis=1) < radius
    elems = elems[keep]
    used, inverse = np.unique(elems, return_inverse=True)
    elems = inverse.reshape(elems.shape)
    points = points[used]
    return build_mesh(points, _orient(points, elems), default_tag=tag)


FIXTURE_LEVELS: dict[str, tuple[int, ...]] = {
    "square-uniform": (8, 16, 32),
    "square-nonuniform": (8, 16, 32),
    "vortex-square": (10, 20, 40),
    "disk": (40, 80),
    "cube": (8, 12, 16),
    "ball": (16, 20),
}


def generate(kind: str, n: int) -> AhfMesh:
    if kind == "square-uniform":
        return square_mesh(n)
    if kind == "square-nonuniform":
        return square_mesh(n, perturb=0.25, diagonals="random")
    if kind == "vortex-square":
        return square_mesh(n, lower=0.0, length=10.0)
    if kind == "disk":
        return disk_mesh(n)
    if kind == "cube":
        return cube_mesh(n)
    if kind == "ball":
        return ball_mesh(n)
    raise KeyError(f"unknown fixture kind {kind!r}")


def _fixture_path(kind: str, n: int):
    return resources.files("wlseno").joinpath("data", "meshes", f"{kind}-{n}.mesh")


def load_fixture(kind: str, n: int) -> AhfMesh:
    """Shipped mesh file when one exists, else a freshly generated one."""
    path = _fixture_path(kind, n)
    if path.is_file():
        with resources.as_file(path) as p:
            return read_mesh(p)
    return generate(kind, n)


def write_fixtures(directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for kind, levels in FIXTURE_LEVELS.items():
        for n in levels:
            path = directory / f"{kind}-{n}.mesh"
            write_mesh(generate(kind, n), path)
            out.append(path)
    return out


if __name__ == "__main__":
    target = Path(__file__).parent / "data" / "meshes"
    for p in write_fixtures(target):
        print(p)
