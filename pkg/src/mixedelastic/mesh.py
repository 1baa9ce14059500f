"""Uniform triangulations of the square (-1, 1)^2 and their red refinements."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ['Mesh', 'MeshHierarchy', 'ElementGeometry', 'build_square_mesh',
           'refine_uniform', 'build_hierarchy', 'element_geometry',
           'dump_mesh']


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with the edge/element incidence the assembly
    needs.

    Local edge ``i`` of a triangle is the edge opposite its local vertex
    ``i``. Each global edge stores its vertices as ``(lo, hi)`` with
    ``lo < hi``; the global edge tangent points from lo to hi and the global
    normal is that tangent rotated by +90 degrees.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    n: int = 0
    level: int = 0
    vertex_parents: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        tri = self.triangles
        loc = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1)
        pairs = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        tri_to_edge = inverse.reshape(-1, 3)
        ne = len(edges)
        edge_to_tri = np.full((ne, 2), -1, dtype=int)
        edge_local = np.full((ne, 2), -1, dtype=int)
        flat = tri_to_edge.ravel()
        order = np.argsort(flat, kind='stable')
        counts = np.bincount(flat, minlength=ne)
        if counts.max() > 2:
            raise ValueError('non-manifold triangulation')
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slot = np.empty_like(flat)
        slot[order] = np.arange(len(flat)) - np.repeat(start, counts)
        edge_to_tri[flat, slot] = np.arange(len(flat)) // 3
        edge_local[flat, slot] = np.arange(len(flat)) % 3

        t = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        length = np.linalg.norm(t, axis=1)
        t = t / length[:, None]
        nu = np.column_stack([-t[:, 1], t[:, 0]])

        # outward normal of local edge i runs (v_{i+1} -> v_{i+2}) rotated -90
        p = self.vertices[tri]
        out = np.empty((len(tri), 3, 2))
        for i in range(3):
            d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            out[:, i] = np.column_stack([d[:, 1], -d[:, 0]])
        out /= np.linalg.norm(out, axis=2, keepdims=True)
        sign = np.sign(np.einsum('tij,tij->ti', out, nu[tri_to_edge]))

        bedge = edge_to_tri[:, 1] < 0
        bvert = np.zeros(len(self.vertices), dtype=bool)
        bvert[edges[bedge].ravel()] = True

        for name, val in [('edges', edges), ('tri_to_edge', tri_to_edge),
                          ('edge_to_tri', edge_to_tri),
                          ('edge_local', edge_local),
                          ('edge_tangent', t), ('edge_normal', nu),
                          ('edge_length', length), ('outward_normals', out),
                          ('tri_edge_sign', sign.astype(int)),
                          ('boundary_edge', bedge),
                          ('boundary_vertex', bvert)]:
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def grad_lambda(self):
        """Gradients of the barycentric coordinates, shape (T, 3, 2)."""
        p = self.vertices[self.triangles]
        g = np.empty((self.num_triangles, 3, 2))
        for i in range(3):
            d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            # grad l_i is the inward normal of edge i scaled by |e_i| / (2|K|)
            g[:, i, 0] = -d[:, 1]
            g[:, i, 1] = d[:, 0]
        return g / (2.0 * self.areas[:, None, None])

    @cached_property
    def diameters(self):
        p = self.vertices[self.triangles]
        return np.max(np.stack([np.linalg.norm(p[:, i] - p[:, j], axis=1)
                                for i, j in [(0, 1), (1, 2), (2, 0)]]), axis=0)

    @cached_property
    def interior_vertices(self):
        return np.flatnonzero(~self.boundary_vertex)

    def to_physical(self, bary):
        """Map barycentric points (n, 3) to physical points (T, n, 2)."""
        return np.einsum('qi,tid->tqd', np.asarray(bary),
                         self.vertices[self.triangles])

    def edge_bary(self, s):
        """Barycentric coordinates, inside each adjacent triangle, of the
        edge points ``(1 - s) x_lo + s x_hi``.

        Returns an (E, 2, n, 3) array; the slot of a missing neighbour is
        filled with zeros.
        """
        s = np.asarray(s, dtype=float)
        out = np.zeros((self.num_edges, 2, len(s), 3))
        for side in range(2):
            t = self.edge_to_tri[:, side]
            ok = t >= 0
            tri = self.triangles[t[ok]]
            lo = np.argmax(tri == self.edges[ok, 0][:, None], axis=1)
            hi = np.argmax(tri == self.edges[ok, 1][:, None], axis=1)
            blk = np.zeros((ok.sum(), len(s), 3))
            rows = np.arange(ok.sum())
            blk[rows, :, lo] = 1.0 - s
            blk[rows, :, hi] = s
            out[ok, side] = blk
        return out


@dataclass(frozen=True)
class MeshHierarchy:
    """Nested meshes, coarse to fine; each is the red refinement of the
    previous one and keeps its vertex numbering as a prefix."""

    meshes: list

    @property
    def finest(self):
        return self.meshes[-1]

    def __len__(self):
        return len(self.meshes)


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    grad_lambda: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    diameter: float
    vertices: np.ndarray


def build_square_mesh(n):
    """Uniform mesh of (-1, 1)^2 with `n` cells per side, every cell cut
    along its bottom-left to top-right diagonal."""
    n = int(n)
    if n < 1:
        raise ValueError(f'need at least one cell per side, got {n}')
    x = np.linspace(-1.0, 1.0, n + 1)
    xx, yy = np.meshgrid(x, x, indexing='xy')
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing='xy')
    p00 = (j * (n + 1) + i).ravel()
    p10 = p00 + 1
    p01 = p00 + n + 1
    p11 = p01 + 1
    lower = np.column_stack([p00, p10, p11])
    upper = np.column_stack([p00, p11, p01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles, n=n, level=0)


def refine_uniform(mesh):
    """Red refinement: each triangle is split into four by its edge
    midpoints. Old vertices keep their indices; the midpoint of edge ``e``
    becomes vertex ``V + e``."""
    nv = mesh.num_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mid])
    v = mesh.triangles
    m = nv + mesh.tri_to_edge
    children = np.stack([
        np.column_stack([v[:, 0], m[:, 2], m[:, 1]]),
        np.column_stack([v[:, 1], m[:, 0], m[:, 2]]),
        np.column_stack([v[:, 2], m[:, 1], m[:, 0]]),
        np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
    ], axis=1).reshape(-1, 3)
    parents = np.vstack([np.column_stack([np.arange(nv)] * 2), mesh.edges])
    return Mesh(vertices, children, n=2 * mesh.n, level=mesh.level + 1,
                vertex_parents=parents)


def build_hierarchy(n, coarsest=2):
    """Hierarchy whose finest mesh has `n` cells per side.

    The coarsest mesh has ``n / 2^L`` cells per side for the largest ``L``
    keeping it at least `coarsest`.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f'need at least one cell per side, got {n}')
    n0, levels = n, 0
    while n0 % 2 == 0 and n0 // 2 >= coarsest:
        n0 //= 2
        levels += 1
    meshes = [build_square_mesh(n0)]
    for _ in range(levels):
        meshes.append(refine_uniform(meshes[-1]))
    return MeshHierarchy(meshes)


def element_geometry(mesh, t):
    """Geometric quantities of triangle `t`.

    ``tangents[i, j]`` is the unit vector from local vertex i to j (zero on
    the diagonal); ``normals[i]`` is the outward unit normal of the face
    opposite vertex i.
    """
    p = mesh.vertices[mesh.triangles[t]]
    tang = np.zeros((3, 3, 2))
    for i in range(3):
        for j in range(3):
            if i != j:
                d = p[j] - p[i]
                tang[i, j] = d / np.linalg.norm(d)
    area = float(mesh.areas[t])
    if not area > 0:
        raise ValueError(f'degenerate triangle {t}')
    return ElementGeometry(area=area, grad_lambda=mesh.grad_lambda[t].copy(),
                           normals=mesh.outward_normals[t].copy(),
                           tangents=tang, diameter=float(mesh.diameters[t]),
                           vertices=p.copy())


def dump_mesh(mesh, stream):
    """Plain-text listing: a count line then one entity per line,
    0-based indices."""
    stream.write(f'vertices {mesh.num_vertices}\n')
    for x, y in mesh.vertices:
        stream.write(f'{x:.17g} {y:.17g}\n')
    stream.write(f'triangles {mesh.num_triangles}\n')
    for a, b, c in mesh.triangles:
        stream.write(f'{a} {b} {c}\n')
    stream.write(f'edges {mesh.num_edges}\n')
    for (a, b), bd in zip(mesh.edges, mesh.boundary_edge):
        stream.write(f'{a} {b} {int(bd)}\n')
