"""Tetrahedral meshes of the unit cube with global entity orientation.

Cells are stored with ascending vertex ids.  With that convention the local
edge ``(i, j)`` with ``i < j`` and the local face ``(i, j, k)`` with
``i < j < k`` carry exactly the global orientation (tangent from lower to
higher vertex id, normal by the right-hand rule on the sorted triple), so
Whitney basis functions need no sign bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

from .errors import GeometryError, InvalidArgumentError, TopologyError

# local edges / faces of a tetrahedron in sorted-vertex convention
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
LOCAL_FACES = np.array([(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)])
# vertex opposite each local face
FACE_OPPOSITE = np.array([3, 2, 1, 0])

_KUHN_PERMS = list(permutations(range(3)))


@dataclass(frozen=True)
class CellGeometry:
    """Affine data of one tetrahedron (or a batch, with a leading cell axis)."""

    coords: np.ndarray  # (..., 4, 3)
    grads: np.ndarray  # (..., 4, 3) gradients of the barycentric coordinates
    volume: np.ndarray | float

    @property
    def diameter(self):
        d = self.coords[..., :, None, :] - self.coords[..., None, :, :]
        return np.sqrt((d**2).sum(-1)).max(axis=(-1, -2))


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray = field(default=None)
    faces: np.ndarray = field(default=None)
    cell_edges: np.ndarray = field(default=None)
    cell_edge_signs: np.ndarray = field(default=None)
    cell_faces: np.ndarray = field(default=None)
    # +1 if the global face normal points out of the cell, -1 otherwise
    cell_face_signs: np.ndarray = field(default=None)
    boundary_vertices: np.ndarray = field(default=None)
    boundary_edges: np.ndarray = field(default=None)
    boundary_faces: np.ndarray = field(default=None)
    # number of cube subdivisions per axis for structured meshes
    n: int | None = None

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> float:
        if self.n is not None:
            return float(np.sqrt(3.0) / self.n)
        return float(self.geometry().diameter.max())

    def geometry(self) -> CellGeometry:
        """Batched geometry of all cells."""
        return _geometry(self.vertices[self.cells])

    def edge_tangents(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / np.linalg.norm(d, axis=1)[:, None]

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def face_normals(self) -> np.ndarray:
        x = self.vertices[self.faces]
        c = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        return c / np.linalg.norm(c, axis=1)[:, None]

    def face_areas(self) -> np.ndarray:
        x = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Cell ids containing ``points`` (structured meshes only)."""
        if self.n is None:
            raise InvalidArgumentError("point location needs a structured mesh")
        n = self.n
        p = np.asarray(points, dtype=float) * n
        idx = np.clip(np.floor(p).astype(int), 0, n - 1)
        frac = p - idx
        cube = idx[:, 0] + n * (idx[:, 1] + n * idx[:, 2])
        # the Kuhn simplex walks the axes in decreasing order of the fractional part
        order = np.argsort(-frac, axis=1, kind="stable")
        code = order[:, 0] * 9 + order[:, 1] * 3 + order[:, 2]
        lookup = np.full(27, -1)
        for k, perm in enumerate(_KUHN_PERMS):
            lookup[perm[0] * 9 + perm[1] * 3 + perm[2]] = k
        return 6 * cube + lookup[code]

    def dump_text(self) -> str:
        """Plain-text dump: header, vertices, edges, faces, cells."""
        lines = [f"tetmesh {self.num_vertices} {self.num_edges} {self.num_faces} {self.num_cells}"]
        lines += [" ".join(f"{c:.17g}" for c in v) for v in self.vertices]
        for table in (self.edges, self.faces, self.cells):
            lines += [" ".join(str(int(i)) for i in row) for row in table]
        return "\n".join(lines) + "\n"


def _geometry(x: np.ndarray) -> CellGeometry:
    jac = np.swapaxes(x[..., 1:, :] - x[..., :1, :], -1, -2)  # columns are edge vectors
    det = np.linalg.det(jac)
    if np.any(np.abs(det) < 1e-14):
        raise GeometryError("degenerate (zero-volume) cell")
    inv = np.linalg.inv(jac)  # rows are gradients of lambda_1..lambda_3
    grads = np.concatenate([-inv.sum(axis=-2, keepdims=True), inv], axis=-2)
    return CellGeometry(coords=x, grads=grads, volume=np.abs(det) / 6.0)


def cell_geometry(mesh: Mesh, cell_id: int) -> CellGeometry:
    if not 0 <= cell_id < mesh.num_cells:
        raise InvalidArgumentError(f"cell id {cell_id} out of range")
    g = _geometry(mesh.vertices[mesh.cells[cell_id]])
    return replace(g, volume=float(g.volume))


def tetra_geometry(coords) -> CellGeometry:
    """Geometry of a free-standing tetrahedron given its 4 vertex coordinates."""
    g = _geometry(np.asarray(coords, dtype=float))
    return replace(g, volume=float(g.volume))


def build_structured_cube(n: int) -> Mesh:
    """Freudenthal (Kuhn) split of an ``n x n x n`` grid of the unit cube."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    g = np.linspace(0.0, 1.0, n + 1)
    z, y, x = np.meshgrid(g, g, g, indexing="ij")
    vertices = np.column_stack([x.ravel(), y.ravel(), z.ravel()])

    stride = np.array([1, n + 1, (n + 1) ** 2])
    k, j, i = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    base = (i.ravel() + (n + 1) * (j.ravel() + (n + 1) * k.ravel()))[:, None]
    cells = np.empty((n**3, 6, 4), dtype=np.int64)
    for p, perm in enumerate(_KUHN_PERMS):
        steps = np.cumsum(stride[list(perm)])
        cells[:, p, 0] = base[:, 0]
        cells[:, p, 1:] = base + steps
    mesh = Mesh(vertices=vertices, cells=cells.reshape(-1, 4), n=n)
    return derive_entities(mesh)


def derive_entities(mesh: Mesh) -> Mesh:
    """Fill edges, faces, incidences, orientation signs and boundary flags."""
    cells = np.sort(np.asarray(mesh.cells, dtype=np.int64), axis=1)
    nc = len(cells)

    local_e = cells[:, LOCAL_EDGES].reshape(-1, 2)
    edges, e_inv = np.unique(local_e, axis=0, return_inverse=True)
    cell_edges = e_inv.reshape(nc, 6)

    local_f = cells[:, LOCAL_FACES].reshape(-1, 3)
    faces, f_inv, f_count = np.unique(local_f, axis=0, return_inverse=True, return_counts=True)
    cell_faces = f_inv.reshape(nc, 4)
    if np.any(f_count > 2):
        raise TopologyError("non-conforming mesh: a face is shared by more than two cells")

    x = mesh.vertices
    fx = x[faces]
    normals = np.cross(fx[:, 1] - fx[:, 0], fx[:, 2] - fx[:, 0])
    opposite = x[cells[:, FACE_OPPOSITE]]  # (nc, 4, 3)
    first = x[faces[cell_faces, 0]]
    outward = np.einsum("cfk,cfk->cf", normals[cell_faces], first - opposite)
    cell_face_signs = np.where(outward > 0, 1, -1)

    boundary_faces = f_count == 1
    boundary_edges = np.zeros(len(edges), dtype=bool)
    bf = faces[boundary_faces]
    if len(bf):
        bf_edges = np.sort(np.concatenate([bf[:, [0, 1]], bf[:, [0, 2]], bf[:, [1, 2]]]), axis=1)
        edge_id = {tuple(e): i for i, e in enumerate(edges.tolist())}
        boundary_edges[[edge_id[tuple(e)] for e in bf_edges.tolist()]] = True
    boundary_vertices = np.zeros(len(x), dtype=bool)
    boundary_vertices[bf.ravel()] = True

    return replace(
        mesh,
        cells=cells,
        edges=edges,
        faces=faces,
        cell_edges=cell_edges,
        cell_edge_signs=np.ones((nc, 6), dtype=np.int64),
        cell_faces=cell_faces,
        cell_face_signs=cell_face_signs,
        boundary_vertices=boundary_vertices,
        boundary_edges=boundary_edges,
        boundary_faces=boundary_faces,
    )
