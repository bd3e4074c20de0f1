"""Lowest-order finite element spaces on tetrahedra, dof maps and quadrature.

Shape functions are written in barycentric coordinates.  Vector fields carry
their full Jacobian ``jac[..., i, j] = d v_i / d x_j``; curl and divergence
are read off it.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import InvalidArgumentError
from .mesh import LOCAL_EDGES, LOCAL_FACES, CellGeometry, Mesh

REFERENCE_VOLUME = 1.0 / 6.0


class SpaceKind(enum.Enum):
    P1 = "P1"
    P1Vec = "P1Vec"
    EdgeBubbleVec = "EdgeBubbleVec"
    FaceBubbleVec = "FaceBubbleVec"
    P1VecPlusEdge = "P1VecPlusEdge"
    P1VecPlusFace = "P1VecPlusFace"
    Nedelec0 = "Nedelec0"
    RT0 = "RT0"
    P0 = "P0"

    @property
    def is_vector(self) -> bool:
        return self not in (SpaceKind.P1, SpaceKind.P0)

    @property
    def num_local(self) -> int:
        return _NUM_LOCAL[self]


_NUM_LOCAL = {
    SpaceKind.P1: 4,
    SpaceKind.P1Vec: 12,
    SpaceKind.EdgeBubbleVec: 6,
    SpaceKind.FaceBubbleVec: 4,
    SpaceKind.P1VecPlusEdge: 18,
    SpaceKind.P1VecPlusFace: 16,
    SpaceKind.Nedelec0: 6,
    SpaceKind.RT0: 4,
    SpaceKind.P0: 1,
}


class BC(enum.Enum):
    NONE = "none"
    ESSENTIAL = "essential"


# ---------------------------------------------------------------------------
# quadrature


def integrate_barycentric_monomial(exponents, volume: float) -> float:
    """Exact integral of prod(lambda_i ** a_i) over a tetrahedron of given volume."""
    a = [int(e) for e in exponents]
    if len(a) != 4 or min(a) < 0:
        raise InvalidArgumentError("need four nonnegative integer exponents")
    num = math.prod(math.factorial(e) for e in a)
    return 6.0 * volume * num / math.factorial(sum(a) + 3)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 4) barycentric
    weights: np.ndarray  # (nq,), sum = 1/6
    degree: int


@lru_cache(maxsize=None)
def quadrature_rule(degree: int) -> QuadratureRule:
    if int(degree) != degree or not 1 <= degree <= 8:
        raise InvalidArgumentError(f"unsupported quadrature degree {degree!r} (1..8)")
    degree = int(degree)
    if degree == 1:
        return QuadratureRule(np.full((1, 4), 0.25), np.array([REFERENCE_VOLUME]), 1)
    if degree == 2:
        a, b = 0.5854101966249685, 0.1381966011250105
        pts = np.full((4, 4), b)
        np.fill_diagonal(pts, a)
        return QuadratureRule(pts, np.full(4, REFERENCE_VOLUME / 4), 2)
    # collapsed (conical) Gauss-Jacobi product, exact to degree 2m-1
    m = (degree + 2) // 2
    t1, w1 = roots_jacobi(m, 2.0, 0.0)
    t2, w2 = roots_jacobi(m, 1.0, 0.0)
    t3, w3 = roots_legendre(m)
    t1, t2, t3 = (t1 + 1) / 2, (t2 + 1) / 2, (t3 + 1) / 2
    w1, w2, w3 = w1 / 8, w2 / 4, w3 / 2
    pts, wts = [], []
    for i, j, k in itertools.product(range(m), repeat=3):
        x = t1[i]
        y = (1 - t1[i]) * t2[j]
        z = (1 - t1[i]) * (1 - t2[j]) * t3[k]
        pts.append((1 - x - y - z, x, y, z))
        wts.append(w1[i] * w2[j] * w3[k])
    return QuadratureRule(np.array(pts), np.array(wts), degree)


# 2-point Gauss on [0, 1], exact to degree 3
EDGE_POINTS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
EDGE_WEIGHTS = np.array([0.5, 0.5])
# 4-point triangle rule (barycentric), exact to degree 3, weights sum to 1
FACE_POINTS = np.array([[1 / 3, 1 / 3, 1 / 3], [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
FACE_WEIGHTS = np.array([-27 / 48, 25 / 48, 25 / 48, 25 / 48])


# ---------------------------------------------------------------------------
# shape functions


@dataclass(frozen=True)
class BasisEval:
    """Basis values and derivatives at points.

    ``value`` is (..., nloc) for scalar kinds and (..., nloc, 3) for vector
    kinds; ``deriv`` is the gradient (..., nloc, 3) or Jacobian (..., nloc, 3, 3).
    """

    kind: SpaceKind
    value: np.ndarray
    deriv: np.ndarray

    @property
    def grad(self) -> np.ndarray:
        if self.kind.is_vector:
            raise InvalidArgumentError(f"{self.kind.name} is vector valued; use jac")
        return self.deriv

    @property
    def jac(self) -> np.ndarray:
        if not self.kind.is_vector:
            raise InvalidArgumentError(f"{self.kind.name} is scalar; use grad")
        return self.deriv

    @property
    def curl(self) -> np.ndarray:
        J = self.jac
        return np.stack(
            [J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0], J[..., 1, 0] - J[..., 0, 1]],
            axis=-1,
        )

    @property
    def div(self) -> np.ndarray:
        return np.trace(self.jac, axis1=-2, axis2=-1)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def tabulate(kind: SpaceKind, geom: CellGeometry, bary: np.ndarray) -> BasisEval:
    """Evaluate all local basis functions of ``kind`` on a batch of cells.

    ``geom`` is batched with C cells; ``bary`` is (Q, 4) shared by all cells or
    (C, Q, 4) per cell.  Results have leading shape (C, Q).
    """
    g = geom.grads  # (C, 4, 3)
    x = geom.coords
    C = g.shape[0]
    lam = np.broadcast_to(bary, (C,) + np.shape(bary)[-2:])
    Q = lam.shape[1]
    G = np.broadcast_to(g[:, None], (C, Q, 4, 3))

    if kind is SpaceKind.P0:
        return BasisEval(kind, np.ones((C, Q, 1)), np.zeros((C, Q, 1, 3)))
    if kind is SpaceKind.P1:
        return BasisEval(kind, lam.copy(), G.copy())

    if kind is SpaceKind.P1Vec:
        val = np.zeros((C, Q, 12, 3))
        jac = np.zeros((C, Q, 12, 3, 3))
        for a in range(4):
            for c in range(3):
                val[:, :, 3 * a + c, c] = lam[:, :, a]
                jac[:, :, 3 * a + c, c, :] = G[:, :, a]
        return BasisEval(kind, val, jac)

    if kind is SpaceKind.EdgeBubbleVec:
        i, j = LOCAL_EDGES.T
        t = _unit(x[:, j] - x[:, i])  # (C, 6, 3)
        s = lam[:, :, i] * lam[:, :, j]
        gs = lam[:, :, i, None] * G[:, :, j] + lam[:, :, j, None] * G[:, :, i]
        val = s[..., None] * t[:, None]
        jac = t[:, None, :, :, None] * gs[:, :, :, None, :]
        return BasisEval(kind, val, jac)

    if kind is SpaceKind.FaceBubbleVec:
        i, j, k = LOCAL_FACES.T
        nrm = _unit(np.cross(x[:, j] - x[:, i], x[:, k] - x[:, i]))  # (C, 4, 3)
        li, lj, lk = lam[:, :, i], lam[:, :, j], lam[:, :, k]
        s = li * lj * lk
        gs = (lj * lk)[..., None] * G[:, :, i] + (li * lk)[..., None] * G[:, :, j] + (li * lj)[..., None] * G[:, :, k]
        val = s[..., None] * nrm[:, None]
        jac = nrm[:, None, :, :, None] * gs[:, :, :, None, :]
        return BasisEval(kind, val, jac)

    if kind is SpaceKind.P1VecPlusEdge or kind is SpaceKind.P1VecPlusFace:
        bubble = SpaceKind.EdgeBubbleVec if kind is SpaceKind.P1VecPlusEdge else SpaceKind.FaceBubbleVec
        a = tabulate(SpaceKind.P1Vec, geom, bary)
        b = tabulate(bubble, geom, bary)
        return BasisEval(kind, np.concatenate([a.value, b.value], axis=2), np.concatenate([a.deriv, b.deriv], axis=2))

    if kind is SpaceKind.Nedelec0:
        i, j = LOCAL_EDGES.T
        gi, gj = G[:, :, i], G[:, :, j]
        val = lam[:, :, i, None] * gj - lam[:, :, j, None] * gi
        jac = gj[..., :, None] * gi[..., None, :] - gi[..., :, None] * gj[..., None, :]
        return BasisEval(kind, val, jac)

    if kind is SpaceKind.RT0:
        i, j, k = LOCAL_FACES.T
        gi, gj, gk = G[:, :, i], G[:, :, j], G[:, :, k]
        cjk, cik, cij = np.cross(gj, gk), np.cross(gi, gk), np.cross(gi, gj)
        val = 2.0 * (lam[:, :, i, None] * cjk - lam[:, :, j, None] * cik + lam[:, :, k, None] * cij)
        jac = 2.0 * (
            cjk[..., :, None] * gi[..., None, :] - cik[..., :, None] * gj[..., None, :] + cij[..., :, None] * gk[..., None, :]
        )
        return BasisEval(kind, val, jac)

    raise InvalidArgumentError(f"unknown space kind {kind!r}")


def eval_basis(kind: SpaceKind, geom: CellGeometry, point) -> BasisEval:
    """Basis functions of one cell at one barycentric point."""
    if not isinstance(kind, SpaceKind):
        raise InvalidArgumentError(f"unknown space kind {kind!r}")
    p = np.asarray(point, dtype=float)
    if p.shape != (4,) or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError(f"point {point!r} is not a barycentric point of the simplex")
    batch = CellGeometry(np.asarray(geom.coords)[None], np.asarray(geom.grads)[None], np.atleast_1d(geom.volume))
    ev = tabulate(kind, batch, p[None])
    return BasisEval(kind, ev.value[0, 0], ev.deriv[0, 0])


# ---------------------------------------------------------------------------
# dof maps


@dataclass(frozen=True)
class DofHandler:
    mesh: Mesh
    kind: SpaceKind
    bc: BC
    num_dofs: int
    cell_dofs: np.ndarray  # (C, nloc), -1 where the local function is excluded
    cell_signs: np.ndarray  # (C, nloc)
    # global dof of each owned entity (-1 if excluded); keys: vertex/edge/face/cell
    entity_dofs: dict

    def __len__(self) -> int:
        return self.num_dofs


def _number(owned: np.ndarray, start: int, width: int = 1):
    ids = np.full((len(owned), width), -1, dtype=np.int64)
    k = int(owned.sum())
    ids[owned] = start + np.arange(k * width).reshape(k, width)
    return ids, start + k * width


def make_space(mesh: Mesh, kind: SpaceKind, bc: BC | str = BC.NONE) -> DofHandler:
    if not isinstance(kind, SpaceKind):
        try:
            kind = SpaceKind(kind)
        except ValueError:
            raise InvalidArgumentError(f"unknown space kind {kind!r}") from None
    bc = BC(bc)
    ess = bc is BC.ESSENTIAL
    C = mesh.num_cells
    entity_dofs = {}
    start = 0
    blocks = []

    if kind in (SpaceKind.P1, SpaceKind.P1Vec, SpaceKind.P1VecPlusEdge, SpaceKind.P1VecPlusFace):
        width = 1 if kind is SpaceKind.P1 else 3
        owned = ~mesh.boundary_vertices if ess else np.ones(mesh.num_vertices, bool)
        vd, start = _number(owned, start, width)
        entity_dofs["vertex"] = vd
        blocks.append(vd[mesh.cells].reshape(C, 4 * width))
    if kind in (SpaceKind.EdgeBubbleVec, SpaceKind.P1VecPlusEdge, SpaceKind.Nedelec0):
        owned = ~mesh.boundary_edges if ess else np.ones(mesh.num_edges, bool)
        ed, start = _number(owned, start)
        entity_dofs["edge"] = ed[:, 0]
        blocks.append(ed[mesh.cell_edges, 0])
    if kind in (SpaceKind.FaceBubbleVec, SpaceKind.P1VecPlusFace, SpaceKind.RT0):
        owned = ~mesh.boundary_faces if ess else np.ones(mesh.num_faces, bool)
        fd, start = _number(owned, start)
        entity_dofs["face"] = fd[:, 0]
        blocks.append(fd[mesh.cell_faces, 0])
    if kind is SpaceKind.P0:
        cd, start = _number(np.ones(C, bool), start)
        entity_dofs["cell"] = cd[:, 0]
        blocks.append(cd)

    cell_dofs = np.concatenate(blocks, axis=1)
    signs = np.ones(cell_dofs.shape)
    if kind is SpaceKind.Nedelec0:
        signs = mesh.cell_edge_signs.astype(float)
    return DofHandler(mesh, kind, bc, start, cell_dofs, signs, entity_dofs)
