"""Nodal interpolation onto the Nedelec and Raviart-Thomas spaces.

The degrees of freedom are tangential edge moments (Nedelec) and normal face
fluxes (Raviart-Thomas), both taken against the global unit tangent / normal,
so an interpolated coefficient is exactly the moment of the source field.
Moments are computed cell by cell; every edge/face is seen from all its
incident cells and the values must agree (the source is conforming).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .fe_spaces import (
    EDGE_POINTS,
    EDGE_WEIGHTS,
    FACE_POINTS,
    FACE_WEIGHTS,
    DofHandler,
    SpaceKind,
    tabulate,
)
from .mesh import LOCAL_EDGES, LOCAL_FACES, Mesh

CONFORMITY_TOL = 1e-12

_NEDELEC_SOURCES = {
    SpaceKind.P1Vec,
    SpaceKind.EdgeBubbleVec,
    SpaceKind.FaceBubbleVec,
    SpaceKind.P1VecPlusEdge,
    SpaceKind.P1VecPlusFace,
    SpaceKind.Nedelec0,
}
_RT_SOURCES = {
    SpaceKind.P1Vec,
    SpaceKind.EdgeBubbleVec,
    SpaceKind.FaceBubbleVec,
    SpaceKind.P1VecPlusEdge,
    SpaceKind.P1VecPlusFace,
    SpaceKind.RT0,
}


@dataclass(frozen=True)
class FieldCoeffs:
    handler: DofHandler
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != self.handler.num_dofs:
            raise InvalidArgumentError(
                f"coefficient vector has length {len(self.coeffs)}, space has {self.handler.num_dofs} dofs"
            )

    @property
    def kind(self) -> SpaceKind:
        return self.handler.kind


def _local_moments(mesh: Mesh, target: SpaceKind, evaluate) -> np.ndarray:
    """Moments of per-cell fields on every local edge/face.

    ``evaluate(bary)`` takes (q, 4) barycentric points and returns (C, q, m, 3)
    field values.  Returns (C, nloc_target, m).
    """
    if target is SpaceKind.Nedelec0:
        t = mesh.edge_tangents()[mesh.cell_edges]  # (C, 6, 3)
        length = mesh.edge_lengths()[mesh.cell_edges]
        out = []
        for le, (i, j) in enumerate(LOCAL_EDGES):
            bary = np.zeros((len(EDGE_POINTS), 4))
            bary[:, i] = 1 - EDGE_POINTS
            bary[:, j] = EDGE_POINTS
            vals = evaluate(bary)
            m = np.einsum("q,cqmk,ck->cm", EDGE_WEIGHTS, vals, t[:, le]) * length[:, le, None]
            out.append(m)
        return np.stack(out, axis=1)
    if target is SpaceKind.RT0:
        nrm = mesh.face_normals()[mesh.cell_faces]
        area = mesh.face_areas()[mesh.cell_faces]
        out = []
        for lf, (i, j, k) in enumerate(LOCAL_FACES):
            bary = np.zeros((len(FACE_POINTS), 4))
            bary[:, [i, j, k]] = FACE_POINTS
            vals = evaluate(bary)
            m = np.einsum("q,cqmk,ck->cm", FACE_WEIGHTS, vals, nrm[:, lf]) * area[:, lf, None]
            out.append(m)
        return np.stack(out, axis=1)
    raise InvalidArgumentError(f"no nodal interpolation onto {target.name}")


def _check_conformity(rows, cols, vals, what):
    key = np.lexsort((cols, rows))
    r, c, v = rows[key], cols[key], vals[key]
    same = (r[1:] == r[:-1]) & (c[1:] == c[:-1])
    if np.any(same):
        scale = max(1.0, float(np.abs(v).max()))
        gap = np.abs(v[1:] - v[:-1])[same]
        if gap.max() > CONFORMITY_TOL * scale:
            raise InvalidArgumentError(f"{what}: moments disagree across cells by {gap.max():.3e}; source not conforming")
    first = np.concatenate([[True], ~same])
    return r[first], c[first], v[first]


def interpolation_matrix(source: DofHandler, target: DofHandler) -> sp.csr_matrix:
    """Sparse matrix mapping source coefficients to interpolant coefficients."""
    if source.mesh is not target.mesh:
        raise InvalidArgumentError("source and target live on different meshes")
    allowed = {SpaceKind.Nedelec0: _NEDELEC_SOURCES, SpaceKind.RT0: _RT_SOURCES}.get(target.kind)
    if allowed is None:
        raise InvalidArgumentError(f"interpolation target must be Nedelec0 or RT0, got {target.kind.name}")
    if source.kind not in allowed:
        raise InvalidArgumentError(f"cannot interpolate {source.kind.name} onto {target.kind.name}")
    mesh = source.mesh
    geom = mesh.geometry()

    def evaluate(bary):
        return tabulate(source.kind, geom, bary).value

    mom = _local_moments(mesh, target.kind, evaluate)  # (C, nt, ns)
    mom = mom * source.cell_signs[:, None, :]
    C, nt, ns = mom.shape
    rows = np.broadcast_to(target.cell_dofs[:, :, None], (C, nt, ns)).ravel()
    cols = np.broadcast_to(source.cell_dofs[:, None, :], (C, nt, ns)).ravel()
    vals = mom.ravel()
    keep = (rows >= 0) & (cols >= 0)
    rows, cols, vals = _check_conformity(rows[keep], cols[keep], vals[keep], "interpolation")
    P = sp.csr_matrix((vals, (rows, cols)), shape=(target.num_dofs, source.num_dofs))
    P.eliminate_zeros()
    P.sort_indices()
    return P


def interpolate_cellwise(target: DofHandler, field) -> np.ndarray:
    """Interpolate a per-cell vector field onto ``target`` (Nedelec0 or RT0).

    ``field(bary)`` receives (q, 4) barycentric points and returns (C, q, 3)
    values on every cell.  The field may be discontinuous as long as its
    tangential (resp. normal) trace is single valued.
    """
    mesh = target.mesh
    mom = _local_moments(mesh, target.kind, lambda b: field(b)[:, :, None, :])[..., 0]
    rows = target.cell_dofs.ravel()
    keep = rows >= 0
    rows, _, vals = _check_conformity(rows[keep], np.zeros(keep.sum(), dtype=np.int64), mom.ravel()[keep], "interpolation")
    out = np.zeros(target.num_dofs)
    out[rows] = vals
    return out


def interpolate_function(target: DofHandler, f) -> np.ndarray:
    """Interpolate a global callable ``f(points) -> (N, 3)``."""
    x = target.mesh.geometry().coords

    def field(bary):
        pts = np.einsum("qa,cak->cqk", bary, x)
        return np.asarray(f(pts.reshape(-1, 3))).reshape(pts.shape)

    return interpolate_cellwise(target, field)


def _interp(src: FieldCoeffs, target: DofHandler, kind: SpaceKind) -> FieldCoeffs:
    if target.kind is not kind:
        raise InvalidArgumentError(f"target space must be {kind.name}, got {target.kind.name}")
    return FieldCoeffs(target, interpolation_matrix(src.handler, target) @ src.coeffs)


def interp_nedelec(src: FieldCoeffs, target: DofHandler) -> FieldCoeffs:
    return _interp(src, target, SpaceKind.Nedelec0)


def interp_rt(src: FieldCoeffs, target: DofHandler) -> FieldCoeffs:
    return _interp(src, target, SpaceKind.RT0)
