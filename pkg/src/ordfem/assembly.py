"""Assembly of Gram matrices, exact-sequence operators and the 3x3 block systems.

Both model problems share the block layout

    [ A_RR   0     C_RY ] [u   ]   [b_R]
    [ 0      A_SS  C_SY ] [phi ] = [b_S]
    [ C_RY'  C_SY' 0    ] [zeta]   [0  ]

with ``C_SY = P' G_Y`` where ``P`` interpolates the enriched Lagrange space
into the Nedelec / Raviart-Thomas space ``Y`` and ``G_Y`` is the full
H(curl) / H(div) Gram matrix there.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DegenerateSystemError, InvalidArgumentError
from .fe_spaces import BC, DofHandler, SpaceKind, make_space, quadrature_rule, tabulate
from .interp import interpolation_matrix
from .mesh import Mesh


class ProblemKind(enum.Enum):
    BILAPLACIAN = "bilaplacian"
    QUADCURL = "quadcurl"


class Norm(enum.Enum):
    L2 = "L2"
    H1 = "H1"
    HCURL = "Hcurl"
    HDIV = "Hdiv"


_NORM_KINDS = {
    Norm.L2: set(SpaceKind),
    Norm.H1: {SpaceKind.P1, SpaceKind.P1Vec, SpaceKind.EdgeBubbleVec, SpaceKind.FaceBubbleVec,
              SpaceKind.P1VecPlusEdge, SpaceKind.P1VecPlusFace},
    Norm.HCURL: {SpaceKind.P1Vec, SpaceKind.EdgeBubbleVec, SpaceKind.FaceBubbleVec,
                 SpaceKind.P1VecPlusEdge, SpaceKind.P1VecPlusFace, SpaceKind.Nedelec0},
    Norm.HDIV: {SpaceKind.P1Vec, SpaceKind.EdgeBubbleVec, SpaceKind.FaceBubbleVec,
                SpaceKind.P1VecPlusEdge, SpaceKind.P1VecPlusFace, SpaceKind.RT0},
}

# operators entering each norm, besides the plain value
_NORM_OPS = {Norm.L2: (), Norm.H1: ("deriv",), Norm.HCURL: ("curl",), Norm.HDIV: ("div",)}

DEFAULT_DEGREE = 6


def check_norm(kind: SpaceKind, norm) -> Norm:
    norm = Norm(norm)
    if kind not in _NORM_KINDS[norm]:
        raise InvalidArgumentError(f"norm {norm.value} does not apply to {kind.name}")
    return norm


# ---------------------------------------------------------------------------
# generic forms


def _op(ev, name):
    if name == "value":
        v = ev.value
    elif name == "deriv":
        v = ev.deriv
    elif name == "curl":
        v = ev.curl
    elif name == "div":
        v = ev.div
    else:
        raise InvalidArgumentError(f"unknown operator {name!r}")
    C, Q, L = v.shape[:3]
    return v.reshape(C, Q, L, -1)


def _coefficient_at(coef, points, shape):
    """Evaluate a coefficient (number, per-cell array (C,) or callable) at physical points (C, Q, 3)."""
    if coef is None:
        return None
    if isinstance(coef, np.ndarray) and coef.ndim == 1:
        if len(coef) != shape[0]:
            raise InvalidArgumentError(f"per-cell coefficient has length {len(coef)}, mesh has {shape[0]} cells")
        return np.broadcast_to(coef[:, None], shape).astype(float)
    if callable(coef):
        val = np.asarray(coef(points.reshape(-1, 3)), dtype=float)
        return val.reshape(shape + val.shape[1:])
    return np.full(shape, float(coef))


def physical_points(mesh: Mesh, bary: np.ndarray) -> np.ndarray:
    return np.einsum("qa,cak->cqk", bary, mesh.geometry().coords)


def bilinear_form(test: DofHandler, trial: DofHandler, terms, degree: int = DEFAULT_DEGREE) -> sp.csr_matrix:
    """Assemble sum over ``terms`` of (coef * op_trial(u), op_test(v)).

    Each term is ``(test_op, trial_op, coef)`` with ops among value / deriv /
    curl / div and ``coef`` None, a number, or a callable of points returning
    scalars (N,) or matrices (N, 3, 3).  Row index = test dof.
    """
    if test.mesh is not trial.mesh:
        raise InvalidArgumentError("test and trial spaces live on different meshes")
    mesh = test.mesh
    rule = quadrature_rule(degree)
    geom = mesh.geometry()
    et = tabulate(test.kind, geom, rule.points)
    es = et if trial.kind is test.kind else tabulate(trial.kind, geom, rule.points)
    C, Q = et.value.shape[:2]
    wq = rule.weights[None, :] * (6.0 * geom.volume)[:, None]  # (C, Q)
    pts = None
    local = np.zeros((C, test.kind.num_local, trial.kind.num_local))
    for top, sop, coef in terms:
        T, S = _op(et, top), _op(es, sop)
        if T.shape[-1] != S.shape[-1]:
            raise InvalidArgumentError(f"operators {top} and {sop} have mismatched shapes")
        if callable(coef) and pts is None:
            pts = physical_points(mesh, rule.points)
        a = _coefficient_at(coef, pts, (C, Q))
        if a is None:
            local += np.einsum("cq,cqid,cqjd->cij", wq, T, S)
        elif a.ndim == 2:
            local += np.einsum("cq,cqid,cqjd->cij", wq * a, T, S)
        else:
            local += np.einsum("cq,cqid,cqde,cqje->cij", wq, T, a, S)
    return _scatter(test, trial, local)


def _scatter(test, trial, local):
    C, Lt, Ls = local.shape
    vals = local * test.cell_signs[:, :, None] * trial.cell_signs[:, None, :]
    rows = np.broadcast_to(test.cell_dofs[:, :, None], (C, Lt, Ls)).ravel()
    cols = np.broadcast_to(trial.cell_dofs[:, None, :], (C, Lt, Ls)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    M = sp.coo_matrix((vals.ravel()[keep], (rows[keep], cols[keep])), shape=(test.num_dofs, trial.num_dofs)).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def linear_form(test: DofHandler, f, op: str = "value", degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Assemble (f, op(v)) for a callable ``f(points)``; None gives zeros."""
    if f is None:
        return np.zeros(test.num_dofs)
    mesh = test.mesh
    rule = quadrature_rule(degree)
    geom = mesh.geometry()
    T = _op(tabulate(test.kind, geom, rule.points), op)
    C, Q = T.shape[:2]
    pts = physical_points(mesh, rule.points)
    fv = np.asarray(f(pts.reshape(-1, 3)), dtype=float).reshape(C, Q, -1)
    wq = rule.weights[None, :] * (6.0 * geom.volume)[:, None]
    local = np.einsum("cq,cqid,cqd->ci", wq, T, fv) * test.cell_signs
    rows = test.cell_dofs.ravel()
    keep = rows >= 0
    return np.bincount(rows[keep], weights=local.ravel()[keep], minlength=test.num_dofs)


def assemble_gram(space, norm, mesh: Mesh | None = None, bc=BC.NONE, degree: int = DEFAULT_DEGREE) -> sp.csr_matrix:
    """Gram matrix of ``norm`` on a space given as DofHandler or (SpaceKind, mesh)."""
    if isinstance(space, DofHandler):
        handler = space
    else:
        if mesh is None:
            raise InvalidArgumentError("a mesh is needed when the space is given by kind")
        handler = make_space(mesh, space, bc)
    norm = check_norm(handler.kind, norm)
    terms = [("value", "value", None)] + [(o, o, None) for o in _NORM_OPS[norm]]
    return bilinear_form(handler, handler, terms, degree)


# ---------------------------------------------------------------------------
# exact sequence


def gradient_matrix(scalar: DofHandler, edge: DofHandler) -> sp.csr_matrix:
    """Nedelec coefficients of grad p for p in the P1 space."""
    if scalar.kind is not SpaceKind.P1 or edge.kind is not SpaceKind.Nedelec0:
        raise InvalidArgumentError("gradient maps P1 into Nedelec0")
    mesh = scalar.mesh
    vd = scalar.entity_dofs["vertex"][:, 0]
    ed = edge.entity_dofs["edge"]
    rows, cols, vals = [], [], []
    for end, sgn in ((1, 1.0), (0, -1.0)):
        c = vd[mesh.edges[:, end]]
        ok = (ed >= 0) & (c >= 0)
        rows.append(ed[ok]), cols.append(c[ok]), vals.append(np.full(ok.sum(), sgn))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(edge.num_dofs, scalar.num_dofs))


def curl_matrix(edge: DofHandler, face: DofHandler) -> sp.csr_matrix:
    """RT coefficients of curl w for w in the Nedelec space."""
    if edge.kind is not SpaceKind.Nedelec0 or face.kind is not SpaceKind.RT0:
        raise InvalidArgumentError("curl maps Nedelec0 into RT0")
    mesh = edge.mesh
    edge_id = {tuple(e): i for i, e in enumerate(mesh.edges.tolist())}
    ed = edge.entity_dofs["edge"]
    fd = face.entity_dofs["face"]
    rows, cols, vals = [], [], []
    for f, (a, b, c) in enumerate(mesh.faces.tolist()):
        if fd[f] < 0:
            continue
        # circulation along a -> b -> c -> a
        for key, sgn in (((a, b), 1.0), ((b, c), 1.0), ((a, c), -1.0)):
            d = ed[edge_id[key]]
            if d >= 0:
                rows.append(fd[f]), cols.append(d), vals.append(sgn)
    return sp.csr_matrix((vals, (rows, cols)), shape=(face.num_dofs, edge.num_dofs))


def divergence_matrix(face: DofHandler, cell: DofHandler) -> sp.csr_matrix:
    """P0 coefficients of div q for q in the RT space."""
    if face.kind is not SpaceKind.RT0 or cell.kind is not SpaceKind.P0:
        raise InvalidArgumentError("divergence maps RT0 into P0")
    mesh = face.mesh
    vol = mesh.geometry().volume
    C = mesh.num_cells
    rows = np.repeat(cell.entity_dofs["cell"], 4)
    cols = face.entity_dofs["face"][mesh.cell_faces].ravel()
    vals = (mesh.cell_face_signs / vol[:, None]).ravel()
    keep = cols >= 0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(C, face.num_dofs))


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class ProblemSpec:
    """Which model problem to assemble and its data.

    ``coefficient`` is alpha(x) for the bi-Laplacian and A(x) for the
    fourth-order curl problem: a positive number, or a callable returning
    scalars (N,) or SPD matrices (N, 3, 3).  ``f1`` / ``f2`` are callables of
    points (N, 3); ``None`` means zero.
    """

    kind: ProblemKind
    coefficient: float | Callable = 1.0
    f1: Callable | None = None
    f2: Callable | None = None
    quad_degree: int = DEFAULT_DEGREE
    exact: object = None  # optional manufactured solution bundle

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        if not callable(self.coefficient) and not float(self.coefficient) > 0:
            raise InvalidArgumentError("coefficient must be positive")


@dataclass
class BlockSystem:
    kind: ProblemKind
    spaces: tuple  # (R_h, S_h, Y_h) DofHandlers
    blocks: dict
    matrix: sp.csr_matrix
    offsets: tuple
    interp: sp.csr_matrix  # P : S_h -> Y_h
    gram_Y: sp.csr_matrix
    extras: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple:
        return tuple(s.num_dofs for s in self.spaces)

    def split(self, x):
        o = self.offsets
        return x[o[0]:o[1]], x[o[1]:o[2]], x[o[2]:o[3]]

    def constraint(self) -> sp.csr_matrix:
        """The third block row (Y x (R+S))."""
        return sp.hstack([self.blocks["C_RY"].T, self.blocks["C_SY"].T]).tocsr()

    def leading_block(self) -> sp.csr_matrix:
        return sp.block_diag([self.blocks["A_RR"], self.blocks["A_SS"]]).tocsr()


def _check_coefficient(coef, mesh, degree):
    if not callable(coef):
        return
    pts = physical_points(mesh, quadrature_rule(degree).points).reshape(-1, 3)
    a = np.asarray(coef(pts), dtype=float)
    if a.ndim == 1:
        ok = np.all(a > 0)
    else:
        ok = np.all(np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, -1, -2))) > 0)
    if not ok:
        raise InvalidArgumentError("coefficient is not positive (definite) at some quadrature point")


def problem_spaces(kind: ProblemKind, mesh: Mesh):
    kind = ProblemKind(kind)
    if kind is ProblemKind.BILAPLACIAN:
        kinds = (SpaceKind.P1, SpaceKind.P1VecPlusEdge, SpaceKind.Nedelec0)
    else:
        kinds = (SpaceKind.Nedelec0, SpaceKind.P1VecPlusFace, SpaceKind.RT0)
    spaces = tuple(make_space(mesh, k, BC.ESSENTIAL) for k in kinds)
    for s in spaces:
        if s.num_dofs == 0:
            raise DegenerateSystemError(f"{s.kind.name} space with essential boundary conditions is empty on this mesh")
    return spaces


def assemble_operator(spec: ProblemSpec, mesh: Mesh) -> BlockSystem:
    R, S, Y = problem_spaces(spec.kind, mesh)
    deg = spec.quad_degree
    _check_coefficient(spec.coefficient, mesh, deg)
    if spec.kind is ProblemKind.BILAPLACIAN:
        A_RR = sp.csr_matrix((R.num_dofs, R.num_dofs))
        A_SS = bilinear_form(S, S, [("div", "div", spec.coefficient), ("curl", "curl", None)], deg)
        gram_Y = assemble_gram(Y, Norm.HCURL, degree=deg)
        C_RY = bilinear_form(R, Y, [("deriv", "value", -1.0)], deg)
    else:
        A_RR = bilinear_form(R, R, [("value", "value", None)], deg)
        A_SS = bilinear_form(S, S, [("curl", "curl", spec.coefficient), ("div", "div", None)], deg)
        gram_Y = assemble_gram(Y, Norm.HDIV, degree=deg)
        C_RY = bilinear_form(R, Y, [("curl", "value", -1.0)], deg)
    P = interpolation_matrix(S, Y)
    C_SY = (P.T @ gram_Y).tocsr()
    C_SY.sort_indices()
    A_RS = sp.csr_matrix((R.num_dofs, S.num_dofs))
    Z_YY = sp.csr_matrix((Y.num_dofs, Y.num_dofs))
    M = sp.bmat([[A_RR, A_RS, C_RY], [A_RS.T, A_SS, C_SY], [C_RY.T, C_SY.T, Z_YY]], format="csr")
    M.sum_duplicates()
    M.sort_indices()
    dims = np.cumsum([0, R.num_dofs, S.num_dofs, Y.num_dofs])
    blocks = {"A_RR": A_RR, "A_RS": A_RS, "C_RY": C_RY, "A_SS": A_SS, "C_SY": C_SY, "A_YY": Z_YY}
    return BlockSystem(spec.kind, (R, S, Y), blocks, M, tuple(int(d) for d in dims), P, gram_Y)


def assemble_load(spec: ProblemSpec, mesh: Mesh, system: BlockSystem | None = None) -> np.ndarray:
    R, S, Y = system.spaces if system is not None else problem_spaces(spec.kind, mesh)
    deg = spec.quad_degree
    b_R = linear_form(R, spec.f1, "value", deg)
    b_S = linear_form(S, spec.f2, "value", deg)
    return np.concatenate([b_R, b_S, np.zeros(Y.num_dofs)])


def export_matrix_market(matrix, path, symmetric: bool = True) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), symmetry="symmetric" if symmetric else "general")
