"""Error norms, convergence studies and the discrete stability constants.

Dense eigen / nullspace computations are limited to ``DENSE_CAP`` unknowns.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    BlockSystem,
    Norm,
    ProblemKind,
    ProblemSpec,
    assemble_gram,
    assemble_load,
    assemble_operator,
    bilinear_form,
    check_norm,
    curl_matrix,
    divergence_matrix,
    gradient_matrix,
)
from .errors import DecompositionFailureError, InvalidArgumentError, SizeError
from .fe_spaces import BC, BasisEval, DofHandler, SpaceKind, make_space, quadrature_rule, tabulate
from .interp import interpolation_matrix
from .mesh import CellGeometry, Mesh, build_structured_cube
from .solver import block_gram_preconditioner, solve_direct, solve_minres

DENSE_CAP = 6000
DEFAULT_SEED = 0x5EED
ERROR_DEGREE = 8
RECONSTRUCTION_TOL = 1e-8
SCHEMA = "ordfem/1"


# ---------------------------------------------------------------------------
# evaluation of discrete fields


def evaluate_field(handler: DofHandler, coeffs, cells, bary) -> BasisEval:
    """Value and derivative of a discrete field at barycentric points of ``cells``.

    ``bary`` is (Q, 4) or (len(cells), Q, 4); results have shape (len(cells), Q, ...).
    """
    mesh = handler.mesh
    g = mesh.geometry()
    cells = np.asarray(cells)
    sub = CellGeometry(g.coords[cells], g.grads[cells], g.volume[cells])
    ev = tabulate(handler.kind, sub, bary)
    ext = np.append(np.asarray(coeffs, dtype=float), 0.0)
    loc = ext[handler.cell_dofs[cells]] * handler.cell_signs[cells]  # -1 maps to the appended zero
    val = np.einsum("cql...,cl->cq...", ev.value, loc)
    der = np.einsum("cql...,cl->cq...", ev.deriv, loc)
    return BasisEval(handler.kind, val, der)


def _norm_sq_terms(norm: Norm, ev_val, ev_der, kind_vector: bool):
    """Pointwise integrand |e|^2 + |D e|^2 for the given norm."""
    ev = BasisEval(SpaceKind.P1Vec if kind_vector else SpaceKind.P1, ev_val, ev_der)
    v = ev_val.reshape(ev_val.shape[:2] + (-1,))
    out = (v**2).sum(-1)
    if norm is Norm.H1:
        out = out + (ev_der.reshape(ev_der.shape[:2] + (-1,)) ** 2).sum(-1)
    elif norm is Norm.HCURL:
        out = out + (ev.curl**2).sum(-1)
    elif norm is Norm.HDIV:
        out = out + ev.div**2
    return out


def error_norm(mesh: Mesh, handler: DofHandler, coeffs, exact, norm, degree: int = ERROR_DEGREE) -> float:
    """Norm of (exact - discrete); ``exact`` is an AnalyticField or None for zero."""
    if handler.mesh is not mesh:
        raise InvalidArgumentError("handler does not belong to this mesh")
    norm = check_norm(handler.kind, norm)
    rule = quadrature_rule(degree)
    cells = np.arange(mesh.num_cells)
    ev = evaluate_field(handler, coeffs, cells, rule.points)
    val, der = ev.value, ev.deriv
    if exact is not None:
        pts = np.einsum("qa,cak->cqk", rule.points, mesh.geometry().coords).reshape(-1, 3)
        C, Q = val.shape[:2]
        val = val - exact.value(pts).reshape(val.shape)
        if norm is not Norm.L2:
            der = der - exact.deriv(pts).reshape(der.shape)
    integrand = _norm_sq_terms(norm, val, der, handler.kind.is_vector)
    w = rule.weights[None, :] * (6.0 * mesh.geometry().volume)[:, None]
    return float(np.sqrt(max(0.0, (w * integrand).sum())))


def difference_norm(coarse: DofHandler, coarse_coeffs, fine: DofHandler, fine_coeffs, norm,
                    degree: int = ERROR_DEGREE) -> float:
    """Norm of fine - coarse for fields on nested structured meshes."""
    if coarse.kind is not fine.kind:
        raise InvalidArgumentError("fields must be of the same kind")
    cm, fm = coarse.mesh, fine.mesh
    if cm.n is None or fm.n is None or fm.n % cm.n:
        raise InvalidArgumentError("meshes must be structured and nested (coarse n divides fine n)")
    norm = check_norm(fine.kind, norm)
    rule = quadrature_rule(degree)
    fg = fm.geometry()
    cells = np.arange(fm.num_cells)
    pts = np.einsum("qa,cak->cqk", rule.points, fg.coords)
    parent = cm.locate(fg.coords.mean(axis=1))
    cg = cm.geometry()
    bary = np.einsum("cik,cqk->cqi", cg.grads[parent], pts - cg.coords[parent, 0][:, None, :])
    bary[..., 0] += 1.0
    ef = evaluate_field(fine, fine_coeffs, cells, rule.points)
    ec = evaluate_field(coarse, coarse_coeffs, parent, bary)
    integrand = _norm_sq_terms(norm, ef.value - ec.value, ef.deriv - ec.deriv, fine.kind.is_vector)
    w = rule.weights[None, :] * (6.0 * fg.volume)[:, None]
    return float(np.sqrt(max(0.0, (w * integrand).sum())))


def fitted_rate(h, err) -> float:
    """Least-squares slope of log(err) against log(h)."""
    h, err = np.asarray(h, float), np.asarray(err, float)
    if len(h) < 2:
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


# ---------------------------------------------------------------------------
# convergence


_NAMES = {
    ProblemKind.BILAPLACIAN: ("zeta", Norm.H1, Norm.H1, Norm.HCURL),
    ProblemKind.QUADCURL: ("sigma", Norm.HCURL, Norm.H1, Norm.HDIV),
}


@dataclass
class ConvergenceReport:
    problem: ProblemKind
    rows: list  # dicts with n, h, dofs, errors
    rates: dict
    cauchy: list  # successive-mesh differences of the auxiliary variable
    residuals: list = field(default_factory=list)
    constraint_residuals: list = field(default_factory=list)

    @property
    def aux(self) -> str:
        return _NAMES[self.problem][0]

    def columns(self) -> list:
        aux, nu = self.aux, _NAMES[self.problem][1].value.lower()
        return ["n", "h", "dof_u", "dof_phi", f"dof_{aux}", f"err_u_{nu}", "err_phi_h1", f"err_{aux}_ref", "rate"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        prev = None
        for r in self.rows:
            rate = "" if prev is None else _fmt(np.log(r["err_u"] / prev["err_u"]) / np.log(r["h"] / prev["h"]))
            w.writerow([r["n"], _fmt(r["h"]), *r["dofs"], _fmt(r["err_u"]), _fmt(r["err_phi"]), _fmt(r["err_aux_ref"]), rate])
            prev = r
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "study": "convergence",
            "problem": self.problem.value,
            "columns": self.columns(),
            "rows": [
                {"n": r["n"], "h": r["h"], "dofs": list(r["dofs"]), "err_u": r["err_u"], "err_phi": r["err_phi"],
                 "err_aux_ref": r["err_aux_ref"]}
                for r in self.rows
            ],
            "cauchy": self.cauchy,
            "rates": self.rates,
            "solver_residuals": self.residuals,
            "constraint_residuals": self.constraint_residuals,
        }


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def solve_problem(spec: ProblemSpec, mesh: Mesh, solver: str = "direct"):
    system = assemble_operator(spec, mesh)
    b = assemble_load(spec, mesh, system)
    if solver == "direct":
        rep = solve_direct(system, b, with_inertia=False)
    elif solver == "minres":
        rep = solve_minres(system, b, block_gram_preconditioner(system))
    else:
        raise InvalidArgumentError(f"unknown solver {solver!r}")
    return system, b, rep


def convergence_study(spec: ProblemSpec, n_list, solver: str = "direct") -> ConvergenceReport:
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidArgumentError("n_list must be strictly ascending")
    if n_list[0] < 2:
        raise InvalidArgumentError("every n must be >= 2 (n = 1 has no interior vertices)")
    if spec.exact is None:
        raise InvalidArgumentError("convergence study needs an exact solution in spec.exact")
    for a, b in zip(n_list, n_list[1:]):
        if b % a:
            raise InvalidArgumentError("each n must divide the next (nested meshes)")
    _, norm_u, norm_phi, norm_aux = _NAMES[spec.kind]
    ex = spec.exact.fields
    rows, sols = [], []
    residuals, cres = [], []
    for n in n_list:
        mesh = build_structured_cube(n)
        system, b, rep = solve_problem(spec, mesh, solver)
        R, S, Y = system.spaces
        u, phi, aux = system.split(rep.x)
        rows.append({
            "n": n,
            "h": mesh.h,
            "dofs": system.dims,
            "err_u": error_norm(mesh, R, u, ex["u"], norm_u),
            "err_phi": error_norm(mesh, S, phi, ex["phi"], norm_phi),
        })
        sols.append((Y, aux))
        residuals.append(rep.residual)
        cr = system.constraint() @ rep.x[: system.offsets[2]]
        cres.append(float(np.linalg.norm(cr) / max(np.linalg.norm(b), 1e-300)))
    Yf, af = sols[-1]
    for (Y, a), r in zip(sols, rows):
        r["err_aux_ref"] = 0.0 if Y is Yf else difference_norm(Y, a, Yf, af, norm_aux)
    cauchy = [difference_norm(*sols[i], *sols[i + 1], norm_aux) for i in range(len(sols) - 1)]
    hs = [r["h"] for r in rows]
    rates = {
        "u": fitted_rate(hs, [r["err_u"] for r in rows]),
        "phi": fitted_rate(hs, [r["err_phi"] for r in rows]),
        "aux_cauchy": fitted_rate(hs[:-1], cauchy) if len(cauchy) >= 2 else float("nan"),
    }
    return ConvergenceReport(spec.kind, rows, rates, cauchy, residuals, cres)


# ---------------------------------------------------------------------------
# inf-sup, coercivity, decomposition


def _dense(M):
    A = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    return np.atleast_2d(A)


def _cap(*sizes):
    if sum(sizes) > DENSE_CAP:
        raise SizeError(f"dense computation on {sum(sizes)} unknowns exceeds the cap of {DENSE_CAP}")


@dataclass(frozen=True)
class InfSupResult:
    beta: float
    kernel_dim: int


def infsup_constant(B, gram_RS, gram_Y, rel_tol: float = 1e-10) -> InfSupResult:
    """sqrt of the smallest nonzero eigenvalue of G_Y^{-1} B G_RS^{-1} B^T.

    ``B`` is (dim Y, dim RS) with entries b(rs_j, y_i).
    """
    B, G1, G2 = _dense(B), _dense(gram_RS), _dense(gram_Y)
    if G1.shape != (B.shape[1], B.shape[1]) or G2.shape != (B.shape[0], B.shape[0]):
        raise InvalidArgumentError(f"dimension mismatch: B {B.shape}, G_RS {G1.shape}, G_Y {G2.shape}")
    _cap(*B.shape)
    X = la.solve(G1, B.T, assume_a="pos")
    S = B @ X
    mu = la.eigh(0.5 * (S + S.T), G2, eigvals_only=True)
    top = max(mu.max(), 0.0)
    nz = mu[mu > rel_tol * top] if top > 0 else mu[:0]
    kernel = len(mu) - len(nz)
    beta = float(np.sqrt(nz.min())) if len(nz) else 0.0
    return InfSupResult(beta, int(kernel))


def infsup_pairing(mesh: Mesh, pair: str):
    """(B, G_RS, G_Y) for the curl pairing (enriched Lagrange vs divergence-free RT)
    or the div pairing (vs mean-zero P0).

    Y is represented by a dense basis Z of the constrained subspace, so B and
    G_Y are returned in Z coordinates and a nonzero kernel signals a failure
    of surjectivity.
    """
    if pair == "curl":
        S = make_space(mesh, SpaceKind.P1VecPlusEdge, BC.ESSENTIAL)
        N = make_space(mesh, SpaceKind.Nedelec0, BC.ESSENTIAL)
        Y = make_space(mesh, SpaceKind.RT0, BC.ESSENTIAL)
        op = curl_matrix(N, Y) @ interpolation_matrix(S, N)
        G_Y = assemble_gram(Y, Norm.HDIV)
        M_Y = assemble_gram(Y, Norm.L2)
        constraint = divergence_matrix(Y, make_space(mesh, SpaceKind.P0))
    elif pair == "div":
        S = make_space(mesh, SpaceKind.P1VecPlusFace, BC.ESSENTIAL)
        RT = make_space(mesh, SpaceKind.RT0, BC.ESSENTIAL)
        Y = make_space(mesh, SpaceKind.P0)
        op = divergence_matrix(RT, Y) @ interpolation_matrix(S, RT)
        G_Y = M_Y = assemble_gram(Y, Norm.L2)
        constraint = M_Y @ np.ones((Y.num_dofs, 1))
        constraint = constraint.T
    else:
        raise InvalidArgumentError(f"unknown pairing {pair!r}; use 'curl' or 'div'")
    _cap(Y.num_dofs, S.num_dofs)
    Z = la.null_space(_dense(constraint))
    B = Z.T @ (M_Y @ op).toarray()
    return B, assemble_gram(S, Norm.H1), Z.T @ G_Y.toarray() @ Z


@dataclass(frozen=True)
class CoercivityResult:
    value: float
    kernel_dim: int
    empty_kernel: bool = False


def coercivity_on_kernel(A, C, G) -> CoercivityResult:
    """Smallest Rayleigh quotient of A over null(C) measured in the G inner product."""
    A, G = _dense(A), _dense(G)
    C = np.zeros((0, A.shape[0])) if C is None else _dense(C).reshape(-1, A.shape[0])
    _cap(A.shape[0])
    Z = np.eye(A.shape[0]) if C.shape[0] == 0 else la.null_space(C)
    if Z.shape[1] == 0:
        return CoercivityResult(float("inf"), 0, True)
    a = Z.T @ A @ Z
    g = Z.T @ G @ Z
    mu = la.eigh(0.5 * (a + a.T), 0.5 * (g + g.T), eigvals_only=True)
    return CoercivityResult(float(mu.min()), Z.shape[1])


def natural_grams(system: BlockSystem):
    """Gram matrices of the R and S norms (H1 or H(curl) for R, H1 for S)."""
    R, S, _ = system.spaces
    G_R = assemble_gram(R, Norm.H1 if system.kind is ProblemKind.BILAPLACIAN else Norm.HCURL)
    return G_R, assemble_gram(S, Norm.H1)


def dual_norm_ratio(system: BlockSystem, rhs, x) -> float:
    """(|u|_R + |phi|_S + |zeta|_Y) / |f_1|_{-1,h} for a solved system with f_2 = 0.

    The discrete dual norm is exact: sup_v <f, v> / |v|_R = sqrt(b^T G_R^{-1} b).
    """
    G_R, G_S = natural_grams(system)
    u, phi, aux = system.split(np.asarray(x, dtype=float))
    b = np.asarray(rhs, dtype=float)[: len(u)]
    dual = np.sqrt(b @ spla.spsolve(G_R.tocsc(), b))
    num = np.sqrt(u @ (G_R @ u)) + np.sqrt(phi @ (G_S @ phi)) + np.sqrt(aux @ (system.gram_Y @ aux))
    return float(num / dual)


def kernel_coercivity(system: BlockSystem) -> CoercivityResult:
    G_R, G_S = natural_grams(system)
    G = sp.block_diag([G_R, G_S])
    return coercivity_on_kernel(system.leading_block(), system.constraint(), G)


@dataclass
class DecompositionReport:
    which: str
    ratios: np.ndarray  # (|w| + |s|) / |t|
    residuals: np.ndarray
    energy_ratios: np.ndarray  # sqrt(|w|^2 + |s|^2) / |t|, the quantity actually minimised

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    @property
    def samples(self) -> int:
        return len(self.ratios)


def decomposition_operators(mesh: Mesh, which: str):
    """(A, G_first, G_second, G_target) for target = A @ [first; second]."""
    if which == "curl":
        W = make_space(mesh, SpaceKind.P1, BC.ESSENTIAL)
        S = make_space(mesh, SpaceKind.P1VecPlusEdge, BC.ESSENTIAL)
        T = make_space(mesh, SpaceKind.Nedelec0, BC.ESSENTIAL)
        A = sp.hstack([gradient_matrix(W, T), interpolation_matrix(S, T)]).tocsr()
        return A, assemble_gram(W, Norm.H1), assemble_gram(S, Norm.H1), assemble_gram(T, Norm.HCURL)
    if which == "div":
        W = make_space(mesh, SpaceKind.Nedelec0, BC.ESSENTIAL)
        S = make_space(mesh, SpaceKind.P1VecPlusFace, BC.ESSENTIAL)
        T = make_space(mesh, SpaceKind.RT0, BC.ESSENTIAL)
        A = sp.hstack([curl_matrix(W, T), interpolation_matrix(S, T)]).tocsr()
        return A, assemble_gram(W, Norm.HCURL), assemble_gram(S, Norm.H1), assemble_gram(T, Norm.HDIV)
    raise InvalidArgumentError(f"unknown decomposition {which!r}; use 'curl' or 'div'")


def decomposition_stability(mesh: Mesh, which: str, samples: int = 100, seed: int = DEFAULT_SEED,
                            targets=None) -> DecompositionReport:
    """Minimal-energy splittings of random targets and their stability ratios.

    For each target t, minimise |w|^2 + |s|^2 (natural norms) subject to
    A [w; s] = t by a KKT solve, then report (|w| + |s|) / |t|.
    """
    A, G_w, G_s, G_t = decomposition_operators(mesh, which)
    nt, nx = A.shape
    if nt == 0:
        raise InvalidArgumentError("target space is empty on this mesh")
    if targets is None:
        rng = np.random.default_rng(seed)
        targets = rng.standard_normal((nt, samples))
        targets /= np.sqrt(np.einsum("is,ij,js->s", targets, G_t.toarray() if nt <= DENSE_CAP else G_t @ np.eye(nt), targets))
    targets = np.asarray(targets, dtype=float).reshape(nt, -1)
    G = sp.block_diag([G_w, G_s]).tocsc()
    K = sp.bmat([[G, A.T], [A, None]], format="csc")
    lu = spla.splu(K)
    rhs = np.vstack([np.zeros((nx, targets.shape[1])), targets])
    sol = lu.solve(rhs)[:nx]
    nw = G_w.shape[0]
    w, s = sol[:nw], sol[nw:]
    res = np.linalg.norm(A @ sol - targets, axis=0) / np.maximum(np.linalg.norm(targets, axis=0), 1e-300)
    if np.any(res > RECONSTRUCTION_TOL):
        raise DecompositionFailureError(f"reconstruction residual {res.max():.3e} exceeds {RECONSTRUCTION_TOL}")
    qn = lambda G, v: np.sqrt(np.maximum(np.einsum("is,is->s", v, G @ v), 0.0))  # noqa: E731
    a, b, t = qn(G_w, w), qn(G_s, s), qn(G_t, targets)
    return DecompositionReport(which, (a + b) / t, res, np.hypot(a, b) / t)


def _operator_norm(op, G_from, G_to) -> float:
    """sup |op v|_to / |v|_from from a dense generalized eigenproblem."""
    op = _dense(op)
    _cap(op.shape[1])
    H = op.T @ _dense(G_to) @ op
    mu = la.eigh(0.5 * (H + H.T), _dense(G_from), eigvals_only=True)
    return float(np.sqrt(max(mu.max(), 0.0)))


def interpolation_bounds(mesh: Mesh, which: str, samples: int = 200, seed: int = DEFAULT_SEED) -> dict:
    """Constants in |Pi B r|_Y <= C |r|_R ("B") and |Pi s|_Y <= C |s|_S ("interp").

    ``<name>`` is the exact operator norm; ``<name>_sampled`` the max ratio over
    ``samples`` random coefficient vectors (a lower bound for it).
    """
    A, G_w, G_s, G_t = decomposition_operators(mesh, which)
    nw = G_w.shape[0]
    rng = np.random.default_rng(seed)
    out = {}
    for name, op, G in (("B", A[:, :nw], G_w), ("interp", A[:, nw:], G_s)):
        v = rng.standard_normal((G.shape[0], samples))
        img = op @ v
        num = np.sqrt(np.einsum("is,is->s", img, G_t @ img))
        den = np.sqrt(np.einsum("is,is->s", v, G @ v))
        out[f"{name}_sampled"] = float((num / den).max())
        out[name] = _operator_norm(op, G, G_t)
    return out


def bubble_norm_equivalence(mesh: Mesh, which: str = "edge") -> tuple:
    """Extreme generalized eigenvalues of the H1 Gram of the enriched space
    against block-diag(H1 Gram of the Lagrange part, h^-2 scaled bubble mass)."""
    kind = {"edge": SpaceKind.P1VecPlusEdge, "face": SpaceKind.P1VecPlusFace}.get(which)
    if kind is None:
        raise InvalidArgumentError(f"unknown bubble family {which!r}")
    S = make_space(mesh, kind, BC.ESSENTIAL)
    G = assemble_gram(S, Norm.H1).toarray()
    _cap(G.shape[0])
    nv = 3 * int((S.entity_dofs["vertex"][:, 0] >= 0).sum())
    hK = mesh.geometry().diameter
    Mb = bilinear_form(S, S, [("value", "value", hK**-2.0)]).toarray()[nv:, nv:]
    D = la.block_diag(G[:nv, :nv], Mb)
    mu = la.eigh(G, D, eigvals_only=True)
    return float(mu.min()), float(mu.max())


def drift(values) -> float:
    """Relative spread (max - min) / min of positive observations."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.min())
