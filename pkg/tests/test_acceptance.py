"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from ordfem.analysis import (
    convergence_study,
    decomposition_stability,
    drift,
    infsup_constant,
    infsup_pairing,
)
from ordfem.assembly import ProblemKind, assemble_load, assemble_operator, divergence_matrix, gradient_matrix
from ordfem.cli import hypotheses_table, main
from ordfem.fe_spaces import BC, SpaceKind, make_space, quadrature_rule, tabulate
from ordfem.interp import interpolate_function, interpolation_matrix
from ordfem.manufactured import manufactured_problem
from ordfem.mesh import build_structured_cube
from ordfem.solver import solve_direct

RATE_LO, RATE_HI = 0.7, 1.3
N_CONV = (2, 4, 8)
N_STAB = (2, 3)

RESULTS = {}


def record(num, ok, detail):
    RESULTS[num] = (bool(ok), detail)
    assert ok, f"criterion {num}: {detail}"


def summary_lines():
    out = []
    for num in range(1, 9):
        if num in RESULTS:
            ok, detail = RESULTS[num]
            out.append(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            out.append(f"criterion {num}: NOT RUN")
    return out


@pytest.fixture(scope="module")
def convergence():
    out = {}
    for kind in ("bilaplacian", "quadcurl"):
        t = time.perf_counter()
        rep = convergence_study(manufactured_problem(kind), N_CONV)
        out[kind] = (rep, time.perf_counter() - t)
    return out


def _rates_ok(rep):
    return all(RATE_LO <= rep.rates[k] <= RATE_HI for k in ("u", "phi"))


def test_criterion_1_bilaplacian_rates(convergence):
    rep, secs = convergence["bilaplacian"]
    ok = _rates_ok(rep) and secs < 300
    record(1, ok, f"rate u(H1)={rep.rates['u']:.3f} phi(H1)={rep.rates['phi']:.3f} "
                  f"window [{RATE_LO}, {RATE_HI}], n={N_CONV}, {secs:.1f}s")


def test_criterion_2_quadcurl_rates(convergence):
    rep, secs = convergence["quadcurl"]
    ok = _rates_ok(rep) and secs < 300
    record(2, ok, f"rate u(Hcurl)={rep.rates['u']:.3f} phi(H1)={rep.rates['phi']:.3f} "
                  f"window [{RATE_LO}, {RATE_HI}], n={N_CONV}, {secs:.1f}s")


def test_criterion_3_auxiliary_cauchy(convergence):
    parts, ok = [], True
    for kind, name in (("bilaplacian", "zeta(Hcurl)"), ("quadcurl", "sigma(Hdiv)")):
        c = convergence[kind][0].cauchy
        mono = all(b < a for a, b in zip(c, c[1:]))
        ok &= mono
        parts.append(f"{name} diffs={[round(v, 3) for v in c]}")
    record(3, ok, "; ".join(parts) + " (must decrease)")


def test_criterion_4_infsup():
    parts, ok = [], True
    for pair in ("curl", "div"):
        res = [infsup_constant(*infsup_pairing(build_structured_cube(n), pair)) for n in N_STAB]
        betas = [r.beta for r in res]
        d = drift(betas) if min(betas) > 0 else np.inf
        ok &= min(betas) > 0 and all(r.kernel_dim == 0 for r in res) and d < 0.25
        parts.append(f"{pair}: beta={[round(b, 4) for b in betas]} drift={d:.3f}")
    record(4, ok, "; ".join(parts) + " (drift < 0.25)")


def test_criterion_5_decomposition():
    parts, ok = [], True
    for which in ("curl", "div"):
        reps = [decomposition_stability(build_structured_cube(n), which, samples=100) for n in N_STAB]
        recon = [int((r.residuals < 1e-8).sum()) for r in reps]
        ok &= all(r.samples == 100 and k == 100 for r, k in zip(reps, recon))
        d = drift([r.max_ratio for r in reps])
        ok &= d < 0.30
        parts.append(f"{which}: reconstructed {'/'.join(map(str, recon))} of 100, "
                     f"max ratio={[round(r.max_ratio, 3) for r in reps]} drift={d:.3f}")
    record(5, ok, "; ".join(parts) + " (drift < 0.30)")


def test_criterion_6_hypotheses():
    parts, ok = [], True
    for kind in ("bilaplacian", "quadcurl"):
        t = hypotheses_table(ProblemKind(kind), N_STAB)
        for key in ("B_bound", "interp_bound", "coercivity"):
            v = t[key]
            good = min(v) > 0 and np.all(np.isfinite(v)) and drift(v) < 0.30
            ok &= good
            parts.append(f"{kind}.{key}={[round(x, 3) for x in v]}")
    record(6, ok, "; ".join(parts) + " (positive, drift < 0.30)")


def test_criterion_7_interpolation_exactness():
    m = build_structured_cube(3)
    worst = 0.0
    P1 = make_space(m, SpaceKind.P1, BC.ESSENTIAL)
    N = make_space(m, SpaceKind.Nedelec0, BC.ESSENTIAL)
    p = np.random.default_rng(1).standard_normal(P1.num_dofs)
    g = gradient_matrix(P1, N) @ p
    worst = max(worst, np.abs(interpolation_matrix(N, N) @ g - g).max())
    # grad(0.5 x^T A x) = A x is continuous and linear, so it lives in the P1 part exactly
    A = np.array([[2.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 3.0]])
    Sf = make_space(m, SpaceKind.P1VecPlusEdge)
    Nf = make_space(m, SpaceKind.Nedelec0)
    c = np.zeros(Sf.num_dofs)
    c[Sf.entity_dofs["vertex"].ravel()] = (m.vertices @ A).ravel()
    worst = max(worst, np.abs(interpolation_matrix(Sf, Nf) @ c - interpolate_function(Nf, lambda x: x @ A)).max())
    const = np.array([0.7, -1.1, 0.4])
    Sface = make_space(m, SpaceKind.P1VecPlusFace)
    RTf = make_space(m, SpaceKind.RT0)
    for src, tgt in ((Sf, Nf), (Sface, RTf)):
        cc = np.zeros(src.num_dofs)
        cc[src.entity_dofs["vertex"].ravel()] = np.tile(const, m.num_vertices)
        got = interpolation_matrix(src, tgt) @ cc
        ev = tabulate(tgt.kind, m.geometry(), quadrature_rule(3).points)
        vals = np.einsum("cqlk,cl->cqk", ev.value, got[tgt.cell_dofs])
        worst = max(worst, np.abs(vals - const).max())
    # commuting diagram
    Sv = make_space(m, SpaceKind.P1VecPlusFace, BC.ESSENTIAL)
    RT = make_space(m, SpaceKind.RT0, BC.ESSENTIAL)
    P0 = make_space(m, SpaceKind.P0)
    x = np.random.default_rng(2).standard_normal(Sv.num_dofs)
    lhs = divergence_matrix(RT, P0) @ (interpolation_matrix(Sv, RT) @ x)
    rule = quadrature_rule(4)
    ev = tabulate(Sv.kind, m.geometry(), rule.points)
    avg = 6 * (np.einsum("cql,cl->cq", ev.div, np.append(x, 0.0)[Sv.cell_dofs]) * rule.weights).sum(1)
    worst = max(worst, np.abs(lhs - avg).max() / max(1.0, np.abs(avg).max()))
    record(7, worst <= 1e-12, f"max defect {worst:.2e} (<= 1e-12)")


def test_criterion_8_wellposed_deterministic(convergence, tmp_path):
    parts, ok = [], True
    m = build_structured_cube(2)
    for kind in ("bilaplacian", "quadcurl"):
        spec = manufactured_problem(kind)
        s = assemble_operator(spec, m)
        r = solve_direct(s, assemble_load(spec, m, s), with_inertia=True)
        good = r.inertia[1] == s.dims[2] and r.inertia[2] == 0 and r.residual < 1e-10
        ok &= good
        parts.append(f"{kind}: neg={r.inertia[1]} dimY={s.dims[2]} res={r.residual:.1e}")
    worst = max(max(convergence[k][0].residuals) for k in convergence)
    ok &= worst < 1e-10
    parts.append(f"max solve residual n<=8: {worst:.1e}")
    outs = []
    for tag in "ab":
        path = tmp_path / f"{tag}.csv"
        assert main(["convergence", "--problem", "quadcurl", "--n", "2,4", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    same = outs[0] == outs[1]
    ok &= same
    parts.append(f"repeat runs byte-identical: {same}")
    record(8, ok, "; ".join(parts))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
