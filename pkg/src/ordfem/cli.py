"""Command line entry point: ``ordfem <study> [options]``.

Exit status is 0 on success, 1 on usage or runtime errors and 2 when
``--check`` is given and a result falls outside its acceptance window.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .assembly import DEFAULT_DEGREE, ProblemKind, assemble_operator
from .errors import OrdfemError
from .manufactured import COEFFICIENT_PRESETS, manufactured_problem
from .mesh import build_structured_cube

STUDIES = ("convergence", "infsup", "decomposition", "hypotheses")
RATE_WINDOW = (0.7, 1.3)
INFSUP_DRIFT = 0.25
DECOMP_DRIFT = 0.30
HYPOTHESES_DRIFT = 0.30
DEFAULT_N = {"convergence": (2, 4, 8), "infsup": (2, 3), "decomposition": (2, 3), "hypotheses": (2, 3)}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    study: str
    problem: ProblemKind = ProblemKind.BILAPLACIAN
    n: tuple = ()
    coefficient: object = 1.0
    pair: str = "curl"
    solver: str = "direct"
    fmt: str = "json"
    out: str | None = None
    quad_degree: int = DEFAULT_DEGREE
    seed: int = analysis.DEFAULT_SEED
    samples: int = 100
    check: bool = False
    violations: list = field(default_factory=list)

    def validate(self):
        if self.study not in STUDIES:
            raise UsageError(f"study: unknown {self.study!r}")
        if not self.n:
            self.n = DEFAULT_N[self.study]
        if any(n < 1 for n in self.n):
            raise UsageError("--n: mesh sizes must be positive")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise UsageError("--n: mesh sizes must be strictly ascending")
        if self.study == "convergence":
            if min(self.n) < 2:
                raise UsageError("--n: solve studies need n >= 2 (n = 1 has no interior P1 dofs)")
            if len(self.n) < 2:
                raise UsageError("--n: convergence needs at least two mesh sizes")
            if any(b % a for a, b in zip(self.n, self.n[1:])):
                raise UsageError("--n: each mesh size must divide the next (nested meshes)")
        elif min(self.n) < 2:
            raise UsageError("--n: n >= 2 required (n = 1 has empty interior spaces)")
        if self.pair not in ("curl", "div"):
            raise UsageError(f"--pair: expected curl or div, got {self.pair!r}")
        if self.solver not in ("direct", "minres"):
            raise UsageError(f"--solver: expected direct or minres, got {self.solver!r}")
        if self.fmt not in ("csv", "json"):
            raise UsageError(f"--format: expected csv or json, got {self.fmt!r}")
        if not 1 <= self.quad_degree <= 8:
            raise UsageError("--quad-degree: must lie in 1..8")
        if self.samples < 1:
            raise UsageError("--samples: must be positive")
        if self.out is not None:
            d = os.path.dirname(os.path.abspath(self.out))
            if not os.path.isdir(d) or not os.access(d, os.W_OK):
                raise UsageError(f"--out: directory {d} is not writable")


def _parse_n(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"--n: expected comma separated integers, got {text!r}") from None


def _parse_coefficient(text: str):
    if text in COEFFICIENT_PRESETS:
        return text
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"--coefficient: expected a positive number or one of {COEFFICIENT_PRESETS}") from None
    if not v > 0:
        raise UsageError("--coefficient: must be positive")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ordfem", description="Mixed finite element studies for order-reduced fourth-order problems.")
    p.add_argument("study", choices=STUDIES)
    p.add_argument("--problem", default="bilaplacian", choices=[k.value for k in ProblemKind])
    p.add_argument("--n", default="", help="comma separated mesh sizes (cube subdivisions)")
    p.add_argument("--coefficient", default="1", help="positive constant or preset name (smooth)")
    p.add_argument("--pair", default="curl", help="curl or div (infsup, decomposition)")
    p.add_argument("--solver", default="direct")
    p.add_argument("--format", dest="fmt", default=None)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--quad-degree", type=int, default=DEFAULT_DEGREE)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=analysis.DEFAULT_SEED)
    p.add_argument("--samples", type=int, default=100, help="random targets for decomposition")
    p.add_argument("--check", action="store_true", help="exit 2 if a result leaves its acceptance window")
    return p


def parse_config(argv) -> RunConfig:
    a = build_parser().parse_args(argv)
    cfg = RunConfig(
        study=a.study,
        problem=ProblemKind(a.problem),
        n=_parse_n(a.n),
        coefficient=_parse_coefficient(a.coefficient),
        pair=a.pair,
        solver=a.solver,
        fmt=a.fmt or ("csv" if a.study == "convergence" else "json"),
        out=a.out,
        quad_degree=a.quad_degree,
        seed=a.seed,
        samples=a.samples,
        check=a.check,
    )
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# studies; each returns (report text, list of acceptance-window violations)


def _json(payload) -> str:
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([analysis._fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _in_window(v, lo, hi) -> bool:
    return bool(np.isfinite(v) and lo <= v <= hi)


def run_convergence(cfg: RunConfig):
    spec = manufactured_problem(cfg.problem, cfg.coefficient, cfg.quad_degree)
    rep = analysis.convergence_study(spec, cfg.n, solver=cfg.solver)
    bad = []
    for key in ("u", "phi"):
        if not _in_window(rep.rates[key], *RATE_WINDOW):
            bad.append(f"rate[{key}] = {rep.rates[key]:.3f} outside {RATE_WINDOW}")
    if any(b >= a for a, b in zip(rep.cauchy, rep.cauchy[1:])):
        bad.append(f"{rep.aux} Cauchy differences not decreasing: {rep.cauchy}")
    text = rep.to_csv() if cfg.fmt == "csv" else _json(rep.to_dict())
    return text, bad


def run_infsup(cfg: RunConfig):
    betas, kernels = [], []
    for n in cfg.n:
        r = analysis.infsup_constant(*analysis.infsup_pairing(build_structured_cube(n), cfg.pair))
        betas.append(r.beta)
        kernels.append(r.kernel_dim)
    drift = analysis.drift(betas) if min(betas) > 0 else float("inf")
    bad = []
    if min(betas) <= 0 or any(kernels):
        bad.append(f"inf-sup constant not positive: {betas}")
    if drift >= INFSUP_DRIFT:
        bad.append(f"inf-sup drift {drift:.3f} >= {INFSUP_DRIFT}")
    if cfg.fmt == "csv":
        return _csv(["n", "beta", "kernel_dim"], zip(cfg.n, betas, kernels)), bad
    payload = {"schema": analysis.SCHEMA, "study": "infsup", "pair": cfg.pair, "n": list(cfg.n),
               "betas": betas, "kernel_dims": kernels, "drift": drift}
    return _json(payload), bad


def run_decomposition(cfg: RunConfig):
    ratios, energy, residuals = [], [], []
    for n in cfg.n:
        r = analysis.decomposition_stability(build_structured_cube(n), cfg.pair, cfg.samples, cfg.seed)
        ratios.append(r.max_ratio)
        energy.append(float(r.energy_ratios.max()))
        residuals.append(r.max_residual)
    drift = analysis.drift(ratios)
    bad = [] if drift < DECOMP_DRIFT else [f"decomposition drift {drift:.3f} >= {DECOMP_DRIFT}"]
    if cfg.fmt == "csv":
        return _csv(["n", "max_ratio", "max_residual"], zip(cfg.n, ratios, residuals)), bad
    payload = {"schema": analysis.SCHEMA, "study": "decomposition", "which": cfg.pair, "n": list(cfg.n),
               "samples": cfg.samples, "seed": cfg.seed, "max_ratios": ratios, "max_energy_ratios": energy, "max_residuals": residuals,
               "drift": drift}
    return _json(payload), bad


def hypotheses_table(problem: ProblemKind, n_list, coefficient=1.0, quad_degree=DEFAULT_DEGREE) -> dict:
    """Interpolation bounds and kernel coercivity per mesh size."""
    which = "curl" if problem is ProblemKind.BILAPLACIAN else "div"
    spec = manufactured_problem(problem, coefficient, quad_degree)
    cols = {"B_bound": [], "interp_bound": [], "coercivity": [], "kernel_dim": []}
    for n in n_list:
        mesh = build_structured_cube(n)
        ib = analysis.interpolation_bounds(mesh, which)
        kc = analysis.kernel_coercivity(assemble_operator(spec, mesh))
        cols["B_bound"].append(ib["B"])
        cols["interp_bound"].append(ib["interp"])
        cols["coercivity"].append(kc.value)
        cols["kernel_dim"].append(kc.kernel_dim)
    return cols


def run_hypotheses(cfg: RunConfig):
    cols = hypotheses_table(cfg.problem, cfg.n, cfg.coefficient, cfg.quad_degree)
    drifts = {}
    bad = []
    for key in ("B_bound", "interp_bound", "coercivity"):
        vals = cols[key]
        if min(vals) <= 0 or not np.all(np.isfinite(vals)):
            bad.append(f"{key} not positive and finite: {vals}")
            drifts[key] = float("inf")
            continue
        drifts[key] = analysis.drift(vals)
        if drifts[key] >= HYPOTHESES_DRIFT:
            bad.append(f"{key} drift {drifts[key]:.3f} >= {HYPOTHESES_DRIFT}")
    if cfg.fmt == "csv":
        rows = zip(cfg.n, cols["B_bound"], cols["interp_bound"], cols["coercivity"], cols["kernel_dim"])
        return _csv(["n", "B_bound", "interp_bound", "coercivity", "kernel_dim"], rows), bad
    payload = {"schema": analysis.SCHEMA, "study": "hypotheses", "problem": cfg.problem.value, "n": list(cfg.n),
               **cols, "drift": drifts}
    return _json(payload), bad


RUNNERS = {
    "convergence": run_convergence,
    "infsup": run_infsup,
    "decomposition": run_decomposition,
    "hypotheses": run_hypotheses,
}


def _limit_threads():
    raw = os.environ.get("ORDFEM_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"ORDFEM_THREADS: expected an integer, got {raw!r}") from None
    if k < 0:
        raise UsageError("ORDFEM_THREADS: must be >= 0")
    if k == 0:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)


def run(cfg: RunConfig) -> int:
    text, bad = RUNNERS[cfg.study](cfg)
    cfg.violations = bad
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    if cfg.check and bad:
        for b in bad:
            print(f"ordfem: check failed: {b}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        limiter = _limit_threads()
        try:
            return run(cfg)
        finally:
            if limiter is not None:
                limiter.unregister()
    except UsageError as exc:
        print(f"ordfem: usage error: {exc}", file=sys.stderr)
        return 1
    except (OrdfemError, ValueError, OSError) as exc:
        print(f"ordfem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
