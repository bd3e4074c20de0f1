"""Errors and local rates on meshes finer than the acceptance set.

    python scripts/asymptotic_rates.py bilaplacian --n 3,6,12

Non-nested n lists are fine here; the auxiliary Cauchy column is only filled
where consecutive meshes are nested.
"""
import argparse
import time

import numpy as np

from ordfem.analysis import _NAMES, difference_norm, error_norm, solve_problem
from ordfem.manufactured import manufactured_problem
from ordfem.mesh import build_structured_cube


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("problem", choices=["bilaplacian", "quadcurl"])
    ap.add_argument("--n", default="2,3,4,6,8")
    ap.add_argument("--coefficient", default="1")
    args = ap.parse_args()
    coef = args.coefficient if args.coefficient == "smooth" else float(args.coefficient)
    spec = manufactured_problem(args.problem, coef)
    aux, norm_u, norm_phi, norm_aux = _NAMES[spec.kind]
    ex = spec.exact.fields
    prev = None
    print(f"{'n':>3} {'err_u':>12} {'rate':>6} {'err_phi':>12} {'rate':>6} {'d_' + aux:>12} {'secs':>6}")
    for n in (int(t) for t in args.n.split(",")):
        t0 = time.perf_counter()
        mesh = build_structured_cube(n)
        system, _, rep = solve_problem(spec, mesh)
        R, S, Y = system.spaces
        u, phi, z = system.split(rep.x)
        eu = error_norm(mesh, R, u, ex["u"], norm_u)
        ep = error_norm(mesh, S, phi, ex["phi"], norm_phi)
        cur = (n, eu, ep, Y, z)
        ru = rp = dz = float("nan")
        if prev is not None:
            k = np.log(n / prev[0])
            ru, rp = np.log(prev[1] / eu) / k, np.log(prev[2] / ep) / k
            if n % prev[0] == 0:
                dz = difference_norm(prev[3], prev[4], Y, z, norm_aux)
        print(f"{n:>3} {eu:12.5e} {ru:6.3f} {ep:12.5e} {rp:6.3f} {dz:12.5e} {time.perf_counter() - t0:6.1f}")
        prev = cur


if __name__ == "__main__":
    main()
