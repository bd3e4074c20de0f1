"""Inf-sup, decomposition, interpolation-bound and kernel-coercivity constants over a range of meshes.

    python scripts/stability_tables.py --n 2,3,4
"""
import argparse

from ordfem.analysis import decomposition_stability, drift, infsup_constant, infsup_pairing
from ordfem.assembly import ProblemKind
from ordfem.cli import hypotheses_table
from ordfem.mesh import build_structured_cube


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", default="2,3,4")
    ap.add_argument("--samples", type=int, default=100)
    args = ap.parse_args()
    ns = [int(t) for t in args.n.split(",")]
    meshes = {n: build_structured_cube(n) for n in ns}

    for pair in ("curl", "div"):
        betas = [infsup_constant(*infsup_pairing(meshes[n], pair)).beta for n in ns]
        ratios = [decomposition_stability(meshes[n], pair, args.samples).max_ratio for n in ns]
        print(f"{pair:5s} beta   " + " ".join(f"{b:.4f}" for b in betas) + f"   drift {drift(betas):.3f}")
        print(f"{pair:5s} decomp " + " ".join(f"{r:.4f}" for r in ratios) + f"   drift {drift(ratios):.3f}")
    for kind in ProblemKind:
        t = hypotheses_table(kind, ns)
        for key in ("B_bound", "interp_bound", "coercivity"):
            v = t[key]
            print(f"{kind.value:11s} {key:12s} " + " ".join(f"{x:.4f}" for x in v) + f"   drift {drift(v):.3f}")


if __name__ == "__main__":
    main()
