"""Assemble one block system and write it in MatrixMarket format.

    python scripts/export_system.py quadcurl 3 out.mtx
"""
import sys

import numpy as np

from ordfem.assembly import assemble_load, assemble_operator, export_matrix_market
from ordfem.manufactured import manufactured_problem
from ordfem.mesh import build_structured_cube

if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    kind, n, path = sys.argv[1], int(sys.argv[2]), sys.argv[3]
    spec = manufactured_problem(kind)
    mesh = build_structured_cube(n)
    system = assemble_operator(spec, mesh)
    export_matrix_market(system.matrix, path)
    np.savetxt(path + ".rhs", assemble_load(spec, mesh, system), fmt="%.17g")
    print(f"{kind} n={n}: blocks {system.dims}, nnz {system.matrix.nnz} -> {path}")
