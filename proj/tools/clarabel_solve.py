#!/usr/bin/env python3
"""Solve a cone program with Clarabel.

usage: clarabel_solve.py IN.json OUT.json

IN holds c, c0, the equality block (A, b), the cone block (G, h) as sparse
triplets, num_nonneg, soc_dims and solver settings. OUT receives status,
x, s, y, z, iterations and residual information. Duals use the convention
A'y + G'z + c = 0.
"""
import json
import sys
import time

import numpy as np
import scipy.sparse as sp
import clarabel


def sparse(block, rows, cols):
    if not block:
        return sp.csc_matrix((rows, cols))
    r, c, v = zip(*block)
    return sp.csc_matrix((v, (r, c)), shape=(rows, cols))


def main(argv):
    with open(argv[1]) as f:
        prob = json.load(f)
    n = prob["n"]
    neq = len(prob["b"])
    ncone = len(prob["h"])
    A = sparse(prob["A"], neq, n)
    G = sparse(prob["G"], ncone, n)
    K = sp.vstack([A, G]).tocsc()
    rhs = np.concatenate([np.asarray(prob["b"], float), np.asarray(prob["h"], float)])
    cones = []
    if neq:
        cones.append(clarabel.ZeroConeT(neq))
    if prob["num_nonneg"]:
        cones.append(clarabel.NonnegativeConeT(prob["num_nonneg"]))
    for d in prob["soc_dims"]:
        cones.append(clarabel.SecondOrderConeT(d))

    settings = clarabel.DefaultSettings()
    settings.verbose = bool(prob.get("verbose", False))
    settings.max_iter = int(prob["max_iter"])
    settings.tol_feas = float(prob["tol_feas"])
    settings.tol_gap_abs = float(prob["tol_gap"])
    settings.tol_gap_rel = float(prob["tol_gap"])

    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), np.asarray(prob["c"], float), K, rhs,
                                    cones, settings)
    sol = solver.solve()
    elapsed = time.perf_counter() - t0

    status = str(sol.status)
    mapping = {
        "Solved": "optimal",
        "AlmostSolved": "optimal",
        "PrimalInfeasible": "infeasible",
        "AlmostPrimalInfeasible": "infeasible",
        "DualInfeasible": "unbounded",
        "AlmostDualInfeasible": "unbounded",
        "MaxIterations": "max_iter",
        "MaxTime": "max_iter",
    }
    z = list(sol.z)
    s = list(sol.s)
    out = {
        "status": mapping.get(status, "numeric_failure"),
        "raw_status": status,
        "x": list(sol.x),
        "y": z[:neq],
        "z": z[neq:],
        "s": s[neq:],
        "iterations": int(sol.iterations),
        "time_s": elapsed,
        "pres": float(sol.r_prim),
        "dres": float(sol.r_dual),
    }
    with open(argv[2], "w") as f:
        json.dump(out, f)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
