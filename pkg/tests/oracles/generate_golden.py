"""Regenerate tests/golden/profile_values.json.

Profile values come from the collocation oracle (collocation_oracle.py)
at tol 1e-10; the witness Rayleigh quotients come from an h-refinement
study of the package itself (values at n_points 2000 and 4000 plus the
Richardson limit), frozen so later regressions are caught.

Run from the repository root:  python tests/oracles/generate_golden.py
"""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np  # noqa: E402

from collocation_oracle import solve_reference  # noqa: E402

from glvortex import (  # noqa: E402
    assemble_Lm,
    default_grid,
    rayleigh_quotient,
    solve_profile,
    tildeW_mode,
)
from glvortex.profiles import ProfileSolveConfig  # noqa: E402

RADII = [1.0, 2.0, 4.0]
CASES = [(1, 0.5), (1, 2.0), (2, 1.0), (2, 0.5)]


def main():
    out = {
        "provenance": {
            "profiles": "scipy.integrate.solve_bvp collocation, tol=1e-10, "
                        "regular-series BCs at r=1e-4, Dirichlet 1 at r=20; "
                        "see tests/oracles/collocation_oracle.py",
            "witness_rq": "package values at n_points 2000/4000 (refine 9) "
                          "with Richardson h^2 limit",
            "radii": RADII,
        },
        "profiles": {},
        "witness_rq": {},
    }
    for n, lam in CASES:
        ref = solve_reference(n, lam)
        f, a = ref(np.array(RADII))
        key = f"n{n}_lam{lam:g}"
        out["profiles"][key] = {
            "n": n, "lambda": lam,
            "f": [float(x) for x in f],
            "a": [float(x) for x in a],
            "oracle_rms_residual": ref.rms_residuals,
            "oracle_nodes": ref.n_nodes,
        }
        print(key, "f:", f, "a:", a, "rms", ref.rms_residuals, flush=True)

    for n, lam, m in [(2, 2.0, 2), (2, 0.5, 2)]:
        vals = {}
        for npts in (2000, 4000):
            grid = default_grid(n_points=npts)
            p = solve_profile(n, lam, grid, ProfileSolveConfig(refine=9))
            rq = rayleigh_quotient(assemble_Lm(p, m), tildeW_mode(p, m).values)
            vals[str(npts)] = float(rq)
        vals["richardson"] = float((4 * vals["4000"] - vals["2000"]) / 3.0)
        out["witness_rq"][f"n{n}_lam{lam:g}_m{m}"] = vals
        print(f"witness n={n} lam={lam} m={m}:", vals, flush=True)

    path = os.path.join(os.path.dirname(__file__), "..", "golden",
                        "profile_values.json")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print("wrote", os.path.normpath(path))


if __name__ == "__main__":
    main()
