"""Invariant suite behind the `check` CLI command.

Each check returns (name, value, threshold, passed); `run_all` executes
the full list on a shared grid.  These are the identities the theory
guarantees exactly in the continuum; the thresholds are the calibrated
discretization levels of the default scheme.
"""

from __future__ import annotations

import numpy as np

from .grid import default_grid
from .operators import (
    appendix_Z0_check,
    assemble_hatLm,
    assemble_Lm,
    assemble_tildeFm_and_Mm,
    chi_mode,
    keysplit_residual,
    rotate_block,
    translation_mode,
    translation_tail,
)
from .profiles import (
    ProfileSolveConfig,
    lambda_derivative_check,
    profile_inequality_margin,
    solve_profile,
    verify_properties,
)


def run_all(r_max: float = 20.0, n_points: int = 2000, refine: int = 9,
            seed: int = 0) -> list[tuple]:
    grid = default_grid(r_max=r_max, n_points=n_points)
    cfg = ProfileSolveConfig(refine=refine)
    results = []

    p11 = solve_profile(1, 1.0, grid, cfg)
    p205 = solve_profile(2, 0.5, grid, cfg)
    p22 = solve_profile(2, 2.0, grid, cfg)

    # profile properties (vortex-existence bounds, monotonicity, slopes)
    for p, tag in ((p11, "n1_lam1"), (p205, "n2_lam0.5")):
        props = verify_properties(p)
        ok = all(v for k, v in props.items() if not k.endswith("_value"))
        results.append((f"profile_properties_{tag}", float(ok), 1.0, ok))

    # profile inequality: sign of e = f' - b f flips across lam = 1
    r = grid.nodes[1:-1]
    win = (r >= 0.1) & (r <= 15.0)
    e0 = profile_inequality_margin(p11)
    results.append(("margin_zero_at_critical", float(np.max(np.abs(e0[win]))),
                    1e-4, bool(np.max(np.abs(e0[win])) <= 1e-4)))
    e1 = profile_inequality_margin(p205)
    results.append(("margin_positive_below", float(np.min(e1[win])), 0.0,
                    bool(np.all(e1[win] > 0))))
    e2 = profile_inequality_margin(p22)
    results.append(("margin_negative_above", float(np.max(e2[win])), 0.0,
                    bool(np.all(e2[win] < 0))))

    # translational zero mode
    L1 = assemble_Lm(p11, 1)
    T = translation_mode(p11)
    res = (L1.matrix.weighted_norm(
        L1.matrix.apply(T.values, right_boundary=translation_tail(p11)))
        / L1.matrix.weighted_norm(T.values))
    results.append(("translation_zero_mode", float(res), 1e-3, bool(res <= 1e-3)))

    # rotation identity between the two bases
    hat = assemble_hatLm(p205, 1)
    Lrot = rotate_block(hat)
    Ldir = assemble_Lm(p205, 1)
    diff = abs(Lrot.matrix.mat - Ldir.matrix.mat).max()
    scale = max(1.0, abs(Ldir.matrix.mat).max())
    results.append(("rotation_identity", float(diff / scale), 1e-12,
                    bool(diff / scale <= 1e-12)))

    # keysplit: L_m = F~* F~ + J M_m on smooth test vectors
    ks = keysplit_residual(p205, 2, trials=6, seed=seed)
    results.append(("keysplit_residual", float(ks), 1e-3, bool(ks <= 1e-3)))

    # chi_1 identity at critical coupling
    p21 = solve_profile(2, 1.0, grid, cfg)
    chi1 = chi_mode(p21, 1)
    rf = grid.active_nodes
    ref = (1.0 - p21.a[:grid.n_active]) / rf
    m01 = (rf >= 0.1) & (rf <= 10.0)
    rel = float(np.max(np.abs(chi1.values - ref)[m01] / ref[m01]))
    results.append(("chi1_identity_critical", rel, 1e-3, bool(rel <= 1e-3)))

    # M_1 f' = 0
    _, M1 = assemble_tildeFm_and_Mm(p205, 1)
    mact = grid.n_active
    fp = p205.f_prime[:mact]
    y = M1.matrix.apply(fp, right_boundary=[p205.f_prime[-1]])
    resm = M1.matrix.weighted_norm(y) / M1.matrix.weighted_norm(fp)
    results.append(("M1_annihilates_fprime", float(resm), 1e-3, bool(resm <= 1e-3)))

    # appendix pointwise positivity at lam = 2 n^2
    z = appendix_Z0_check(solve_profile(1, 2.0, grid, cfg))
    results.append(("appendix_det_positive", z["det_min"], 0.0, z["det_positive"]))
    results.append(("appendix_lf_residual", z["lf_residual"], 1e-3,
                    bool(z["lf_residual"] <= 1e-3)))

    # coupling-derivative identity M0 xi = eta
    dres = lambda_derivative_check(1, 1.0, grid, dlam=1e-3, cfg=cfg)
    results.append(("lambda_derivative_identity", float(dres), 5e-2,
                    bool(dres <= 5e-2)))

    return results
