import numpy as np
import pytest

from glvortex import default_grid
from glvortex.profiles import ProfileSolveConfig
from glvortex.verdict import choose_m_max, classify, sweep, sweep_to_csv

CFG = ProfileSolveConfig(refine=9)


def _grid(npts=1200):
    return default_grid(n_points=npts)


def test_choose_m_max():
    assert choose_m_max(1, 0.5) == 4
    assert choose_m_max(3, 2.0) == 6


def test_classify_expected_stability_pattern():
    g = _grid()
    assert classify(1, 0.5, g, CFG).classification == "stable"
    assert classify(1, 2.0, g, CFG).classification == "stable"
    assert classify(2, 0.5, g, CFG).classification == "stable"
    rep = classify(2, 2.0, g, CFG)
    assert rep.classification == "unstable"
    assert any(m == 2 and rq < 0 for m, rq in rep.witnesses)


def test_classify_marginal_at_critical():
    rep = classify(2, 1.0, _grid(), CFG)
    assert rep.classification == "marginal"
    # extra critical-coupling kernel: one numerical zero in each of m=1,2;
    # counting both signs of m gives 2n zero modes
    zeros = {b.m: b.n_zero_eigenvalues for b in rep.per_block}
    assert zeros[1] == 1 and zeros[2] == 1
    assert 2 * sum(zeros[m] for m in range(1, rep.n + 1)) == 2 * rep.n


def test_classify_n1_stable_at_critical():
    # the fundamental vortex is stable at every coupling including lam = 1
    rep = classify(1, 1.0, _grid(), CFG)
    assert rep.classification == "stable"


def test_m0_split_consistency():
    from glvortex.operators import assemble_Lm, assemble_M0_N0
    from glvortex.spectra import block_bottom
    from glvortex import solve_profile

    g = _grid()
    p = solve_profile(2, 0.5, g, CFG)
    mu_L0 = block_bottom(assemble_Lm(p, 0), k=1).mu1
    M0, N0 = assemble_M0_N0(p)
    mu_split = min(block_bottom(M0, k=1).mu1, block_bottom(N0, k=1).mu1)
    assert mu_L0 == pytest.approx(mu_split, abs=1e-8)


def test_n1_minimum_never_in_high_blocks():
    rep = classify(1, 0.7, _grid(), CFG)
    assert rep.worst_m <= 1
    raw = {b.m: b.mu1_raw for b in rep.per_block}
    assert all(raw[m] > raw[1] for m in range(2, rep.m_max + 1))


def test_report_fields_and_tail():
    rep = classify(2, 2.0, _grid(), CFG)
    d = rep.to_json_dict()
    assert d["essential_edge"] == 1.0
    assert d["classification"] == "unstable"
    assert len(d["per_block"]) == rep.m_max + 1
    assert rep.tail_monotone
    assert rep.per_block[1].zero_mode_residual <= 1e-3


def test_sweep_shapes_and_errors():
    res = sweep([1, 2], [0.5, 1.5], n_points=1200, refine=9)
    assert len(res) == 4
    verdicts = {(n, lam): rep.classification for n, lam, rep, err in res}
    assert verdicts[(1, 0.5)] == "stable"
    assert verdicts[(1, 1.5)] == "stable"
    assert verdicts[(2, 0.5)] == "stable"
    assert verdicts[(2, 1.5)] == "unstable"
    csv = sweep_to_csv(res)
    assert csv.splitlines()[0] == "n,lambda,gap,classification,worst_m,witness_RQ"
    assert len(csv.strip().splitlines()) == 5
    with pytest.raises(ValueError):
        sweep([], [1.0])
    # duplicates collapse
    res2 = sweep([1, 1], [0.5, 0.5], n_points=1200, refine=9)
    assert len(res2) == 1


def test_classify_rejects_bad_input():
    with pytest.raises(ValueError):
        classify(0, 1.0)
    with pytest.raises(ValueError):
        classify(1, -1.0)


def test_classification_invariant_consistency():
    # the reported verdict is recomputable from the per-block data
    for (n, lam) in [(1, 0.5), (2, 2.0), (2, 1.0)]:
        rep = classify(n, lam, _grid(), CFG)
        zt = rep.zero_thresholdv
        witness_neg = any(rq < -zt for _, rq in rep.witnesses)
        if any(b.mu1_deflated < -zt for b in rep.per_block) or witness_neg:
            expect = "unstable"
        elif all(b.mu1_deflated_lower >= zt for b in rep.per_block):
            expect = "stable"
        else:
            expect = "marginal"
        assert rep.classification == expect
        assert rep.gap == min(b.mu1_deflated for b in rep.per_block)


def test_classify_extreme_couplings():
    # the advertised working range extends to lambda in [0.3, 3]
    g = _grid(1000)
    assert classify(1, 0.3, g, CFG).classification == "stable"
    assert classify(1, 3.0, g, CFG).classification == "stable"
    assert classify(2, 0.3, g, CFG).classification == "stable"
    assert classify(2, 3.0, g, CFG).classification == "unstable"
