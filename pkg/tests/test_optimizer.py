import numpy as np
import pytest

from fdcf import conic_adapter as ca
from fdcf.channel import FadingParams, assemble_channels, dbm_to_watt, generate_topology
from fdcf.metrics import LN2, PowerModelParams
from fdcf.optimizer import (InfeasibleProblem, OptimizerConfig,
                            SubproblemData, build_strategy, build_subproblem,
                            find_initial_point, h_fr_bound, h_qu_bound, recover_alpha,
                            signal_power_ratio, signal_power_ratios, solve_se_ee, update_mu)


def test_h_fr_hand_values():
    assert h_fr_bound(2.0, 4.0, 2.0, 4.0) == pytest.approx(1.0)   # tight: 4 / 4
    # 2 * (2 / 1) * 1 - (2 / 1)^2 * 1 = 0, away from the tight point
    assert h_fr_bound(1.0, 1.0, 2.0, 1.0) == pytest.approx(0.0)
    assert h_fr_bound(3.0, 1.0, 2.0, 1.0) == pytest.approx(8.0) and 8.0 <= 9.0
    assert h_qu_bound(3.0, 2.0) == pytest.approx(8.0) and 8.0 <= 9.0
    with pytest.raises(ValueError):
        h_fr_bound(1.0, 1.0, 1.0, 0.0)


def test_bounds_never_exceed_true_functions():
    rng = np.random.default_rng(0)
    n = 100_000
    x, y, x0, y0 = (rng.uniform(1e-3, 10, n) for _ in range(4))
    assert np.all(h_fr_bound(x, y, x0, y0) <= x ** 2 / y + 1e-12 * (1 + x ** 2 / y))
    np.testing.assert_allclose(h_fr_bound(x0, y0, x0, y0), x0 ** 2 / y0, rtol=1e-12)
    z, z0 = rng.uniform(-10, 10, n), rng.uniform(-10, 10, n)
    assert np.all(h_qu_bound(z, z0) <= z ** 2 + 1e-12 * (1 + z ** 2))
    np.testing.assert_allclose(h_qu_bound(z0, z0), z0 ** 2, rtol=1e-12)


def test_signal_power_ratio():
    h = np.array([1.0, 1.0j])
    w = np.array([1.0, -1.0j])
    # h^T w = 1 + 1 = 2; block 0 contributes 1 -> 1 / 4
    assert signal_power_ratio(w[:1], h[:1], w, h, 0.0) == pytest.approx(0.25)
    assert signal_power_ratio(w[:1], h[:1], w, h, 4.0) == pytest.approx(0.125)


@pytest.fixture(scope="module")
def small():
    top = generate_topology(1, 8, 3, 3, 1.0, 2)
    return assemble_channels(top, FadingParams(), 1)


def test_ratios_match_scalar_form(small):
    ch = small
    basis, _ = build_strategy(ch, "ONB_ZF")
    W = basis.weights_to_precoder(np.array([1e-3, 2e-3, 5e-4]))
    R = signal_power_ratios(W, ch, 1e-20)
    for k in range(3):
        for m, s in enumerate(ch.ap_slices()):
            assert R[k, m] == pytest.approx(
                signal_power_ratio(W[s, k], ch.H_d[k, s], W[:, k], ch.H_d[k], 1e-20), rel=1e-10)


def test_recover_alpha_threshold(small):
    ch = small
    W = np.zeros((ch.n_antennas, 3), dtype=complex)
    assert not recover_alpha(W, ch, 0.01, 1e-20).any()
    basis, recv = build_strategy(ch, "ZF")
    W = basis.weights_to_precoder(np.full(3, 1e-3))
    R = signal_power_ratios(W, ch, 0.0)
    # the threshold itself maps to zero
    varpi = float(R[0, 0])
    assert recover_alpha(W, ch, varpi)[0, 0] == 0
    assert update_mu(np.zeros_like(W), np.zeros(3), recv, ch, 0.01, 1e-20, 1e-20).sum() == 0


def _data(ch, strategy="ONB_ZF", rate=0.5 * LN2, p_ap=None):
    basis, recv = build_strategy(ch, strategy)
    M, K, L = ch.n_aps, ch.n_dl, ch.n_ul
    p_ap = np.full(M, dbm_to_watt(43) / M if p_ap is None else p_ap)
    return SubproblemData(ch, basis, recv, PowerModelParams(), p_ap, np.full(L, dbm_to_watt(23)),
                          np.full(K, np.expm1(rate)), np.full(L, np.expm1(rate)), np.ones(M),
                          None, 1e-20)


def test_initial_point_trivial_and_infeasible(small):
    cfg = OptimizerConfig()
    it, trace = find_initial_point(_data(small, rate=0.0), cfg)
    assert trace == [0.0]
    # above the interference-free cap
    with pytest.raises(InfeasibleProblem, match="cap"):
        find_initial_point(_data(small, rate=100 * LN2), cfg)
    # below the cap, but the interference makes it unreachable (checked by a max-min search)
    hard = assemble_channels(generate_topology(0, 8, 3, 3, 1.0, 2), FadingParams(), 0)
    with pytest.raises(InfeasibleProblem, match="stalled"):
        find_initial_point(_data(hard), cfg)


def test_se_subproblem_equals_ee_subproblem_at_zero_t(small):
    d = _data(small)
    it, _ = find_initial_point(d, OptimizerConfig())
    d.p_ref = d.power_value(*(it.omega / d.s_omega, it.p / d.s_p),
                            np.r_[it.lambda_d, it.lambda_u], it.omega / d.s_omega,
                            np.r_[it.lambda_d, it.lambda_u])
    a = ca.solve(build_subproblem(it, 0.0, 1, d)[0]).raise_for_status()
    b = ca.solve(build_subproblem(it, 0.0, 0, d)[0]).raise_for_status()
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_single_link_uses_full_budget():
    top = generate_topology(2, 1, 1, 1, 0.5, 2)
    ch = assemble_channels(top, FadingParams(), 2).without_duplex_interference()
    cfg = OptimizerConfig(eta=1, p_ap_max=1.0, rate_dl=0.0, rate_ul=0.0)
    res = solve_se_ee(ch, "ZF", cfg)
    assert res.status == "optimal"
    assert np.sum(np.abs(res.W) ** 2) == pytest.approx(1.0, rel=1e-5)
    assert res.p[0] == pytest.approx(cfg.p_ue_max, rel=1e-5)


def test_all_aps_asleep(small):
    cfg = OptimizerConfig(fixed_mu=(0,) * 8)
    res = solve_se_ee(small, "IZF", cfg)
    assert res.se == 0.0 and res.ee == 0.0
    # idle floor: sleeping APs, AP circuits and UE circuits
    assert res.p_total == pytest.approx(8 * 2.0 + 8 * 1.0 + 3 * 0.1 + 3 * 0.1)
    assert not res.binary.alpha.any()


def test_ee_solve_monotone_and_consistent(small):
    cfg = OptimizerConfig(eta=0, p_ap_max=float(dbm_to_watt(43)) / 8)
    res = solve_se_ee(small, "IZF", cfg)
    assert res.status == "optimal" and res.converged
    tr = np.asarray(res.trace["phase1"])
    assert np.all(np.diff(tr) >= -1e-6 * np.maximum(1, np.abs(tr[:-1])))
    t = tr[-1]
    assert abs(res.dinkelbach_gap["phase1"][-1]) <= 1e-5 * max(1.0, t)
    # recovered binaries agree with the ratio rule
    R = signal_power_ratios(res.W, small, res.epsilon)
    np.testing.assert_array_equal(res.binary.alpha, (R > res.varpi).astype(int))
    assert not np.any(res.binary.alpha[:, res.binary.mu == 0])
    assert np.all(res.sinr_dl >= np.expm1(cfg.rate_dl) * (1 - 1e-4))
    assert np.all(res.sinr_ul >= np.expm1(cfg.rate_ul) * (1 - 1e-4))


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(eta=2)
    with pytest.raises(ValueError):
        OptimizerConfig(varpi=1.5)
    with pytest.raises(ValueError):
        build_strategy(None, "nope")


@pytest.mark.slow
def test_coarser_threshold_loses_more(small):
    base = OptimizerConfig(eta=1, p_ap_max=float(dbm_to_watt(43)) / 8, ap_selection=True)
    fine = solve_se_ee(small, "IZF", OptimizerConfig(**{**base.__dict__, "varpi": 1e-3 / 8}))
    coarse = solve_se_ee(small, "IZF", OptimizerConfig(**{**base.__dict__, "varpi": 1e-2 / 8}))
    assert fine.status == coarse.status == "optimal"
    assert coarse.binary.alpha.sum() <= fine.binary.alpha.sum()
