import math

import pytest
from hypothesis import given, strategies as st

from durkit.model import (
    Config,
    CostProfile,
    Efficiency,
    breakeven_g,
    model_table,
    s_dur,
    s_dur_limit,
    s_pdur,
    s_pdur_scaleup_limit,
    scalability_efficiency,
)

EQ = CostProfile(1.0, 1.0)


def test_s_dur_identity_at_one():
    assert s_dur(1, EQ) == 1.0


def test_s_dur_read_only_ideal():
    costs = CostProfile(2.0, 0.0)
    for n in (1, 2, 7, 100):
        assert s_dur(n, costs) == pytest.approx(n)


def test_s_dur_direct_value():
    assert s_dur(2, EQ) == pytest.approx(4 / 3)


def test_s_dur_limit_values():
    assert s_dur_limit(EQ) == 2.0
    assert s_dur_limit(CostProfile(3.0, 1.0)) == 4.0
    assert s_dur_limit(CostProfile(1.0, 0.0)) == math.inf


def test_s_dur_approaches_limit():
    costs = CostProfile(5.0, 2.0)
    limit = s_dur_limit(costs)
    assert abs(s_dur(10**6, costs) - limit) / limit < 1e-4


def test_s_pdur_identity_configuration():
    for g in (0.0, 0.3, 1.0):
        assert s_pdur(Config(1, 1, g), EQ) == 1.0


def test_s_pdur_single_partition_limit_is_p_times_ceiling():
    for p in (1, 2, 8):
        got = s_pdur(Config(10**6, p, 0.0), EQ)
        want = p * s_dur_limit(EQ)
        assert abs(got - want) / want < 1e-4


def test_s_pdur_all_cross_limit_is_the_dur_ceiling():
    got = s_pdur(Config(10**6, 8, 1.0), EQ)
    want = s_dur_limit(EQ)
    assert abs(got - want) / want < 1e-4


def test_scaleup_limit_values():
    assert s_pdur_scaleup_limit(1.0) == 1.0
    assert s_pdur_scaleup_limit(0.5) == 2.0
    assert s_pdur_scaleup_limit(0.0) == math.inf


def test_scaleup_limit_numerically():
    got = s_pdur(Config(1, 10**6, 0.1), EQ)
    want = s_pdur_scaleup_limit(0.1)
    assert abs(got - want) / want < 1e-4


def test_breakeven_g_equal_costs_is_exactly_half():
    assert breakeven_g(EQ) == 0.5


def test_breakeven_g_zero_termination():
    assert breakeven_g(CostProfile(1.0, 0.0)) == 0.0


def test_breakeven_is_the_crossing_point():
    # Oracle: the ratio scaleup/scaleout crosses 1 exactly at the breakeven g.
    costs = CostProfile(3.0, 2.0)
    g_star = breakeven_g(costs)
    ratio = s_pdur_scaleup_limit(g_star) / s_dur_limit(costs)
    assert ratio == pytest.approx(1.0)
    assert s_pdur_scaleup_limit(g_star * 0.9) / s_dur_limit(costs) > 1.0
    assert s_pdur_scaleup_limit(min(1.0, g_star * 1.1)) / s_dur_limit(costs) < 1.0


def test_p1_collapse_to_s_dur():
    for n in (1, 2, 5, 33):
        for g in (0.0, 0.4, 1.0):
            assert s_pdur(Config(n, 1, g), EQ) == pytest.approx(s_dur(n, EQ))


@given(
    n=st.integers(1, 64),
    p=st.integers(2, 64),
    ge=st.floats(0.01, 100),
    gt=st.floats(0.01, 100),
    g1=st.floats(0, 1),
    g2=st.floats(0, 1),
)
def test_s_pdur_monotone_nonincreasing_in_g(n, p, ge, gt, g1, g2):
    costs = CostProfile(ge, gt)
    lo, hi = sorted((g1, g2))
    assert s_pdur(Config(n, p, hi), costs) <= s_pdur(Config(n, p, lo), costs) + 1e-12


@given(n=st.integers(1, 1000), ge=st.floats(0.01, 50), gt=st.floats(0.01, 50))
def test_load_balance_identity(n, ge, gt):
    # tau(1)(ge+gt) == tau(n)(ge/n+gt) when tau(n) = tau(1) * s_dur(n)
    costs = CostProfile(ge, gt)
    tau1 = 123.0
    taun = tau1 * s_dur(n, costs)
    assert tau1 * (ge + gt) == pytest.approx(taun * (ge / n + gt))


def test_efficiency_perfect_doubling():
    taus = [(1, 100.0), (2, 200.0), (4, 400.0), (8, 800.0)]
    assert all(e.value == pytest.approx(1.0) for e in scalability_efficiency(taus))


def test_efficiency_flat_throughput():
    taus = [(1, 100.0), (2, 100.0), (4, 100.0)]
    assert all(e.value == pytest.approx(0.5) for e in scalability_efficiency(taus))


def test_efficiency_reports_gaps():
    out = scalability_efficiency([(1, 100.0), (4, 300.0)])
    assert out == [Efficiency(1, 2, None), Efficiency(2, 4, None)]


def test_efficiency_rejects_non_powers():
    with pytest.raises(ValueError):
        scalability_efficiency([(3, 10.0)])


def test_model_vs_simulator_shape():
    # Model-generated throughputs through Eq-style doubling at g=0 give
    # efficiencies computable and equal to s_pdur growth ratios.
    taus = [(p, s_pdur(Config(1, p, 0.0), EQ)) for p in (1, 2, 4, 8)]
    out = scalability_efficiency(taus)
    assert all(e.value == pytest.approx(1.0) for e in out)  # g=0 doubles perfectly


def test_cost_profile_validation():
    with pytest.raises(ValueError):
        CostProfile(0.0, 0.0)
    with pytest.raises(ValueError):
        CostProfile(-1.0, 1.0)
    with pytest.raises(ValueError):
        Config(0, 1, 0.0)
    with pytest.raises(ValueError):
        Config(1, 1, 1.5)


def test_model_table_csv():
    text = model_table([1, 2], [1], [0.0], EQ)
    lines = text.strip().splitlines()
    assert lines[0] == "n,p,g,gamma_e,gamma_t,scaling"
    assert lines[1] == "1,1,0,1,1,1"
    assert lines[2].startswith("2,1,0,1,1,")
