import math
from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest

from cara import analysis as A
from cara.model import (
    ArrivalRates,
    LcqNodeParams,
    LcqSystemParams,
    NodeChannelParams,
    ReceptionProbs2,
    SystemParams,
    TransmitProbs,
    fig1_params,
    fig3_params,
)

from oracles import (
    brute_closure_contains,
    brute_frontier,
    enumerate_dominant_rates,
    grid_argmax_mu2,
    psi_exact,
    sampled_boundary_inside,
)

HALF = TransmitProbs(0.5, 0.5)


# -- psi ---------------------------------------------------------------------


@pytest.mark.parametrize("fixture", ["fig1", "fig2", "fig3_1", "fig3_2"])
def test_psi_matches_exact_enumeration(fixture, request):
    params = request.getfixturevalue(fixture)
    psi = A.compute_psi(params)
    e1, e2 = psi_exact(params)
    assert psi.psi1 == pytest.approx(float(e1), abs=1e-12)
    assert psi.psi2 == pytest.approx(float(e2), abs=1e-12)


def test_psi_figure_values(fig1, fig2):
    assert psi_exact(fig1) == (F("0.552"), F("0.540"))
    assert psi_exact(fig2) == (F("0.393"), F("0.368"))


def test_silent_other_node_means_no_interference(fig1):
    params = replace(fig1, node2=NodeChannelParams(0.7, 1.0, 0.0))
    assert A.compute_psi(params).psi1 == 0.0


# -- dominant system ------------------------------------------------------------


def test_dominant_rates_fig1(fig1):
    mu1, mu2 = A.dominant_service_rates(fig1, HALF, 0.1)
    e1, e2 = enumerate_dominant_rates(fig1, HALF, F("0.1"))
    assert mu1 == pytest.approx(float(e1), abs=1e-12)
    assert mu2 == pytest.approx(float(e2), abs=1e-12)
    assert mu1 == pytest.approx(0.23168, abs=1e-12)
    assert mu2 == pytest.approx(0.28 * (0.9 - 0.054 / 0.46336), abs=1e-12)


@pytest.mark.parametrize("p", [(0.3, 0.9), (1.0, 1.0), (0.7, 0.2)])
@pytest.mark.parametrize("lam", [0.0, 0.05, 0.15])
def test_dominant_rates_against_enumeration(fig2, p, lam):
    tp = TransmitProbs(*p)
    try:
        mu1, mu2 = A.dominant_service_rates(fig2, tp, lam)
    except A.UnstableReferenceQueue:
        e1, _ = enumerate_dominant_rates(fig2, tp, F(0))
        assert lam >= float(e1)
        return
    e1, e2 = enumerate_dominant_rates(fig2, tp, lam)
    assert (mu1, mu2) == pytest.approx((float(e1), float(e2)), abs=1e-12)


def test_node2_silent(fig1):
    mu1, mu2 = A.dominant_service_rates(fig1, TransmitProbs(1.0, 0.0), 0.3)
    assert mu1 == pytest.approx(0.64)
    assert mu2 == 0.0


def test_zero_errors_reduce_to_perfect_csi(fig1):
    perfect = fig1.perfect_csi()
    mu1, mu2 = A.dominant_service_rates(perfect, HALF, 0.1)
    r = fig1.reception
    psi1 = 0.7 * (r.q1_solo - r.q1_with_good)
    psi2 = 0.8 * (r.q2_solo - r.q2_with_good)
    assert mu1 == pytest.approx(0.8 * 0.5 * (1 - psi1 * 0.5))
    assert mu2 == pytest.approx(0.7 * 0.5 * (0.9 - psi2 * 0.1 / (0.8 * (1 - psi1 * 0.5))))


def test_unstable_reference_queue_raises(fig1):
    with pytest.raises(A.UnstableReferenceQueue):
        A.dominant_service_rates(fig1, HALF, 0.24)


def test_empty_probability(fig1):
    assert A.empty_probability(fig1, HALF, 0.1) == pytest.approx(1 - 0.1 / 0.23168)


# -- fixed p ------------------------------------------------------------------


def test_fixed_p_examples(fig1):
    assert A.fixed_p_region_contains(fig1, HALF, ArrivalRates(0.1, 0.21))
    assert not A.fixed_p_region_contains(fig1, HALF, ArrivalRates(0.1, 0.22))
    # 0.24 exceeds mu1 of the node-2-dummy system, so R2 rejects it ...
    assert not A._in_r2(fig1, HALF, 0.24, 0.0, 0.0)
    # ... but with lambda2 = 0 node 2 never contends and node 1 is served at 0.32
    assert A.fixed_p_region_contains(fig1, HALF, ArrivalRates(0.24, 0.0))
    assert not A.fixed_p_region_contains(fig1, HALF, ArrivalRates(0.33, 0.0))


@pytest.mark.parametrize("fixture", ["fig1", "fig2", "fig3_1"])
def test_origin_always_stable(fixture, request):
    params = request.getfixturevalue(fixture)
    for p in (HALF, TransmitProbs(0.01, 1.0), TransmitProbs(1.0, 1.0)):
        assert A.fixed_p_region_contains(params, p, ArrivalRates(0.0, 0.0))


# -- optimiser --------------------------------------------------------------------


def test_optimal_p2_zero_load(fig1):
    assert A.optimal_p2(fig1, 0.0) == A.ClampedOptimum(1.0, A.Regime.AT_ONE)


def test_optimal_p2_lower_range_end(fig1):
    lo, hi = A.interior_range(fig1)
    assert lo == pytest.approx(0.64 * 0.9 * 0.448**2 / 0.540, abs=1e-12)
    assert hi == pytest.approx(0.64 * 0.9 / 0.540, abs=1e-12)
    # the curve part of the frontier stops earlier, where node 1's constraint binds
    assert A.curve_range(fig1) == pytest.approx((lo, 0.384), abs=1e-12)
    assert A.optimal_p2(fig1, lo).p2_star == 1.0
    just_in = A.optimal_p2(fig1, lo + 1e-9)
    assert just_in.regime is A.Regime.INTERIOR
    assert just_in.p2_star == pytest.approx(1.0, abs=1e-6)
    p_grid, _ = grid_argmax_mu2(lambda x: A.mu2_of_p2(fig1, x, lo))
    assert p_grid == pytest.approx(1.0, abs=1e-4)


def test_optimal_p2_interior_example(fig1):
    opt = A.optimal_p2(fig1, 0.3)
    assert opt.regime is A.Regime.INTERIOR
    expected = (1 - math.sqrt(0.540 * 0.3 / (0.64 * 0.9))) / 0.552
    assert opt.p2_star == pytest.approx(expected, abs=1e-12)
    assert opt.p2_star == pytest.approx(0.851, abs=1e-3)
    p_grid, _ = grid_argmax_mu2(lambda x: A.mu2_of_p2(fig1, x, 0.3))
    assert abs(p_grid - opt.p2_star) <= 1e-4


def test_optimal_p2_beyond_range(fig1):
    _, hi = A.interior_range(fig1)
    assert A.optimal_p2(fig1, hi + 1e-3) == A.ClampedOptimum(0.0, A.Regime.AT_ZERO)
    assert A.mu2_of_p2(fig1, 0.2, hi + 1e-3) < 0


def test_convex_region_has_no_curve_range(fig2):
    assert A.curve_range(fig2) is None


@pytest.mark.parametrize("fixture", ["fig1", "fig2", "fig3_1", "fig3_2"])
def test_best_mu2_matches_grid_search(fixture, request):
    params = request.getfixturevalue(fixture)
    a1q1 = params.node1.good_detected * params.reception.q1_solo
    for lam in np.linspace(0.0, a1q1 * 0.99, 7):
        lam = float(lam)
        p2, val = A.best_mu2(params, lam)
        cap = min(1.0, (params.reception.q1_solo - lam / params.node1.good_detected) / A.compute_psi(params).psi1)
        _, grid_val = grid_argmax_mu2(lambda x: A.mu2_of_p2(params, x, lam) if x <= cap else -1.0)
        assert val >= grid_val - 1e-12
        # the optimum often sits on the constraint, between grid points
        assert val - grid_val < 1e-4


# -- closure boundary -----------------------------------------------------------


def test_fig1_boundary(fig1):
    b = A.closure_boundary(fig1)
    assert b.shape is A.RegionShape.NON_CONVEX
    assert b.three_segment
    assert b.px == pytest.approx((0.64, 0.0), abs=1e-12)
    # 0.7 * 0.8 * 0.9; see the acceptance suite for the listed value
    assert b.py == pytest.approx((0.0, 0.504), abs=1e-12)
    assert max(b.continuity_gaps()) < 1e-9
    assert A.shape_sum(fig1) == pytest.approx(1.152, abs=1e-12)


def test_fig2_boundary(fig2):
    b = A.closure_boundary(fig2)
    assert b.shape is A.RegionShape.CONVEX_POLYGON
    assert b.p3 == pytest.approx((0.43704, 0.33516), abs=1e-12)
    assert [v.tag for v in b.vertices()] == ["line"] * 3
    assert A.shape_sum(fig2) == pytest.approx(0.8019, abs=1e-4)


def test_p2_on_line_to_px(fig1):
    b = A.closure_boundary(fig1)
    p3 = (0.64 * (1 - 0.552), 0.56 * (0.9 - 0.540))
    # P2 is collinear with PX and the (outside) P3 point
    cross = (b.p2[0] - b.px[0]) * (p3[1] - b.px[1]) - (b.p2[1] - b.px[1]) * (p3[0] - b.px[0])
    assert abs(cross) < 1e-12


def _triangle_params() -> SystemParams:
    # psi1/q1 + psi2/q2 == 1 with node 2 always interfering fully
    node = NodeChannelParams(1.0, 0.0, 0.0)
    r = ReceptionProbs2(1.0, 0.5, 0.5, 1.0, 0.5, 0.5)
    return SystemParams(node, node, r)


def test_right_triangle_case():
    params = _triangle_params()
    assert A.shape_sum(params) == pytest.approx(1.0, abs=1e-15)
    assert A.classify_shape(params) is A.RegionShape.RIGHT_TRIANGLE
    b = A.closure_boundary(params)
    assert b.p1 == pytest.approx(b.p2, abs=1e-12)
    assert max(b.continuity_gaps()) < 1e-9


def test_closure_membership_examples(fig1, fig2):
    p3 = ArrivalRates(0.43704, 0.33516)
    assert A.closure_region_contains(fig2, p3.scaled(0.99))
    assert not A.closure_region_contains(fig2, p3.scaled(1.01))
    b = A.closure_boundary(fig1)
    x = (b.p1[0] + b.p2[0]) / 2
    y = b.curve_lambda2(x)
    assert A.closure_region_contains(fig1, ArrivalRates(x, y - 1e-6))
    assert not A.closure_region_contains(fig1, ArrivalRates(x, y + 1e-6))
    # the same point is reachable by some p
    p2, mu2 = A.best_mu2(fig1, x)
    assert mu2 > y - 1e-6


@pytest.mark.parametrize("fixture", ["fig1", "fig2"])
def test_frontier_matches_brute_force(fixture, request):
    params = request.getfixturevalue(fixture)
    b = A.closure_boundary(params)
    for x in np.linspace(0.01, b.px[0] * 0.98, 9):
        assert b.frontier(float(x)) == pytest.approx(brute_frontier(params, float(x), n=801), abs=2e-3)


def test_closure_against_grid_union(fig2):
    rng = np.random.default_rng(3)
    b = A.closure_boundary(fig2)
    for _ in range(12):
        x = rng.uniform(0, b.px[0])
        f = b.frontier(x)
        for y in (f * 0.9, f * 1.1 + 1e-3):
            rates = ArrivalRates(float(x), float(y))
            assert A.closure_region_contains(fig2, rates) == brute_closure_contains(fig2, rates, n=61)


# -- aloha --------------------------------------------------------------------


def test_aloha_derived_fig1(fig1):
    d = A.aloha_derived(fig1)
    assert (d.q1_s, d.q1_m, d.delta1) == pytest.approx((0.8, 0.104, 0.696), abs=1e-12)
    assert (d.q2_s, d.q2_m, d.delta2) == pytest.approx((0.63, 0.084, 0.546), abs=1e-12)


def test_aloha_node2_never_good(fig1):
    params = replace(fig1, node2=replace(fig1.node2, pi_good=0.0))
    d = A.aloha_derived(params, check=False)
    assert d.q1_m == pytest.approx(0.8 * 0.2)
    with pytest.raises(A.AlohaAssumptionError):
        A.aloha_derived(params)


def test_aloha_boundary_fig1(fig1):
    b = A.aloha_boundary(fig1)
    assert b.three_segment
    assert 0.696 / 0.8 + 0.546 / 0.63 == pytest.approx(1.7367, abs=1e-4)
    assert A.aloha_region_contains(fig1, ArrivalRates(0.0, 0.0))
    assert not A.aloha_region_contains(fig1, ArrivalRates(0.8, 0.0))
    assert max(b.continuity_gaps()) < 1e-9


def test_aloha_refuses_nonpositive_delta(fig1):
    r = ReceptionProbs2(0.2, 0.2, 0.2, 0.9, 0.2, 0.1)
    params = replace(fig1, reception=r, node2=replace(fig1.node2, pi_good=0.0))
    with pytest.raises(A.AlohaAssumptionError):
        A.aloha_derived(params)


# -- lcq ---------------------------------------------------------------------


def test_lcq_setting1(fig3_1):
    lcq = LcqSystemParams.from_system(fig3_1)
    load, cap = A.lcq_subset_constraint(lcq, (0.3, 0.3), (0, 1))
    assert cap == pytest.approx(0.8964, abs=1e-12)
    assert load == pytest.approx(2 / 3, abs=1e-12)
    assert A.lcq_region_contains(lcq, (0.3, 0.3))
    assert A.lcq_region_contains(lcq, (0.0, 0.0))
    assert not A.lcq_region_contains(lcq, (0.522, 0.297))


def test_lcq_size_cap():
    nodes = [LcqNodeParams(0.5, 0.1, 0.9)] * 21
    with pytest.raises(A.LcqSizeError):
        A.lcq_region_contains(LcqSystemParams(nodes), [0.0] * 21)


def test_lcq_vertices_on_constraints(fig3_1):
    lcq = LcqSystemParams.from_system(fig3_1)
    for v in A.lcq_vertices(fig3_1)[1:3]:
        load, cap = A.lcq_subset_constraint(lcq, (v.lambda1, v.lambda2), (0, 1))
        assert load == pytest.approx(cap, abs=1e-12)


# -- subset test -----------------------------------------------------------------


def _lcq_closed(lcq):
    def inside(x, y):
        for subset in ((0,), (1,), (0, 1)):
            load, cap = A.lcq_subset_constraint(lcq, (x, y), subset)
            if load > cap + 1e-12:
                return False
        return True
    return inside


@pytest.mark.parametrize("setting,value,expected", [(1, 0.6834, False), (2, 1.495, True)])
def test_subset_settings(setting, value, expected):
    params = fig3_params(setting)
    assert A.subset_test_value(params) == pytest.approx(value, abs=1e-3)
    assert A.cara_subset_of_lcq(params) is expected
    inside = _lcq_closed(LcqSystemParams.from_system(params))
    assert sampled_boundary_inside(A.closure_boundary(params), inside) is expected


def test_subset_nonconvex():
    params = fig1_params()
    assert A.cara_subset_of_lcq(params)
    inside = _lcq_closed(LcqSystemParams.from_system(params))
    assert sampled_boundary_inside(A.closure_boundary(params), inside)
