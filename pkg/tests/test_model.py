from dataclasses import replace

import pytest

from cara.model import (
    LcqNodeParams,
    LcqSystemParams,
    NodeChannelParams,
    ParameterError,
    ReceptionProbs2,
    SystemParams,
    validate,
)


def test_fig1_caption_parameters_validate(fig1):
    assert validate(fig1).ok


def test_equal_solo_and_with_bad_is_an_ordering_violation(fig1):
    params = replace(fig1, reception=replace(fig1.reception, q1_solo=0.5, q1_with_bad=0.5))
    report = validate(params)
    assert not report.ok
    assert report.fields() == ["q1_solo,q1_with_bad"]
    assert validate(params, allow_degenerate=True).ok


def test_out_of_range_probability_reported(fig1):
    params = replace(fig1, node1=replace(fig1.node1, pi_good=1.2))
    report = validate(params)
    assert "node1.pi_good" in report.fields()
    with pytest.raises(ParameterError):
        report.raise_if_failed()


def test_degenerate_flag_still_rejects_reversed_order(fig1):
    params = replace(fig1, reception=replace(fig1.reception, q2_with_good=0.3))
    assert not validate(params, allow_degenerate=True).ok


def test_validate_is_pure(fig1):
    bad = replace(fig1, node2=replace(fig1.node2, eps_bad=-0.5))
    assert validate(bad) == validate(bad)


def test_fields_read_back_unchanged():
    n = NodeChannelParams(0.123456789, 0.2, 0.3)
    assert (n.pi_good, n.eps_good, n.eps_bad) == (0.123456789, 0.2, 0.3)
    assert n.pi_bad == 1 - 0.123456789
    assert n.bar_eps_good == 1 - 0.2
    assert n.bar_eps_bad == 1 - 0.3


def test_swapped_is_an_involution(fig1):
    assert fig1.swapped().swapped() == fig1
    s = fig1.swapped()
    assert s.node1 == fig1.node2
    assert s.reception.q1_solo == fig1.reception.q2_solo
    assert s.reception.q2_with_bad == fig1.reception.q1_with_bad


def test_dict_round_trip(fig2):
    assert SystemParams.from_dict(fig2.to_dict()) == fig2


def test_lcq_params_validation():
    good = LcqSystemParams([LcqNodeParams(0.5, 0.1, 0.9)])
    assert validate(good).ok
    assert not validate(LcqSystemParams([])).ok
    assert "nodes[2].q_solo" in validate(
        LcqSystemParams([LcqNodeParams(0.5, 0.1, 0.9), LcqNodeParams(0.5, 0.1, 1.5)])
    ).fields()


def test_lcq_from_system(fig1):
    lcq = LcqSystemParams.from_system(fig1)
    assert lcq.n == 2
    assert lcq.nodes[1] == LcqNodeParams(0.7, 0.2, 0.9)
    assert LcqSystemParams.from_list(lcq.to_list()) == lcq


def test_reception_swap_keeps_values():
    r = ReceptionProbs2(1.0, 0.5, 0.25, 0.8, 0.4, 0.2)
    assert r.swapped().swapped() == r
