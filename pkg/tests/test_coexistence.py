import math

import pytest

from fmqkd.coexistence import (
    ClassicalChannelPlan,
    FilterChain,
    FilterStage,
    load_plan,
    noise_count_rate,
    plan_from_dict,
    spontaneous_emission_floor,
)


def test_default_plan_matches_aggregate_power():
    plan = ClassicalChannelPlan.default_50()
    assert len(plan.channels) == 50
    assert plan.total_power_dbm() == pytest.approx(10.1, abs=1e-9)
    wavelengths = [w for w, _ in plan.channels]
    assert wavelengths[0] == pytest.approx(1307.2)
    assert wavelengths[-1] == pytest.approx(1618.7)


def test_empty_plan_contributes_nothing():
    plan = ClassicalChannelPlan(())
    rate = noise_count_rate(plan, [1.0], FilterChain.default(), 0.38)
    assert rate == 0.0


def test_noise_rate_linear_in_channel_power():
    chain = FilterChain.default()
    plan = ClassicalChannelPlan.default_50()
    base = noise_count_rate(plan, [1.0], chain, 0.38)
    double = noise_count_rate(plan.scaled(2.0), [1.0], chain, 0.38)
    assert double == pytest.approx(2.0 * base, rel=1e-12)
    assert base > 0.0


def test_noise_rate_linear_in_shared_length():
    chain = FilterChain.default()
    plan = ClassicalChannelPlan.default_50()
    one = noise_count_rate(plan, [1.0], chain, 0.38)
    two = noise_count_rate(plan, [1.0, 1.0], chain, 0.38)
    # leakage is length independent, scattering doubles
    assert one < two < 2 * one + 1e-9


def test_removing_a_filter_stage_never_decreases_noise():
    plan = ClassicalChannelPlan.default_50()
    chain = FilterChain.default()
    full = noise_count_rate(plan, [1.0], chain, 0.38)
    for stage in chain.stages:
        reduced = chain.without(stage.name)
        assert noise_count_rate(plan, [1.0], reduced, 0.38) >= full - 1e-12


def test_emission_floor_below_one_percent_of_dark_rate():
    floor = spontaneous_emission_floor(FilterChain.default())
    assert floor <= 3.5


def test_emission_floor_larger_without_bandpass():
    chain = FilterChain.default()
    assert spontaneous_emission_floor(chain.without("bob-bpf")) > \
        spontaneous_emission_floor(chain)


def test_emission_floor_vanishes_with_infinite_rejection():
    stages = tuple(
        FilterStage(s.name, s.center_nm, s.fwhm_nm, s.in_band_loss_db, 1e6,
                    site=s.site, in_receiver=s.in_receiver)
        for s in FilterChain.default().stages)
    assert spontaneous_emission_floor(FilterChain(stages)) == pytest.approx(0.0, abs=1e-30)


def test_addon_loss_excludes_receiver_internal_stages():
    chain = FilterChain.default()
    total = sum(s.in_band_loss_db for s in chain.stages)
    internal = sum(s.in_band_loss_db for s in chain.stages if s.in_receiver)
    assert chain.addon_in_band_loss_db() == pytest.approx(total - internal)


def test_signal_loss_charged_exactly_once():
    # end-to-end power audit: enabling the overlay scales the mean photon
    # numbers by exactly the add-on in-band loss, once
    import numpy as np
    from fmqkd.link import channel_projection_tables
    from fmqkd.odn import scenario_preset
    from fmqkd.runner import DEFAULT_CONFIG, channel_operator, split_seeds

    topo, _ = scenario_preset("3")
    elem, _, _ = split_seeds(0, 1)
    cfg = DEFAULT_CONFIG
    op_off = channel_operator(topo, 848.0, 0.0, False, elem, cfg)
    op_on = channel_operator(topo, 848.0, 0.0, True, elem, cfg)
    m_off = channel_projection_tables(op_off, cfg.enc, cfg.det)[0]
    m_on = channel_projection_tables(op_on, cfg.enc, cfg.det)[0]
    factor = 10 ** (-cfg.chain.addon_in_band_loss_db() / 10.0)
    assert np.allclose(m_on, factor * m_off, rtol=1e-9)


def test_plan_yaml_round_trip(tmp_path):
    plan = ClassicalChannelPlan.default_50()
    path = tmp_path / "plan.yaml"
    import yaml
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"channels": [{"wavelength_nm": w, "power_dbm": p}
                                     for w, p in plan.channels]}, fh)
    loaded = load_plan(path)
    assert loaded.channels == plan.channels
    assert plan_from_dict({"channels": []}).channels == ()
