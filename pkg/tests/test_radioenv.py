import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steersim.errors import CalibrationError, ConfigError, InvariantError, ParseError
from steersim.radioenv import (
    EnvConfig,
    RadioEnvironment,
    Trajectory,
    calibrate_environment,
    calibrate_threshold,
    gen_radio_samples,
    gen_trajectories,
    read_samples,
    read_trajectories,
    serving_cells,
    write_samples,
    write_trajectories,
)

ONE_SITE = dict(primary_cells=((500.0, 500.0),), secondary_cells=((500.0, 500.0),))


def test_rsrp_at_reference_distance_without_shadowing():
    cfg = EnvConfig()
    env = RadioEnvironment(cfg)
    prim, sec = env.rsrp(np.array([[501.0, 500.0]]), shadowing=False)
    assert prim[0, 0] == pytest.approx(cfg.tx_power_primary_dBm - cfg.pl0_primary_dB)
    assert sec[0] == pytest.approx(cfg.tx_power_secondary_dBm - cfg.pl0_secondary_dB)


def test_path_loss_formula_at_distance():
    cfg = EnvConfig()
    prim, sec = RadioEnvironment(cfg).rsrp(np.array([[600.0, 500.0]]), shadowing=False)
    assert prim[0, 0] == pytest.approx(46.0 - 43.3 - 30.0 * math.log10(100.0))
    assert sec[0] == pytest.approx(40.0 - 61.4 - 34.0 * math.log10(100.0))


def test_path_loss_strictly_decreasing_with_distance():
    env = RadioEnvironment(EnvConfig(**ONE_SITE))
    xy = np.column_stack([500.0 + np.linspace(2.0, 480.0, 200), np.full(200, 500.0)])
    prim, sec = env.rsrp(xy, shadowing=False)
    assert np.all(np.diff(prim[:, 0]) < 0)
    assert np.all(np.diff(sec) < 0)


def test_full_correlation_gives_rank_identical_carriers():
    cfg = EnvConfig(**ONE_SITE, shadow_correlation=1.0, pathloss_exponent_secondary=3.0,
                    pl0_secondary_dB=43.3, tx_power_secondary_dBm=46.0, coverage_threshold_dBm=-100.0)
    samples = gen_radio_samples(cfg, 500)
    p = np.array([s.primary_rsrp[0] for s in samples])
    s = np.array([s.secondary_rsrp for s in samples])
    np.testing.assert_allclose(p, s, atol=1e-9)
    assert np.array_equal(np.argsort(p), np.argsort(s))


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.8])
def test_shadow_correlation_matches_config(rho):
    cfg = EnvConfig(shadow_correlation=rho, seed=2)
    env = RadioEnvironment(cfg)
    xy = np.random.default_rng(0).uniform(0, 1000, (10_000, 2))
    sp, ss = env.shadow_terms(xy)
    r = np.corrcoef(sp[:, env.anchor[0]], ss[:, 0])[0, 1]
    assert abs(r - rho) <= 0.05
    assert ss[:, 0].std() == pytest.approx(1.0, abs=0.1)


def test_anchor_is_nearest_primary():
    env = RadioEnvironment(EnvConfig())
    assert env.anchor.tolist() == [0]


def test_calibrate_threshold_picks_one_of_four():
    t = calibrate_threshold([-100, -90, -80, -70], 0.25)
    assert -80 < t < -70


def test_calibrate_threshold_median_on_symmetric_data():
    data = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]
    assert calibrate_threshold(data, 0.5) == pytest.approx(0.0)


def test_calibrate_threshold_gaussian_fraction():
    x = np.random.default_rng(1).standard_normal(10_000) * 8 - 90
    t = calibrate_threshold(x, 0.22)
    assert abs(np.mean(x >= t) - 0.22) <= 0.005


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-150, -40, allow_nan=False), min_size=2, max_size=300, unique=True),
    st.floats(0.01, 0.99),
)
def test_calibration_within_one_over_n(values, target):
    t = calibrate_threshold(values, target)
    frac = np.mean(np.asarray(values) >= t)
    n = len(values)
    assert abs(frac - target) <= max(1.0 / n, abs(round(target * n) - target * n) / n + 1.0 / n)
    k = min(max(round(target * n), 1), n - 1)
    assert np.sum(np.asarray(values) >= t) == k


def test_calibration_errors():
    with pytest.raises(ValueError):
        calibrate_threshold([], 0.2)
    with pytest.raises(CalibrationError):
        calibrate_threshold([-90.0] * 10, 0.2)
    with pytest.raises(CalibrationError):
        # Every device inside the reference distance: constant secondary RSRP.
        gen_radio_samples(EnvConfig(shadow_sigma_dB=0, area_size=0.5, primary_cells=((0.25, 0.25),),
                                    secondary_cells=((0.25, 0.25),)), 10)


def test_self_calibrated_coverage_is_exact():
    samples = gen_radio_samples(EnvConfig(seed=4), 10_000)
    assert abs(np.mean([s.covered for s in samples]) - 0.22) <= 1e-4


def test_reference_calibrated_coverage():
    env = calibrate_environment(EnvConfig(seed=4))
    samples = gen_radio_samples(env, 10_000)
    assert abs(np.mean([s.covered for s in samples]) - 0.22) <= 0.01


def test_covered_matches_threshold():
    env = calibrate_environment(EnvConfig(seed=1))
    for s in gen_radio_samples(env, 300):
        assert s.covered == (s.secondary_rsrp >= env.coverage_threshold_dBm)
        assert len(s.primary_rsrp) == env.n_primary


def test_generation_is_deterministic_and_per_device():
    env = calibrate_environment(EnvConfig(seed=6))
    a = gen_radio_samples(env, 100)
    assert a == gen_radio_samples(env, 100)
    # Per-device streams: a shorter run is a prefix, an offset run a suffix.
    assert gen_radio_samples(env, 40) == a[:40]
    assert gen_radio_samples(env, 60, first_device_id=40) == a[40:]


def test_zero_devices():
    assert gen_radio_samples(EnvConfig(), 0) == []


@pytest.mark.parametrize(
    "kwargs, path",
    [
        ({"shadow_correlation": 1.5}, "env.shadow_correlation"),
        ({"area_size": 0}, "env.area_size"),
        ({"primary_cells": ()}, "env.primary_cells"),
        ({"secondary_cells": ()}, "env.secondary_cells"),
        ({"target_secondary_coverage": 1.0}, "env.target_secondary_coverage"),
    ],
)
def test_config_validation_names_field(kwargs, path):
    with pytest.raises(ConfigError) as err:
        EnvConfig(**kwargs)
    assert err.value.path == path


def test_config_dict_round_trip():
    cfg = EnvConfig(seed=12, shadow_correlation=0.3)
    assert EnvConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        EnvConfig.from_dict({"rho": 0.5})


# -- trajectories -------------------------------------------------------------

def test_trajectory_counts_and_balance():
    trs = gen_trajectories(EnvConfig(), 3, 20)
    assert len(trs) == 60
    assert np.bincount([t.route_id for t in trs]).tolist() == [20, 20, 20]
    assert len({t.device_id for t in trs}) == 60
    assert all(t.period == 10.0 and len(t.samples) == 30 for t in trs)


def test_zero_jitter_devices_see_identical_fingerprints():
    a, b = gen_trajectories(EnvConfig(), 1, 2, jitter_m=0.0)
    assert a.device_id != b.device_id
    assert [s.primary_rsrp for s in a.samples] == [s.primary_rsrp for s in b.samples]


def test_rsrp_along_route_rises_then_falls():
    cfg = EnvConfig(shadow_sigma_dB=0.0, **ONE_SITE)
    (tr,) = gen_trajectories(cfg, 1, 1, samples_per_trajectory=40, jitter_m=0.0)
    pos = np.array([s.position for s in tr.samples])
    # Independent evaluation of the path-loss curve at the sampled positions.
    d = np.linalg.norm(pos - np.array([500.0, 500.0]), axis=1)
    expected = 46.0 - 43.3 - 30.0 * np.log10(d)
    got = np.array([s.primary_rsrp[0] for s in tr.samples])
    np.testing.assert_allclose(got, expected, atol=1e-9)
    peak = int(np.argmax(got))
    assert 0 < peak < len(got) - 1
    assert np.all(np.diff(got[: peak + 1]) > 0) and np.all(np.diff(got[peak:]) < 0)


def test_trajectory_timestamp_invariants():
    s = gen_radio_samples(EnvConfig(coverage_threshold_dBm=-90.0), 3)
    with pytest.raises(InvariantError):
        Trajectory(1, 0, (0.0, 10.0, 10.0), tuple(s))
    with pytest.raises(InvariantError):
        Trajectory(1, 0, (0.0, 10.0, 25.0), tuple(s))
    with pytest.raises(InvariantError):
        Trajectory(1, 0, (0.0, 10.0), tuple(s))


def test_trajectories_are_deterministic():
    assert gen_trajectories(EnvConfig(seed=3), 2, 3) == gen_trajectories(EnvConfig(seed=3), 2, 3)


def test_serving_cells_hysteresis():
    rsrp = np.array([[-80, -85], [-82, -80], [-84, -80.5], [-86, -82.9], [-88, -84]], dtype=float)
    # Cell 1 must beat cell 0 by more than 3 dB before a handover happens.
    assert serving_cells(rsrp, 3.0).tolist() == [0, 0, 1, 1, 1]
    assert serving_cells(rsrp, 0.0).tolist() == [0, 1, 1, 1, 1]


# -- JSONL --------------------------------------------------------------------

def test_sample_round_trip(tmp_path, radio_2k):
    p = tmp_path / "radio.jsonl"
    write_samples(radio_2k[:50], p)
    assert read_samples(p) == radio_2k[:50]


def test_sample_threshold_check(tmp_path):
    env = calibrate_environment(EnvConfig())
    s = gen_radio_samples(env, 20)
    p = tmp_path / "radio.jsonl"
    write_samples(s, p)
    assert read_samples(p, env.coverage_threshold_dBm) == s
    with pytest.raises(InvariantError):
        read_samples(p, threshold=-1000.0 if not all(x.covered for x in s) else 1000.0)


def test_sample_parse_errors(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"device_id": 1}\n')
    with pytest.raises(ParseError):
        read_samples(p)
    p.write_text("nope\n")
    with pytest.raises(ParseError) as err:
        read_samples(p)
    assert err.value.lineno == 1


def test_trajectory_round_trip(tmp_path):
    trs = gen_trajectories(EnvConfig(), 2, 2, samples_per_trajectory=5)
    p = tmp_path / "tr.jsonl"
    write_trajectories(trs, p)
    assert read_trajectories(p) == trs
