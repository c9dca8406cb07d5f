"""Scenario generation tests."""

import numpy as np
import pytest

from gridtrade.errors import EmptySeries, IndexOutOfRange, NonHourlyData
from gridtrade.microgrid import DEFAULT_FLEET
from gridtrade.scenario import (
    DailyProfile,
    DisruptionConfig,
    PriceSchedule,
    apply_failure,
    apply_gradual_decline,
    apply_pv_disruption,
    apply_sudden_drop,
    bundled_price_schedule,
    bundled_profile,
    emergency_price,
    hourly_shape,
    normalize_annual,
    rng_stream,
    sample_realization,
)


class TestHourlyShape:
    def test_constant_series_maps_to_zero(self):
        assert (hourly_shape(np.full(48, 3.7)) == 0).all()

    def test_two_identical_days_scale_to_unit_ramp(self):
        day = np.arange(24, dtype=float)
        profile = hourly_shape(np.concatenate([day, day]))
        np.testing.assert_allclose(profile, day / 23)

    def test_nan_rejected(self):
        bad = np.arange(48, dtype=float)
        bad[10] = np.nan
        with pytest.raises(NonHourlyData):
            hourly_shape(bad)

    def test_empty_rejected(self):
        with pytest.raises(EmptySeries):
            hourly_shape([])

    def test_too_short_rejected(self):
        with pytest.raises(NonHourlyData):
            hourly_shape(np.arange(10))

    def test_affine_invariance(self):
        rng = np.random.default_rng(0)
        raw = rng.uniform(0, 5, 24 * 30)
        a = hourly_shape(raw)
        b = hourly_shape(3.0 * raw + 11.0)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_normalize_annual_builds_profile(self):
        rng = np.random.default_rng(1)
        prof = normalize_annual(rng.uniform(0, 2, 24 * 365), rng.uniform(0, 1, 24 * 365))
        assert isinstance(prof, DailyProfile)
        assert prof.load.min() >= 0 and prof.load.max() <= 1


class TestBundledDefaults:
    def test_profiles_valid_and_distinct(self):
        profiles = [bundled_profile(i) for i in range(4)]
        for p in profiles:
            assert p.load.shape == (24,) and p.pv.shape == (24,)
            assert p.pv[:4].max() == 0.0  # no PV at night
        assert not np.allclose(profiles[0].load, profiles[1].load)

    def test_price_schedule_spans_range(self):
        sched = bundled_price_schedule()
        assert sched.feed_in == 0.2
        assert sched.emergency.min() == pytest.approx(1.5)
        assert sched.emergency.max() == pytest.approx(3.5)

    def test_price_hierarchy_holds_at_every_hour(self):
        sched = bundled_price_schedule()
        for t in range(24):
            assert sched.feed_in <= sched.day_ahead <= emergency_price(t, sched)

    def test_price_schedule_validation(self):
        with pytest.raises(ValueError):
            PriceSchedule(feed_in=2.0, emergency=np.full(24, 1.0))
        with pytest.raises(ValueError):
            PriceSchedule(feed_in=0.2, emergency=np.full(10, 2.0))


class TestEmergencyPrice:
    def test_in_range_default(self):
        sched = bundled_price_schedule()
        for t in range(24):
            assert 1.5 <= emergency_price(t, sched) <= 3.5

    def test_custom_flat_schedule(self):
        sched = PriceSchedule(feed_in=0.2, emergency=np.full(24, 2.0))
        assert all(emergency_price(t, sched) == 2.0 for t in range(24))

    def test_out_of_range_hour(self):
        sched = bundled_price_schedule()
        with pytest.raises(IndexOutOfRange):
            emergency_price(24, sched)
        with pytest.raises(IndexOutOfRange):
            emergency_price(-1, sched)


class TestSampleRealization:
    def test_noiseless_is_exact_scaling(self):
        prof = bundled_profile(0)
        load, gen = sample_realization(prof, DEFAULT_FLEET[0], 0.0, rng_stream(1, 0))
        np.testing.assert_allclose(load, 25 * prof.load)
        np.testing.assert_allclose(gen, 5 * prof.pv)

    def test_seed_determinism(self):
        prof = bundled_profile(1)
        a = sample_realization(prof, DEFAULT_FLEET[1], 0.1, rng_stream(7, 1, 0))
        b = sample_realization(prof, DEFAULT_FLEET[1], 0.1, rng_stream(7, 1, 0))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_bounds_respected(self):
        prof = bundled_profile(2)
        load, gen = sample_realization(prof, DEFAULT_FLEET[2], 0.5, rng_stream(3, 2))
        assert load.min() >= 0 and load.max() <= 40
        assert gen.min() >= 0 and gen.max() <= 10

    def test_midday_scaling_example(self):
        prof = DailyProfile(load=np.full(24, 0.5), pv=np.zeros(24))
        load, _ = sample_realization(prof, DEFAULT_FLEET[0], 0.0, rng_stream(0, 0))
        assert load[12] == pytest.approx(12.5)

    def test_stream_independence_across_agents(self):
        # agent 0's draws must not depend on how many other agents exist
        prof = bundled_profile(0)
        a = sample_realization(prof, DEFAULT_FLEET[0], 0.1, rng_stream(9, 0, 0))
        _ = sample_realization(prof, DEFAULT_FLEET[1], 0.1, rng_stream(9, 1, 0))
        b = sample_realization(prof, DEFAULT_FLEET[0], 0.1, rng_stream(9, 0, 0))
        np.testing.assert_array_equal(a[0], b[0])


class TestDisruptions:
    def test_all_probabilities_zero_is_identity(self):
        gen = np.linspace(0, 10, 24)
        out = apply_pv_disruption(gen, DisruptionConfig.disabled(), rng_stream(0, 0))
        np.testing.assert_array_equal(out, gen)

    def test_forced_failure_window(self):
        gen = np.ones(24)
        out = apply_failure(gen, 10, 3)
        assert (out[10:13] == 0).all()
        assert (out[:10] == 1).all() and (out[13:] == 1).all()

    def test_forced_sudden_drop(self):
        gen = np.full(24, 2.0)
        out = apply_sudden_drop(gen, 8, 0.6)
        assert out[8] == pytest.approx(1.2)
        assert out[7] == 2.0 and out[9] == 2.0

    def test_gradual_decline_ramp_then_hold(self):
        gen = np.ones(24)
        out = apply_gradual_decline(gen, 6, ramp_hours=3, floor=0.5)
        np.testing.assert_allclose(out[6:9], [1 - 0.5 / 3, 1 - 1.0 / 3, 0.5])
        assert (out[9:] == 0.5).all()
        assert (out[:6] == 1.0).all()

    def test_disrupted_never_exceeds_original(self):
        rng = np.random.default_rng(2)
        cfg = DisruptionConfig(p_sudden=0.5, p_gradual=0.3, p_failure=0.1)
        for trial in range(50):
            gen = rng.uniform(0, 10, 24)
            out = apply_pv_disruption(gen, cfg, rng_stream(trial, 0))
            assert (out <= gen + 1e-12).all()
            assert (out >= 0).all()

    def test_determinism(self):
        gen = np.linspace(1, 5, 24)
        cfg = DisruptionConfig()
        a = apply_pv_disruption(gen, cfg, rng_stream(4, 0, 2))
        b = apply_pv_disruption(gen, cfg, rng_stream(4, 0, 2))
        np.testing.assert_array_equal(a, b)

    def test_reported_rates_preserved(self):
        cfg = DisruptionConfig.reported()
        assert (cfg.p_sudden, cfg.p_gradual, cfg.p_failure) == (0.85, 0.10, 0.01)

    def test_default_rates_are_toned_down(self):
        cfg = DisruptionConfig()
        assert cfg.p_sudden == 0.15
        assert cfg.p_gradual == 0.10
        assert cfg.p_failure == 0.01

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            DisruptionConfig(p_sudden=1.5)


class TestDailyProfileValidation:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            DailyProfile(load=np.zeros(10), pv=np.zeros(24))

    def test_range_checked(self):
        with pytest.raises(ValueError):
            DailyProfile(load=np.full(24, 1.5), pv=np.zeros(24))
