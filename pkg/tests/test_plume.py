import math

import numpy as np
import pytest

from volcnav.plume import (
    BinReading,
    GasModelError,
    GasSource,
    PlumeParams,
    SpectrometerModel,
    SpectrometerState,
    concentration_at,
    spectrometer_read,
)
from volcnav.world import WindField


STEADY_WIND = WindField((1.4, 0.0), gust_amplitude=0.0)


def he_source(rate=100.0, height=0.8):
    return GasSource(position=(0.0, 0.0, 0.0), species=4, emission_rate=rate, release_height=height)


class TestConcentration:
    def test_no_sources_gives_background_only(self):
        out = concentration_at([], STEADY_WIND, (5.0, 0.0, 1.0), 0.0, background={4: 0.125})
        assert out == {4: 0.125}

    def test_upwind_of_source_is_zero(self):
        out = concentration_at([he_source()], STEADY_WIND, (-5.0, 0.0, 0.8), 0.0)
        assert out[4] == 0.0

    def test_far_downwind_weak_source_below_detection_floor(self):
        model = SpectrometerModel()
        out = concentration_at([he_source(rate=1.0)], STEADY_WIND, (2000.0, 0.0, 0.8), 0.0)
        assert out[4] < model.detection_floor

    def test_linear_in_emission_rate(self):
        p = (8.0, 1.0, 1.2)
        c1 = concentration_at([he_source(rate=50.0)], STEADY_WIND, p, 0.0)[4]
        c2 = concentration_at([he_source(rate=100.0)], STEADY_WIND, p, 0.0)[4]
        assert c2 == pytest.approx(2.0 * c1, rel=1e-12)
        assert c1 > 0

    def test_same_species_sources_sum(self):
        a = he_source()
        b = GasSource(position=(2.0, 3.0, 0.0), species=4, emission_rate=40.0)
        p = (10.0, 0.5, 1.0)
        tot = concentration_at([a, b], STEADY_WIND, p, 0.0)[4]
        ca = concentration_at([a], STEADY_WIND, p, 0.0)[4]
        cb = concentration_at([b], STEADY_WIND, p, 0.0)[4]
        assert tot == pytest.approx(ca + cb, rel=1e-12)

    def test_calm_wind_switches_to_isotropic_kernel(self):
        calm = WindField((0.1, 0.0), gust_amplitude=0.0)
        # upwind point still sees gas when the kernel is isotropic
        out = concentration_at([he_source()], calm, (-1.5, 0.0, 0.8), 0.0)
        assert out[4] > 0.0

    def test_non_negative_everywhere(self):
        rng = np.random.default_rng(0)
        srcs = [he_source(), GasSource((5.0, -4.0, 0.0), species=44, emission_rate=30.0)]
        for _ in range(200):
            p = rng.uniform(-50, 50, size=3)
            p[2] = abs(p[2])
            for v in concentration_at(srcs, STEADY_WIND, p, rng.uniform(0, 100)).values():
                assert v >= 0.0

    def test_crosswind_mass_flux_conserved(self):
        # quadrature of u*C over a y-z plane must recover the emission rate
        src = he_source(rate=100.0, height=0.8)
        params = PlumeParams()
        u = 1.4
        for x in (10.0, 30.0, 60.0):
            sigma = params.sigma_a * x**params.sigma_b
            ys = np.linspace(-6 * sigma, 6 * sigma, 201)
            zs = np.linspace(0.0, src.release_height + 6 * sigma, 201)
            c = np.empty((zs.size, ys.size))
            for j, z in enumerate(zs):
                for i, y in enumerate(ys):
                    c[j, i] = concentration_at([src], STEADY_WIND, (x, y, z), 0.0, params)[4]
            flux = u * np.trapezoid(np.trapezoid(c, ys, axis=1), zs)
            assert flux == pytest.approx(src.emission_rate, rel=0.02)

    def test_source_validation(self):
        with pytest.raises(GasModelError):
            GasSource((0, 0, 0), species=4, emission_rate=0.0)
        with pytest.raises(GasModelError):
            GasSource((0, 0, 0), species=300, emission_rate=1.0)


class TestSpectrometer:
    def test_constant_input_is_fixed_point(self):
        model = SpectrometerModel(bins=(4,))
        state = SpectrometerState(values={4: 7.5}, t=0.0)
        readings, state2 = spectrometer_read(model, {4: 7.5}, state, 0.1)
        assert readings[0].value == pytest.approx(7.5, rel=1e-12)
        assert state2.values[4] == pytest.approx(7.5, rel=1e-12)

    def test_step_response_hits_95_percent_at_three_tau(self):
        model = SpectrometerModel(bins=(4,))
        c = 1000.0
        state = SpectrometerState()
        t, dt = 0.0, 0.05
        while t < 3.0 * model.rise_tau - 1e-9:
            readings, state = spectrometer_read(model, {4: c}, state, dt)
            t += dt
        expected = (1.0 - math.exp(-3.0)) * c  # 0.9502 * c
        assert readings[-1].value == pytest.approx(expected, abs=1e-3 * c)

    def test_decay_slower_than_rise(self):
        model = SpectrometerModel(bins=(4,))
        c, dt = 100.0, 0.1
        up = SpectrometerState()
        for _ in range(10):
            _, up = spectrometer_read(model, {4: c}, up, dt)
        risen = up.values[4]  # value 1 s after the up-step
        down = SpectrometerState(values={4: c}, t=0.0)
        for _ in range(10):
            _, down = spectrometer_read(model, {4: 0.0}, down, dt)
        decayed = down.values[4]  # value 1 s after the down-step
        assert decayed > c - risen

    def test_readings_clipped_to_dynamic_range(self):
        model = SpectrometerModel(bins=(4,), detection_floor=0.05, dynamic_range=1e6)
        readings, _ = spectrometer_read(model, {4: 0.0}, SpectrometerState(), 0.1)
        assert readings[0].value == model.detection_floor
        state = SpectrometerState(values={4: 1e12}, t=0.0)
        readings, _ = spectrometer_read(model, {4: 1e12}, state, 0.1)
        assert readings[0].value == model.detection_floor * model.dynamic_range

    def test_sweep_stamps_each_bin_at_its_slot(self):
        model = SpectrometerModel(bins=(2, 4, 44))
        readings, state = spectrometer_read(model, {}, SpectrometerState(), 0.1)
        stamps = [r.t for r in readings]
        assert stamps == pytest.approx([0.1, 0.1 + model.dwell, 0.1 + 2 * model.dwell])
        assert state.t == pytest.approx(0.1)

    def test_filter_is_contraction_and_monotone(self):
        model = SpectrometerModel(bins=(4,))
        rng = np.random.default_rng(2)
        state = SpectrometerState()
        lo, hi = 0.0, 0.0
        prev = 0.0
        for _ in range(100):
            target = float(rng.uniform(0.0, 50.0))
            lo, hi = min(lo, target), max(hi, target)
            _, state = spectrometer_read(model, {4: target}, state, 0.2)
            assert lo - 1e-9 <= state.values[4] <= hi + 1e-9
        # constant input: monotone approach from below
        state = SpectrometerState()
        for _ in range(200):
            _, state = spectrometer_read(model, {4: 10.0}, state, 0.1)
            assert state.values[4] >= prev
            prev = state.values[4]
        assert prev == pytest.approx(10.0, abs=1e-4)

    def test_invalid_models_rejected(self):
        with pytest.raises(GasModelError):
            SpectrometerModel(bins=())
        with pytest.raises(GasModelError):
            SpectrometerModel(rise_tau=4.0, decay_tau=1.0)
