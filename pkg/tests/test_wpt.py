"""Receiver design chain: inductance, resonance, coupling, LED budget."""

import math

import numpy as np
import pytest

from magfold.errors import ValidationError
from magfold.wpt import (
    INCH,
    CouplingModel,
    LedLoad,
    ResonantLink,
    SpiralCoil,
    design_receiver,
    faraday_peak_voltage,
    fit_coupling,
    inverse_design_coil,
    led_budget,
    required_capacitance,
    resonant_frequency,
    wheeler_inductance,
)

REF_COIL = SpiralCoil(0.5 * INCH, 0.1 * INCH, 4)


class TestWheeler:
    def test_reference_coil_single(self):
        # r=0.5in, w=0.1in, n=4: 0.25*16/(4 + 1.1) uH
        L = wheeler_inductance(REF_COIL)
        assert L == pytest.approx(0.25 * 16 / 5.1 * 1e-6, rel=1e-12)
        assert L == pytest.approx(0.7843e-6, rel=1e-3)

    def test_double_sided_is_exactly_twice(self):
        single = wheeler_inductance(REF_COIL)
        double = wheeler_inductance(SpiralCoil(0.5 * INCH, 0.1 * INCH, 4, double_sided=True))
        assert double == 2.0 * single

    def test_published_pair_0857_to_1714(self):
        # a single-sided layer at 0.857 uH doubles to 1.714 uH
        coil = inverse_design_coil(0.857e-6, mean_radius=0.5 * INCH, turns=4)
        assert wheeler_inductance(coil) == pytest.approx(0.857e-6, rel=1e-9)
        stacked = SpiralCoil(coil.mean_radius, coil.winding_depth, coil.turns, double_sided=True)
        assert wheeler_inductance(stacked) == pytest.approx(1.714e-6, rel=1e-9)

    def test_turns_squared_scaling(self):
        L1 = wheeler_inductance(REF_COIL)
        L2 = wheeler_inductance(SpiralCoil(0.5 * INCH, 0.1 * INCH, 8))
        assert L2 == pytest.approx(4.0 * L1, rel=1e-12)

    def test_zero_turns_rejected(self):
        with pytest.raises(ValidationError):
            SpiralCoil(0.5 * INCH, 0.1 * INCH, 0)


class TestInverseDesign:
    def test_solve_depth(self):
        coil = inverse_design_coil(0.857e-6, mean_radius=0.5 * INCH, turns=4)
        assert coil.winding_depth / INCH == pytest.approx(0.0607, rel=2e-3)

    def test_solve_turns(self):
        coil = inverse_design_coil(0.7843e-6, mean_radius=0.5 * INCH, winding_depth=0.1 * INCH)
        assert coil.turns == pytest.approx(4.0, rel=1e-3)

    def test_solve_radius_round_trip(self):
        coil = inverse_design_coil(1.0e-6, winding_depth=0.1 * INCH, turns=5)
        assert wheeler_inductance(coil) == pytest.approx(1.0e-6, rel=1e-12)

    def test_round_trip_random_coils(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            r = rng.uniform(0.2, 2.0) * INCH
            w = rng.uniform(0.02, 0.5) * INCH
            n = rng.uniform(1.0, 30.0)
            double = bool(rng.integers(0, 2))
            coil = SpiralCoil(r, w, n, double)
            L = wheeler_inductance(coil)
            free = rng.integers(0, 3)
            if free == 0:
                got = inverse_design_coil(L, winding_depth=w, turns=n, double_sided=double)
                err = abs(got.mean_radius - r) / r
            elif free == 1:
                got = inverse_design_coil(L, mean_radius=r, turns=n, double_sided=double)
                err = abs(got.winding_depth - w) / w
            else:
                got = inverse_design_coil(L, mean_radius=r, winding_depth=w, double_sided=double)
                err = abs(got.turns - n) / n
            worst = max(worst, err)
        assert worst < 1e-6

    def test_unreachable_depth_is_explained(self):
        # at zero depth the inductance tops out at r n^2 / 8
        with pytest.raises(ValidationError, match="zero-depth limit"):
            inverse_design_coil(1e-3, mean_radius=0.5 * INCH, turns=4)

    def test_exactly_one_free_variable(self):
        with pytest.raises(ValidationError):
            inverse_design_coil(1e-6, mean_radius=0.5 * INCH)
        with pytest.raises(ValidationError):
            inverse_design_coil(1e-6, mean_radius=0.5 * INCH, winding_depth=0.1 * INCH, turns=4)


class TestResonance:
    def test_reference_tank_frequency(self):
        f = resonant_frequency(1.714e-6, 1e-6)
        assert f == pytest.approx(121.57e3, rel=1e-3)

    def test_stated_drive_needs_smaller_capacitor(self):
        # the published 1 uF capacitor does NOT resonate 1.714 uH at the
        # stated 145 kHz drive; the consistent capacitance is 0.703 uF
        assert required_capacitance(1.714e-6, 145e3) == pytest.approx(0.703e-6, rel=1e-3)
        assert resonant_frequency(1.714e-6, 1e-6) != pytest.approx(145e3, rel=0.05)

    def test_round_trip_exact_inverse(self):
        for L, f in [(1.714e-6, 145e3), (5e-6, 20e3), (1e-7, 1e6)]:
            C = required_capacitance(L, f)
            assert resonant_frequency(L, C) == pytest.approx(f, rel=1e-12)

    def test_scaling_laws(self):
        f = resonant_frequency(1e-6, 1e-6)
        assert resonant_frequency(4e-6, 1e-6) == pytest.approx(f / 2, rel=1e-12)
        assert required_capacitance(1e-6, 2 * f) == pytest.approx(
            required_capacitance(1e-6, f) / 4, rel=1e-12)

    def test_constructed_identity(self):
        # L C = 1/(2 pi)^2 puts the resonance at exactly 1 Hz
        assert resonant_frequency(1.0 / (4 * math.pi**2), 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_link_wrapper(self):
        link = ResonantLink(1.714e-6, 1e-6)
        assert link.resonant_frequency == resonant_frequency(1.714e-6, 1e-6)


class TestFaraday:
    def test_reference_point(self):
        assert faraday_peak_voltage(10, 1e-6, 145e3) == pytest.approx(9.11, rel=1e-3)

    def test_linearity(self):
        base = faraday_peak_voltage(10, 1e-6, 145e3)
        assert faraday_peak_voltage(20, 1e-6, 145e3) == pytest.approx(2 * base, rel=1e-12)
        assert faraday_peak_voltage(10, 1e-6, 290e3) == pytest.approx(2 * base, rel=1e-12)

    def test_constant_flux_gives_zero(self):
        assert faraday_peak_voltage(10, 0.0, 145e3) == 0.0


MEASURED = ([0.0, 10.0, 20.0], [58.0, 44.2, 25.2])


class TestCoupling:
    def test_exact_interpolation(self):
        m = fit_coupling(*MEASURED)
        assert m.a == pytest.approx(-0.026, abs=1e-9)
        assert m.b == pytest.approx(-1.12, abs=1e-9)
        assert m.c == pytest.approx(58.0, abs=1e-9)
        for d, v in zip(*MEASURED):
            assert m.voltage(d) == pytest.approx(v, abs=1e-9)

    def test_strictly_decreasing_over_span(self):
        m = fit_coupling(*MEASURED)
        v = m.voltage(np.linspace(0.0, 20.0, 201))
        assert np.all(np.diff(v) < 0.0)

    def test_midrange_value(self):
        m = fit_coupling(*MEASURED)
        assert m.voltage(12.0) == pytest.approx(40.816, rel=1e-3)

    def test_non_monotone_fit_rejected(self):
        with pytest.raises(ValidationError, match="decreasing"):
            fit_coupling([0.0, 10.0, 20.0], [58.0, 60.0, 25.2])

    def test_needs_three_distinct_points(self):
        with pytest.raises(ValidationError):
            fit_coupling([0.0, 10.0], [58.0, 44.2])
        with pytest.raises(ValidationError):
            fit_coupling([0.0, 10.0, 10.0], [58.0, 44.2, 25.2])


class TestLedBudget:
    def test_full_brightness_at_contact(self):
        m = fit_coupling(*MEASURED)
        lit, brightness = led_budget(m, 0.0, LedLoad(count=15, led_power=0.080), 1.2)
        assert (lit, brightness) == (15, 1.0)

    def test_ten_mm_brightness(self):
        m = fit_coupling(*MEASURED)
        lit, brightness = led_budget(m, 10.0, LedLoad(count=15, led_power=0.080), 1.2)
        assert brightness == pytest.approx((44.2 / 58.0) ** 2, rel=1e-9)
        assert lit == 8

    def test_huge_led_power_lights_nothing(self):
        m = fit_coupling(*MEASURED)
        lit, _ = led_budget(m, 0.0, LedLoad(count=15, led_power=1e6), 1.2)
        assert lit == 0

    def test_distance_outside_span_rejected(self):
        m = fit_coupling(*MEASURED)
        with pytest.raises(ValidationError):
            led_budget(m, 25.0, LedLoad(), 1.2)


def test_design_receiver_chains_the_models():
    d = design_receiver()
    assert d.inductance == pytest.approx(1.5686e-6, rel=1e-3)
    assert d.resonant_hz == pytest.approx(
        resonant_frequency(d.inductance, 1e-6), rel=1e-12)
    assert d.peak_voltage == pytest.approx(
        faraday_peak_voltage(4, 1e-6, d.resonant_hz), rel=1e-12)
