"""Acceptance criteria. One test, and one pass/fail line under -v, per criterion.

Long runs (the scripted folding execution, the piloted teleoperation
session) come from session-scoped fixtures in conftest so each happens at
most once per test session.
"""

import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from magfold.chain import ChainModel, flat_config, locked_config
from magfold.control import execute
from magfold.magnetics import Dipole, pair_energy, pair_wrench
from magfold.scenarios import (
    calibrate_stiffness,
    calibrated_model,
    self_assembly_gap,
    squeeze_test,
    unfold_scenario,
)
from magfold.states import LandscapeSlice, StateLabel, energy_landscape, landscape_minima
from magfold.wpt import (
    INCH,
    LedLoad,
    SpiralCoil,
    fit_coupling,
    inverse_design_coil,
    led_budget,
    required_capacitance,
    resonant_frequency,
    wheeler_inductance,
)

MU0 = 4e-7 * np.pi


# ---------------------------------------------------------------------------
# wireless power formula suite (< 1 s)

@pytest.fixture(scope="module")
def wpt_suite():
    t0 = time.perf_counter()
    out = {}

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(0.2, 2.0) * INCH
        w = rng.uniform(0.02, 0.5) * INCH
        n = rng.uniform(1.0, 30.0)
        double = bool(rng.integers(0, 2))
        L = wheeler_inductance(SpiralCoil(r, w, n, double))
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
    out["roundtrip_worst"] = worst

    ref = SpiralCoil(0.5 * INCH, 0.1 * INCH, 4)
    out["single"] = wheeler_inductance(ref)
    out["double"] = wheeler_inductance(replace(ref, double_sided=True))
    layer = inverse_design_coil(0.857e-6, mean_radius=0.5 * INCH, turns=4)
    out["pair_double"] = wheeler_inductance(replace(layer, double_sided=True))

    out["f_ref"] = resonant_frequency(1.714e-6, 1e-6)
    out["c_req"] = required_capacitance(1.714e-6, 145e3)

    out["coupling"] = fit_coupling([0.0, 10.0, 20.0], [58.0, 44.2, 25.2])
    out["led"] = led_budget(out["coupling"], 0.0, LedLoad(count=15, led_power=0.080), 1.2)

    out["elapsed"] = time.perf_counter() - t0
    return out


class TestWptFormulaSuite:
    def test_wheeler_inverse_round_trip_on_100_random_coils(self, wpt_suite):
        assert wpt_suite["roundtrip_worst"] <= 1e-6

    def test_double_sided_inductance_is_exactly_twice_single(self, wpt_suite):
        assert wpt_suite["double"] == 2.0 * wpt_suite["single"]
        assert wpt_suite["pair_double"] == pytest.approx(1.714e-6, rel=1e-9)

    def test_reference_tank_resonates_at_121_6_khz(self, wpt_suite):
        assert wpt_suite["f_ref"] == pytest.approx(121.6e3, rel=1e-3)

    def test_145_khz_drive_needs_0_703_uf_not_the_stated_1_uf(self, wpt_suite):
        assert wpt_suite["c_req"] == pytest.approx(0.703e-6, rel=1e-3)
        # the 1 uF tank does not resonate at the 145 kHz drive: the
        # inconsistency is surfaced, not hidden
        assert wpt_suite["f_ref"] != pytest.approx(145e3, rel=0.05)

    def test_coupling_quadratic_interpolates_and_strictly_decreases(self, wpt_suite):
        m = wpt_suite["coupling"]
        for d, v in ((0.0, 58.0), (10.0, 44.2), (20.0, 25.2)):
            assert m.voltage(d) == pytest.approx(v, abs=1e-9)
        assert np.all(np.diff(m.voltage(np.linspace(0.0, 20.0, 201))) < 0.0)

    def test_all_leds_fully_lit_at_contact(self, wpt_suite):
        assert wpt_suite["led"] == (15, 1.0)

    def test_suite_runs_in_under_one_second(self, wpt_suite):
        assert wpt_suite["elapsed"] < 1.0


# ---------------------------------------------------------------------------
# magnetics oracle suite (< 10 s)

@pytest.fixture(scope="module")
def magnetics_suite():
    t0 = time.perf_counter()
    out = {}
    rng = np.random.default_rng(42)

    def random_pair():
        while True:
            pa = rng.uniform(-0.05, 0.05, 3)
            pb = rng.uniform(-0.05, 0.05, 3)
            if np.linalg.norm(pb - pa) > 5e-3:
                break
        ma = rng.uniform(-1.0, 1.0, 3) * 10.0 ** rng.uniform(-2, 1)
        mb = rng.uniform(-1.0, 1.0, 3) * 10.0 ** rng.uniform(-2, 1)
        return Dipole(pa, ma), Dipole(pb, mb)

    h = 1e-7
    worst_fd = 0.0
    worst_reaction = 0.0
    for _ in range(1000):
        a, b = random_pair()
        F = pair_wrench(a, b).force
        scale = max(np.linalg.norm(F), 1e-12)
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            fd = -(pair_energy(a, Dipole(b.position + dp, b.moment))
                   - pair_energy(a, Dipole(b.position - dp, b.moment))) / (2 * h)
            worst_fd = max(worst_fd, abs(F[k] - fd) / scale)
        worst_reaction = max(worst_reaction,
                             np.linalg.norm(F + pair_wrench(b, a).force) / scale)
    out["worst_fd"] = worst_fd
    out["worst_reaction"] = worst_reaction

    worst_frame = 0.0
    for _ in range(200):
        a, b = random_pair()
        axis = rng.uniform(-1, 1, 3) + 1e-3
        axis /= np.linalg.norm(axis)
        ang = rng.uniform(0, np.pi)
        K = np.array([[0, -axis[2], axis[1]],
                      [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        R = np.eye(3) + np.sin(ang) * K + (1 - np.cos(ang)) * (K @ K)
        t = rng.uniform(-1, 1, 3)
        a2 = Dipole(R @ a.position + t, R @ a.moment)
        b2 = Dipole(R @ b.position + t, R @ b.moment)
        F1 = pair_wrench(a, b).force
        F2 = pair_wrench(a2, b2).force
        worst_frame = max(worst_frame,
                          np.linalg.norm(R @ F1 - F2) / max(np.linalg.norm(F1), 1e-12))
    out["worst_frame"] = worst_frame

    m = 0.1034
    F = pair_wrench(Dipole([0, 0, 0], [0, 0, m]),
                    Dipole([0, 0, 0.005], [0, 0, m])).force
    out["coaxial_force"] = -F[2]

    out["elapsed"] = time.perf_counter() - t0
    return out


class TestMagneticsOracleSuite:
    def test_force_matches_energy_gradient_on_1000_random_pairs(self, magnetics_suite):
        assert magnetics_suite["worst_fd"] <= 1e-6

    def test_action_reaction_balance(self, magnetics_suite):
        assert magnetics_suite["worst_reaction"] <= 1e-12

    def test_frame_invariance(self, magnetics_suite):
        assert magnetics_suite["worst_frame"] <= 1e-10

    def test_coaxial_end_magnet_pair_pulls_10_26_n_at_5_mm(self, magnetics_suite):
        m = 0.1034
        closed = 3 * MU0 * m**2 / (2 * np.pi * 0.005**4)
        assert magnetics_suite["coaxial_force"] == pytest.approx(closed, rel=1e-12)
        assert magnetics_suite["coaxial_force"] == pytest.approx(10.26, rel=1e-3)

    def test_suite_runs_in_under_ten_seconds(self, magnetics_suite):
        assert magnetics_suite["elapsed"] < 10.0


# ---------------------------------------------------------------------------
# state & sequence suite (< 5 min)

@pytest.fixture(scope="module")
def state_suite(request):
    t0 = time.perf_counter()
    out = {}
    model = calibrated_model()

    land = energy_landscape(model, LandscapeSlice())
    out["minima_labels"] = {label for _, _, label in landscape_minima(model, land)}

    out["unfold_from_accordion"] = unfold_scenario(model).final_label
    out["unfold_from_locked"] = unfold_scenario(model, q0=locked_config(model)).final_label

    cal = calibrate_stiffness(ChainModel(), target_gap=5e-3)
    out["calibration"] = cal
    out["gap_after_calibration"] = self_assembly_gap(
        ChainModel().with_stiffness(cal.hinge_stiffness))

    folding = request.getfixturevalue("folding_run")
    out["folding"] = folding
    rerun_samples, rerun_report = execute(
        folding["script"], folding["model"], folding["q0"],
        environment=folding["environment"])
    out["rerun"] = (rerun_samples, rerun_report)

    qg = locked_config(model)
    out["squeeze"] = {(f, ax): squeeze_test(model, qg, f, ax)
                      for f in (2.0, 6.0, 10.0) for ax in ("x", "z")}

    out["elapsed"] = time.perf_counter() - t0
    return out


class TestStateAndSequenceSuite:
    def test_landscape_has_minima_labeled_flat_and_locked(self, state_suite):
        assert StateLabel.BETA in state_suite["minima_labels"]
        assert StateLabel.GAMMA in state_suite["minima_labels"]

    def test_chain_unfolds_flat_and_locked_loop_stays_locked(self, state_suite):
        assert state_suite["unfold_from_accordion"] is StateLabel.BETA
        assert state_suite["unfold_from_locked"] is StateLabel.GAMMA

    def test_stiffness_calibration_converges_into_snap_gap_band(self, state_suite):
        assert state_suite["calibration"].converged
        assert 4.5e-3 <= state_suite["gap_after_calibration"] <= 5.5e-3

    def test_folding_sequence_ends_locked_with_a_flip_event(self, state_suite):
        report = state_suite["folding"]["report"]
        assert report.final_label is StateLabel.GAMMA
        assert report.flip_events >= 1

    def test_folding_sequence_rerun_is_trajectory_identical(self, state_suite):
        first = state_suite["folding"]["samples"]
        second, rerun_report = state_suite["rerun"]
        assert len(first) == len(second)
        for a, b in zip(first, second):
            assert a.t == b.t
            assert np.array_equal(a.config.hinge_angles, b.config.hinge_angles)
            assert np.array_equal(a.config.base_pose.position, b.config.base_pose.position)
            assert np.array_equal(a.config.base_pose.rotation, b.config.base_pose.rotation)
            assert a.end_gap == b.end_gap and a.label == b.label
        assert rerun_report.flip_events == state_suite["folding"]["report"].flip_events

    def test_squeeze_recovers_at_2_6_10_n_on_both_axes(self, state_suite):
        for report in state_suite["squeeze"].values():
            assert report.recovered

    def test_squeeze_deflection_monotone_in_force(self, state_suite):
        for ax in ("x", "z"):
            d = [state_suite["squeeze"][(f, ax)].max_hinge_deflection
                 for f in (2.0, 6.0, 10.0)]
            assert d[0] <= d[1] + 1e-12 and d[1] <= d[2] + 1e-12

    def test_suite_runs_in_under_five_minutes(self, state_suite):
        assert state_suite["elapsed"] < 300.0


# ---------------------------------------------------------------------------
# command-line reproducibility

class TestCliReproducibility:
    def test_builtin_sequence_twice_gives_byte_identical_csvs(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            root = tmp_path / name
            proc = subprocess.run(
                [sys.executable, "-m", "magfold", "sequence",
                 "--script", "fig3", "--out", str(root)],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            run = next(p for p in root.iterdir() if p.is_dir())
            outs.append(run)
        a, b = outs
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


# ---------------------------------------------------------------------------
# teleoperation loop

class TestTeleopLoop:
    def test_synthetic_client_receives_final_snapshot_labeled_locked(self, teleop_pilot):
        assert teleop_pilot["final_snapshot"]["payload"]["label"] == "gamma"

    def test_downloaded_recording_replays_to_locked_via_cli(self, teleop_pilot):
        cli = teleop_pilot["cli"]
        assert cli.returncode == 0, cli.stderr
        assert "final state gamma" in cli.stdout
