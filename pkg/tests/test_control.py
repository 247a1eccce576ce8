"""Motion scripts: primitives, pose evaluation, execution, the built-in
flat-to-locked folding sequence."""

import json
from dataclasses import replace

import numpy as np
import pytest

from magfold.chain import settle
from magfold.control import (
    ControlScript,
    beta_start,
    bench_environment,
    epm_pose_at,
    execute,
    fig3_script,
    hold,
    rotate,
    translate,
)
from magfold.errors import ValidationError
from magfold.geometry import Pose, rotation_about_axis
from magfold.scenarios import calibrated_model
from magfold.states import StateLabel


class TestScriptShape:
    def test_has_at_least_seven_stages(self):
        assert len(fig3_script().primitives) >= 7

    def test_contains_the_published_maneuvers(self):
        script = fig3_script()
        kinds = set()
        for p in script.primitives:
            if p.kind == "rotate" and abs(p.axis[0]) > 0.9:
                kinds.add("rotate-x")
            if p.kind == "rotate" and abs(p.axis[2]) > 0.9:
                kinds.add("rotate-normal")
            if p.kind == "translate" and abs(p.axis[1]) > 0.9:
                kinds.add("translate-y")
        assert kinds == {"rotate-x", "rotate-normal", "translate-y"}

    def test_invalid_primitives_rejected(self):
        with pytest.raises(ValidationError):
            hold(0.0)
        with pytest.raises(ValidationError):
            translate([0.0, 0.0, 0.0], 0.01, 1.0)
        with pytest.raises(ValidationError):
            ControlScript("empty", Pose(), [])


class TestPoseEvaluation:
    def test_t_zero_is_initial_pose(self):
        script = fig3_script()
        pose = epm_pose_at(script, 0.0)
        assert np.array_equal(pose.position, script.initial_pose.position)
        assert np.array_equal(pose.rotation, script.initial_pose.rotation)

    def test_translate_closed_form(self):
        script = ControlScript("t", Pose(), [translate([1.0, 0, 0], 0.02, 3.0)])
        pose = epm_pose_at(script, 1.7)
        assert pose.position[0] == pytest.approx(0.034, rel=1e-12)
        assert np.allclose(pose.rotation, np.eye(3))

    def test_rotate_closed_form(self):
        script = ControlScript("r", Pose(), [rotate([0, 0, 1.0], 0.5, 4.0)])
        pose = epm_pose_at(script, 2.0)
        assert np.allclose(pose.rotation, rotation_about_axis([0, 0, 1.0], 1.0),
                           atol=1e-14)
        assert np.allclose(pose.position, 0.0)

    def test_continuity_at_segment_boundaries(self):
        script = fig3_script()
        t = 0.0
        for p in script.primitives[:-1]:
            t += p.duration
            lo = epm_pose_at(script, t - 1e-12)
            hi = epm_pose_at(script, t + 1e-12)
            assert np.max(np.abs(lo.position - hi.position)) <= 1e-12
            assert np.max(np.abs(lo.rotation - hi.rotation)) <= 1e-10

    def test_out_of_range_rejected(self):
        script = fig3_script()
        with pytest.raises(ValidationError):
            epm_pose_at(script, -0.1)
        with pytest.raises(ValidationError):
            epm_pose_at(script, script.total_duration + 1.0)


class TestScriptSerialization:
    def test_round_trip(self):
        script = fig3_script()
        back = ControlScript.from_json(script.to_json())
        assert back.name == script.name
        assert len(back.primitives) == len(script.primitives)
        for a, b in zip(back.primitives, script.primitives):
            assert a.kind == b.kind and a.duration == b.duration
        t = 0.33 * script.total_duration
        pa, pb = epm_pose_at(script, t), epm_pose_at(back, t)
        assert np.array_equal(pa.position, pb.position)
        assert np.array_equal(pa.rotation, pb.rotation)

    def test_json_is_plain_data(self):
        doc = json.loads(fig3_script().to_json())
        assert doc["name"] == "beta-to-gamma"
        assert isinstance(doc["primitives"], list)


class TestExecution:
    def test_hold_keeps_flat_state(self):
        model = calibrated_model()
        env = bench_environment()
        q0, _, _ = settle(model, beta_start(model), env)
        script = ControlScript("idle", Pose(position=[0.0, -0.3, 0.0]), [hold(0.5)])
        samples, report = execute(script, model, q0, environment=env)
        assert report.final_label is StateLabel.BETA
        assert report.flip_events == 0

    def test_short_run_determinism(self):
        model = calibrated_model()
        script = ControlScript(
            "probe", Pose(position=[0.0375, -0.060, 0.0]),
            [hold(0.3), rotate([1.0, 0, 0], 4 * np.pi, 0.25),
             translate([0, 1.0, 0], 0.01, 1.0)])

        def run():
            samples, _ = execute(script, model, beta_start(model),
                                 environment=bench_environment())
            return samples

        a, b = run(), run()
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.config.hinge_angles, sb.config.hinge_angles)
            assert np.array_equal(sa.config.base_pose.position, sb.config.base_pose.position)
            assert sa.end_gap == sb.end_gap

    def test_folding_sequence_reaches_locked_state(self, folding_run):
        report = folding_run["report"]
        assert report.final_label is StateLabel.GAMMA
        assert report.flip_events >= 1
        assert report.min_end_gap < 6e-3
        assert StateLabel.GAMMA in report.first_seen

    def test_folding_sequence_passes_through_transitional(self, folding_run):
        labels = {label for _, label in folding_run["report"].timeline}
        assert StateLabel.BETA in labels
        assert StateLabel.TRANSITIONAL in labels

    def test_reversed_polarity_fails_to_fold(self):
        # flip the rig so its field points away from the chain: the same
        # maneuvers never induce the end-moment flip and the chain stays flat
        model = calibrated_model()
        script = fig3_script()
        flipped = ControlScript(
            script.name,
            Pose(script.initial_pose.position,
                 rotation_about_axis([1.0, 0.0, 0.0], np.pi) @ script.initial_pose.rotation),
            script.primitives,
        )
        _, report = execute(flipped, model, beta_start(model),
                            environment=bench_environment())
        assert report.final_label is not StateLabel.GAMMA
        assert report.final_label is StateLabel.BETA
        assert report.flip_events == 0

    @pytest.mark.xfail(
        strict=True,
        reason="overdamped mobilities set absolute timescales: halving the "
        "final swift-turn rate drops it below the near-magnet tracking "
        "limit, so both end magnets follow the field and the relative "
        "wind saturates short of the latch; a doubled-duration, "
        "half-rate replay therefore cannot reproduce the locked state",
    )
    def test_time_rescaled_script_reaches_same_state(self):
        model = calibrated_model()
        script = fig3_script()
        slowed = ControlScript(
            script.name,
            script.initial_pose,
            [replace(p, duration=2.0 * p.duration, speed=0.5 * p.speed,
                     rate=0.5 * p.rate) for p in script.primitives],
        )
        _, report = execute(slowed, model, beta_start(model),
                            environment=bench_environment())
        assert report.final_label is StateLabel.GAMMA
