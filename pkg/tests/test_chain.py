"""Chain mechanics: kinematics, energy, gradients, stepping, settling."""

import math
from dataclasses import replace

import numpy as np
import pytest

from magfold.chain import (
    ChainModel,
    Config,
    Environment,
    SimParams,
    accordion_config,
    end_gap,
    flat_config,
    forward_kinematics,
    generalized_forces,
    locked_config,
    settle,
    step,
    total_energy,
)
from magfold.errors import ValidationError
from magfold.geometry import Pose, rotation_about_axis
from magfold.magnetics import Dipole, MagnetSpec


def demagnetized(model: ChainModel) -> ChainModel:
    return replace(
        model,
        left_magnet=replace(model.left_magnet, remanence=0.0),
        right_magnet=replace(model.right_magnet, remanence=0.0),
    )


def random_config(model: ChainModel, rng) -> Config:
    axis = rng.uniform(-1, 1, 3) + 1e-3
    R = rotation_about_axis(axis, rng.uniform(0, math.pi))
    pos = rng.uniform(-0.02, 0.02, 3)
    hinges = rng.uniform(-2.5, 2.5, model.n_hinges)
    return Config(Pose(pos, R), hinges)


class TestKinematics:
    def test_flat_chain_is_collinear(self):
        model = ChainModel()
        pts, rots, (left, right) = forward_kinematics(model, flat_config(model))
        assert pts.shape == (model.n_links + 1, 3)
        # joints evenly spaced along +x
        for i, p in enumerate(pts):
            assert np.allclose(p, [i * model.link_length, 0.0, 0.0], atol=1e-15)
        for R in rots:
            assert np.allclose(R, np.eye(3), atol=1e-15)
        # end moments point at each other along the chain
        assert left.moment[0] > 0 and right.moment[0] < 0

    def test_accordion_stacks_compactly(self):
        model = ChainModel()
        pts, _, _ = forward_kinematics(model, accordion_config(model))
        span = np.linalg.norm(pts[-1] - pts[0])
        assert span < model.link_length

    def test_closed_triangle_brings_ends_together(self):
        # outer hinges near +-2pi/3 with symmetric tying close the loop
        model = ChainModel(links_per_cell=1)  # 3 links, 2 hinges
        q = Config(Pose(), np.array([2 * np.pi / 3, 2 * np.pi / 3]))
        pts, _, _ = forward_kinematics(model, q)
        closure = np.linalg.norm(pts[-1] - pts[0])
        assert closure < 0.1 * model.link_length

    def test_dimension_mismatch_rejected(self):
        model = ChainModel()
        with pytest.raises(ValidationError):
            forward_kinematics(model, Config(Pose(), np.zeros(3)))

    def test_flat_gap_equals_span_between_mounts(self):
        model = ChainModel()
        gap = end_gap(model, flat_config(model))
        # magnets sit at the centers of the first and last link
        assert gap == pytest.approx(model.chain_length - model.link_length, rel=1e-12)

    def test_gap_invariant_under_rigid_transform(self):
        model = ChainModel()
        rng = np.random.default_rng(0)
        q = random_config(model, rng)
        g0 = end_gap(model, q)
        R = rotation_about_axis([0.3, -1.0, 0.7], 1.234)
        moved = Config(Pose(R @ q.base_pose.position + 0.05,
                            R @ q.base_pose.rotation), q.hinge_angles)
        assert end_gap(model, moved) == pytest.approx(g0, rel=1e-12)


class TestEnergy:
    def test_flat_far_apart_is_mostly_elastic(self):
        # stretch the chain so the end gap far exceeds the magnet size
        model = ChainModel(link_length=0.05, hinge_rest_angles=np.full(5, 0.3))
        q = flat_config(model)
        e = total_energy(model, q)
        assert abs(e.internal_magnetic) < 0.01 * abs(e.total)

    def test_locked_state_is_magnetically_bound(self):
        from magfold.scenarios import calibrated_model

        model = calibrated_model()
        q = locked_config(model)
        e = total_energy(model, q)
        assert e.internal_magnetic < 0
        # the magnets are what hold the loop: demagnetize and the same
        # shape springs open
        released, _, _ = settle(demagnetized(model), q)
        assert end_gap(demagnetized(model), released) > 4 * end_gap(model, q)

    def test_frame_invariance_of_all_terms(self):
        model = ChainModel()
        rng = np.random.default_rng(1)
        epm = [Dipole([0.03, 0.02, -0.04], [0.0, 40.0, 0.0])]
        q = random_config(model, rng)
        e0 = total_energy(model, q, Environment(epm=epm))
        R = rotation_about_axis([1.0, 2.0, -0.5], 0.9)
        t = np.array([0.01, -0.03, 0.02])
        q2 = Config(Pose(R @ q.base_pose.position + t, R @ q.base_pose.rotation),
                    q.hinge_angles)
        epm2 = [Dipole(R @ d.position + t, R @ d.moment) for d in epm]
        e1 = total_energy(model, q2, Environment(epm=epm2))
        for k in ("elastic", "internal_magnetic", "controller_magnetic"):
            a, b = getattr(e0, k), getattr(e1, k)
            assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


class TestForces:
    def test_rest_state_has_no_force(self):
        # demagnetized chain at its rest angles is an exact equilibrium
        model = demagnetized(ChainModel(hinge_rest_angles=np.full(5, 0.4)))
        q = Config(Pose(), np.full(5, 0.4))
        f = generalized_forces(model, q)
        assert np.max(np.abs(f)) <= 1e-6

    def test_hinge_spring_law(self):
        model = demagnetized(ChainModel())
        delta = 0.37
        angles = np.zeros(model.n_hinges)
        angles[2] = delta
        f = generalized_forces(model, Config(Pose(), angles))
        k = model.hinge_stiffness[2]
        assert f[6 + 2] == pytest.approx(-k * delta, rel=1e-4)

    def test_gradient_step_refinement(self):
        # halving the finite-difference steps barely changes the forces
        model = ChainModel()
        rng = np.random.default_rng(2)
        q = random_config(model, rng)
        f1 = generalized_forces(model, q, trans_step=1e-7, rot_step=1e-6)
        f2 = generalized_forces(model, q, trans_step=5e-8, rot_step=5e-7)
        scale = np.max(np.abs(f1))
        assert np.max(np.abs(f1 - f2)) <= 1e-5 * scale

    def test_forces_match_energy_differences(self):
        model = ChainModel()
        rng = np.random.default_rng(3)
        q = random_config(model, rng)
        f = generalized_forces(model, q)
        h = 1e-6
        for j in range(model.n_hinges):
            d = np.zeros(model.n_hinges)
            d[j] = h
            ep = total_energy(model, Config(q.base_pose, q.hinge_angles + d)).total
            em = total_energy(model, Config(q.base_pose, q.hinge_angles - d)).total
            fd = -(ep - em) / (2 * h)
            assert f[6 + j] == pytest.approx(fd, rel=1e-4, abs=1e-8)


class TestStepping:
    def test_settled_config_is_a_fixed_point(self):
        model = ChainModel()
        q, _, converged = settle(model, flat_config(model))
        assert converged
        q2 = step(model, q)
        assert np.allclose(q2.hinge_angles, q.hinge_angles, atol=1e-9)
        assert np.allclose(q2.base_pose.position, q.base_pose.position, atol=1e-12)

    def test_energy_never_increases(self):
        model = ChainModel()
        rng = np.random.default_rng(4)
        env = Environment(epm=[Dipole([0.04, 0.03, -0.05], [0.0, 50.0, 10.0])])
        for _ in range(5):
            q = random_config(model, rng)
            e_prev = total_energy(model, q, env).total
            for _ in range(40):
                q = step(model, q, env)
                e = total_energy(model, q, env).total
                assert e <= e_prev + 1e-12 * max(1.0, abs(e_prev))
                e_prev = e

    def test_determinism(self):
        model = ChainModel()
        rng = np.random.default_rng(5)
        q0 = random_config(model, rng)
        env = Environment(epm=[Dipole([0.05, 0.0, -0.04], [0.0, 30.0, 0.0])])

        def run(q):
            out = []
            for _ in range(30):
                q = step(model, q, env)
                out.append((q.base_pose.position.copy(), q.base_pose.rotation.copy(),
                            q.hinge_angles.copy()))
            return out

        a = run(q0.copy())
        b = run(q0.copy())
        for (pa, Ra, ha), (pb, Rb, hb) in zip(a, b):
            assert np.array_equal(pa, pb) and np.array_equal(Ra, Rb) and np.array_equal(ha, hb)

    def test_trajectory_frame_invariance(self):
        model = ChainModel()
        rng = np.random.default_rng(6)
        q0 = random_config(model, rng)
        epm = [Dipole([0.05, 0.0, -0.04], [0.0, 30.0, 0.0])]
        R = rotation_about_axis([0.0, 0.0, 1.0], 0.7)
        t = np.array([0.02, -0.01, 0.03])
        q0b = Config(Pose(R @ q0.base_pose.position + t, R @ q0.base_pose.rotation),
                     q0.hinge_angles)
        epmb = [Dipole(R @ d.position + t, R @ d.moment) for d in epm]
        qa, qb = q0.copy(), q0b
        for _ in range(40):
            qa = step(model, qa, Environment(epm=epm))
            qb = step(model, qb, Environment(epm=epmb))
        assert np.max(np.abs(qa.hinge_angles - qb.hinge_angles)) <= 1e-8
        assert abs(end_gap(model, qa) - end_gap(model, qb)) <= 1e-8

    def test_spring_limit_settles_to_rest_angles(self):
        rest = np.array([0.3, -0.2, 0.5, 0.1, -0.4])
        model = demagnetized(ChainModel(hinge_rest_angles=rest))
        q0 = Config(Pose(), rest + 0.5)
        q, _, converged = settle(model, q0)
        assert converged
        assert np.max(np.abs(q.hinge_angles - rest)) <= 1e-6

    def test_accordion_relaxes_flat(self):
        from magfold.scenarios import calibrated_model
        from magfold.states import StateLabel, classify

        model = calibrated_model()
        q, _, _ = settle(model, accordion_config(model))
        assert classify(model, q) is StateLabel.BETA
