"""Reproducible experiment runners on the calibrated chain.

Covers the squeeze-recovery test between force-controlled plates, the
self-assembly gap measurement, hinge-stiffness calibration against a target
snap gap, and the free unfold relaxation.  Every runner is deterministic
and returns a dataclass that serializes to a self-describing dict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (
    ChainModel,
    Config,
    Environment,
    Plates,
    SimParams,
    accordion_config,
    end_gap,
    forward_kinematics,
    generalized_forces,
    settle,
    staged_loop_config,
    step,
)
from .errors import ConvergenceError, DivergenceError, ValidationError
from .geometry import Pose, orthonormalize, rotation_about_axis
from .states import StateLabel, Thresholds, classify

# residual-force level that resolves scenario equilibria well below the
# report tolerances while staying fast near the stiff contact walls
PRACTICAL_THRESHOLD = 1e-6

# hinge stiffness produced by calibrate_stiffness against the 5 mm snap-gap
# target on the default geometry; the default consumed by the control and
# state suites
CALIBRATED_STIFFNESS = 6.6e-3


def calibrated_model(**overrides) -> ChainModel:
    """Default chain geometry with the calibrated hinge stiffness."""
    overrides.setdefault("hinge_stiffness", CALIBRATED_STIFFNESS)
    return ChainModel(**overrides)


def _scenario_params(params: SimParams | None) -> SimParams:
    return params or SimParams(convergence_threshold=PRACTICAL_THRESHOLD)


# ---------------------------------------------------------------------------
# squeeze recovery

@dataclass
class SqueezeReport:
    force: float  # N, commanded per plate
    axis: np.ndarray
    achieved_force: float  # N, measured plate reaction at hold
    max_hinge_deflection: float  # rad, under load
    max_link_displacement: float  # m, under load
    recovered: bool
    residual_hinge: float  # rad, after release
    residual_gap: float  # m, end-gap change after release

    def to_dict(self) -> dict:
        return {
            "force_n": self.force,
            "axis": self.axis.tolist(),
            "achieved_force_n": self.achieved_force,
            "max_hinge_deflection_rad": self.max_hinge_deflection,
            "max_link_displacement_m": self.max_link_displacement,
            "recovered": self.recovered,
            "residual_hinge_rad": self.residual_hinge,
            "residual_gap_m": self.residual_gap,
        }


_AXES = {"x": np.array([1.0, 0.0, 0.0]),
         "y": np.array([0.0, 1.0, 0.0]),
         "z": np.array([0.0, 0.0, 1.0])}


def _axis_vector(axis) -> np.ndarray:
    if isinstance(axis, str):
        if axis not in _AXES:
            raise ValidationError(f"axis: expected one of {sorted(_AXES)}, got {axis!r}")
        return _AXES[axis].copy()
    a = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValidationError("axis: must be non-zero")
    return a / n


def _plate_reaction(model: ChainModel, q: Config, plates: Plates) -> float:
    """Mean of the two plate reaction forces from the penalty penetrations."""
    pts, _, _ = forward_kinematics(model, q)
    s = pts @ plates.axis
    f_hi = plates.stiffness * float(np.sum(np.clip(s - plates.hi, 0.0, None)))
    f_lo = plates.stiffness * float(np.sum(np.clip(plates.lo - s, 0.0, None)))
    return 0.5 * (f_hi + f_lo)


def _align_to_axis(model: ChainModel, q: Config, a: np.ndarray) -> Config:
    """Rotate the whole structure about its centroid so the fold-plane
    normal lies along the plate axis (smaller of the two rotations)."""
    n = q.base_pose.rotation[:, 1]  # hinge axes are local y: the plane normal
    target = a if float(np.dot(n, a)) >= 0.0 else -a
    c = float(np.clip(np.dot(n, target), -1.0, 1.0))
    axis = np.cross(n, target)
    s = np.linalg.norm(axis)
    if s < 1e-12:
        return q.copy()
    R = rotation_about_axis(axis / s, float(np.arctan2(s, c)))
    pts, _, _ = forward_kinematics(model, q)
    cen = pts.mean(axis=0)
    return Config(
        Pose(cen + R @ (q.base_pose.position - cen),
             orthonormalize(R @ q.base_pose.rotation)),
        q.hinge_angles.copy(),
    )


def squeeze_test(
    model: ChainModel,
    q_gamma: Config,
    force: float,
    axis,
    params: SimParams | None = None,
    thresholds: Thresholds | None = None,
    align: bool = True,
) -> SqueezeReport:
    """Press the latched loop between force-servoed plates and release.

    With ``align`` (the default) the structure is first turned so its fold
    plane lies face-on to the plates, which is how a planar robot meets a
    vertical press; the plates may overlap to grip the zero-thickness sheet
    symmetrically.  With ``align=False`` the given orientation is kept and
    the plates load the structure edge-on, which probes in-plane crushing
    of the latch instead.  The servo settles at every probe and matches the
    measured penalty reaction to the commanded force; recovery compares
    hinge angles and end gap against the pre-squeeze state.  Divergence
    during any phase is re-raised with the phase name attached.
    """
    if classify(model, q_gamma, thresholds) != StateLabel.GAMMA:
        raise ValidationError("squeeze_test: start configuration must classify as Gamma")
    if not 0.0 <= force <= 20.0:
        raise ValidationError("force: must lie in [0, 20] N")
    a = _axis_vector(axis)
    params = _scenario_params(params)

    q_ref = _align_to_axis(model, q_gamma, a) if align else q_gamma.copy()
    pts0, _, _ = forward_kinematics(model, q_ref)
    h_ref = q_ref.hinge_angles.copy()
    gap_ref = end_gap(model, q_ref)

    if force == 0.0:
        return SqueezeReport(0.0, a, 0.0, 0.0, 0.0, True, 0.0, 0.0)

    s = pts0 @ a
    center = 0.5 * (s.max() + s.min())
    h_touch = 0.5 * (s.max() - s.min()) + 1e-5

    def plates_at(h: float) -> Plates:
        return Plates(axis=a, lo=center - h, hi=center + h, commanded_force=force)

    phase = "load"
    try:
        # secant servo on the plate half-width; each probe is a settled state
        q = q_ref.copy()
        k_plate = plates_at(h_touch).stiffness
        n_pts = pts0.shape[0]
        h_prev, f_prev = h_touch, 0.0
        h = h_touch - force / k_plate
        achieved = 0.0
        tol = max(0.02, 0.01 * force)
        for _ in range(30):
            pl = plates_at(h)
            q, _, _ = settle(model, q, Environment(plates=pl), params)
            achieved = _plate_reaction(model, q, pl)
            if abs(achieved - force) <= tol:
                break
            if abs(achieved - f_prev) > 1e-12:
                h_next = h + (force - achieved) * (h - h_prev) / (achieved - f_prev)
            elif achieved == 0.0:
                # no contact anywhere: close straight to the overlap that
                # would carry the force on every chain point at once
                h_next = -force / (n_pts * k_plate)
            else:
                h_next = h - 0.5 * (h_touch - h)
            h_prev, f_prev = h, achieved
            h = float(np.clip(h_next, -5e-3, h_touch))
        else:
            raise ConvergenceError(
                f"load: plate servo did not reach {force} N (last {achieved:.3f} N)"
            )

        phase = "hold"
        pl = plates_at(h)
        q, _, _ = settle(model, q, Environment(plates=pl), params)
        achieved = _plate_reaction(model, q, pl)
        pts_l, _, _ = forward_kinematics(model, q)
        max_hinge = float(np.max(np.abs(q.hinge_angles - h_ref)))
        max_disp = float(np.max(np.linalg.norm(pts_l - pts0, axis=1)))

        phase = "release"
        q, _, _ = settle(model, q, Environment(), params)
    except DivergenceError as exc:
        raise DivergenceError(f"{phase}: {exc}") from exc

    res_hinge = float(np.max(np.abs(q.hinge_angles - h_ref)))
    res_gap = abs(end_gap(model, q) - gap_ref)
    recovered = res_hinge < 1e-2 and res_gap < 0.5e-3
    return SqueezeReport(force, a, achieved, max_hinge, max_disp, recovered,
                         res_hinge, res_gap)


# ---------------------------------------------------------------------------
# self-assembly gap and stiffness calibration

def _snaps_from(model: ChainModel, gap: float, params: SimParams) -> bool:
    """Relax the closed staging shape at the given end gap; True if it latches."""
    try:
        q0 = staged_loop_config(model, gap)
    except ConvergenceError:
        return False
    q, _, _ = settle(model, q0, Environment(), params)
    return classify(model, q) == StateLabel.GAMMA


def self_assembly_gap(
    model: ChainModel,
    stiffness: float | None = None,
    params: SimParams | None = None,
    tolerance: float = 1e-4,
) -> float:
    """Largest end gap from which the chain snaps closed without help.

    Bisection over the closed staging family, relaxing with no controller
    present; resolution ``tolerance`` meters.  The smallest staging gap
    probed is the panel contact distance (closer staging starts inside the
    steric core and ejects); returns 0 when even that gap fails to latch.
    """
    if stiffness is not None:
        model = model.with_stiffness(stiffness)
    params = _scenario_params(params)
    lo = max(1e-3, model.contact_distance)
    hi = 0.98 * model.chain_length / 6.0
    if not _snaps_from(model, lo, params):
        return 0.0
    if _snaps_from(model, hi, params):
        return hi
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if _snaps_from(model, mid, params):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class CalibrationResult:
    hinge_stiffness: float  # N*m/rad
    achieved_gap: float  # m
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "hinge_stiffness": self.hinge_stiffness,
            "achieved_gap_m": self.achieved_gap,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def calibrate_stiffness(
    model: ChainModel,
    target_gap: float = 5e-3,
    tolerance: float = 0.5e-3,
    max_iterations: int = 60,
    params: SimParams | None = None,
) -> CalibrationResult:
    """Tune the hinge stiffness until the self-assembly gap hits the target.

    The snap gap decreases monotonically with stiffness, so the search
    bisects the stiffness on the predicate "still snaps from the target
    gap"; iteration stops once the bracket is within 0.5% relative, which
    keeps re-calibration of an already calibrated model a fixed point.
    """
    if not 0.5e-3 < target_gap < 20e-3:
        raise ValidationError("target_gap: must lie in (0.5, 20) mm")
    params = _scenario_params(params)
    k0 = float(np.asarray(model.hinge_stiffness).ravel()[0])

    achieved = self_assembly_gap(model, params=params)
    if abs(achieved - target_gap) <= tolerance:
        return CalibrationResult(k0, achieved, 0, True)

    snaps = lambda k: _snaps_from(model.with_stiffness(k), target_gap, params)
    iters = 0
    if achieved > target_gap:
        # too soft: grow stiffness until the target gap no longer snaps
        k_lo, k_hi = k0, 2.0 * k0
        while snaps(k_hi):
            k_lo, k_hi = k_hi, 2.0 * k_hi
            iters += 1
            if iters > max_iterations:
                raise ConvergenceError(
                    f"no upper stiffness bracket below {k_hi:.4g} N*m/rad"
                )
    else:
        k_lo, k_hi = 0.5 * k0, k0
        while not snaps(k_lo):
            k_lo, k_hi = 0.5 * k_lo, k_lo
            iters += 1
            if iters > max_iterations:
                raise ConvergenceError(
                    f"no snapping stiffness above {k_lo:.4g} N*m/rad"
                )
    while k_hi - k_lo > 0.005 * k_lo and iters < max_iterations:
        mid = 0.5 * (k_lo + k_hi)
        if snaps(mid):
            k_lo = mid
        else:
            k_hi = mid
        iters += 1
    achieved = self_assembly_gap(model.with_stiffness(k_lo), params=params)
    converged = abs(achieved - target_gap) <= tolerance
    if not converged and iters >= max_iterations:
        raise ConvergenceError(
            f"calibration bracket [{k_lo:.4g}, {k_hi:.4g}] N*m/rad exhausted "
            f"{max_iterations} iterations at gap {achieved * 1e3:.2f} mm"
        )
    return CalibrationResult(k_lo, achieved, iters, converged)


# ---------------------------------------------------------------------------
# free unfold

@dataclass
class UnfoldResult:
    trajectory: list  # (t, Config) samples
    final_config: Config
    final_label: StateLabel
    settled: bool

    def to_dict(self) -> dict:
        return {
            "samples": [
                {
                    "t": t,
                    "hinge_angles": q.hinge_angles.tolist(),
                }
                for t, q in self.trajectory
            ],
            "final_label": self.final_label.value,
            "settled": self.settled,
        }


def unfold_scenario(
    model: ChainModel,
    q0: Config | None = None,
    params: SimParams | None = None,
    max_time: float = 5.0,
    thresholds: Thresholds | None = None,
    environment: Environment | None = None,
) -> UnfoldResult:
    """Relax the chain under a static environment and label where it lands.

    Defaults to the accordion packing as the start.  The opening transient
    is stepped at the physics timestep and sampled at the params sample
    interval for ``max_time`` simulated seconds (or until the residual
    force crosses the convergence threshold, checked at sample points);
    any remaining slow tail is finished by the adaptive settler.
    """
    params = _scenario_params(params)
    q = (q0 or accordion_config(model)).copy()
    env = environment or Environment()
    dt = params.timestep
    stride = max(1, int(round(params.sample_interval / dt)))
    n_max = int(round(max_time / dt))

    trajectory = [(0.0, q.copy())]
    settled_flag = (
        np.max(np.abs(generalized_forces(model, q, env, params))) < params.convergence_threshold
    )
    t = 0.0
    if not settled_flag:
        for i in range(n_max):
            q = step(model, q, env, params)
            t = (i + 1) * dt
            if (i + 1) % stride == 0:
                trajectory.append((t, q.copy()))
                if np.max(np.abs(generalized_forces(model, q, env, params))) < params.convergence_threshold:
                    settled_flag = True
                    break
    if not settled_flag:
        q, _, settled_flag = settle(model, q, env, params)
        trajectory.append((t, q.copy()))
    return UnfoldResult(trajectory, q, classify(model, q, thresholds), bool(settled_flag))
