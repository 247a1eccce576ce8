"""EPM motion scripting: primitives, pose evaluation, closed-loop execution.

A control script moves the external controller rig (two axially magnetized
cylinders straddling the working plane) along a timed sequence of hold,
translate, and rotate primitives.  Execution steps the chain quasi-statics
against the moving rig and reports the fold-state transition history.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import (
    ChainModel,
    Config,
    Environment,
    Plates,
    SimParams,
    end_dipoles,
    end_gap,
    step,
    total_energy,
)
from .errors import ValidationError
from .geometry import Pose, rotation_about_axis
from .magnetics import Dipole, controller_cylinder, moment_from_spec
from .states import StateLabel, Thresholds, classify, moment_alignment

HOLD = "hold"
TRANSLATE = "translate"
ROTATE = "rotate"

# Controller rig: two cylinders at +-EPM_HALF_SPACING along the rig z axis,
# both magnetized along the rig y axis.  The symmetric pair cancels
# out-of-plane force on an in-plane chain while the rig is untilted.
EPM_MOMENT = moment_from_spec(controller_cylinder())
EPM_HALF_SPACING = 0.040


@dataclass
class ControlPrimitive:
    """One timed motion segment of the controller rig.

    hold keeps the pose; translate moves the rig position at ``speed`` m/s
    along a unit ``axis``; rotate spins the rig orientation in place at
    ``rate`` rad/s about a world-frame unit ``axis`` through the rig origin.
    """

    kind: str
    duration: float
    axis: np.ndarray | None = None
    speed: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in (HOLD, TRANSLATE, ROTATE):
            raise ValidationError(f"kind must be hold/translate/rotate, got {self.kind!r}")
        if not (self.duration > 0.0 and math.isfinite(self.duration)):
            raise ValidationError("duration: must be a finite positive number of seconds")
        if self.kind == HOLD:
            self.axis = None
        else:
            if self.axis is None:
                raise ValidationError(f"{self.kind}: axis required")
            ax = np.asarray(self.axis, dtype=float).reshape(3)
            if abs(np.linalg.norm(ax) - 1.0) > 1e-9:
                raise ValidationError(f"{self.kind}: axis must have unit norm")
            self.axis = ax

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "duration": self.duration}
        if self.kind == TRANSLATE:
            d["axis"] = self.axis.tolist()
            d["speed"] = self.speed
        elif self.kind == ROTATE:
            d["axis"] = self.axis.tolist()
            d["rate"] = self.rate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ControlPrimitive":
        return cls(
            kind=d["kind"],
            duration=float(d["duration"]),
            axis=None if d.get("axis") is None else np.asarray(d["axis"], dtype=float),
            speed=float(d.get("speed", 0.0)),
            rate=float(d.get("rate", 0.0)),
        )


def hold(duration: float) -> ControlPrimitive:
    return ControlPrimitive(HOLD, duration)


def translate(axis, speed: float, duration: float) -> ControlPrimitive:
    return ControlPrimitive(TRANSLATE, duration, np.asarray(axis, dtype=float), speed=speed)


def rotate(axis, rate: float, duration: float) -> ControlPrimitive:
    return ControlPrimitive(ROTATE, duration, np.asarray(axis, dtype=float), rate=rate)


@dataclass
class ControlScript:
    name: str
    initial_pose: Pose
    primitives: list
    description: str = ""

    def __post_init__(self):
        if not self.primitives:
            raise ValidationError("a control script needs at least one primitive")

    @property
    def total_duration(self) -> float:
        return float(sum(p.duration for p in self.primitives))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "initial_pose": self.initial_pose.to_dict(),
            "primitives": [p.to_dict() for p in self.primitives],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "ControlScript":
        return cls(
            name=d["name"],
            description=d.get("description", ""),
            initial_pose=Pose.from_dict(d["initial_pose"]),
            primitives=[ControlPrimitive.from_dict(p) for p in d["primitives"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "ControlScript":
        return cls.from_dict(json.loads(text))


def epm_pose_at(script: ControlScript, t: float) -> Pose:
    """Rig pose after integrating the primitives up to time ``t``.

    Piecewise closed form, continuous across segment boundaries; querying a
    boundary from either side agrees to machine precision.
    """
    total = script.total_duration
    if not (0.0 <= t <= total + 1e-12):
        raise ValidationError(f"t={t} outside script duration [0, {total}]")
    pose = script.initial_pose.copy()
    remaining = t
    for p in script.primitives:
        # absorb float crumbs from the running subtraction into the current
        # segment instead of leaking a ~1e-16 s sliver into the next one;
        # keeps replay of a recorded session bit-identical to the live poses
        tau = remaining if remaining <= p.duration + 1e-10 else p.duration
        if tau > 0.0:
            if p.kind == TRANSLATE:
                pose.position = pose.position + p.axis * (p.speed * tau)
            elif p.kind == ROTATE:
                R = rotation_about_axis(p.axis, p.rate * tau)
                pose.rotation = R @ pose.rotation
        remaining -= tau
        if remaining <= 0.0:
            break
    return pose


def epm_rig(pose: Pose) -> list:
    """The two controller cylinder dipoles at a given rig pose."""
    m = pose.rotate(np.array([0.0, EPM_MOMENT, 0.0]))
    up = pose.apply(np.array([0.0, 0.0, EPM_HALF_SPACING]))
    dn = pose.apply(np.array([0.0, 0.0, -EPM_HALF_SPACING]))
    return [Dipole(up, m), Dipole(dn, m)]


def bench_environment(half_gap: float = 2e-3) -> Environment:
    """Workspace channel keeping the chain quasi-planar.

    Models the transparent cover plates that hold the sheet in its working
    plane while the rig maneuvers; a zero-commanded-force kinematic sandwich
    around z = 0.
    """
    plates = Plates(axis=np.array([0.0, 0.0, 1.0]), lo=-half_gap, hi=half_gap,
                    commanded_force=0.0)
    return Environment(plates=plates)


@dataclass
class TrajectorySample:
    t: float
    config: Config
    label: StateLabel
    end_gap: float
    alignment: float
    energy: object  # EnergyBreakdown

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "config": {
                "base_pose": self.config.base_pose.to_dict(),
                "hinge_angles": self.config.hinge_angles.tolist(),
            },
            "label": self.label.value,
            "end_gap_m": self.end_gap,
            "alignment": self.alignment,
            "energy": self.energy.to_dict(),
        }


@dataclass
class TransitionReport:
    timeline: list  # (t, StateLabel) at every sample
    first_seen: dict  # StateLabel -> first time observed
    final_label: StateLabel
    min_end_gap: float
    flip_events: int

    def to_dict(self) -> dict:
        return {
            "timeline": [(t, lab.value) for t, lab in self.timeline],
            "first_seen": {lab.value: t for lab, t in self.first_seen.items()},
            "final_label": self.final_label.value,
            "min_end_gap_m": self.min_end_gap,
            "flip_events": self.flip_events,
        }


def execute(
    script: ControlScript,
    model: ChainModel,
    q0: Config,
    params: SimParams | None = None,
    environment: Environment | None = None,
    thresholds: Thresholds | None = None,
):
    """Run a script against the chain and report the state transition history.

    The environment at sim time t is the controller rig at
    ``epm_pose_at(script, t)`` merged with any static ``environment``
    (plates, gravity).  Deterministic: identical inputs give identical
    trajectories.  Returns (samples, report).
    """
    params = params or SimParams()
    base = environment or Environment()
    q = Config(q0.base_pose.copy(), q0.hinge_angles.copy())
    dt = params.timestep
    n_steps = int(round(script.total_duration / dt))
    stride = max(1, int(round(params.sample_interval / dt)))

    samples = []
    timeline = []
    first_seen = {}
    min_gap = np.inf
    flips = 0
    prev_sign = 0.0

    def record(t, q):
        lab = classify(model, q, thresholds)
        gap = end_gap(model, q)
        e = total_energy(model, q, Environment(epm=epm_rig(epm_pose_at(script, t)),
                                              plates=base.plates, gravity=base.gravity),
                         params)
        samples.append(TrajectorySample(t, Config(q.base_pose.copy(), q.hinge_angles.copy()),
                                        lab, gap, moment_alignment(model, q), e))
        timeline.append((t, lab))
        first_seen.setdefault(lab, t)
        return gap

    min_gap = min(min_gap, record(0.0, q))
    a0, b0 = end_dipoles(model, q)
    prev_sign = math.copysign(1.0, float(np.dot(a0.moment, b0.moment)))

    total = script.total_duration
    for i in range(n_steps):
        # clamp only real overshoot past the script end; a crumb-scale
        # excess keeps the raw step time so replaying a recorded session
        # uses bit-identical pose arguments to the live run
        t_pose = (i + 1) * dt
        if t_pose > total + 1e-12:
            t_pose = total
        t = min(t_pose, total)
        env = Environment(epm=epm_rig(epm_pose_at(script, t_pose)),
                          plates=base.plates, gravity=base.gravity)
        q = step(model, q, env, params)
        da, db = end_dipoles(model, q)
        dot = float(np.dot(da.moment, db.moment))
        if dot != 0.0:
            s = math.copysign(1.0, dot)
            if prev_sign != 0.0 and s != prev_sign:
                flips += 1
            prev_sign = s
        if (i + 1) % stride == 0 or i == n_steps - 1:
            min_gap = min(min_gap, record(t, q))
        else:
            min_gap = min(min_gap, end_gap(model, q))

    report = TransitionReport(timeline, first_seen, timeline[-1][1], float(min_gap), flips)
    return samples, report


def working_frame() -> Pose:
    """Base pose putting the chain in the x-y working plane.

    Links extend along +x and hinges fold within the plane; the plane
    normal is +z.
    """
    return Pose(rotation=rotation_about_axis(np.array([1.0, 0.0, 0.0]), 0.5 * np.pi))


def beta_start(model: ChainModel) -> Config:
    """Flat chain laid out in the working frame; classifies as Beta."""
    return Config(working_frame(), np.zeros(model.n_hinges))


def fig3_script(
    standoff: float = 0.060,
    working_distance: float = 0.040,
    settle_hold: float = 0.3,
    swift_rate: float = 4.0 * np.pi,
    orient_rate: float = 1.0,
    approach_speed: float = 0.010,
    dock_hold: float = 4.0,
    crank_rate: float = 0.15,
    crank_turns: float = 1.25,
    shift_speed: float = 0.010,
    shift_distance: float = 0.035,
    flip_rate: float = 1.0,
    flip_turns: float = 1.0,
    settle_time: float = 4.0,
    release_speed: float = 0.030,
    release_time: float = 2.0,
) -> ControlScript:
    """Built-in beta-to-gamma folding sequence.

    The rig starts ``standoff`` meters below the chain midpoint with its
    field pointed at the chain, holds to keep the flat state, swiftly flips
    its polarity about x to set divergent end moments, orients the field
    along the chain axis, and rises along y to ``working_distance``.  The
    free end then docks over the rig handle, a slow rotation about the
    plane normal winds the chain around the dock until the two end magnets
    face each other in the in-plane repulsive standoff, a sideways shift
    puts the handle past the near magnet so the far one sits in weaker
    field, and a swift full turn about the plane normal winds the pair the
    rest of the way so the magnets flip into antiparallel alignment and
    self-assemble.  The rig finally backs away along y and the latch holds
    on its own.  All rates, durations, and distances are tunable.
    """
    x_hat = np.array([1.0, 0.0, 0.0])
    y_hat = np.array([0.0, 1.0, 0.0])
    z_hat = np.array([0.0, 0.0, 1.0])
    start = Pose(position=np.array([0.0375, -standoff, 0.0]))
    approach = standoff - working_distance
    prims = [
        hold(settle_hold),
        rotate(x_hat, swift_rate, np.pi / swift_rate),
        rotate(z_hat, orient_rate, 0.5 * np.pi / orient_rate),
        translate(y_hat, approach_speed, approach / approach_speed),
        hold(dock_hold),
        rotate(z_hat, crank_rate, 2.0 * np.pi * crank_turns / crank_rate),
        translate(x_hat, shift_speed, shift_distance / shift_speed),
        rotate(z_hat, flip_rate, 2.0 * np.pi * flip_turns / flip_rate),
        hold(settle_time),
        translate(y_hat, -release_speed, release_time),
    ]
    return ControlScript(
        name="beta-to-gamma",
        initial_pose=start,
        primitives=prims,
        description="Wind the flat chain around the docked controller rig "
                    "into the magnetically latched loop.",
    )
