"""Hinge-chain mechanics of the folding robot.

The robot is a chain of rigid links joined by torsional-spring hinges that
all rotate about their local y axis, so folding happens in the body x-z
plane.  Two permanent magnets ride on the first and last links with their
moments along the link axis.  Dynamics are first-order overdamped:
velocity = mobility * generalized force, with the generalized force taken
as the negative central-difference gradient of the total energy over
[base position, base orientation, hinge angles].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConvergenceError, DivergenceError, SingularityError, ValidationError
from .geometry import Pose, orthonormalize, rotation_about_axis
from .magnetics import (
    MIN_SEPARATION,
    Dipole,
    MagnetSpec,
    moment_from_spec,
    small_end_magnet,
)

HINGE_LIMIT = np.pi - 0.05  # rad; folds beyond this would self-penetrate

PET_DENSITY = 1390.0  # kg/m^3


@dataclass
class ChainModel:
    """Geometry, stiffness, and magnet mounting of the folding chain."""

    cells: int = 3
    links_per_cell: int = 2  # the notch splits each cell in two
    link_length: float = 0.0125
    link_width: float = 0.010
    thickness: float = 1e-4
    hinge_stiffness: float | np.ndarray = 0.01  # N*m/rad
    hinge_rest_angles: np.ndarray | None = None
    left_magnet: MagnetSpec = field(default_factory=small_end_magnet)
    right_magnet: MagnetSpec = field(default_factory=small_end_magnet)
    # body-frame mount positions on the first/last link.  Each magnet is
    # embedded at the center of its end link; both moments lie in the fold
    # plane along the link axis with opposite body signs, so the closed
    # overlapped-triangle shape latches them side by side antiparallel
    left_mount: np.ndarray | None = None  # default: center of the first link
    left_moment_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    right_mount: np.ndarray | None = None  # default: center of the last link
    right_moment_axis: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    # steric exclusion between the rigid end panels: spheres of this radius
    # along the first and last link midlines.  Because the magnets sit inside
    # the panels, head-to-tail magnet docking always hits panel first, which
    # removes the deep tip-to-tip dipole trap
    contact_distance: float = 3e-3  # m, core radius per wall-sphere pair
    contact_stiffness: float = 50.0  # J, hard-core scale: E = k (c0/d - 1)^4 inside the core
    wall_spheres_per_link: int = 7
    # each end magnet enters the chain energy as this many equal sub-dipoles
    # spread along its length; a single point dipole badly overstates the
    # tilt preference of two long magnets latched side by side (keep >= 3)
    end_magnet_subdivisions: int = 5

    def __post_init__(self):
        if self.cells < 1:
            raise ValidationError("cells: must be >= 1")
        if self.links_per_cell < 1:
            raise ValidationError("links_per_cell: must be >= 1")
        if self.link_length <= 0:
            raise ValidationError("link_length: must be > 0")
        k = np.asarray(self.hinge_stiffness, dtype=float)
        if k.ndim == 0:
            k = np.full(self.n_hinges, float(k))
        if k.shape != (self.n_hinges,):
            raise ValidationError("hinge_stiffness: scalar or one value per hinge")
        if np.any(k <= 0):
            raise ValidationError("hinge_stiffness: must be > 0")
        self.hinge_stiffness = k
        r = self.hinge_rest_angles
        r = np.zeros(self.n_hinges) if r is None else np.asarray(r, dtype=float)
        if r.shape != (self.n_hinges,):
            raise ValidationError("hinge_rest_angles: one value per hinge")
        self.hinge_rest_angles = r
        if self.left_mount is None:
            self.left_mount = np.array([0.5 * self.link_length, 0.0, 0.0])
        if self.right_mount is None:
            self.right_mount = np.array([0.5 * self.link_length, 0.0, 0.0])
        self.left_mount = np.asarray(self.left_mount, dtype=float).reshape(3)
        self.right_mount = np.asarray(self.right_mount, dtype=float).reshape(3)
        self.left_moment_axis = np.asarray(self.left_moment_axis, dtype=float).reshape(3)
        self.right_moment_axis = np.asarray(self.right_moment_axis, dtype=float).reshape(3)

    @property
    def n_links(self) -> int:
        return self.cells * self.links_per_cell

    @property
    def n_hinges(self) -> int:
        return self.cells * self.links_per_cell - 1

    @property
    def chain_length(self) -> float:
        return self.n_links * self.link_length

    @property
    def link_mass(self) -> float:
        return PET_DENSITY * self.link_length * self.link_width * self.thickness

    def mount_arrays(self):
        """(2,3) body positions and (2,3) body moment vectors of the end magnets."""
        pos = np.stack([self.left_mount, self.right_mount])
        mom = np.stack(
            [
                moment_from_spec(self.left_magnet) * self.left_moment_axis,
                moment_from_spec(self.right_magnet) * self.right_moment_axis,
            ]
        )
        return pos, mom

    def sub_offsets(self) -> np.ndarray:
        """(2, S) signed offsets of the sub-dipoles along each moment axis."""
        S = int(self.end_magnet_subdivisions)
        if S < 1:
            raise ValidationError("end_magnet_subdivisions: must be >= 1")
        out = np.empty((2, S))
        for row, spec in enumerate((self.left_magnet, self.right_magnet)):
            length = spec.dimensions[int(np.argmax(np.abs(spec.magnetization_axis)))] \
                if len(spec.dimensions) == 3 else spec.dimensions[1]
            out[row] = length * ((np.arange(S) + 0.5) / S - 0.5)
        return out

    def wall_arc_positions(self) -> np.ndarray:
        """(W,) sphere-center arc positions along each end link."""
        W = int(self.wall_spheres_per_link)
        if W < 2:
            raise ValidationError("wall_spheres_per_link: must be >= 2")
        return np.linspace(0.0, self.link_length, W)

    def with_stiffness(self, k: float) -> "ChainModel":
        return replace(self, hinge_stiffness=float(k))


@dataclass
class Config:
    """Generalized coordinates: pose of the first link plus hinge angles."""

    base_pose: Pose = field(default_factory=Pose)
    hinge_angles: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def __post_init__(self):
        self.hinge_angles = np.asarray(self.hinge_angles, dtype=float).reshape(-1)
        if np.any(self.hinge_angles <= -np.pi) or np.any(self.hinge_angles > np.pi):
            raise ValidationError("hinge_angles: must lie in (-pi, pi]")

    def copy(self) -> "Config":
        return Config(self.base_pose.copy(), self.hinge_angles.copy())


@dataclass
class Plates:
    """Force-controlled parallel squeeze plates along a world axis."""

    axis: np.ndarray
    lo: float
    hi: float
    stiffness: float = 1e4
    commanded_force: float = 0.0

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(self.axis)
        if n == 0:
            raise ValidationError("plate axis must be non-zero")
        self.axis = self.axis / n
        if self.commanded_force < 0:
            raise ValidationError("commanded plate force must be >= 0")


@dataclass
class Environment:
    """External world acting on the chain: controller dipoles, plates, gravity."""

    epm: list | None = None  # list of Dipole in world frame
    plates: Plates | None = None
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)

    def epm_array(self) -> np.ndarray:
        if not self.epm:
            return np.zeros((0, 6))
        return np.array([[*d.position, *d.moment] for d in self.epm], dtype=float)


@dataclass
class SimParams:
    timestep: float = 1e-3
    max_steps: int = 200_000
    convergence_threshold: float = 1e-8  # max |generalized force|
    min_separation: float = MIN_SEPARATION
    mobility_translation: float = 1e-2  # m / (N s)
    # rotational mobility chosen consistent with the translational value at
    # the link length scale (mob_t / L^2); see the project notes
    mobility_rotation: float = 64.0  # rad / (N m s)
    trans_fd_step: float = 1e-7
    rot_fd_step: float = 1e-6
    max_backtracks: int = 45
    sample_interval: float = 0.1


def _kernel_args(model: ChainModel, env: Environment, params: SimParams):
    mount_pos, mount_m = model.mount_arrays()
    pl = env.plates
    plates_on = 1 if pl is not None else 0
    plate_axis = pl.axis if pl is not None else np.zeros(3)
    plate_lo = pl.lo if pl is not None else 0.0
    plate_hi = pl.hi if pl is not None else 0.0
    plate_k = pl.stiffness if pl is not None else 0.0
    return (
        model.link_length,
        model.hinge_stiffness,
        model.hinge_rest_angles,
        mount_pos,
        mount_m,
        env.epm_array(),
        plates_on,
        plate_axis,
        plate_lo,
        plate_hi,
        plate_k,
        model.contact_distance,
        model.contact_stiffness,
        env.gravity,
        model.link_mass,
        params.min_separation,
        model.sub_offsets(),
        model.wall_arc_positions(),
    )


def _check_dims(model: ChainModel, q: Config):
    if q.hinge_angles.shape != (model.n_hinges,):
        raise ValidationError(
            f"hinge_angles: expected {model.n_hinges} values, got {q.hinge_angles.shape[0]}"
        )


def _raise_singular(status: int):
    if status == 1:
        raise SingularityError("end magnets closer than the separation guard")
    if status == 2:
        raise SingularityError("an end magnet overlaps a controller dipole")


def forward_kinematics(model: ChainModel, q: Config):
    """Link poses and the world-frame end-magnet dipoles.

    Returns (points, rotations, [left_dipole, right_dipole]) where points is
    the (n_links+1, 3) array of joint positions.
    """
    _check_dims(model, q)
    mount_pos, mount_m = model.mount_arrays()
    pts, pos, mom = _kernels.magnet_world(
        q.base_pose.position,
        q.base_pose.rotation,
        q.hinge_angles,
        model.link_length,
        mount_pos,
        mount_m,
    )
    _, rots = _kernels.fk_chain(
        q.base_pose.position, q.base_pose.rotation, q.hinge_angles, model.link_length
    )
    return pts, rots, [Dipole(pos[0], mom[0]), Dipole(pos[1], mom[1])]


def end_dipoles(model: ChainModel, q: Config):
    return forward_kinematics(model, q)[2]


def end_gap(model: ChainModel, q: Config) -> float:
    """Distance between the two end-magnet centers."""
    left, right = end_dipoles(model, q)
    return float(np.linalg.norm(right.position - left.position))


@dataclass
class EnergyBreakdown:
    elastic: float
    internal_magnetic: float
    controller_magnetic: float
    external: float

    @property
    def total(self) -> float:
        return self.elastic + self.internal_magnetic + self.controller_magnetic + self.external

    def to_dict(self) -> dict:
        return {
            "elastic": self.elastic,
            "internal_magnetic": self.internal_magnetic,
            "controller_magnetic": self.controller_magnetic,
            "external": self.external,
            "total": self.total,
        }


def total_energy(
    model: ChainModel, q: Config, env: Environment | None = None, params: SimParams | None = None
) -> EnergyBreakdown:
    env = env or Environment()
    params = params or SimParams()
    _check_dims(model, q)
    status, e = _kernels.chain_energy(
        q.base_pose.position,
        q.base_pose.rotation,
        q.hinge_angles,
        *_kernel_args(model, env, params),
    )
    _raise_singular(status)
    return EnergyBreakdown(float(e[0]), float(e[1]), float(e[2]), float(e[3]))


def generalized_forces(
    model: ChainModel,
    q: Config,
    env: Environment | None = None,
    params: SimParams | None = None,
    trans_step: float | None = None,
    rot_step: float | None = None,
) -> np.ndarray:
    """Negative energy gradient over [base pos (3), base rot (3), hinges]."""
    env = env or Environment()
    params = params or SimParams()
    _check_dims(model, q)
    status, g = _kernels.chain_grad(
        q.base_pose.position,
        q.base_pose.rotation,
        q.hinge_angles,
        *_kernel_args(model, env, params),
        trans_step if trans_step is not None else params.trans_fd_step,
        rot_step if rot_step is not None else params.rot_fd_step,
    )
    _raise_singular(status)
    return -g


def _advance(q: Config, forces: np.ndarray, dt: float, params: SimParams) -> Config:
    pos = q.base_pose.position + dt * params.mobility_translation * forces[0:3]
    w = dt * params.mobility_rotation * forces[3:6]
    angle = np.linalg.norm(w)
    R = q.base_pose.rotation
    if angle > 0:
        R = rotation_about_axis(w / angle, angle) @ R
    R = orthonormalize(R)
    hinges = q.hinge_angles + dt * params.mobility_rotation * forces[6:]
    hinges = np.clip(hinges, -HINGE_LIMIT, HINGE_LIMIT)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(hinges))):
        raise DivergenceError("non-finite coordinates after step; reduce the timestep")
    return Config(Pose(pos, R), hinges)


def step(
    model: ChainModel,
    q: Config,
    env: Environment | None = None,
    params: SimParams | None = None,
    dt: float | None = None,
) -> Config:
    """One overdamped Euler step with dissipative backtracking.

    The trial update q' = q + dt * mobility * force is halved until the total
    energy (for the environment frozen at this instant) does not increase,
    which keeps trajectories on an energy-descent path even through stiff
    near-contact regions.
    """
    env = env or Environment()
    params = params or SimParams()
    dt = params.timestep if dt is None else dt
    forces = generalized_forces(model, q, env, params)
    e0 = total_energy(model, q, env, params).total
    h = dt
    for _ in range(params.max_backtracks):
        trial = _advance(q, forces, h, params)
        try:
            e1 = total_energy(model, trial, env, params).total
        except SingularityError:
            h *= 0.5
            continue
        if e1 <= e0 + 1e-15 * max(1.0, abs(e0)):
            return trial
        h *= 0.5
    return q.copy()  # no admissible step found; stay put


def _descend(model, q, env, params, max_steps, dt_max):
    """Adaptive-timestep energy descent; returns (config, steps, converged)."""
    h = params.timestep
    e0 = total_energy(model, q, env, params).total
    for i in range(max_steps):
        forces = generalized_forces(model, q, env, params)
        if np.max(np.abs(forces)) < params.convergence_threshold:
            return q, i, True
        accepted = False
        for _ in range(params.max_backtracks):
            trial = _advance(q, forces, h, params)
            try:
                e1 = total_energy(model, trial, env, params).total
            except SingularityError:
                h *= 0.5
                continue
            if e1 <= e0 + 1e-15 * max(1.0, abs(e0)):
                q, e0 = trial, e1
                h = min(h * 1.5, dt_max)
                accepted = True
                break
            h *= 0.5
        if not accepted:
            return q, i, False
    return q, max_steps, False


def _polish(model, q, env, params, rounds: int = 6, maxiter: int = 400):
    """Quasi-Newton refinement of a near-equilibrium configuration.

    Coordinates are [base position, base rotation vector about the current
    orientation, hinge angles]; each round re-centers the rotation so the
    small-angle parametrization stays accurate.  Singular trial points get a
    large finite energy and a zero gradient, which makes the line search back
    off instead of crashing.
    """
    from scipy.optimize import minimize

    big = 1e30
    bounds = [(None, None)] * 6 + [(-HINGE_LIMIT, HINGE_LIMIT)] * model.n_hinges

    for _ in range(rounds):
        R0 = q.base_pose.rotation

        def unpack(x):
            w = x[3:6]
            angle = np.linalg.norm(w)
            R = rotation_about_axis(w / angle, angle) @ R0 if angle > 0 else R0
            return Config(Pose(x[0:3], orthonormalize(R)), np.asarray(x[6:]))

        def fun(x):
            try:
                cfg = unpack(x)
                e = total_energy(model, cfg, env, params).total
                g = -generalized_forces(model, cfg, env, params)
            except SingularityError:
                return big, np.zeros_like(x)
            if not np.isfinite(e):
                return big, np.zeros_like(x)
            return e, g

        x0 = np.concatenate([q.base_pose.position, np.zeros(3), q.hinge_angles])
        res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": maxiter, "ftol": 1e-18, "gtol": 1e-14})
        trial = unpack(res.x)
        if total_energy(model, trial, env, params).total <= total_energy(model, q, env, params).total:
            q = trial
        forces = generalized_forces(model, q, env, params)
        if np.max(np.abs(forces)) < params.convergence_threshold:
            return q, True
    return q, False


def settle(
    model: ChainModel,
    q: Config,
    env: Environment | None = None,
    params: SimParams | None = None,
    dt_max: float = 50.0,
):
    """Relax to a local equilibrium.

    A deterministic adaptive-timestep energy descent does the basin finding;
    if the residual force is still above the convergence threshold after the
    descent budget (steep contact walls make pure descent zigzag), a bounded
    quasi-Newton polish finishes the job without leaving the basin.  Returns
    (config, steps_taken, converged) where converged reports whether the
    residual generalized force fell below params.convergence_threshold.
    """
    env = env or Environment()
    params = params or SimParams()
    burn = min(params.max_steps, 2000)
    q, steps, converged = _descend(model, q, env, params, burn, dt_max)
    if converged:
        return q, steps, True
    q, converged = _polish(model, q, env, params)
    if converged:
        return q, steps, True
    remaining = params.max_steps - steps
    if remaining > 0:
        q, extra, converged = _descend(model, q, env, params, remaining, dt_max)
        steps += extra
    return q, steps, converged


# ---------------------------------------------------------------------------
# reference configurations

def flat_config(model: ChainModel) -> Config:
    return Config(Pose(), np.zeros(model.n_hinges))


def accordion_config(model: ChainModel, fold: float = 2.9) -> Config:
    """Alternating +/- folds, the capsule-packed shape."""
    angles = np.array([fold if i % 2 == 0 else -fold for i in range(model.n_hinges)])
    return Config(Pose(), angles)


def staged_loop_config(model: ChainModel, gap: float) -> Config:
    """Closed-loop shape with the end magnets a prescribed distance apart.

    The chain is folded through a full 360 degrees so the last link lies
    parallel over the first with a transverse offset equal to ``gap``
    (magnet centers sit at the link midpoints, so the offset is the magnet
    gap).  Among all hinge vectors satisfying those closure constraints the
    one with minimal squared norm is returned, which makes the family a
    smooth, elastically cheapest approach path for self-assembly staging.
    """
    from scipy.optimize import minimize

    if model.n_hinges != 5:
        raise ValidationError("the built-in closed shape assumes the default 6-link chain")
    if not 0 < gap < 0.99 * model.chain_length / 6.0:
        raise ValidationError("gap: must be positive and below one link length")
    L = model.link_length

    def _offset(h):
        # x-z position of the last link's start relative to the first's
        phis = np.concatenate([[0.0], np.cumsum(h)])[:5]
        return L * np.array([np.cos(phis).sum(), -np.sin(phis).sum()])

    cons = [
        {"type": "eq", "fun": lambda h: _offset(h)[0]},
        {"type": "eq", "fun": lambda h: _offset(h)[1] - gap},
        {"type": "eq", "fun": lambda h: h.sum() - 2.0 * np.pi},
    ]
    res = minimize(
        lambda h: np.sum(h**2),
        np.full(5, 2.0 * np.pi / 5.0),
        constraints=cons,
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-14},
    )
    if not res.success or np.any(np.abs(res.x) >= HINGE_LIMIT):
        raise ConvergenceError(f"no closed-loop staging found for gap {gap:.4g} m")
    return Config(Pose(), res.x)


def folded_loop_config(model: ChainModel) -> Config:
    """Near-closed loop: the end magnets start just outside the steric wall,
    inside the latch's capture basin for the default stiffness range."""
    return staged_loop_config(model, 3.5e-3)


def locked_config(model: ChainModel, params: SimParams | None = None) -> Config:
    """Relaxed magnetically latched state, computed by settling the closed loop."""
    if params is None:
        # the contact wall makes the default 1e-8 residual impractically slow;
        # 1e-6 resolves the latch geometry to well below a micron
        params = SimParams(convergence_threshold=1e-6)
    q, _, _ = settle(model, folded_loop_config(model), Environment(), params)
    return q
