"""Point-dipole magnetics: moments, fields, pair energies, forces, torques.

All quantities are SI.  Magnets are reduced to point dipoles (optionally a
cloud of sub-dipoles via :func:`discretize_magnet`); the far-field of a
uniformly magnetized magnet is exactly the dipole of its total moment
m = Br * V / mu0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import MU0, MU0_OVER_4PI
from .errors import SingularityError, ValidationError
from .geometry import Pose

MIN_SEPARATION = 1e-6  # m; closer field/energy queries are errors, not clamps

RECTANGULAR = "rectangular-prism"
CYLINDER = "cylinder"


@dataclass
class MagnetSpec:
    """Physical description of a permanent magnet.

    dimensions: (lx, ly, lz) in meters for a rectangular prism, or
    (diameter, height) for a cylinder.  remanence in tesla.
    magnetization_axis is a unit vector in the magnet's body frame.
    """

    shape: str
    dimensions: tuple
    remanence: float
    magnetization_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.shape not in (RECTANGULAR, CYLINDER):
            raise ValidationError(f"shape must be '{RECTANGULAR}' or '{CYLINDER}', got {self.shape!r}")
        dims = tuple(float(d) for d in self.dimensions)
        want = 3 if self.shape == RECTANGULAR else 2
        if len(dims) != want:
            raise ValidationError(f"dimensions: expected {want} lengths for shape {self.shape}")
        if any(d <= 0 for d in dims):
            raise ValidationError("dimensions: all lengths must be > 0")
        self.dimensions = dims
        if self.remanence < 0:
            raise ValidationError("remanence: must be >= 0")
        ax = np.asarray(self.magnetization_axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(ax) - 1.0) > 1e-12:
            raise ValidationError("magnetization_axis: must have unit norm (tol 1e-12)")
        self.magnetization_axis = ax

    @property
    def volume(self) -> float:
        if self.shape == RECTANGULAR:
            lx, ly, lz = self.dimensions
            return lx * ly * lz
        d, h = self.dimensions
        return np.pi * (0.5 * d) ** 2 * h

    @property
    def max_dimension(self) -> float:
        return max(self.dimensions)


# Default grade: sintered NdFeB around N42.  The remanence of the real
# hardware is not published anywhere we can cite, so 1.3 T is an assumption
# carried through every derived force number.
DEFAULT_REMANENCE = 1.3


def small_end_magnet() -> MagnetSpec:
    """10 x 5 x 2 mm rectangular magnet, magnetized through its length."""
    return MagnetSpec(RECTANGULAR, (0.010, 0.005, 0.002), DEFAULT_REMANENCE,
                      np.array([1.0, 0.0, 0.0]))


def controller_cylinder() -> MagnetSpec:
    """40 mm diameter x 50 mm tall axially magnetized cylinder."""
    return MagnetSpec(CYLINDER, (0.040, 0.050), DEFAULT_REMANENCE)


@dataclass
class Dipole:
    position: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.moment = np.asarray(self.moment, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.moment))):
            raise ValidationError("dipole position and moment must be finite")


@dataclass
class Wrench:
    force: np.ndarray
    torque: np.ndarray  # about the dipole's own position

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=float).reshape(3)
        self.torque = np.asarray(self.torque, dtype=float).reshape(3)


def moment_from_spec(spec: MagnetSpec) -> float:
    """Dipole moment magnitude m = Br * V / mu0 in A*m^2."""
    return spec.remanence * spec.volume / MU0


def _separation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    r = b - a
    d = np.linalg.norm(r)
    if d < MIN_SEPARATION:
        raise SingularityError(
            f"separation {d:.3e} m is below the {MIN_SEPARATION:.0e} m guard"
        )
    return r


def dipole_field(source: Dipole, point) -> np.ndarray:
    """B field of a point dipole: (mu0/4pi) [3(m.r^)r^ - m] / |r|^3."""
    point = np.asarray(point, dtype=float).reshape(3)
    r = _separation(source.position, point)
    d = np.linalg.norm(r)
    rhat = r / d
    m = source.moment
    return MU0_OVER_4PI * (3.0 * np.dot(m, rhat) * rhat - m) / d**3


def pair_energy(a: Dipole, b: Dipole) -> float:
    """Interaction energy E = -m_b . B_a(x_b); symmetric in its arguments."""
    r = _separation(a.position, b.position)
    d = np.linalg.norm(r)
    rhat = r / d
    return MU0_OVER_4PI * (
        np.dot(a.moment, b.moment)
        - 3.0 * np.dot(a.moment, rhat) * np.dot(b.moment, rhat)
    ) / d**3


def pair_wrench(source: Dipole, target: Dipole) -> Wrench:
    """Force and torque exerted on ``target`` by ``source``.

    Force is the analytic gradient of m_t . B_s at the target position;
    torque is m_t x B_s about the target's own position.
    """
    r = _separation(source.position, target.position)
    d = np.linalg.norm(r)
    rhat = r / d
    ms, mt = source.moment, target.moment
    ms_r = np.dot(ms, rhat)
    mt_r = np.dot(mt, rhat)
    ms_mt = np.dot(ms, mt)
    force = (3.0 * MU0_OVER_4PI / d**4) * (
        ms_r * mt
        + mt_r * ms
        + ms_mt * rhat
        - 5.0 * ms_r * mt_r * rhat
    )
    torque = np.cross(mt, dipole_field(source, target.position))
    return Wrench(force, torque)


def discretize_magnet(spec: MagnetSpec, pose: Pose, subdivisions: int) -> list:
    """Split a finite magnet into sub-dipoles for near-field accuracy.

    Rectangular prisms use a k^3 voxel grid; cylinders use k axial layers,
    each sampled as a center point plus equal-area rings.  The sub-moments
    sum exactly to moment_from_spec(spec).
    """
    k = int(subdivisions)
    if k < 1:
        raise ValidationError("subdivisions: must be >= 1")
    m_axis = spec.magnetization_axis
    total = moment_from_spec(spec)
    dipoles = []
    if spec.shape == RECTANGULAR:
        lx, ly, lz = spec.dimensions
        w = total / k**3
        for ix in range(k):
            for iy in range(k):
                for iz in range(k):
                    local = np.array(
                        [
                            (ix + 0.5) / k * lx - 0.5 * lx,
                            (iy + 0.5) / k * ly - 0.5 * ly,
                            (iz + 0.5) / k * lz - 0.5 * lz,
                        ]
                    )
                    dipoles.append(Dipole(pose.apply(local), pose.rotate(w * m_axis)))
    else:
        diameter, height = spec.dimensions
        R = 0.5 * diameter
        # equal-area rings: ring j in [0, k) spans radii R*sqrt(j/k)..R*sqrt((j+1)/k)
        for iz in range(k):
            z = (iz + 0.5) / k * height - 0.5 * height
            for j in range(k):
                n_pts = 1 if j == 0 else 6 * j
                r_mid = R * np.sqrt((j + 0.5) / k)
                w = total / (k * k * n_pts)
                for p in range(n_pts):
                    phi = 2.0 * np.pi * (p + 0.5) / n_pts
                    local = np.array([r_mid * np.cos(phi), r_mid * np.sin(phi), z])
                    if j == 0:
                        local = np.array([0.0, 0.0, z])
                    dipoles.append(Dipole(pose.apply(local), pose.rotate(w * m_axis)))
    return dipoles
