"""Small rigid-transform helpers used across the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about an arbitrary axis."""
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValidationError("rotation axis must be non-zero")
    a = a / n
    K = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3) (polar decomposition)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1.0
        Q = U @ Vt
    return Q


def rotation_vector(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector (log map) of a rotation matrix.

    Magnitude is the rotation angle in [0, pi]; the zero matrix log maps to
    the zero vector.  Near pi the axis is recovered from the symmetric part.
    """
    R = np.asarray(R, dtype=float)
    c = float(np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0))
    angle = np.arccos(c)
    if angle < 1e-12:
        return np.zeros(3)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(w)
    if s > 1e-8:
        return (angle / s) * w
    # angle near pi: axis^2 from the symmetric part, signs from the skew part
    B = 0.5 * (R + np.eye(3))
    axis = np.sqrt(np.clip(np.diag(B), 0.0, None))
    k = int(np.argmax(axis))
    if axis[k] > 0.0:
        for j in range(3):
            if j != k and B[k, j] < 0.0:
                axis[j] = -axis[j]
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.zeros(3)
    return angle * axis / n


def check_rotation(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValidationError("rotation must be a 3x3 matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValidationError("rotation matrix is not orthonormal within tolerance")
    return R


@dataclass
class Pose:
    """Rigid transform: world position of the body origin plus body-to-world rotation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rotation = check_rotation(self.rotation)

    def apply(self, p) -> np.ndarray:
        return self.position + self.rotation @ np.asarray(p, dtype=float)

    def rotate(self, v) -> np.ndarray:
        return self.rotation @ np.asarray(v, dtype=float)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.apply(other.position), self.rotation @ other.rotation)

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.rotation.copy())

    def to_dict(self) -> dict:
        return {
            "position": [float(x) for x in self.position],
            "rotation": [[float(x) for x in row] for row in self.rotation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(np.array(d["position"], dtype=float), np.array(d["rotation"], dtype=float))
