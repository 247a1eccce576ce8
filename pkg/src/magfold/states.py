"""Fold-state classification, energy landscapes, and alignment diagnostics.

The chain stabilizes in three named morphologies: Alpha (accordion fold),
Beta (flat strip), Gamma (closed loop with the end magnets latched).
Classification is threshold-based and total: every configuration maps to
exactly one label, with Transitional as the catch-all.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .chain import HINGE_LIMIT, ChainModel, Config, Environment, SimParams, end_dipoles, end_gap, total_energy
from .errors import SingularityError, ValidationError
from .geometry import Pose
from .magnetics import Dipole, pair_wrench


class StateLabel(str, Enum):
    ALPHA = "alpha"
    BETA = "beta"
    GAMMA = "gamma"
    TRANSITIONAL = "transitional"


@dataclass
class Thresholds:
    """Decision thresholds for the state labels; defaults separate the three
    reference shapes with wide margins and survive +-20% perturbation."""

    beta_mean_angle: float = 0.2  # rad
    beta_gap_fraction: float = 0.5  # of chain length
    lock_gap: float = 6e-3  # m
    lock_alignment: float = -0.7  # unit-moment dot product upper bound
    alpha_fold: float = 2.0  # rad, per-hinge minimum for the accordion

    def scaled(self, factor: float) -> "Thresholds":
        return replace(
            self,
            beta_mean_angle=self.beta_mean_angle * factor,
            beta_gap_fraction=self.beta_gap_fraction * factor,
            lock_gap=self.lock_gap * factor,
            lock_alignment=self.lock_alignment * factor,
            alpha_fold=self.alpha_fold * factor,
        )


def moment_alignment(model: ChainModel, q: Config) -> float:
    """Dot product of the unit end-magnet moments; -1 is the latched pole."""
    a, b = end_dipoles(model, q)
    na = np.linalg.norm(a.moment)
    nb = np.linalg.norm(b.moment)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.moment, b.moment) / (na * nb))


def classify(model: ChainModel, q: Config, thresholds: Thresholds | None = None) -> StateLabel:
    """Map a configuration to its fold-state label.

    Gamma is decided first so that widening the lock-gap threshold can only
    grow the set of Gamma configurations.
    """
    t = thresholds or Thresholds()
    gap = end_gap(model, q)
    if gap < t.lock_gap and moment_alignment(model, q) < t.lock_alignment:
        return StateLabel.GAMMA
    h = q.hinge_angles
    if h.size >= 2:
        alternating = bool(np.all(h[:-1] * h[1:] < 0.0))
        if alternating and np.all(np.abs(h) > t.alpha_fold):
            return StateLabel.ALPHA
    if np.mean(np.abs(h)) < t.beta_mean_angle and gap > t.beta_gap_fraction * model.chain_length:
        return StateLabel.BETA
    return StateLabel.TRANSITIONAL


class Alignment(str, Enum):
    ATTRACTING = "attracting"
    IN_PLANE_REPULSIVE = "in_plane_repulsive"
    NEUTRAL = "neutral"


def pair_alignment(a: Dipole, b: Dipole, epsilon: float = 1e-9) -> Alignment:
    """Sign of the radial force between two dipoles.

    Positive radial force on ``b`` (pointing away from ``a``) is the
    in-plane repulsive regime; magnitudes below ``epsilon`` newtons are
    reported as neutral.
    """
    r = b.position - a.position
    rhat = r / np.linalg.norm(r)
    radial = float(np.dot(pair_wrench(a, b).force, rhat))
    if radial < -epsilon:
        return Alignment.ATTRACTING
    if radial > epsilon:
        return Alignment.IN_PLANE_REPULSIVE
    return Alignment.NEUTRAL


@dataclass
class LandscapeSlice:
    """Two-axis slice through hinge space with symmetric tying.

    Each axis sets every hinge in its group to the same angle; hinges in
    neither group stay at zero.  ``resolution`` is the grid size per axis.
    """

    groups: tuple = ((0, 2, 4), (1, 3))
    ranges: tuple = ((-2.8, 2.8), (-2.8, 2.8))
    resolution: int = 41
    epm: list | None = None  # fixed external dipoles during the scan

    def __post_init__(self):
        if len(self.groups) != 2 or len(self.ranges) != 2:
            raise ValidationError("groups/ranges: exactly two axes required")
        if set(self.groups[0]) & set(self.groups[1]):
            raise ValidationError("groups: axes must not share hinges")
        if self.resolution < 8:
            raise ValidationError("resolution: must be >= 8 per axis")
        for lo, hi in self.ranges:
            if not (lo < hi):
                raise ValidationError("ranges: lower bound must be below upper")
            if lo < -HINGE_LIMIT or hi > HINGE_LIMIT:
                raise ValidationError("ranges: must lie within the hinge limits")

    def axis_values(self, axis: int) -> np.ndarray:
        lo, hi = self.ranges[axis]
        return np.linspace(lo, hi, self.resolution)

    def config(self, model: ChainModel, i: int, j: int) -> Config:
        """Configuration at grid cell (i, j); i indexes axis 0."""
        angles = np.zeros(model.n_hinges)
        angles[list(self.groups[0])] = self.axis_values(0)[i]
        angles[list(self.groups[1])] = self.axis_values(1)[j]
        return Config(Pose(), angles)


@dataclass
class Landscape:
    slice: LandscapeSlice
    energies: np.ndarray  # (resolution, resolution); NaN marks singular cells


def energy_landscape(
    model: ChainModel,
    sl: LandscapeSlice,
    env: Environment | None = None,
    params: SimParams | None = None,
) -> Landscape:
    """Total energy over a hinge-space slice with the base pose held fixed.

    Cells whose configuration violates the dipole separation guard are
    marked NaN instead of aborting the scan.
    """
    env = env or Environment(epm=sl.epm)
    params = params or SimParams()
    n = sl.resolution
    grid = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            try:
                grid[i, j] = total_energy(model, sl.config(model, i, j), env, params).total
            except SingularityError:
                grid[i, j] = np.nan
    return Landscape(sl, grid)


def find_local_minima(grid: np.ndarray, labeler=None) -> list:
    """Strict interior local minima of a 2D grid.

    A cell counts when it is strictly below all eight neighbors; NaN cells
    never count and compare as +inf when they appear as neighbors.  Returns
    [(i, j), energy, label] triples sorted by energy ascending; ``labeler``
    maps (i, j) to a label and defaults to None entries.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.size == 0:
        raise ValidationError("grid: non-empty 2D array required")
    padded = np.where(np.isnan(grid), np.inf, grid)
    out = []
    for i in range(1, grid.shape[0] - 1):
        for j in range(1, grid.shape[1] - 1):
            c = grid[i, j]
            if np.isnan(c):
                continue
            neigh = [
                padded[i - 1, j - 1], padded[i - 1, j], padded[i - 1, j + 1],
                padded[i, j - 1], padded[i, j + 1],
                padded[i + 1, j - 1], padded[i + 1, j], padded[i + 1, j + 1],
            ]
            if all(c < v for v in neigh):
                out.append(((i, j), float(c), labeler(i, j) if labeler else None))
    out.sort(key=lambda item: item[1])
    return out


def landscape_minima(
    model: ChainModel,
    land: Landscape,
    thresholds: Thresholds | None = None,
) -> list:
    """Local minima of a computed landscape with state labels attached."""

    def label(i, j):
        return classify(model, land.slice.config(model, i, j), thresholds)

    return find_local_minima(land.energies, labeler=label)


def export_landscape_csv(land: Landscape, path) -> None:
    """Row-major CSV dump; the header records both axis definitions."""
    sl = land.slice
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            f"# axis0 hinges={list(sl.groups[0])} range={list(sl.ranges[0])}",
            f"axis1 hinges={list(sl.groups[1])} range={list(sl.ranges[1])}",
            f"resolution={sl.resolution}",
        ])
        w.writerow(["axis0_rad", "axis1_rad", "energy_J"])
        a0 = sl.axis_values(0)
        a1 = sl.axis_values(1)
        for i in range(sl.resolution):
            for j in range(sl.resolution):
                w.writerow([f"{a0[i]:.9g}", f"{a1[j]:.9g}", f"{land.energies[i, j]:.12g}"])
