"""Wireless power transfer design chain for the onboard receiver coil.

Covers the receiver-side sizing workflow: spiral coil inductance (Wheeler's
flat-spiral approximation), LC resonance, induced voltage from a sinusoidal
flux drive, distance-dependent coupling fitted from measurements, and an LED
power budget riding on that coupling curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

INCH = 0.0254  # m


@dataclass
class SpiralCoil:
    """Flat (pancake) spiral coil.

    mean_radius and winding_depth in meters; winding_depth is the radial
    build of the winding (outer minus inner radius).  ``double_sided``
    models two stacked identical spirals wired in series, which doubles the
    single-layer inductance.
    """

    mean_radius: float
    winding_depth: float
    turns: float
    double_sided: bool = False

    def __post_init__(self):
        if self.mean_radius <= 0:
            raise ValidationError("mean_radius: must be > 0")
        if self.winding_depth <= 0:
            raise ValidationError("winding_depth: must be > 0")
        if self.turns <= 0:
            raise ValidationError("turns: must be > 0")


def wheeler_inductance(coil: SpiralCoil) -> float:
    """Inductance of a flat spiral in henries.

    Wheeler's approximation L[uH] = r^2 n^2 / (8 r + 11 w) with r and w in
    inches; a double-sided coil contributes twice the single-layer value.
    """
    r = coil.mean_radius / INCH
    w = coil.winding_depth / INCH
    L_uH = (r * r * coil.turns**2) / (8.0 * r + 11.0 * w)
    if coil.double_sided:
        L_uH *= 2.0
    return L_uH * 1e-6


def inverse_design_coil(
    target_inductance: float,
    mean_radius: float | None = None,
    winding_depth: float | None = None,
    turns: float | None = None,
    double_sided: bool = False,
    integer_turns: bool = False,
) -> SpiralCoil:
    """Solve Wheeler's formula for the one geometry parameter left as None.

    Exactly one of mean_radius, winding_depth, turns must be omitted; the
    other two are held fixed.  Every branch is closed-form (the formula is
    quadratic in both r and n and linear in 1/w).  With ``integer_turns``
    a solved turn count is rounded to the nearest whole turn; the caller
    can check the residual via :func:`wheeler_inductance`.
    """
    if target_inductance <= 0:
        raise ValidationError("target_inductance: must be > 0")
    free = [name for name, v in (("mean_radius", mean_radius),
                                 ("winding_depth", winding_depth),
                                 ("turns", turns)) if v is None]
    if len(free) != 1:
        raise ValidationError("exactly one of mean_radius/winding_depth/turns must be free")
    L_uH = target_inductance * 1e6
    if double_sided:
        L_uH *= 0.5
    if turns is None:
        r = mean_radius / INCH
        w = winding_depth / INCH
        n = math.sqrt(L_uH * (8.0 * r + 11.0 * w) / (r * r))
        if integer_turns:
            n = max(1.0, round(n))
        return SpiralCoil(mean_radius, winding_depth, n, double_sided)
    if winding_depth is None:
        r = mean_radius / INCH
        n = turns
        w = (r * r * n * n / L_uH - 8.0 * r) / 11.0
        if w <= 0.0:
            raise ValidationError(
                f"no positive winding depth reaches {target_inductance:.4g} H at "
                f"r={mean_radius:.4g} m, n={turns:g}; the target exceeds the "
                f"zero-depth limit {r * n * n / 8.0 * (0.5 if double_sided else 1.0):.4g} uH"
            )
        return SpiralCoil(mean_radius, w * INCH, turns, double_sided)
    w = winding_depth / INCH
    n = turns
    # n^2 r^2 - 8 L r - 11 L w = 0, positive root
    r = (8.0 * L_uH + math.sqrt(64.0 * L_uH**2 + 44.0 * n * n * L_uH * w)) / (2.0 * n * n)
    return SpiralCoil(r * INCH, winding_depth, turns, double_sided)


@dataclass
class ResonantLink:
    """Series LC receiver tank."""

    inductance: float
    capacitance: float

    def __post_init__(self):
        if self.inductance <= 0:
            raise ValidationError("inductance: must be > 0")
        if self.capacitance <= 0:
            raise ValidationError("capacitance: must be > 0")

    @property
    def resonant_frequency(self) -> float:
        return resonant_frequency(self.inductance, self.capacitance)


def resonant_frequency(inductance: float, capacitance: float) -> float:
    """f0 = 1 / (2 pi sqrt(L C)) in hertz."""
    if inductance <= 0 or capacitance <= 0:
        raise ValidationError("inductance and capacitance must be > 0")
    return 1.0 / (2.0 * math.pi * math.sqrt(inductance * capacitance))


def required_capacitance(inductance: float, frequency: float) -> float:
    """Capacitance that tunes ``inductance`` to resonate at ``frequency``."""
    if inductance <= 0 or frequency <= 0:
        raise ValidationError("inductance and frequency must be > 0")
    return 1.0 / ((2.0 * math.pi * frequency) ** 2 * inductance)


def faraday_peak_voltage(turns: float, peak_flux: float, frequency: float) -> float:
    """Peak EMF of N turns threaded by flux phi0 sin(2 pi f t)."""
    if turns <= 0 or frequency <= 0:
        raise ValidationError("turns and frequency must be > 0")
    if peak_flux < 0:
        raise ValidationError("peak_flux: must be >= 0")
    return turns * 2.0 * math.pi * frequency * peak_flux


@dataclass
class CouplingModel:
    """Received voltage versus transmitter distance, V(d) = a d^2 + b d + c.

    Distances in millimeters, voltages in volts.  The model is only
    accepted when it is strictly decreasing over its fitted span.
    """

    a: float
    b: float
    c: float
    span: tuple = (0.0, 20.0)  # mm, the distance range the fit covers

    def __post_init__(self):
        lo, hi = self.span
        if not lo < hi:
            raise ValidationError("span: lower bound must be below upper")
        d = np.linspace(lo, hi, 201)
        v = self.voltage(d)
        if np.any(np.diff(v) >= 0.0):
            raise ValidationError(
                "coupling model must be strictly decreasing over its span"
            )

    def voltage(self, distance):
        d = np.asarray(distance, dtype=float)
        v = self.a * d * d + self.b * d + self.c
        return float(v) if v.ndim == 0 else v


def fit_coupling(distances_mm, voltages, span: tuple | None = None) -> CouplingModel:
    """Fit the quadratic coupling curve to measurements.

    Three points are interpolated exactly; more are fit in the least-squares
    sense.  The resulting model must be strictly decreasing over the span
    (default: the measured distance range) or the fit is rejected.
    """
    d = np.asarray(distances_mm, dtype=float)
    v = np.asarray(voltages, dtype=float)
    if d.shape != v.shape or d.ndim != 1 or d.size < 3:
        raise ValidationError("need matching 1D arrays of at least 3 samples")
    if np.unique(d).size != d.size:
        raise ValidationError("distances must be distinct")
    coeffs = np.polyfit(d, v, 2)
    if span is None:
        span = (float(d.min()), float(d.max()))
    return CouplingModel(float(coeffs[0]), float(coeffs[1]), float(coeffs[2]), span)


@dataclass
class LedLoad:
    """Bank of identical indicator LEDs fed by the receiver tank."""

    count: int = 15
    led_power: float = 0.080  # W drawn per LED at full brightness
    full_brightness_voltage: float = 0.0  # V; 0 disables the voltage shortcut

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("count: must be >= 1")
        if self.led_power <= 0:
            raise ValidationError("led_power: must be > 0")
        if self.full_brightness_voltage < 0:
            raise ValidationError("full_brightness_voltage: must be >= 0")


def led_budget(
    coupling: CouplingModel,
    distance_mm: float,
    load: LedLoad,
    source_power: float,
) -> tuple:
    """LEDs lit and brightness fraction at a given transmitter distance.

    Deliverable power follows the square of the received voltage ratio,
    P(d) = source_power * (V(d) / V(ref))^2 with the reference at the near
    end of the coupling span.  Lit count is how many LEDs that power can
    run at rating; brightness is the bank-wide power fraction, clamped to
    [0, 1].  A positive full_brightness_voltage reports brightness 1.0
    whenever the received voltage reaches it.
    """
    if source_power <= 0:
        raise ValidationError("source_power: must be > 0")
    lo, hi = coupling.span
    if not (lo <= distance_mm <= hi):
        raise ValidationError("distance outside the fitted coupling span")
    v_ref = coupling.voltage(lo)
    v = coupling.voltage(distance_mm)
    power = source_power * (v / v_ref) ** 2
    lit = min(load.count, int(math.floor(power / load.led_power)))
    brightness = min(1.0, max(0.0, power / (load.count * load.led_power)))
    if load.full_brightness_voltage > 0.0 and v >= load.full_brightness_voltage:
        brightness = 1.0
    return lit, brightness


@dataclass
class ReceiverDesign:
    """End-to-end receiver design summary produced by :func:`design_receiver`."""

    coil: SpiralCoil
    inductance: float
    link: ResonantLink
    resonant_hz: float
    peak_voltage: float


def design_receiver(
    mean_radius: float = 0.5 * INCH,
    winding_depth: float = 0.1 * INCH,
    turns: float = 4.0,
    double_sided: bool = True,
    capacitance: float = 1e-6,
    drive_frequency: float | None = None,
    peak_flux: float = 1e-6,
) -> ReceiverDesign:
    """Chain the coil, tank, and voltage models into one design record.

    When ``drive_frequency`` is omitted the tank is assumed to be driven at
    its own resonance.
    """
    coil = SpiralCoil(mean_radius, winding_depth, turns, double_sided)
    L = wheeler_inductance(coil)
    link = ResonantLink(L, capacitance)
    f0 = link.resonant_frequency
    f_drive = drive_frequency if drive_frequency is not None else f0
    v = faraday_peak_voltage(coil.turns, peak_flux, f_drive)
    return ReceiverDesign(coil, L, link, f0, v)
