"""Line-of-sight Lambertian channel and photodiode noise for an indoor LED link.

Angles are in radians throughout. The photodiode is assumed to face the
ceiling, so for a receiver at vertical distance ``z`` below the LED the angle
of emergence and the angle of incidence coincide and ``cos = z / d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "LinkGeometry",
    "ReceiverFrontEnd",
    "NoiseEnvironment",
    "REFERENCE_FRONTEND",
    "REFERENCE_GAINS",
    "DEFAULT_HEIGHT",
    "lambertian_order",
    "concentrator_gain",
    "channel_gain",
    "gain_at_radius",
    "lumped_constant",
    "simplified_gain",
    "radius_for_gain",
    "coverage_radius",
    "shot_variance",
    "thermal_variance",
    "total_noise_variance",
]


def lambertian_order(semi_angle: float) -> float:
    """Order ``m`` of Lambertian emission for a half-power semi-angle."""
    if not 0.0 < semi_angle < math.pi / 2:
        raise ValueError(f"semi_angle must lie in (0, pi/2), got {semi_angle!r}")
    return -math.log(2.0) / math.log(math.cos(semi_angle))


def concentrator_gain(incidence: float, fov: float, refractive_index: float) -> float:
    """Gain of a non-imaging concentrator; zero outside the field of view."""
    if incidence < 0:
        raise ValueError("incidence angle must be non-negative")
    if not 0.0 < fov <= math.pi / 2:
        raise ValueError("fov must lie in (0, pi/2]")
    if refractive_index < 1:
        raise ValueError("refractive index must be >= 1")
    if incidence > fov:
        return 0.0
    return refractive_index**2 / math.sin(fov) ** 2


@dataclass(frozen=True)
class ReceiverFrontEnd:
    """LED emission pattern together with the photodiode optics."""

    pd_area: float = 1.0e-4  # m^2
    fov: float = math.radians(45.0)
    refractive_index: float = 1.5
    filter_gain: float = 1.0
    responsivity: float = 1.0  # A/W
    semi_angle: float = math.radians(50.0)

    def __post_init__(self):
        if self.pd_area <= 0:
            raise ValueError("pd_area must be positive")
        if not 0.0 < self.fov <= math.pi / 2:
            raise ValueError("fov must lie in (0, pi/2]")
        if self.refractive_index < 1:
            raise ValueError("refractive_index must be >= 1")
        if not 0.0 < self.filter_gain <= 1.0:
            raise ValueError("filter_gain must lie in (0, 1]")
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")
        lambertian_order(self.semi_angle)

    @property
    def lambertian_order(self) -> float:
        return lambertian_order(self.semi_angle)


@dataclass(frozen=True)
class LinkGeometry:
    """Positions of one LED and one photodiode, with the derived angles."""

    led_position: tuple[float, float, float]
    pd_position: tuple[float, float, float]

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("LED and photodiode must not coincide")

    @property
    def distance(self) -> float:
        return math.dist(self.led_position, self.pd_position)

    @property
    def vertical_height(self) -> float:
        return self.led_position[2] - self.pd_position[2]

    @property
    def emergence_angle(self) -> float:
        # LED faces the floor, PD faces the ceiling: both angles are measured
        # from the vertical.
        c = self.vertical_height / self.distance
        return math.acos(max(-1.0, min(1.0, c)))

    @property
    def incidence_angle(self) -> float:
        return self.emergence_angle


def channel_gain(geometry: LinkGeometry, frontend: ReceiverFrontEnd) -> float:
    """DC gain of the line-of-sight link."""
    phi = geometry.incidence_angle
    if phi > frontend.fov or geometry.vertical_height <= 0:
        return 0.0
    m = frontend.lambertian_order
    d = geometry.distance
    radiant = (m + 1) / (2 * math.pi) * math.cos(geometry.emergence_angle) ** m
    g = concentrator_gain(phi, frontend.fov, frontend.refractive_index)
    return frontend.pd_area / d**2 * radiant * frontend.filter_gain * g * math.cos(phi)


def coverage_radius(frontend: ReceiverFrontEnd, height: float) -> float:
    """Horizontal radius beyond which the LED falls outside the receiver FOV."""
    return height * math.tan(frontend.fov)


def gain_at_radius(radius, frontend: ReceiverFrontEnd, height: float):
    """Vectorised channel gain for receivers at horizontal ``radius`` from the LED axis."""
    r = np.asarray(radius, dtype=float)
    m = frontend.lambertian_order
    d = np.hypot(r, height)
    h = lumped_constant(frontend, height) / d ** (m + 3)
    h = np.where(np.arctan2(r, height) > frontend.fov, 0.0, h)
    return h if h.ndim else float(h)


def lumped_constant(frontend: ReceiverFrontEnd, height: float) -> float:
    """Constant ``w`` such that a receiver at ``height`` has gain ``w / d**(m+3)``.

    The factor ``height**(m+1)`` comes from writing both cosines as ``z / d``.
    """
    m = frontend.lambertian_order
    g = concentrator_gain(0.0, frontend.fov, frontend.refractive_index)
    return (m + 1) * frontend.pd_area * frontend.filter_gain * g * height ** (m + 1) / (2 * math.pi)


def simplified_gain(distance: float, lumped: float, order: float) -> float:
    if distance <= 0:
        raise ValueError("distance must be positive")
    return lumped / distance ** (order + 3)


def radius_for_gain(gain: float, frontend: ReceiverFrontEnd, height: float) -> float:
    """Horizontal radius at which a vertically facing receiver sees ``gain``.

    Solved by bracketing root-finding on the monotone gain-vs-radius curve.
    """
    r_max = coverage_radius(frontend, height)
    h0 = gain_at_radius(0.0, frontend, height)
    h_edge = gain_at_radius(r_max, frontend, height)
    if not h_edge <= gain <= h0:
        raise ValueError(
            f"gain {gain:.6g} is not reachable at height {height} m "
            f"(range [{h_edge:.6g}, {h0:.6g}])"
        )
    if gain == h0:
        return 0.0
    return brentq(lambda r: gain_at_radius(r, frontend, height) - gain, 0.0, r_max, xtol=1e-15, rtol=1e-15)


@dataclass(frozen=True)
class NoiseEnvironment:
    """Receiver noise constants. Defaults follow common indoor VLC practice."""

    electronic_charge: float = 1.602176634e-19
    bandwidth: float = 10e6
    background_current: float = 100e-6
    noise_bw_factor: float = 0.562
    noise_bw_factor_2: float = 0.0868
    boltzmann: float = 1.380649e-23
    temperature: float = 295.0
    open_loop_gain: float = 10.0
    capacitance_per_area: float = 112e-8  # F/m^2 (112 pF/cm^2)
    fet_noise_factor: float = 1.5
    fet_transconductance: float = 30e-3

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")


def shot_variance(env: NoiseEnvironment, responsivity: float, gain: float, signal_level: float) -> float:
    if signal_level < 0:
        raise ValueError("signal_level must be non-negative")
    return 2 * env.electronic_charge * env.bandwidth * (
        responsivity * gain * signal_level + env.background_current * env.noise_bw_factor
    )


def thermal_variance(env: NoiseEnvironment, pd_area: float) -> float:
    kT = env.boltzmann * env.temperature
    B = env.bandwidth
    eta = env.capacitance_per_area
    feedback = 8 * math.pi * kT / env.open_loop_gain * eta * pd_area * env.noise_bw_factor * B**2
    fet = (
        16 * math.pi**2 * kT * env.fet_noise_factor / env.fet_transconductance
        * eta**2 * pd_area**2 * env.noise_bw_factor_2 * B**3
    )
    return feedback + fet


def total_noise_variance(env: NoiseEnvironment, frontend: ReceiverFrontEnd, gain: float, signal_level: float) -> float:
    return shot_variance(env, frontend.responsivity, gain, signal_level) + thermal_variance(env, frontend.pd_area)


REFERENCE_FRONTEND = ReceiverFrontEnd()

#: Channel gains of the three users, weakest first.
REFERENCE_GAINS = (0.2835e-4, 0.4787e-4, 0.5272e-4)

#: LED-to-receiver vertical distance used to place users reproducing the
#: tabulated gains. 2.25 m (table height in a 3 m room) cannot reach the two
#: strongest gains, 1.8 m (hand-held device at 1.2 m) can.
DEFAULT_HEIGHT = 1.8


@dataclass(frozen=True)
class Room:
    """Rectangular room with one ceiling LED."""

    width: float = 4.0
    length: float = 4.0
    height: float = 3.0
    led_xy: tuple[float, float] = field(default=(2.0, 2.0))
    link_height: float = DEFAULT_HEIGHT  # LED-to-receiver vertical distance

    def __post_init__(self):
        if min(self.width, self.length, self.height) <= 0:
            raise ValueError("room dimensions must be positive")
        if not 0 < self.link_height < self.height:
            raise ValueError("link_height must be smaller than the room height")

    @property
    def led_position(self) -> tuple[float, float, float]:
        return (*self.led_xy, self.height)

    @property
    def receiver_plane(self) -> float:
        """Absolute z coordinate of the receiver plane."""
        return self.height - self.link_height


__all__.append("Room")
