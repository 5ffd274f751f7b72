"""Link-level simulator and analytic BER library for NOMA visible-light downlinks."""

__version__ = "0.1.0"

from .channel import (
    DEFAULT_HEIGHT,
    REFERENCE_FRONTEND,
    REFERENCE_GAINS,
    LinkGeometry,
    NoiseEnvironment,
    ReceiverFrontEnd,
    Room,
    channel_gain,
    lambertian_order,
)
from .link import DimmingConfig, DimmingScheme, PowerAllocation, UserChannel, fpa_allocate, sic_decode
from .analytic import ber_noisy, ber_outdated, ber_perfect, ber_vook, fit_q_exp, q_function
from .oracle import exact_ber
from .montecarlo import BerCurve, CsiErrorModel, LinkConfig, run_trials

__all__ = [
    "DEFAULT_HEIGHT", "REFERENCE_FRONTEND", "REFERENCE_GAINS", "LinkGeometry", "NoiseEnvironment",
    "ReceiverFrontEnd", "Room", "channel_gain", "lambertian_order", "DimmingConfig", "DimmingScheme",
    "PowerAllocation", "UserChannel", "fpa_allocate", "sic_decode", "ber_noisy", "ber_outdated",
    "ber_perfect", "ber_vook", "fit_q_exp", "q_function", "exact_ber", "BerCurve", "CsiErrorModel",
    "LinkConfig", "run_trials",
]
