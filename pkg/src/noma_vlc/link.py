"""Power-domain NOMA transmitter and SIC receiver for unipolar OOK."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "UserChannel",
    "PowerAllocation",
    "DimmingScheme",
    "DimmingConfig",
    "ESTIMATE_FLOOR",
    "order_users",
    "fpa_allocate",
    "superimpose",
    "vook_redundancy",
    "vook_duty_cycle",
    "vook_codeword",
    "frame_vook",
    "extract_vook",
    "sic_decode",
    "sic_decode_batch",
]

#: Smallest estimated gain a UserChannel may carry.
ESTIMATE_FLOOR = 1e-12

CODEWORD_LENGTH = 10


@dataclass(frozen=True)
class UserChannel:
    user_index: int
    gain: float
    estimated_gain: float | None = None
    decoding_order: int = 0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("channel gain must be positive")
        if self.estimated_gain is None:
            object.__setattr__(self, "estimated_gain", self.gain)
        elif self.estimated_gain < ESTIMATE_FLOOR:
            object.__setattr__(self, "estimated_gain", ESTIMATE_FLOOR)


def order_users(channels: Sequence[UserChannel]) -> list[UserChannel]:
    """Sort users by ascending estimated gain and renumber decoding orders 1..N."""
    if not channels:
        raise ValueError("need at least one user")
    ranked = sorted(channels, key=lambda c: c.estimated_gain)
    return [replace(c, decoding_order=k) for k, c in enumerate(ranked, start=1)]


@dataclass(frozen=True)
class PowerAllocation:
    """Fixed geometric power ladder, index 0 = first decoding order."""

    total_power: float
    rho: float
    powers: tuple[float, ...]

    @property
    def n_users(self) -> int:
        return len(self.powers)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.powers, dtype=float)

    def scaled(self, factor: float) -> "PowerAllocation":
        return PowerAllocation(self.total_power * factor, self.rho, tuple(p * factor for p in self.powers))


def fpa_allocate(total: float, rho: float, n_users: int) -> PowerAllocation:
    if total <= 0:
        raise ValueError("total power must be positive")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho!r}")
    if n_users < 1:
        raise ValueError("need at least one user")
    first = total * (1 - rho) / (1 - rho**n_users)
    powers = [first * rho**i for i in range(n_users)]
    # put the rounding residue on the largest level so the ladder sums to total
    powers[0] = total - math.fsum(powers[1:])
    return PowerAllocation(total, rho, tuple(powers))


def superimpose(bits, alloc: PowerAllocation):
    """Optical amplitude of the superposed OOK symbol(s); ``bits[..., i]`` belongs to order i+1."""
    b = np.asarray(bits)
    if b.shape[-1] != alloc.n_users:
        raise ValueError("bit vector length must equal the number of users")
    x = b @ alloc.as_array()
    return float(x) if np.ndim(x) == 0 else x


class DimmingScheme(str, Enum):
    NONE = "none"
    ANALOG = "analog"
    VOOK = "vook"


def vook_redundancy(dimming: float) -> int:
    """Number of repeated data slots in a VOOK codeword."""
    if not 0.0 < dimming < 1.0:
        raise ValueError("dimming factor must lie strictly between 0 and 1 to carry data")
    n = 20 * dimming if dimming <= 0.5 else 20 - 20 * dimming
    return int(round(n))


def vook_duty_cycle(dimming: float) -> float:
    if dimming in (0.0, 1.0):
        return float(dimming)
    return vook_redundancy(dimming) / CODEWORD_LENGTH


def vook_codeword(dimming: float) -> str:
    """Codeword template with ``d`` marking data slots."""
    if dimming <= 0.0:
        return "0" * CODEWORD_LENGTH
    if dimming >= 1.0:
        return "1" * CODEWORD_LENGTH
    n = vook_redundancy(dimming)
    fill = "1" if dimming > 0.5 else "0"
    return "d" * n + fill * (CODEWORD_LENGTH - n)


@dataclass(frozen=True)
class DimmingConfig:
    scheme: DimmingScheme = DimmingScheme.NONE
    factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", DimmingScheme(self.scheme))
        if not 0.0 <= self.factor <= 1.0:
            raise ValueError("dimming factor must lie in [0, 1]")
        if self.scheme is DimmingScheme.ANALOG and self.factor == 0.0:
            raise ValueError("analog dimming to zero switches the LED off")
        if self.scheme is DimmingScheme.VOOK and self.factor in (0.0, 1.0):
            raise ValueError("VOOK at dimming 0 or 1 carries no data")

    @property
    def redundancy(self) -> int:
        return vook_redundancy(self.factor) if self.scheme is DimmingScheme.VOOK else 1

    @property
    def duty_cycle(self) -> float:
        return vook_duty_cycle(self.factor)

    @property
    def codeword(self) -> str:
        return vook_codeword(self.factor)

    def power_scale(self) -> float:
        return self.factor if self.scheme is DimmingScheme.ANALOG else 1.0


def frame_vook(data_bits, config: DimmingConfig) -> np.ndarray:
    """Pack a bit stream into 10-bit VOOK codewords (flattened)."""
    if config.scheme is not DimmingScheme.VOOK:
        raise ValueError("frame_vook needs a VOOK dimming config")
    template = config.codeword
    slots = np.array([c == "d" for c in template])
    n_data = int(slots.sum())
    bits = np.asarray(data_bits, dtype=np.uint8).ravel()
    n_words = -(-bits.size // n_data)
    padded = np.zeros(n_words * n_data, dtype=np.uint8)
    padded[: bits.size] = bits
    fill = np.uint8(template[-1] == "1") if n_data < CODEWORD_LENGTH else np.uint8(0)
    words = np.full((n_words, CODEWORD_LENGTH), fill, dtype=np.uint8)
    words[:, slots] = padded.reshape(n_words, n_data)
    return words.ravel()


def extract_vook(stream, config: DimmingConfig, n_bits: int | None = None) -> np.ndarray:
    slots = np.array([c == "d" for c in config.codeword])
    words = np.asarray(stream, dtype=np.uint8).reshape(-1, CODEWORD_LENGTH)
    data = words[:, slots].ravel()
    return data if n_bits is None else data[:n_bits]


def sic_decode(received: float, order: int, alloc: PowerAllocation, estimated_gain: float,
               responsivity: float = 1.0) -> tuple[int, tuple[int, ...]]:
    """Successive cancellation at the receiver in decoding position ``order``.

    Returns the decision for the receiver's own signal and the decisions of
    every stage up to it. Ties at a threshold decide 1.
    """
    if not 1 <= order <= alloc.n_users:
        raise ValueError("decoding order out of range")
    scale = responsivity * estimated_gain
    trace: list[int] = []
    cancelled = 0.0
    for j in range(order):
        residual = received - scale * cancelled
        bit = int(residual >= scale * alloc.powers[j] / 2)
        trace.append(bit)
        cancelled += alloc.powers[j] * bit
    return trace[-1], tuple(trace)


def sic_decode_batch(received: np.ndarray, order, powers: np.ndarray, estimated_gain,
                     responsivity: float = 1.0) -> np.ndarray:
    """Vectorised :func:`sic_decode` returning only the final-stage decisions.

    ``powers`` may be ``(N,)`` or ``(n, N)`` (per-trial allocations); ``order``
    and ``estimated_gain`` broadcast against ``received``.
    """
    y = np.asarray(received, dtype=float)
    powers = np.asarray(powers, dtype=float)
    scale = responsivity * np.asarray(estimated_gain, dtype=float)
    order = np.broadcast_to(np.asarray(order), y.shape)
    cancelled = np.zeros_like(y)
    decided = np.zeros(y.shape, dtype=bool)
    for j in range(int(order.max())):
        p_j = powers[..., j]
        bit = (y - scale * cancelled) >= scale * p_j / 2
        active = order > j
        cancelled = np.where(active, cancelled + p_j * bit, cancelled)
        decided = np.where(order == j + 1, bit, decided)
    return decided
