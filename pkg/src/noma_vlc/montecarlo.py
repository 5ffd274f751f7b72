"""Monte Carlo BER estimation for the NOMA-VLC downlink.

Random numbers come from a counter-keyed stream per ``(user, snr point,
block)``, so the error counts do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .channel import (
    REFERENCE_FRONTEND,
    REFERENCE_GAINS,
    NoiseEnvironment,
    ReceiverFrontEnd,
    Room,
    coverage_radius,
    gain_at_radius,
    lumped_constant,
    radius_for_gain,
    shot_variance,
    thermal_variance,
)
from .link import DimmingConfig, DimmingScheme, fpa_allocate, sic_decode_batch

log = logging.getLogger(__name__)

__all__ = [
    "CsiKind",
    "CsiErrorModel",
    "MobilityEvent",
    "BerCurve",
    "LinkConfig",
    "snr_to_sigma",
    "sigma_to_snr",
    "error_bound",
    "worst_case_bound",
    "anchor_positions",
    "inject_csi",
    "simulate_mobility_epoch",
    "run_trials",
]

#: Estimation-error variance (gain^2) at which the SNR-dependent model is anchored.
ANCHOR_VARIANCE = 2e-6
ANCHOR_SNR_DB = 110.0


def snr_to_sigma(snr_db, total_power: float, responsivity: float = 1.0):
    """Noise standard deviation for a transmit SNR ``(responsivity * P_LED / sigma)^2``."""
    if total_power <= 0:
        raise ValueError("total_power must be positive")
    out = responsivity * total_power / 10.0 ** (np.asarray(snr_db, dtype=float) / 20.0)
    return float(out) if np.ndim(out) == 0 else out


def sigma_to_snr(sigma, total_power: float, responsivity: float = 1.0):
    out = 20.0 * np.log10(responsivity * total_power / np.asarray(sigma, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


class CsiKind(str, Enum):
    PERFECT = "perfect"
    NOISY_FIXED = "noisy_fixed"
    NOISY_SNR = "noisy_snr_dependent"
    OUTDATED = "outdated"


@dataclass(frozen=True)
class CsiErrorModel:
    """Channel knowledge available to transmitter and receivers.

    ``mobility`` is ``"group"`` (one shared displacement) or ``"independent"``;
    ``order`` keeps only epochs where the gain ranking was ``"preserved"``,
    ``"changed"``, or ``"any"``.
    """

    kind: CsiKind = CsiKind.PERFECT
    variance: float = 0.0
    kappa: float = ANCHOR_VARIANCE * 10 ** (ANCHOR_SNR_DB / 10)
    max_velocity: float = 2.0
    update_interval: float = 1.0
    mobility: str = "group"
    order: str = "preserved"

    def __post_init__(self):
        object.__setattr__(self, "kind", CsiKind(self.kind))
        if self.kind is CsiKind.NOISY_FIXED and self.variance <= 0:
            raise ValueError("noisy_fixed needs a positive variance")
        if self.kind is CsiKind.NOISY_SNR and self.kappa <= 0:
            raise ValueError("noisy_snr_dependent needs a positive kappa")
        if self.max_velocity < 0 or self.update_interval < 0:
            raise ValueError("velocity and update interval must be non-negative")
        if self.mobility not in ("group", "independent"):
            raise ValueError(f"unknown mobility mode {self.mobility!r}")
        if self.order not in ("preserved", "changed", "any"):
            raise ValueError(f"unknown order condition {self.order!r}")

    @classmethod
    def perfect(cls):
        return cls()

    @classmethod
    def noisy_fixed(cls, variance: float):
        return cls(CsiKind.NOISY_FIXED, variance=variance)

    @classmethod
    def noisy_snr_dependent(cls, kappa: float | None = None):
        return cls(CsiKind.NOISY_SNR) if kappa is None else cls(CsiKind.NOISY_SNR, kappa=kappa)

    @classmethod
    def outdated(cls, max_velocity=2.0, update_interval=1.0, mobility="group", order="preserved"):
        return cls(CsiKind.OUTDATED, max_velocity=max_velocity, update_interval=update_interval,
                   mobility=mobility, order=order)

    def variance_at(self, snr_db: float) -> float:
        if self.kind is CsiKind.NOISY_FIXED:
            return self.variance
        if self.kind is CsiKind.NOISY_SNR:
            return self.kappa / 10.0 ** (snr_db / 10.0)
        return 0.0


@dataclass(frozen=True)
class MobilityEvent:
    start_radius: float
    end_radius: float
    speed: float
    elapsed: float
    height: float
    start_xy: tuple[float, float] | None = None
    end_xy: tuple[float, float] | None = None

    @property
    def displacement(self) -> float:
        return self.speed * self.elapsed

    @property
    def start_distance(self) -> float:
        return math.hypot(self.start_radius, self.height)

    @property
    def end_distance(self) -> float:
        return math.hypot(self.end_radius, self.height)


def error_bound(event: MobilityEvent, lumped: float, order: float, literal: bool = False) -> float:
    """Worst-case CSI error for one displacement.

    The default is the change in gain between the two positions. ``literal``
    evaluates ``lumped * |d2^(m+3) - d1^(m+3)|`` instead.
    """
    d1, d2 = event.start_distance, event.end_distance
    if literal:
        return lumped * abs(d2 ** (order + 3) - d1 ** (order + 3))
    return abs(lumped / d2 ** (order + 3) - lumped / d1 ** (order + 3))


def worst_case_bound(radius: float, max_displacement: float, frontend: ReceiverFrontEnd,
                     height: float, r_max: float | None = None) -> float:
    """Largest gain change reachable from ``radius`` within ``max_displacement``."""
    if r_max is None:
        r_max = coverage_radius(frontend, height)
    h_now = gain_at_radius(radius, frontend, height)
    nearest = gain_at_radius(max(radius - max_displacement, 0.0), frontend, height)
    farthest = gain_at_radius(min(radius + max_displacement, r_max), frontend, height)
    return max(nearest - h_now, h_now - farthest)


def anchor_positions(gains: Sequence[float], room: Room, frontend: ReceiverFrontEnd) -> np.ndarray:
    """Planar positions reproducing ``gains``, spread evenly in azimuth around the LED."""
    led = np.asarray(room.led_xy, dtype=float)
    out = []
    for i, g in enumerate(gains):
        r = radius_for_gain(g, frontend, room.link_height)
        phi = 2 * math.pi * i / len(gains)
        out.append(led + r * np.array([math.cos(phi), math.sin(phi)]))
    return np.array(out)


def _confine(xy: np.ndarray, room: Room, r_cov: float) -> np.ndarray:
    """Clip to the walls, then pull back inside the LED coverage disk."""
    xy = np.stack([np.clip(xy[..., 0], 0.0, room.width), np.clip(xy[..., 1], 0.0, room.length)], axis=-1)
    led = np.asarray(room.led_xy)
    rel = xy - led
    r = np.hypot(rel[..., 0], rel[..., 1])
    limit = r_cov * (1 - 1e-9)
    factor = np.where(r > limit, limit / np.maximum(r, 1e-300), 1.0)
    return led + rel * factor[..., None]


def _displace(xy: np.ndarray, speed: np.ndarray, heading: np.ndarray, elapsed: float) -> np.ndarray:
    step = (speed * elapsed)[..., None] * np.stack([np.cos(heading), np.sin(heading)], axis=-1)
    return xy + step


def _uniform_positions(rng: np.random.Generator, count: int, room: Room, r_cov: float) -> np.ndarray:
    led = np.asarray(room.led_xy)
    out = np.empty((0, 2))
    while len(out) < count:
        cand = rng.uniform([0.0, 0.0], [room.width, room.length], size=(2 * count, 2))
        keep = np.hypot(*(cand - led).T) < r_cov
        out = np.vstack([out, cand[keep]])
    return out[:count]


def simulate_mobility_epoch(room: Room, v_max: float, elapsed: float, rng: np.random.Generator,
                            n_users: int = 3, positions=None, mode: str = "independent",
                            frontend: ReceiverFrontEnd = REFERENCE_FRONTEND) -> list[MobilityEvent]:
    """Move each user for ``elapsed`` seconds at a uniform random speed and heading.

    In ``group`` mode all users share one speed and heading.
    """
    if mode not in ("group", "independent"):
        raise ValueError(f"unknown mobility mode {mode!r}")
    r_cov = coverage_radius(frontend, room.link_height)
    start = (_uniform_positions(rng, n_users, room, r_cov) if positions is None
             else np.asarray(positions, dtype=float))
    n = len(start)
    k = 1 if mode == "group" else n
    speed = np.broadcast_to(rng.uniform(0.0, v_max, k), (n,))
    heading = np.broadcast_to(rng.uniform(0.0, 2 * math.pi, k), (n,))
    end = _confine(_displace(start, speed, heading, elapsed), room, r_cov)
    led = np.asarray(room.led_xy)
    events = []
    for i in range(n):
        events.append(MobilityEvent(
            start_radius=float(np.hypot(*(start[i] - led))),
            end_radius=float(np.hypot(*(end[i] - led))),
            speed=float(speed[i]), elapsed=elapsed, height=room.link_height,
            start_xy=tuple(start[i]), end_xy=tuple(end[i]),
        ))
    return events


def inject_csi(true_gains, model: CsiErrorModel, rng: np.random.Generator, snr_db: float = 0.0,
               stale_gains=None) -> np.ndarray:
    """Estimated gains seen by transmitter and receivers.

    For outdated CSI the estimate is the gain at the pre-move position, which
    the caller supplies as ``stale_gains``.
    """
    h = np.asarray(true_gains, dtype=float)
    if np.any(h <= 0):
        raise ValueError("true gains must be positive")
    if model.kind is CsiKind.PERFECT:
        return h.copy()
    if model.kind in (CsiKind.NOISY_FIXED, CsiKind.NOISY_SNR):
        return h + rng.normal(0.0, math.sqrt(model.variance_at(snr_db)), size=h.shape)
    if stale_gains is None:
        raise ValueError("outdated CSI needs the pre-move gains")
    return np.asarray(stale_gains, dtype=float).copy()


@dataclass(frozen=True)
class LinkConfig:
    """Everything a Monte Carlo run needs apart from the SNR grid and seed."""

    gains: tuple[float, ...] = REFERENCE_GAINS
    rho: float = 0.3
    total_power: float = 0.25
    responsivity: float = 1.0
    csi: CsiErrorModel = field(default_factory=CsiErrorModel)
    dimming: DimmingConfig = field(default_factory=DimmingConfig)
    frontend: ReceiverFrontEnd = REFERENCE_FRONTEND
    room: Room = field(default_factory=Room)
    noise: str = "snr"
    noise_env: NoiseEnvironment = field(default_factory=NoiseEnvironment)

    def __post_init__(self):
        gains = tuple(sorted(float(g) for g in self.gains))
        if not gains or gains[0] <= 0:
            raise ValueError("gains must be positive")
        object.__setattr__(self, "gains", gains)
        if self.noise not in ("snr", "physical"):
            raise ValueError("noise must be 'snr' or 'physical'")
        fpa_allocate(self.total_power, self.rho, len(gains))

    @property
    def n_users(self) -> int:
        return len(self.gains)

    def allocation(self):
        return fpa_allocate(self.total_power, self.rho, self.n_users)

    def sigma(self, snr_db: float) -> np.ndarray:
        """Per-user noise standard deviation."""
        if self.noise == "snr":
            return np.full(self.n_users, snr_to_sigma(snr_db, self.total_power, self.responsivity))
        mean_level = self.total_power * self.dimming.power_scale() / 2
        return np.array([
            math.sqrt(shot_variance(self.noise_env, self.responsivity, g, mean_level)
                      + thermal_variance(self.noise_env, self.frontend.pd_area))
            for g in self.gains
        ])

    def outdated_bounds(self) -> np.ndarray:
        """Worst-case CSI error per user at the maximum speed."""
        z = self.room.link_height
        disp = self.csi.max_velocity * self.csi.update_interval
        return np.array([worst_case_bound(radius_for_gain(g, self.frontend, z), disp, self.frontend, z)
                         for g in self.gains])


@dataclass
class BerCurve:
    """Per-user BER over an SNR grid; users are indexed by ascending true gain."""

    snr_grid: np.ndarray
    ber: np.ndarray
    stderr: np.ndarray
    provenance: str
    trials: int = 0
    seed: int | None = None
    errors: np.ndarray | None = None
    counters: dict = field(default_factory=dict)

    def __post_init__(self):
        self.snr_grid = np.asarray(self.snr_grid, dtype=float)
        self.ber = np.asarray(self.ber, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def n_users(self) -> int:
        return self.ber.shape[1]

    @property
    def unreliable(self) -> np.ndarray:
        if self.errors is None:
            return np.zeros(self.ber.shape, dtype=bool)
        return self.errors < 10

    @classmethod
    def from_values(cls, snr_grid, ber, provenance):
        ber = np.asarray(ber, dtype=float)
        return cls(snr_grid, ber, np.zeros_like(ber), provenance)


def _stale_estimates(cfg: LinkConfig, anchors: np.ndarray, rng: np.random.Generator, count: int):
    """Pre-move gains for ``count`` epochs, filtered by the configured order condition."""
    csi = cfg.csi
    room = cfg.room
    r_cov = coverage_radius(cfg.frontend, room.link_height)
    led = np.asarray(room.led_xy)
    n_users = len(anchors)
    kept = []
    have = 0
    for _ in range(10_000):
        k = 1 if csi.mobility == "group" else n_users
        speed = np.repeat(rng.uniform(0.0, csi.max_velocity, (count, k)), n_users // k, axis=1)
        heading = np.repeat(rng.uniform(0.0, 2 * math.pi, (count, k)), n_users // k, axis=1)
        stale_xy = _confine(_displace(anchors[None, :, :], speed, heading, -csi.update_interval), room, r_cov)
        rel = stale_xy - led
        est = gain_at_radius(np.hypot(rel[..., 0], rel[..., 1]), cfg.frontend, room.link_height)
        ranked = np.argsort(est, axis=1, kind="stable")
        same = np.all(ranked == np.arange(n_users), axis=1)
        if csi.order == "preserved":
            est = est[same]
        elif csi.order == "changed":
            est = est[~same]
        kept.append(est)
        have += len(est)
        if have >= count:
            return np.concatenate(kept)[:count]
    raise RuntimeError(f"could not draw epochs with order {csi.order!r}")


def _block_errors(cfg: LinkConfig, user: int, snr_db: float, sigma: float, n: int,
                  rng: np.random.Generator, anchors) -> tuple[int, int]:
    """Bit errors of ``user`` in one block of ``n`` data bits, plus non-positive estimate count."""
    gains = np.asarray(cfg.gains)
    n_users = len(gains)
    base_powers = cfg.allocation().as_array() * cfg.dimming.power_scale()
    kind = cfg.csi.kind

    if kind is CsiKind.OUTDATED:
        est = _stale_estimates(cfg, anchors, rng, n)
    elif kind is CsiKind.PERFECT:
        est = np.broadcast_to(gains, (n, n_users))
    else:
        est = gains + rng.normal(0.0, math.sqrt(cfg.csi.variance_at(snr_db)), size=(n, n_users))

    if kind is CsiKind.OUTDATED:
        # transmitter and receivers rank users by the stale estimates
        rank = np.argsort(np.argsort(est, axis=1, kind="stable"), axis=1, kind="stable")
        user_powers = base_powers[rank]
        order = rank[:, user] + 1
        powers_by_order = np.broadcast_to(base_powers, (n, n_users))
    else:
        # noisy estimates leave the ordering (and hence the allocation) unchanged
        user_powers = np.broadcast_to(base_powers, (n, n_users))
        order = np.full(n, user + 1)
        powers_by_order = user_powers

    bits = rng.integers(0, 2, size=(n, n_users), dtype=np.uint8)
    x = np.einsum("ij,ij->i", bits.astype(float), user_powers)
    reps = cfg.dimming.redundancy
    noise = rng.standard_normal((n, reps)) * sigma
    y = cfg.responsivity * gains[user] * x[:, None] + noise
    h_hat = est[:, user]
    decided = sic_decode_batch(y, order[:, None], powers_by_order[:, None, :], h_hat[:, None], cfg.responsivity)
    sent = bits[:, user].astype(bool)
    if reps == 1:
        wrong = decided[:, 0] != sent
    else:
        ones = decided.sum(axis=1)
        vote_one = 2 * ones > reps
        tie = 2 * ones == reps
        # a tied vote cannot resolve the bit and counts as an error
        wrong = tie | (vote_one != sent)
    return int(np.count_nonzero(wrong)), int(np.count_nonzero(h_hat <= 0))


def _stream(seed: int, user: int, point: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(user, point, block))
    return np.random.Generator(np.random.Philox(ss))


def run_trials(config: LinkConfig, snr_grid, seed: int, bits_per_user: int, workers: int = 1,
               block_size: int = 1 << 18) -> BerCurve:
    """Estimate per-user BER at every SNR point."""
    if bits_per_user < 10_000:
        raise ValueError("bits_per_user must be at least 1e4")
    grid = np.atleast_1d(np.asarray(snr_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty SNR grid")
    n_users = config.n_users
    anchors = None
    if config.csi.kind is CsiKind.OUTDATED:
        anchors = anchor_positions(config.gains, config.room, config.frontend)
    sizes = [block_size] * (bits_per_user // block_size)
    if bits_per_user % block_size:
        sizes.append(bits_per_user % block_size)

    tasks = [(u, p, b) for p in range(grid.size) for u in range(n_users) for b in range(len(sizes))]
    sigmas = [config.sigma(s) for s in grid]

    def work(task):
        u, p, b = task
        return _block_errors(config, u, float(grid[p]), float(sigmas[p][u]), sizes[b],
                             _stream(seed, u, p, b), anchors)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    errors = np.zeros((grid.size, n_users), dtype=np.int64)
    nonpositive = 0
    for (u, p, _), (e, neg) in zip(tasks, results):
        errors[p, u] += e
        nonpositive += neg
    ber = errors / bits_per_user
    stderr = np.sqrt(ber * (1 - ber) / bits_per_user)
    curve = BerCurve(grid, ber, stderr, "monte_carlo", bits_per_user, seed, errors,
                     {"nonpositive_estimates": nonpositive})
    low = curve.unreliable
    if low.any():
        log.warning("%d BER points have fewer than 10 error events", int(low.sum()))
    return curve
