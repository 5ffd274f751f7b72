"""Exact per-user BER by integrating Gaussian measure over SIC decision regions.

The SIC cascade at one receiver partitions the real line of received samples
into intervals of constant decision trace. For small user counts we enumerate
every transmitted vector and add up the Gaussian mass of the intervals that
decide the wrong bit for the receiver's own signal. No approximation beyond
``erfc`` round-off is involved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .link import PowerAllocation

__all__ = ["DecisionMap", "decision_map", "exact_ber", "MAX_USERS"]

MAX_USERS = 12
_MIN_WIDTH = 1e-300


@dataclass(frozen=True)
class DecisionMap:
    """Sorted interior breakpoints and one decision trace per interval.

    Interval ``i`` is ``[breakpoints[i-1], breakpoints[i])`` with the outer
    intervals unbounded. Each breakpoint belongs to the interval on its right,
    which is always the side that decided 1 at that threshold.
    """

    breakpoints: tuple[float, ...]
    labels: tuple[tuple[int, ...], ...]

    def intervals(self):
        edges = (-math.inf, *self.breakpoints, math.inf)
        return list(zip(edges[:-1], edges[1:], self.labels))

    def lookup(self, y: float) -> tuple[int, ...]:
        i = int(np.searchsorted(self.breakpoints, y, side="right"))
        return self.labels[i]


def decision_map(order: int, alloc: PowerAllocation, estimated_gain: float,
                 responsivity: float = 1.0) -> DecisionMap:
    if alloc.n_users > MAX_USERS:
        raise ValueError(f"exact oracle supports at most {MAX_USERS} users")
    if not 1 <= order <= alloc.n_users:
        raise ValueError("decoding order out of range")
    scale = responsivity * estimated_gain
    powers = alloc.powers

    def split(lo, hi, stage, trace, cancelled):
        if stage == order:
            return [(lo, hi, trace)]
        thr = scale * (cancelled + powers[stage] / 2)
        out = []
        if lo < thr:
            out += split(lo, min(hi, thr), stage + 1, trace + (0,), cancelled)
        if hi > thr:
            out += split(max(lo, thr), hi, stage + 1, trace + (1,), cancelled + powers[stage])
        return out

    pieces = split(-math.inf, math.inf, 0, (), 0.0)
    # merge neighbours with identical traces so intervals are maximal
    merged = [list(pieces[0])]
    for lo, hi, trace in pieces[1:]:
        if trace == merged[-1][2]:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi, trace])
    return DecisionMap(tuple(p[0] for p in merged[1:]), tuple(p[2] for p in merged))


def _gaussian_mass(lo: float, hi: float, mean: float, sigma: float) -> float:
    a = (lo - mean) / sigma
    b = (hi - mean) / sigma
    # difference the tail that keeps both ends small to avoid cancellation
    if a >= 0:
        return float(ndtr(-a) - ndtr(-b))
    if b <= 0:
        return float(ndtr(b) - ndtr(a))
    return float(1.0 - ndtr(a) - ndtr(-b))


def exact_ber(order: int, alloc: PowerAllocation, gain: float, estimated_gain: float,
              sigma: float, responsivity: float = 1.0) -> float:
    """Exact BER of the receiver at ``order`` with true ``gain`` thresholding on ``estimated_gain``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    dmap = decision_map(order, alloc, estimated_gain, responsivity)
    wrong = {0: [], 1: []}
    for lo, hi, trace in dmap.intervals():
        if hi - lo < _MIN_WIDTH:
            continue
        # intervals deciding 1 are wrong when 0 was sent and vice versa
        wrong[1 - trace[-1]].append((lo, hi))
    powers = np.asarray(alloc.powers)
    masses = []
    for bits in itertools.product((0, 1), repeat=alloc.n_users):
        mean = responsivity * gain * float(np.dot(powers, bits))
        masses.extend(_gaussian_mass(lo, hi, mean, sigma) for lo, hi in wrong[bits[order - 1]])
    return math.fsum(masses) / 2**alloc.n_users
