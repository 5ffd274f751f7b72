"""Closed-form BER of NOMA-OOK users under perfect, noisy and outdated CSI.

Every stage kernel returns the error probability of detecting one signal in
the SIC cascade given the errors made in the earlier stages. The per-user BER
combines the kernels over all ``3**(k-1)`` stage-error vectors, weighting an
error-free stage by ``1 - Pr`` and each signed error by ``Pr / 2``.

``sigma`` arguments broadcast: pass an array of noise levels to evaluate a
whole SNR sweep at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special, stats

from .link import PowerAllocation

__all__ = [
    "EvalStats",
    "QExpFit",
    "q_function",
    "fit_q_exp",
    "default_q_fit",
    "interference_matrix",
    "stage_margins",
    "chain_ber",
    "conditional_ber_perfect",
    "ber_perfect",
    "conditional_ber_noisy",
    "ber_noisy",
    "conditional_ber_outdated",
    "ber_outdated",
    "vook_ber",
    "ber_vook",
    "apply_analog_dimming",
]


@dataclass
class EvalStats:
    """Counters for numerically delicate evaluations."""

    clamped: int = 0
    fallback_terms: int = 0
    closed_form_terms: int = 0
    fallback_sites: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"clamped": self.clamped, "fallback_terms": self.fallback_terms,
                "closed_form_terms": self.closed_form_terms}


def q_function(x):
    """Gaussian tail probability, via the complementary error function."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QExpFit:
    """``Q(x) ~ exp(a x^2 + b x + c)`` for ``x >= 0``."""

    a: float
    b: float
    c: float
    grid_min: float
    grid_max: float
    max_rel_error: float
    method: str

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self.a * x * x + self.b * x + self.c)


def fit_q_exp(grid=None, method: str = "minimax") -> QExpFit:
    """Fit the exponential-quadratic Q approximation on ``grid``.

    ``minimax`` minimises the worst relative error (a linear program on
    ``log Q`` followed by the optimal offset of ``c``); ``lstsq`` is ordinary
    least squares on ``log Q``.
    """
    if grid is None:
        grid = np.linspace(0.5, 8.0, 751)
    x = np.asarray(grid, dtype=float)
    if x.size < 100 or x.min() < 0 or x.max() > 8:
        raise ValueError("grid must hold at least 100 points inside [0, 8]")
    target = special.log_ndtr(-x)
    design = np.column_stack([x * x, x, np.ones_like(x)])
    if method == "lstsq":
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < 3:
            raise np.linalg.LinAlgError("singular normal equations in Q fit")
    elif method == "minimax":
        ones = np.ones((x.size, 1))
        a_ub = np.vstack([np.hstack([design, -ones]), np.hstack([-design, -ones])])
        b_ub = np.concatenate([target, -target])
        res = optimize.linprog([0, 0, 0, 1], A_ub=a_ub, b_ub=b_ub,
                               bounds=[(None, None)] * 3 + [(0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"Q fit failed: {res.message}")
        coef = res.x[:3].copy()
        # log-error band [-t, t] maps to relative error tanh(t) after this shift
        coef[2] -= math.log(math.cosh(res.x[3]))
    else:
        raise ValueError(f"unknown fit method {method!r}")
    a, b, c = (float(v) for v in coef)
    if a >= 0:
        raise RuntimeError("Q fit produced a non-negative quadratic coefficient")
    rel = np.abs(np.expm1(design @ coef - target))
    return QExpFit(a, b, c, float(x.min()), float(x.max()), float(rel.max()), method)


@lru_cache(maxsize=None)
def default_q_fit() -> QExpFit:
    return fit_q_exp()


@lru_cache(maxsize=None)
def _interference_rows(n_rest: int) -> np.ndarray:
    rows = np.array(list(itertools.product((0, 1), repeat=n_rest)), dtype=np.int8)
    return rows.reshape(2**n_rest, n_rest)


def interference_matrix(n_users: int, order: int) -> np.ndarray:
    """Every on/off pattern of the signals decoded after ``order``, one per row."""
    if not 1 <= order <= n_users:
        raise ValueError("need 1 <= order <= n_users")
    return _interference_rows(n_users - order).copy()


def stage_margins(order: int, errors, alloc: PowerAllocation) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free distances to the threshold for transmitted 0 and 1 at stage ``order``.

    Returns ``(p_minus, p_plus)`` over the interference rows.
    """
    errors = tuple(errors)
    if len(errors) != order - 1:
        raise ValueError("error vector must have length order - 1")
    powers = alloc.as_array()
    p_k = powers[order - 1]
    residual = math.fsum(e * p for e, p in zip(errors, powers))
    interference = _interference_rows(alloc.n_users - order) @ powers[order:]
    return p_k / 2 - residual - interference, p_k / 2 + residual + interference


def _clamp(value, stats_: EvalStats | None):
    value = np.asarray(value, dtype=float)
    bad = (value < 0) | (value > 1)
    if stats_ is not None:
        stats_.clamped += int(np.count_nonzero(bad))
    out = np.clip(value, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def chain_ber(order: int, kernel: Callable[[int, tuple], np.ndarray],
              final: Callable[[np.ndarray], np.ndarray] | None = None):
    """Combine stage kernels over all stage-error vectors.

    ``kernel(j, prefix)`` is the conditional error probability of stage ``j``
    given the signed errors ``prefix`` of stages ``1..j-1``. ``final``
    optionally transforms the last-stage kernel.
    """
    if order < 1:
        raise ValueError("order must be >= 1")

    def walk(j, prefix, weight):
        if j == order - 1:
            last = kernel(order, prefix)
            return weight * (final(last) if final is not None else last)
        pr = kernel(j + 1, prefix)
        return (walk(j + 1, prefix + (0,), weight * (1 - pr))
                + walk(j + 1, prefix + (1,), weight * pr / 2)
                + walk(j + 1, prefix + (-1,), weight * pr / 2))

    out = walk(0, (), 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _as_sigma(sigma):
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0):
        raise ValueError("noise standard deviation must be positive")
    return s


def conditional_ber_perfect(order, errors, alloc: PowerAllocation, gain, sigma, responsivity=1.0):
    p_minus, p_plus = stage_margins(order, errors, alloc)
    s = _as_sigma(sigma)[..., None]
    scale = responsivity * gain / s
    total = q_function(scale * p_minus).sum(axis=-1) + q_function(scale * p_plus).sum(axis=-1)
    out = total / 2.0 ** (alloc.n_users - order + 1)
    return float(out) if np.ndim(out) == 0 else out


def ber_perfect(order, alloc: PowerAllocation, gain, sigma, responsivity=1.0):
    return chain_ber(order, lambda j, e: conditional_ber_perfect(j, e, alloc, gain, sigma, responsivity))


_PHI = 1.0 / math.sqrt(2.0 * math.pi)


def _mixture_q(shift, spread):
    """``E[Q(shift + spread * Z)]`` for standard normal ``Z``, by adaptive quadrature.

    ``log Q(shift + spread*z) - z**2/2`` is concave, so the integrand has one
    peak with unit-or-narrower width. We integrate the integrand divided by its
    peak value on panels around the mode, which keeps deep tails accurate.
    """
    def log_f(z):
        return float(special.log_ndtr(-(shift + spread * z))) - 0.5 * z * z

    mode = optimize.minimize_scalar(lambda z: -log_f(z), bounds=(-45.0, 45.0), method="bounded",
                                    options={"xatol": 1e-12}).x
    narrow = 1.0 / max(spread, 1.0)
    offsets = (narrow, 1.0, 4.0, 12.0, 40.0)
    edges = {mode + o for o in offsets} | {mode - o for o in offsets} | {mode}
    if spread > 0:
        # Q drops from 1 to 0 around z0; on a flat plateau the mode alone misses it
        z0 = -shift / spread
        if abs(z0 - mode) < 40.0:
            edges |= {z0 + k * narrow for k in (-40, -10, -3, -1, 0, 1, 3, 10, 40)}
    edges = sorted(e for e in edges if abs(e - mode) <= 40.0)
    # drop near-duplicate edges; sliver panels upset QUADPACK
    edges = [e for i, e in enumerate(edges) if i == 0 or e - edges[i - 1] > 1e-3 * narrow]
    peak = max(log_f(z) for z in (mode, *edges))
    if peak < -760.0:
        return 0.0  # below the smallest subnormal even after integrating
    total = math.fsum(
        integrate.quad(lambda z: math.exp(log_f(z) - peak), a, b, limit=200, epsabs=1e-16, epsrel=1e-10)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )
    return total * _PHI * math.exp(peak)


def _noisy_closed_form(margin, gain, sigma, est_var, fit: QExpFit, responsivity):
    u = responsivity * margin / sigma
    alpha = 1.0 / est_var - 2.0 * fit.a * u * u
    expo = fit.c + (2 * fit.a * u * u * gain * gain + 2 * fit.b * u * gain
                    + fit.b * fit.b * u * u * est_var) / (2.0 - 4.0 * fit.a * u * u * est_var)
    return np.exp(expo) / np.sqrt(est_var * alpha)


def conditional_ber_noisy(order, errors, alloc: PowerAllocation, gain, sigma, est_var,
                          fit: QExpFit | None = None, responsivity=1.0, method="closed_form",
                          stats_: EvalStats | None = None):
    """Stage error probability when the receiver thresholds with ``gain + N(0, est_var)``.

    ``closed_form`` uses the exponential Q approximation wherever the noise-free
    margin is positive and quadrature elsewhere; ``quadrature`` integrates the
    exact Gaussian mixture for every term.
    """
    if est_var <= 0:
        raise ValueError("estimation variance must be positive")
    if method not in ("closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    fit = fit or default_q_fit()
    if fit.a >= 0:
        raise ValueError("Q fit needs a negative quadratic coefficient")
    p_minus, p_plus = stage_margins(order, errors, alloc)
    p_k = alloc.powers[order - 1]
    s_arr = _as_sigma(sigma)
    est_sd = math.sqrt(est_var)
    total = np.zeros(s_arr.shape)
    for margin in np.concatenate([p_minus, p_plus]):
        use_closed = method == "closed_form" and margin > 0
        if use_closed:
            total = total + _noisy_closed_form(margin, gain, s_arr, est_var, fit, responsivity)
            if stats_ is not None:
                stats_.closed_form_terms += s_arr.size
        else:
            term = np.vectorize(lambda s: _mixture_q(
                responsivity * gain * margin / s, responsivity * p_k * est_sd / (2 * s)))(s_arr)
            total = total + term
            if stats_ is not None:
                stats_.fallback_terms += s_arr.size
                if method == "closed_form":
                    stats_.fallback_sites.append((order, tuple(errors), float(margin)))
    return _clamp(total / 2.0 ** (alloc.n_users - order + 1), stats_)


def ber_noisy(order, alloc: PowerAllocation, gain, sigma, est_var, fit: QExpFit | None = None,
              responsivity=1.0, method="closed_form", stats_: EvalStats | None = None):
    fit = fit or default_q_fit()
    return chain_ber(order, lambda j, e: conditional_ber_noisy(
        j, e, alloc, gain, sigma, est_var, fit, responsivity, method, stats_))


def conditional_ber_outdated(order, errors, alloc: PowerAllocation, gain, sigma, bound, responsivity=1.0):
    """Upper bound on the stage error probability for a stale estimate within ``bound`` of the truth."""
    if bound < 0:
        raise ValueError("error bound must be non-negative")
    p_minus, p_plus = stage_margins(order, errors, alloc)
    s = _as_sigma(sigma)[..., None]
    scale = responsivity * gain / s
    shift = responsivity * alloc.powers[order - 1] * bound / (2 * s)
    total = (q_function(scale * p_minus - shift).sum(axis=-1)
             + q_function(scale * p_plus - shift).sum(axis=-1))
    out = total / 2.0 ** (alloc.n_users - order + 1)
    return float(out) if np.ndim(out) == 0 else out


def ber_outdated(order, alloc: PowerAllocation, gain, sigma, bound, responsivity=1.0):
    return chain_ber(order, lambda j, e: conditional_ber_outdated(j, e, alloc, gain, sigma, bound, responsivity))


def vook_ber(p_raw, n: int):
    """Probability that at least half of ``n`` independent repetitions are wrong."""
    if n < 1:
        raise ValueError("need at least one repetition")
    p = np.asarray(p_raw, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p_raw must be a probability")
    out = stats.binom.sf(math.ceil(n / 2) - 1, n, p)
    return float(out) if np.ndim(out) == 0 else out


def ber_vook(order, alloc: PowerAllocation, gain, sigma, n: int, responsivity=1.0, bound=0.0):
    """Digital-dimming BER: majority vote over ``n`` slots applied to the decoding stage."""
    return chain_ber(
        order,
        lambda j, e: conditional_ber_outdated(j, e, alloc, gain, sigma, bound, responsivity),
        final=lambda p: vook_ber(p, n),
    )


def apply_analog_dimming(alloc: PowerAllocation, dimming: float) -> PowerAllocation:
    if not 0.0 < dimming <= 1.0:
        raise ValueError("analog dimming factor must lie in (0, 1]")
    return alloc.scaled(dimming)
