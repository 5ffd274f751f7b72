"""Configuration-driven sweeps that write BER curves as CSV plus a JSON sidecar."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analytic import EvalStats, ber_noisy, ber_outdated, ber_perfect, ber_vook
from .channel import (
    REFERENCE_FRONTEND,
    REFERENCE_GAINS,
    Room,
    coverage_radius,
    gain_at_radius,
    lumped_constant,
    radius_for_gain,
)
from .link import DimmingConfig, DimmingScheme
from .montecarlo import (
    BerCurve,
    CsiErrorModel,
    CsiKind,
    LinkConfig,
    MobilityEvent,
    error_bound,
    run_trials,
    snr_to_sigma,
)
from .oracle import exact_ber

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "SCENARIOS",
    "ConfigError",
    "GridMismatch",
    "resolve_config",
    "load_config_file",
    "analytic_curve",
    "run",
    "write_curve",
    "read_curve",
    "compare",
    "CSV_HEADER",
    "OUT_DIR_ENV",
]

CSV_HEADER = ("snr_db", "user", "ber", "stderr", "provenance")
OUT_DIR_ENV = "NOMA_VLC_OUT"
SELECTORS = ("analytic", "quadrature", "mc", "oracle", "bound")


class ConfigError(ValueError):
    pass


class GridMismatch(ValueError):
    pass


def _default_snr():
    return [105.0 + 2.5 * i for i in range(11)]


@dataclass
class ExperimentConfig:
    scenario: str = "custom"
    snr: list = field(default_factory=_default_snr)
    rho: float = 0.3
    rho_grid: list = field(default_factory=list)
    gains: list = field(default_factory=lambda: list(REFERENCE_GAINS))
    total_power: float = 0.25
    responsivity: float = 1.0
    csi: str = "perfect"
    csi_variance: float = 2e-6
    csi_variance_grid: list = field(default_factory=list)
    kappa: float | None = None
    max_velocity: float = 2.0
    update_interval: float = 1.0
    mobility: str = "group"
    order: str = "preserved"
    dimming: str = "none"
    dimming_factors: list = field(default_factory=lambda: [1.0])
    error_bound_mode: str = "gain_difference"
    outputs: list = field(default_factory=lambda: ["analytic", "mc"])
    trials: int = 10_000_000
    seed: int = 20170101
    workers: int = 1
    positions: list = field(default_factory=list)
    random_users: int = 0
    room: list = field(default_factory=lambda: [4.0, 4.0, 3.0])
    led_xy: list | None = None
    link_height: float = 1.8

    def validate(self):
        if not self.snr:
            raise ConfigError("snr grid must not be empty")
        for r in [self.rho, *self.rho_grid]:
            if not 0 < r < 1:
                raise ConfigError(f"rho must lie in (0, 1), got {r}")
        if self.trials < 10_000:
            raise ConfigError("trial budget must be at least 1e4 bits per point")
        if self.csi not in [k.value for k in CsiKind]:
            raise ConfigError(f"unknown csi model {self.csi!r}")
        if self.dimming not in [d.value for d in DimmingScheme]:
            raise ConfigError(f"unknown dimming scheme {self.dimming!r}")
        if self.error_bound_mode not in ("gain_difference", "literal"):
            raise ConfigError(f"unknown error_bound_mode {self.error_bound_mode!r}")
        bad = set(self.outputs) - set(SELECTORS)
        if bad or not self.outputs:
            raise ConfigError(f"outputs must be a non-empty subset of {SELECTORS}")
        if len(self.room) != 3 or min(self.room) <= 0:
            raise ConfigError("room must be [width, length, height] in metres")
        if self.random_users < 0:
            raise ConfigError("random_users must be non-negative")
        if not self.dimming_factors:
            raise ConfigError("dimming_factors must not be empty")
        try:
            for f in self.dimming_factors:
                DimmingConfig(self.dimming, f)
            self.link_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def csi_model(self) -> CsiErrorModel:
        kind = CsiKind(self.csi)
        if kind is CsiKind.NOISY_FIXED:
            return CsiErrorModel.noisy_fixed(self.csi_variance)
        if kind is CsiKind.NOISY_SNR:
            return CsiErrorModel.noisy_snr_dependent(self.kappa)
        if kind is CsiKind.OUTDATED:
            return CsiErrorModel.outdated(self.max_velocity, self.update_interval, self.mobility, self.order)
        return CsiErrorModel.perfect()

    def make_room(self) -> Room:
        w, l, h = self.room
        led = (w / 2, l / 2) if self.led_xy is None else tuple(self.led_xy)
        return Room(w, l, h, led, self.link_height)

    def user_gains(self) -> tuple[float, ...]:
        """Gains from explicit positions, random placement, or the gain list, in that priority."""
        room = self.make_room()
        if self.positions:
            xy = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        elif self.random_users:
            # placement draws use their own stream so MC streams stay untouched
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0xD0,)))
            r_cov = coverage_radius(REFERENCE_FRONTEND, self.link_height)
            r = r_cov * np.sqrt(rng.uniform(0.01, 1.0, self.random_users))
            t = rng.uniform(0, 2 * math.pi, self.random_users)
            xy = np.asarray(room.led_xy) + np.column_stack([r * np.cos(t), r * np.sin(t)])
        else:
            return tuple(float(g) for g in self.gains)
        rel = xy - np.asarray(room.led_xy)
        g = gain_at_radius(np.hypot(rel[:, 0], rel[:, 1]), REFERENCE_FRONTEND, self.link_height)
        if np.any(g <= 0):
            raise ConfigError("every user must sit inside the receiver field of view")
        return tuple(float(v) for v in g)

    def link_config(self, dimming_factor: float | None = None, csi: CsiErrorModel | None = None,
                    rho: float | None = None) -> LinkConfig:
        factor = self.dimming_factors[0] if dimming_factor is None else dimming_factor
        return LinkConfig(
            gains=self.user_gains(), rho=self.rho if rho is None else rho,
            total_power=self.total_power, responsivity=self.responsivity,
            csi=self.csi_model() if csi is None else csi,
            dimming=DimmingConfig(self.dimming, factor),
            room=self.make_room(),
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


SCENARIOS: dict[str, dict[str, Any]] = {
    "fig3": {"rho_grid": [round(0.1 * i, 1) for i in range(1, 10)], "snr": [110.0, 115.0, 120.0],
             "outputs": ["analytic"]},
    "fig4": {"outputs": ["analytic", "mc", "oracle"]},
    "fig5": {"snr": [115.0], "csi": "noisy_fixed",
             "csi_variance_grid": [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 2e-6],
             "outputs": ["quadrature", "mc"]},
    "fig6": {"csi": "noisy_fixed", "outputs": ["quadrature", "mc"]},
    "fig7": {"csi": "noisy_fixed", "csi_variance": 2e-6, "outputs": ["analytic", "quadrature", "mc"]},
    "fig8": {"csi": "outdated", "mobility": "group", "order": "preserved", "outputs": ["bound", "mc"]},
    "fig9": {"csi": "outdated", "mobility": "independent", "order": "changed", "outputs": ["bound", "mc"]},
    "fig10": {"dimming": "analog", "dimming_factors": [round(0.1 * i, 1) for i in range(1, 11)],
              "outputs": ["analytic", "mc"]},
    "fig11": {"dimming": "vook", "dimming_factors": [round(0.1 * i, 1) for i in range(1, 10)],
              "outputs": ["analytic", "mc"]},
    "custom": {},
}

SCENARIO_NOTES = {
    "fig3": "average and per-user analytic BER versus rho at 110/115/120 dB",
    "fig4": "perfect CSI: analytic, exact oracle and Monte Carlo versus SNR",
    "fig5": "noisy CSI at 115 dB for a sweep of fixed estimation variances",
    "fig6": "noisy CSI: fixed and SNR-dependent variance",
    "fig7": "noisy CSI with variance 2e-6: closed form, quadrature and Monte Carlo",
    "fig8": "outdated CSI, group mobility, order preserved: bound and Monte Carlo",
    "fig9": "outdated CSI, independent mobility, order changed: Monte Carlo",
    "fig10": "analog dimming sweep",
    "fig11": "VOOK digital dimming sweep",
    "custom": "everything taken from the config file and overrides",
}


def load_config_file(path: str | os.PathLike) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Scenario defaults, then the config file, then command-line overrides."""
    merged: dict[str, Any] = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    scenario = merged.get("scenario", "custom")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    values = dict(SCENARIOS[scenario])
    values.update(merged)
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def _bounds(link: LinkConfig, literal: bool) -> np.ndarray:
    """Per-user CSI error bound at maximum speed, for the worst heading."""
    if not literal:
        return link.outdated_bounds()
    z = link.room.link_height
    disp = link.csi.max_velocity * link.csi.update_interval
    r_cov = coverage_radius(link.frontend, z)
    m = link.frontend.lambertian_order
    w = lumped_constant(link.frontend, z)
    out = []
    for g in link.gains:
        r = radius_for_gain(g, link.frontend, z)
        candidates = [max(r - disp, 0.0), min(r + disp, r_cov)]
        out.append(max(error_bound(MobilityEvent(r, r2, link.csi.max_velocity, link.csi.update_interval, z),
                                   w, m, literal=True) for r2 in candidates))
    return np.array(out)


def analytic_curve(link: LinkConfig, snr_grid, kind: str = "analytic", literal_bound: bool = False,
                   stats_: EvalStats | None = None) -> BerCurve:
    """Closed-form (or quadrature, bound, exact) per-user BER over ``snr_grid``."""
    grid = np.asarray(snr_grid, dtype=float)
    sigma = snr_to_sigma(grid, link.total_power, link.responsivity)
    alloc = link.allocation().scaled(link.dimming.power_scale())
    gains = link.gains
    csi = link.csi
    rows = []
    for k in range(1, link.n_users + 1):
        h = gains[k - 1]
        if kind == "oracle":
            vals = [exact_ber(k, alloc, h, h, s, link.responsivity) for s in sigma]
        elif kind == "bound":
            e = _bounds(link, literal_bound)[k - 1]
            vals = _maybe_vook(link, k, alloc, h, sigma, e)
        elif csi.kind in (CsiKind.NOISY_FIXED, CsiKind.NOISY_SNR):
            method = "quadrature" if kind == "quadrature" else "closed_form"
            vals = [ber_noisy(k, alloc, h, s, csi.variance_at(snr), responsivity=link.responsivity,
                              method=method, stats_=stats_) for s, snr in zip(sigma, grid)]
        else:
            vals = _maybe_vook(link, k, alloc, h, sigma, 0.0)
        rows.append(np.asarray(vals, dtype=float))
    provenance = "analytic" if kind == "quadrature" else kind
    return BerCurve.from_values(grid, np.column_stack(rows), provenance)


def _maybe_vook(link, k, alloc, h, sigma, bound):
    if link.dimming.scheme is DimmingScheme.VOOK:
        return ber_vook(k, alloc, h, sigma, link.dimming.redundancy, link.responsivity, bound)
    if bound:
        return ber_outdated(k, alloc, h, sigma, bound, link.responsivity)
    return ber_perfect(k, alloc, h, sigma, link.responsivity)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_curve(path: Path, curve: BerCurve, include_average: bool = False) -> None:
    rows = []
    for i, snr in enumerate(curve.snr_grid):
        if include_average:
            rows.append((snr, 0, float(np.mean(curve.ber[i])), float(np.sqrt(np.sum(curve.stderr[i] ** 2))) / curve.n_users))
        for u in range(curve.n_users):
            rows.append((snr, u + 1, curve.ber[i, u], curve.stderr[i, u]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for snr, user, ber, se in rows:
            writer.writerow([_fmt(snr), user, _fmt(ber), _fmt(se), curve.provenance])


def read_curve(path) -> dict[tuple[float, int], tuple[float, float, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return {(float(r[0]), int(r[1])): (float(r[2]), float(r[3]), r[4]) for r in reader}


def compare(path_a, path_b, rule: str = "stderr", tol: float = 3.0, min_ber: float = 0.0) -> dict:
    """Point-by-point check of curve ``a`` against curve ``b``.

    Rules: ``abs`` (|a-b| <= tol), ``ratio`` (max(a/b, b/a) <= tol),
    ``stderr`` (|a-b| <= tol * stderr_b) and ``ge`` (a >= b - tol * stderr_b).
    Points where ``b`` is below ``min_ber`` are reported but not judged.
    """
    a, b = read_curve(path_a), read_curve(path_b)
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise GridMismatch(f"curves cover different (snr, user) points, e.g. {missing[:3]}")
    points = []
    for key in sorted(a):
        va, _, _ = a[key]
        vb, sb, _ = b[key]
        diff = va - vb
        judged = vb >= min_ber and key[1] != 0
        if rule == "abs":
            ok = abs(diff) <= tol
            dev = abs(diff)
        elif rule == "ratio":
            dev = max(va / vb, vb / va) if va > 0 and vb > 0 else (1.0 if va == vb else math.inf)
            ok = dev <= tol
        elif rule == "stderr":
            dev = abs(diff) / sb if sb > 0 else (0.0 if diff == 0 else math.inf)
            ok = dev <= tol
        elif rule == "ge":
            dev = -diff / sb if sb > 0 else (0.0 if diff >= 0 else math.inf)
            ok = diff >= -tol * sb
        else:
            raise ValueError(f"unknown rule {rule!r}")
        points.append({"snr_db": key[0], "user": key[1], "a": va, "b": vb, "deviation": dev,
                       "judged": judged, "pass": bool(ok) or not judged})
    judged = [p for p in points if p["judged"]]
    return {
        "rule": rule, "tol": tol, "min_ber": min_ber,
        "pass": all(p["pass"] for p in points),
        "n_points": len(points), "n_judged": len(judged),
        "max_deviation": max((p["deviation"] for p in judged), default=0.0),
        "failures": [p for p in points if not p["pass"]],
    }


def _version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _write_meta(out_dir: Path, meta: dict) -> None:
    tmp = out_dir / "metadata.json.tmp"
    tmp.write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    tmp.replace(out_dir / "metadata.json")


def _label(prefix: str, value: float) -> str:
    return f"{prefix}_{value:g}"


def run(config: ExperimentConfig, out_dir: str | os.PathLike) -> dict:
    """Run every curve family of ``config`` into ``out_dir`` and return the metadata."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    meta = {"status": "incomplete", "config": config.as_dict(), "seed": config.seed,
            "version": _version(), "files": [], "counters": {}}
    _write_meta(out, meta)
    stats_ = EvalStats()
    counters = {"nonpositive_estimates": 0, "unreliable_points": 0}

    def emit(name: str, curve: BerCurve, average: bool = False):
        path = out / f"{name}.csv"
        write_curve(path, curve, include_average=average)
        meta["files"].append(path.name)
        if curve.errors is not None:
            counters["nonpositive_estimates"] += curve.counters.get("nonpositive_estimates", 0)
            counters["unreliable_points"] += int(curve.unreliable.sum())

    literal = config.error_bound_mode == "literal"
    variants: list[tuple[str, LinkConfig]] = []
    if config.rho_grid:
        variants = [(_label("rho", r), config.link_config(rho=r)) for r in config.rho_grid]
    elif config.csi_variance_grid:
        variants = [(_label("var", v), config.link_config(csi=CsiErrorModel.noisy_fixed(v)))
                    for v in config.csi_variance_grid]
    elif config.dimming != "none":
        variants = [(_label("dim", f), config.link_config(dimming_factor=f)) for f in config.dimming_factors]
    else:
        variants = [("", config.link_config())]

    for tag, link in variants:
        for sel in config.outputs:
            name = f"{tag}_{sel}" if tag else sel
            if sel == "mc":
                curve = run_trials(link, config.snr, config.seed, config.trials, workers=config.workers)
            else:
                curve = analytic_curve(link, config.snr, sel, literal_bound=literal, stats_=stats_)
            emit(name, curve, average=bool(config.rho_grid))
        if config.scenario == "fig6" and "mc" in config.outputs:
            sd = config.link_config(csi=CsiErrorModel.noisy_snr_dependent(config.kappa))
            emit("snr_dependent_mc", run_trials(sd, config.snr, config.seed, config.trials,
                                                workers=config.workers))
        if config.scenario == "fig9" and "mc" in config.outputs:
            pres = config.link_config(csi=CsiErrorModel.outdated(
                config.max_velocity, config.update_interval, "group", "preserved"))
            emit("preserved_mc", run_trials(pres, config.snr, config.seed, config.trials,
                                            workers=config.workers))

    counters.update(stats_.as_dict())
    meta.update(status="complete", wall_time_s=round(time.time() - started, 3), counters=counters)
    _write_meta(out, meta)
    return meta
