import itertools
import logging
import math

import numpy as np
import pytest

from noma_vlc.analytic import ber_vook, q_function, vook_ber
from noma_vlc.channel import REFERENCE_FRONTEND, REFERENCE_GAINS, Room, gain_at_radius, lumped_constant
from noma_vlc.link import DimmingConfig, fpa_allocate
from noma_vlc.montecarlo import (
    CsiErrorModel,
    CsiKind,
    LinkConfig,
    MobilityEvent,
    anchor_positions,
    error_bound,
    inject_csi,
    run_trials,
    simulate_mobility_epoch,
    sigma_to_snr,
    snr_to_sigma,
    worst_case_bound,
)
from noma_vlc.oracle import exact_ber

M = REFERENCE_FRONTEND.lambertian_order


def test_snr_conversion():
    assert snr_to_sigma(0.0, 0.25) == pytest.approx(0.25)
    assert snr_to_sigma(20.0, 0.25) == pytest.approx(0.025)
    assert sigma_to_snr(snr_to_sigma(117.5, 0.25), 0.25) == pytest.approx(117.5)


def test_receive_snr_offset():
    # receive SNR drops by -20 log10(h3) ~ 85.6 dB relative to transmit SNR
    s = snr_to_sigma(120.0, 0.25)
    rx = 10 * math.log10((REFERENCE_GAINS[2] * 0.25) ** 2 / s**2)
    assert 120.0 - rx == pytest.approx(85.56, abs=0.01)
    assert abs((120.0 - rx) - 80.0) <= 6.0


def test_csi_model_variance():
    assert CsiErrorModel.noisy_fixed(2e-6).variance_at(130.0) == 2e-6
    sd = CsiErrorModel.noisy_snr_dependent()
    assert sd.variance_at(110.0) == pytest.approx(2e-6)
    assert sd.variance_at(120.0) == pytest.approx(2e-7)
    assert CsiErrorModel.perfect().variance_at(110.0) == 0.0
    with pytest.raises(ValueError):
        CsiErrorModel(CsiKind.OUTDATED, mobility="swarm")


def test_error_bound_zero_motion():
    w = lumped_constant(REFERENCE_FRONTEND, 2.25)
    assert error_bound(MobilityEvent(1.0, 1.0, 0.0, 1.0, 2.25), w, M) == 0.0
    assert error_bound(MobilityEvent(1.0, 1.0, 2.0, 0.0, 2.25), w, M) == 0.0
    assert error_bound(MobilityEvent(1.0, 1.0, 0.0, 1.0, 2.25), w, M, literal=True) == 0.0


def test_error_bound_oracle_both_modes():
    w = lumped_constant(REFERENCE_FRONTEND, 2.25)
    ev = MobilityEvent(1.0, 2.0, 1.0, 1.0, 2.25)
    # mpmath at 30 digits
    assert error_bound(ev, w, M) == pytest.approx(1.4462483767305344e-05, rel=1e-12)
    assert error_bound(ev, w, M, literal=True) == pytest.approx(0.13631253691943452, rel=1e-12)


def test_worst_case_bound_dominates_sampled_moves():
    z = Room().link_height
    rng = np.random.default_rng(2)
    for g in REFERENCE_GAINS:
        r0 = float(np.hypot(*(anchor_positions([g], Room(), REFERENCE_FRONTEND)[0] - 2.0)))
        e = worst_case_bound(r0, 2.0, REFERENCE_FRONTEND, z)
        r1 = np.clip(r0 + rng.uniform(-2, 2, 1000), 0, 1.8)
        moved = np.abs(gain_at_radius(r1, REFERENCE_FRONTEND, z) - g)
        assert moved.max() <= e * (1 + 1e-12)


def test_anchor_positions_reproduce_gains():
    room = Room()
    xy = anchor_positions(REFERENCE_GAINS, room, REFERENCE_FRONTEND)
    r = np.hypot(*(xy - np.asarray(room.led_xy)).T)
    assert gain_at_radius(r, REFERENCE_FRONTEND, room.link_height) == pytest.approx(REFERENCE_GAINS, rel=1e-12)


def test_inject_csi():
    rng = np.random.default_rng(4)
    h = np.asarray(REFERENCE_GAINS)
    assert np.array_equal(inject_csi(h, CsiErrorModel.perfect(), rng), h)
    draws = inject_csi(np.full(1_000_000, 3e-5), CsiErrorModel.noisy_fixed(2e-6), rng)
    assert np.var(draws - 3e-5) == pytest.approx(2e-6, rel=0.01)
    assert np.array_equal(inject_csi(h, CsiErrorModel.outdated(0.0), rng, stale_gains=h), h)
    with pytest.raises(ValueError):
        inject_csi(h, CsiErrorModel.outdated(), rng)


def test_zero_speed_keeps_positions():
    rng = np.random.default_rng(8)
    room = Room()
    start = anchor_positions(REFERENCE_GAINS, room, REFERENCE_FRONTEND)
    for ev, xy in zip(simulate_mobility_epoch(room, 0.0, 1.0, rng, positions=start), start):
        assert ev.end_xy == pytest.approx(tuple(xy))
        assert ev.end_radius == pytest.approx(ev.start_radius)


def test_independent_displacement_bounded():
    rng = np.random.default_rng(9)
    for _ in range(2000):
        for ev in simulate_mobility_epoch(Room(), 2.0, 1.0, rng, 3, mode="independent"):
            assert math.dist(ev.start_xy, ev.end_xy) <= 2.0 + 1e-12


def _order_kept(events, room):
    a = gain_at_radius([e.start_radius for e in events], REFERENCE_FRONTEND, room.link_height)
    b = gain_at_radius([e.end_radius for e in events], REFERENCE_FRONTEND, room.link_height)
    return np.array_equal(np.argsort(a), np.argsort(b))


@pytest.mark.xfail(strict=True, reason=(
    "a shared translation moves users along different radii; measured order "
    "preservation is ~35% of epochs, not >= 99%"))
def test_group_mobility_preserves_order():
    rng = np.random.default_rng(10)
    room = Room()
    kept = sum(_order_kept(simulate_mobility_epoch(room, 2.0, 1.0, rng, 3, mode="group"), room)
               for _ in range(10_000))
    assert kept / 10_000 >= 0.99


def test_group_mobility_preservation_rate_recorded():
    rng = np.random.default_rng(10)
    room = Room()
    kept = sum(_order_kept(simulate_mobility_epoch(room, 2.0, 1.0, rng, 3, mode="group"), room)
               for _ in range(10_000))
    assert 0.30 <= kept / 10_000 <= 0.40


def test_noiseless_perfect_csi_is_error_free():
    curve = run_trials(LinkConfig(), [400.0], seed=1, bits_per_user=20_000)
    assert curve.errors.sum() == 0
    assert curve.unreliable.all()


def test_unreliable_points_are_logged(caplog):
    with caplog.at_level(logging.WARNING, logger="noma_vlc.montecarlo"):
        run_trials(LinkConfig(), [400.0], seed=1, bits_per_user=10_000)
    assert "fewer than 10 error events" in caplog.text


def test_single_user_matches_closed_form():
    cfg = LinkConfig(gains=(4e-5,))
    grid = [100.0, 105.0]
    curve = run_trials(cfg, grid, seed=7, bits_per_user=400_000)
    for i, snr in enumerate(grid):
        ref = q_function(4e-5 * 0.25 / (2 * snr_to_sigma(snr, 0.25)))
        assert abs(curve.ber[i, 0] - ref) <= 3 * curve.stderr[i, 0]


def test_exact_oracle_vs_large_monte_carlo():
    # users decoded after SIC stages, 1e8 bits
    cfg = LinkConfig()
    snr = 120.0
    curve = run_trials(cfg, [snr], seed=2024, bits_per_user=100_000_000, block_size=1 << 20)
    alloc = cfg.allocation()
    sigma = snr_to_sigma(snr, 0.25)
    for k in (2, 3):
        h = REFERENCE_GAINS[k - 1]
        ref = exact_ber(k, alloc, h, h, sigma)
        assert abs(curve.ber[0, k - 1] - ref) <= 3 * curve.stderr[0, k - 1]


def _vook_first_user_exact(alloc, h, sigma, n):
    # interference repeats in every slot with the data, so slot errors are
    # independent only given the other users' bits
    p = alloc.powers
    total = 0.0
    for rest in itertools.product((0, 1), repeat=len(p) - 1):
        i = float(np.dot(p[1:], rest))
        for bit in (0, 1):
            margin = p[0] / 2 - i if bit == 0 else p[0] / 2 + i
            total += vook_ber(q_function(h * margin / sigma), n)
    return total / 2 ** len(p)


def test_vook_first_user_matches_conditional_binomial():
    cfg = LinkConfig(dimming=DimmingConfig("vook", 0.2))
    grid = [105.0, 110.0]
    curve = run_trials(cfg, grid, seed=3, bits_per_user=200_000)
    for i, snr in enumerate(grid):
        ref = _vook_first_user_exact(cfg.allocation(), REFERENCE_GAINS[0], snr_to_sigma(snr, 0.25), 4)
        assert abs(curve.ber[i, 0] - ref) <= 3 * curve.stderr[i, 0]


def test_vook_unconditional_binomial_is_optimistic():
    # the closed form applies the binomial after averaging over interference
    alloc = fpa_allocate(0.25, 0.3, 3)
    sigma = snr_to_sigma(105.0, 0.25)
    exact = _vook_first_user_exact(alloc, REFERENCE_GAINS[0], sigma, 4)
    assert ber_vook(1, alloc, REFERENCE_GAINS[0], sigma, 4) < 0.6 * exact


def test_determinism_and_parallel_equality():
    cfg = LinkConfig(csi=CsiErrorModel.noisy_fixed(1e-11))
    grid = [110.0, 115.0]
    a = run_trials(cfg, grid, seed=99, bits_per_user=50_000, block_size=12_345)
    b = run_trials(cfg, grid, seed=99, bits_per_user=50_000, block_size=12_345)
    c = run_trials(cfg, grid, seed=99, bits_per_user=50_000, block_size=12_345, workers=4)
    assert np.array_equal(a.errors, b.errors) and np.array_equal(a.errors, c.errors)
    d = run_trials(cfg, grid, seed=100, bits_per_user=50_000, block_size=12_345)
    assert not np.array_equal(a.errors, d.errors)


def test_nonpositive_estimates_counted():
    cfg = LinkConfig(csi=CsiErrorModel.noisy_fixed(2e-6))
    curve = run_trials(cfg, [115.0], seed=5, bits_per_user=20_000)
    # sigma_eps ~ 1.4e-3 dwarfs the gains, so about half the estimates are negative
    frac = curve.counters["nonpositive_estimates"] / (3 * 20_000)
    assert 0.45 <= frac <= 0.55


def test_outdated_modes_run():
    for mobility, order in [("group", "preserved"), ("independent", "changed"), ("independent", "any")]:
        cfg = LinkConfig(csi=CsiErrorModel.outdated(2.0, 1.0, mobility, order))
        curve = run_trials(cfg, [120.0], seed=1, bits_per_user=10_000)
        assert curve.ber.shape == (1, 3)


def test_run_trials_rejects():
    with pytest.raises(ValueError):
        run_trials(LinkConfig(), [110.0], seed=1, bits_per_user=999)
    with pytest.raises(ValueError):
        run_trials(LinkConfig(), [], seed=1, bits_per_user=10_000)
    with pytest.raises(ValueError):
        LinkConfig(rho=1.0)
