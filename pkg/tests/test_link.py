import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noma_vlc.channel import REFERENCE_GAINS
from noma_vlc.link import (
    ESTIMATE_FLOOR,
    DimmingConfig,
    DimmingScheme,
    UserChannel,
    extract_vook,
    fpa_allocate,
    frame_vook,
    order_users,
    sic_decode,
    sic_decode_batch,
    superimpose,
    vook_codeword,
    vook_duty_cycle,
    vook_redundancy,
)


def test_user_channel_defaults_and_floor():
    u = UserChannel(1, 3e-5)
    assert u.estimated_gain == 3e-5
    assert UserChannel(1, 3e-5, -1e-4).estimated_gain == ESTIMATE_FLOOR
    with pytest.raises(ValueError):
        UserChannel(1, 0.0)


def test_order_users():
    assert [u.decoding_order for u in order_users([UserChannel(1, 3.0)])] == [1]
    table = order_users([UserChannel(i + 1, g) for i, g in enumerate(REFERENCE_GAINS)])
    assert [u.user_index for u in table] == [1, 2, 3]
    mixed = order_users([UserChannel(1, 0.5e-4), UserChannel(2, 0.2e-4), UserChannel(3, 0.4e-4)])
    assert [u.user_index for u in mixed] == [2, 3, 1]
    assert [u.decoding_order for u in mixed] == [1, 2, 3]
    with pytest.raises(ValueError):
        order_users([])


def test_order_users_is_stable():
    out = order_users([UserChannel(1, 1e-5, 2e-5), UserChannel(2, 3e-5, 2e-5)])
    assert [u.user_index for u in out] == [1, 2]


def test_fpa_allocate_values():
    assert fpa_allocate(1.0, 0.42, 1).powers == (1.0,)
    a = fpa_allocate(0.25, 0.3, 3)
    assert a.powers == pytest.approx((0.17985611510791367, 0.053956834532374101, 0.016187050359712230), rel=1e-14)
    assert sum(a.powers) == pytest.approx(0.25, abs=1e-17)
    near_one = fpa_allocate(0.3, 1 - 1e-9, 3).powers
    assert near_one == pytest.approx((0.1, 0.1, 0.1), rel=1e-8)


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.1, 1.5])
def test_fpa_rejects_rho(rho):
    with pytest.raises(ValueError):
        fpa_allocate(0.25, rho, 3)


@given(st.floats(1e-3, 10.0), st.floats(0.01, 0.99), st.integers(1, 8), st.floats(0.1, 10.0))
def test_fpa_properties(total, rho, n, c):
    a = fpa_allocate(total, rho, n)
    assert sum(a.powers) == pytest.approx(total, rel=1e-12)
    assert all(p2 == pytest.approx(rho * p1, rel=1e-9) for p1, p2 in zip(a.powers, a.powers[1:]))
    assert fpa_allocate(c * total, rho, n).powers == pytest.approx([c * p for p in a.powers], rel=1e-12)


def test_superimpose():
    a = fpa_allocate(0.25, 0.3, 3)
    assert superimpose([0, 0, 0], a) == 0.0
    assert superimpose([1, 1, 1], a) == pytest.approx(0.25)
    assert superimpose([1, 0, 1], a) == pytest.approx(0.19604316546762590, rel=1e-14)
    with pytest.raises(ValueError):
        superimpose([1, 0], a)


def test_superimpose_linear():
    a = fpa_allocate(1.0, 0.4, 4)
    for s in itertools.product((0, 1), repeat=4):
        for t in itertools.product((0, 1), repeat=4):
            if any(x & y for x, y in zip(s, t)):
                continue
            union = [x | y for x, y in zip(s, t)]
            assert superimpose(union, a) == pytest.approx(superimpose(s, a) + superimpose(t, a))


@pytest.mark.parametrize("gd,n", [(0.1, 2), (0.2, 4), (0.3, 6), (0.4, 8), (0.5, 10),
                                  (0.6, 8), (0.7, 6), (0.8, 4), (0.9, 2)])
def test_vook_redundancy(gd, n):
    assert vook_redundancy(gd) == n


def test_vook_codewords():
    assert vook_codeword(1.0) == "1111111111"
    assert vook_codeword(0.0) == "0000000000"
    assert vook_codeword(0.3) == "dddddd0000"
    assert vook_codeword(0.5) == "dddddddddd"
    assert vook_codeword(0.8) == "dddd111111"
    assert vook_duty_cycle(0.3) == pytest.approx(0.6)
    assert vook_duty_cycle(1.0) == 1.0
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            vook_redundancy(bad)


def test_dimming_config():
    d = DimmingConfig("vook", 0.3)
    assert d.scheme is DimmingScheme.VOOK and d.redundancy == 6 and d.power_scale() == 1.0
    assert DimmingConfig("analog", 0.4).power_scale() == 0.4
    assert DimmingConfig().redundancy == 1
    for bad in [("vook", 1.0), ("vook", 0.0), ("analog", 0.0), ("none", 1.2)]:
        with pytest.raises(ValueError):
            DimmingConfig(*bad)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200),
       st.sampled_from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]))
def test_vook_round_trip(bits, gd):
    cfg = DimmingConfig("vook", gd)
    stream = frame_vook(bits, cfg)
    assert stream.size % 10 == 0
    assert extract_vook(stream, cfg, len(bits)).tolist() == bits
    words = stream.reshape(-1, 10)
    fill = words[:, cfg.redundancy:]
    assert np.all(fill == (1 if gd > 0.5 else 0))


def test_frame_vook_needs_vook():
    with pytest.raises(ValueError):
        frame_vook([1, 0], DimmingConfig("analog", 0.5))


def test_sic_decode_examples():
    a1 = fpa_allocate(0.25, 0.3, 1)
    assert sic_decode(1e-5 * 0.25, 1, a1, 1e-5)[0] == 1
    a3 = fpa_allocate(0.25, 0.3, 3)
    h = 3e-5
    y = h * superimpose([1, 0, 1], a3)
    bit, trace = sic_decode(y, 3, a3, h)
    assert trace == (1, 0, 1) and bit == 1
    a2 = fpa_allocate(0.25, 0.3, 2)
    assert sic_decode(h * a2.powers[0] / 2, 1, a2, h)[0] == 1
    with pytest.raises(ValueError):
        sic_decode(0.0, 4, a3, h)


@pytest.mark.parametrize("n", range(1, 7))
def test_sic_noiseless_recovers_everything(n):
    # needs rho + rho^2 + ... < 1/2, i.e. rho < 1/3
    a = fpa_allocate(1.0, 0.3, n)
    h = 2e-5
    for bits in itertools.product((0, 1), repeat=n):
        y = h * superimpose(bits, a)
        for k in range(1, n + 1):
            bit, trace = sic_decode(y, k, a, h)
            assert trace == bits[:k]
            assert bit == bits[k - 1]


def test_sic_noiseless_fails_when_ladder_too_flat():
    a = fpa_allocate(1.0, 0.4, 3)  # P2 + P3 = 0.56 P1 exceeds the stage-1 margin
    h = 1.0
    assert sic_decode(h * superimpose([0, 1, 1], a), 1, a, h)[0] == 1


def test_sic_batch_matches_scalar():
    rng = np.random.default_rng(5)
    a = fpa_allocate(0.25, 0.3, 3)
    y = rng.uniform(-0.1, 0.4, 500) * 3e-5
    order = rng.integers(1, 4, 500)
    h_hat = rng.uniform(1e-5, 5e-5, 500)
    batch = sic_decode_batch(y, order, a.as_array(), h_hat)
    scalar = [sic_decode(yi, int(k), a, hh)[0] for yi, k, hh in zip(y, order, h_hat)]
    assert batch.astype(int).tolist() == scalar
