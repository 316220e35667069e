import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfos.epsnet import (
    EpsNet,
    action_space_bound,
    cardinality_bound,
    grid_base,
    policy_state_bound,
    trajectory_state_count,
)
from rfos.games import ContractError


def brute_snap(net, x):
    """Nearest axis point by exhaustive distance, ties to the larger point."""
    pts = net.axis_points()
    out = []
    for xi in x:
        d = np.abs(pts - xi)
        out.append(int(np.flatnonzero(d <= d.min() + 1e-15)[-1]))
    return np.array(out)


def test_snap_example():
    idx, pts = EpsNet(1, 0.5).snap([0.3])
    assert idx.tolist() == [1]
    assert pts.tolist() == [0.5]


def test_grid_points_are_fixed_points():
    net = EpsNet(2, 0.25)
    for p in net.axis_points():
        idx, pts = net.snap([p, p])
        assert np.array_equal(pts, [p, p])


def test_two_dimensional_radius():
    net = EpsNet(2, 0.5)
    assert net.alpha == pytest.approx(0.5 * math.sqrt(2) / 2)
    _, p = net.snap([0.25, 0.25])
    assert np.linalg.norm(p - 0.25) <= net.alpha + 1e-12


def test_uneven_last_cell():
    net = EpsNet(1, 0.3)
    assert net.axis_points().tolist() == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    assert net.snap([0.96])[1][0] == 1.0
    assert net.snap([0.94])[1][0] == pytest.approx(0.9)


@settings(max_examples=200)
@given(
    st.integers(1, 4),
    st.sampled_from([0.1, 0.2, 0.25, 0.3, 0.5, 0.7, 1.0]),
    st.data(),
)
def test_snap_matches_brute_force(dim, lam, data):
    net = EpsNet(dim, lam)
    x = np.array(data.draw(st.lists(st.floats(0, 1), min_size=dim, max_size=dim)))
    idx, pts = net.snap(x)
    assert np.abs(pts - x).max() <= net.alpha_inf + 1e-12
    assert np.linalg.norm(pts - x) <= net.alpha + 1e-12
    # the nearest point is unique except at exact midpoints
    brute = brute_snap(net, x)
    assert np.allclose(np.abs(net.axis_points()[brute] - x), np.abs(pts - x))


def test_snap_rejects_out_of_range_and_wrong_dim():
    net = EpsNet(2, 0.5)
    with pytest.raises(ContractError):
        net.snap([0.2, 1.5])
    with pytest.raises(ContractError):
        net.snap([0.2])


@given(st.integers(1, 5), st.sampled_from([0.1, 0.3, 0.5, 1.0]), st.data())
def test_encode_decode_round_trip(dim, lam, data):
    net = EpsNet(dim, lam)
    code = data.draw(st.integers(0, net.size - 1))
    assert net.encode(net.decode(code)) == code


def test_codes_cover_the_net():
    net = EpsNet(3, 0.5)
    assert net.size == 27
    seen = {net.encode(net.decode(c)) for c in range(net.size)}
    assert seen == set(range(27))
    with pytest.raises(ContractError):
        net.decode(27)


@pytest.mark.parametrize(
    "dim, radius, lam, expected",
    [(2, math.sqrt(2), math.sqrt(2), 9), (1, 1.0, 2.0, 2), (2, math.sqrt(2), math.sqrt(2) / 2, 25)],
)
def test_cardinality_examples(dim, radius, lam, expected):
    assert cardinality_bound(dim, radius, lam) == expected


def test_mp_meta_action_count():
    assert action_space_bound(2, math.sqrt(2) / 2) == 25


def test_policy_state_count_grows_with_dimension():
    assert policy_state_bound(2, 2, 1.0) == math.ceil(2 * 2 / 1.0 + 1) ** 4


def test_grid_base_snaps_float_noise():
    assert grid_base(math.sqrt(2), math.sqrt(2)) == 3


@pytest.mark.parametrize("n, card_sa, h, expected", [(2, 2, 2, 16), (2, 2, 0, 1), (2, 2, 3, 64)])
def test_trajectory_counts(n, card_sa, h, expected):
    assert trajectory_state_count(n, card_sa, h) == expected


def test_exact_big_counts_and_overflow():
    assert trajectory_state_count(2, 4, 16) == 4**32
    assert cardinality_bound(64, 8.0, 0.5) == 33**64
    with pytest.raises(OverflowError):
        cardinality_bound(10_000, 1.0, 1e-3)


def test_net_validation():
    for args in [(0, 0.5), (1, 0.0), (1, -1.0)]:
        with pytest.raises(ContractError):
            EpsNet(*args)
