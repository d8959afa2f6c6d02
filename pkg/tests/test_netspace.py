import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atlasim.exceptions import ConfigError
from atlasim.netspace import (
    DeltaNet,
    StateSpace,
    build_delta_net,
    euclidean,
    nearest_net_index,
    read_points_csv,
    write_points_csv,
)


def verify_net(points, net, distance=euclidean):
    """Exhaustive check of separation, covering and the neighbour relation."""
    delta = net.delta
    D = distance(net.points, net.points)
    off = ~np.eye(len(net), dtype=bool)
    assert np.all(D[off] >= delta)
    assert np.all(distance(points, net.points).min(axis=1) <= delta)
    for k in range(len(net)):
        expect = [j for j in range(len(net)) if j != k and D[k, j] <= 2 * delta]
        assert list(net.neighbors[k]) == expect
        for j in net.neighbors[k]:
            assert k in net.neighbors[j]


def test_single_point():
    q = np.array([[0.3, -1.2]])
    net = build_delta_net(q, 0.1)
    assert np.array_equal(net.points, q)
    assert net.neighbors == ((),)


def test_double_well_grid():
    grid = np.arange(-0.5, 1.5 + 1e-9, 0.01)[:, None]
    net = build_delta_net(grid, 0.1)
    verify_net(grid, net)
    assert 10 <= len(net) <= 21


def test_random_unit_square():
    pts = np.random.default_rng(7).uniform(size=(50, 2))
    net = build_delta_net(pts, 0.3)
    verify_net(pts, net)


def test_strictly_farther_than_delta_joins():
    net = build_delta_net(np.array([[0.0], [0.1], [0.1000001]]), 0.1)
    assert net.points[:, 0].tolist() == [0.0, 0.1000001]


def test_opaque_distance():
    def chebyshev(A, B):
        return np.abs(np.atleast_2d(A)[:, None] - np.atleast_2d(B)[None]).max(axis=-1)

    pts = np.random.default_rng(1).uniform(size=(200, 3))
    net = build_delta_net(pts, 0.25, chebyshev)
    verify_net(pts, net, chebyshev)


def test_errors():
    with pytest.raises(ConfigError, match="no points"):
        build_delta_net(np.empty((0, 2)), 0.1)
    with pytest.raises(ConfigError, match="delta"):
        build_delta_net(np.zeros((3, 1)), 0.0)


point_sets = arrays(
    np.float64,
    st.tuples(st.integers(1, 60), st.integers(1, 3)),
    elements=st.floats(-2, 2, allow_nan=False, width=32),
)


@settings(max_examples=60, deadline=None)
@given(point_sets, st.floats(0.05, 1.5), st.integers(1, 8))
def test_net_properties(pts, delta, block):
    net = build_delta_net(pts, delta, block_size=block)
    verify_net(pts, net)
    # half-delta balls are disjoint
    D = euclidean(net.points, net.points)
    assert np.all(D[~np.eye(len(net), dtype=bool)] >= delta)
    # deterministic and independent of block size
    again = build_delta_net(pts, delta)
    assert np.array_equal(again.points, net.points)
    assert again.neighbors == net.neighbors


def test_nearest_examples():
    net = DeltaNet(np.array([[0.0], [0.15], [0.31]]), 0.1, ((1,), (0, 2), (1,)))
    assert nearest_net_index(net, np.array([0.2])) == 1
    assert nearest_net_index(net, net.points[2]) == 2
    tie = DeltaNet(np.array([[5.0], [0.0], [3.0], [7.0], [2.0]]), 0.5,
                   ((), (), (), (), ()))
    assert nearest_net_index(tie, np.array([1.0])) == 1


def test_net_json_round_trip(tmp_path):
    net = build_delta_net(np.random.default_rng(2).normal(size=(40, 2)), 0.4)
    net.to_json(tmp_path / "net.json")
    back = DeltaNet.from_json(tmp_path / "net.json")
    assert np.array_equal(back.points, net.points)
    assert back.neighbors == net.neighbors and back.delta == net.delta


def test_malformed_net():
    with pytest.raises(ConfigError):
        DeltaNet.from_dict({"points": [[0.0]], "delta": 0.1})


def test_points_csv_round_trip(tmp_path):
    pts = np.random.default_rng(3).normal(size=(7, 3))
    write_points_csv(tmp_path / "p.csv", pts)
    assert np.array_equal(read_points_csv(tmp_path / "p.csv"), pts)
    (tmp_path / "h.csv").write_text("a,b\n1,2\n3,4\n")
    assert read_points_csv(tmp_path / "h.csv").tolist() == [[1, 2], [3, 4]]


def test_state_space_contract():
    def simulate(start, n, t0, rng):
        return start + np.sqrt(t0) * rng.standard_normal((n, len(start)))

    space = StateSpace(simulate, initial_points=np.zeros((3, 2)))
    out = space.simulate(np.zeros(2), 11, 0.1, np.random.default_rng(0))
    assert out.shape == (11, 2)
    S = space.distance(out, out)
    assert np.allclose(S, S.T) and np.all(np.diag(S) == 0)
    assert space.dist([0, 0], [3, 4]) == 5.0
    with pytest.raises(ConfigError):
        StateSpace(simulate).sample_initial()
