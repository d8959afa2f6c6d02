import numpy as np
import pytest

from atlasim.learn import AtlasModel, AtlasParams, Chart, TransitionMap, learn_atlas
from atlasim.netspace import DeltaNet
from atlasim.systems import double_well_smooth

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def hand_model(points, delta, drift, sigma, centers, maps=None, t0=1.0, dt=0.01):
    """Assemble an AtlasModel from explicit per-chart arrays.

    ``centers[k]`` maps neighbour index to center; neighbours are the keys
    other than ``k``.  ``maps[(k, j)] = (mu_kj, mu_jk, T)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    K = len(points)
    neighbors = tuple(tuple(sorted(j for j in centers[k] if j != k)) for k in range(K))
    net = DeltaNet(points=points, delta=delta, neighbors=neighbors)
    charts = tuple(
        Chart(index=k, drift=np.atleast_1d(np.asarray(drift[k], float)),
              diffusion=np.atleast_2d(np.asarray(sigma[k], float)),
              centers={j: np.atleast_1d(np.asarray(c, float)) for j, c in centers[k].items()})
        for k in range(K)
    )
    transitions = {
        kj: TransitionMap(kj[0], kj[1], np.atleast_1d(np.asarray(a, float)),
                          np.atleast_1d(np.asarray(b, float)), np.atleast_2d(np.asarray(T, float)))
        for kj, (a, b, T) in (maps or {}).items()
    }
    d = charts[0].drift.shape[0]
    return AtlasModel(net=net, d=d, delta=delta, t0=t0, dt=dt, charts=charts,
                      transitions=transitions)


def single_chart(d=1, delta=0.1, drift=0.0, sigma=0.0, dt=0.01, t0=1.0):
    b = np.broadcast_to(np.asarray(drift, float), (d,))
    s = np.asarray(sigma, float) * np.eye(d) if np.ndim(sigma) == 0 else sigma
    return hand_model(np.zeros((1, d)), delta, [b], [s], [{0: np.zeros(d)}], t0=t0, dt=dt)


@pytest.fixture(scope="session")
def double_well_space():
    return double_well_smooth()


@pytest.fixture(scope="session")
def double_well_model(double_well_space):
    return learn_atlas(double_well_space, AtlasParams(delta=0.1), seed=1)
