import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from atlasim import Atlas
from atlasim.simulate import AtlasState


@pytest.fixture(scope="module")
def fitted():
    from atlasim.systems import double_well_smooth

    return Atlas(delta=0.1, n_paths=2000, random_state=3).fit(double_well_smooth())


def test_params_round_trip():
    est = Atlas(delta=0.2, n_components=2, n_landmarks=6)
    params = est.get_params()
    assert params["delta"] == 0.2 and params["n_landmarks"] == 6
    assert clone(est).get_params() == params
    est.set_params(delta=0.05)
    assert est.delta == 0.05


def test_not_fitted():
    with pytest.raises(NotFittedError):
        Atlas().simulate(np.zeros(1), 10)


def test_fit_and_simulate(fitted):
    assert fitted.n_charts_ == fitted.model_.n_charts >= 15
    traj = fitted.simulate(np.array([1.0]), 200, random_state=0)
    assert len(traj) == 201
    assert np.allclose(fitted.lift(traj.charts[:1]), [[1.0]], atol=0.1)
    again = fitted.simulate(np.array([1.0]), 200, random_state=0)
    assert np.array_equal(traj.coords, again.coords)


def test_ensemble_and_stationary(fitted):
    X, I, snaps = fitted.simulate_ensemble(AtlasState(np.zeros(1), 2), 30, 100,
                                           random_state=1, record_at=[50])
    assert X.shape == (30, 1) and set(snaps) == {50}
    Xs, Is = fitted.sample_stationary(np.array([0.0]), 40, 100, random_state=2)
    assert Xs.shape == (40, 1) and Is.shape == (40,)


def test_from_model(fitted):
    est = Atlas.from_model(fitted.model_)
    assert est.n_charts_ == fitted.n_charts_
    traj = est.simulate(AtlasState(np.zeros(1), 0), 10, random_state=0)
    assert len(traj) == 11
