"""Estimator-style front end to the learner and the learned simulator."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._rng import check_random_state
from .learn import AtlasParams, learn_atlas
from .simulate import AtlasState, lift, run, run_ensemble, sample_qhat, start_state


class Atlas(BaseEstimator):
    """Learn a low-dimensional surrogate simulator from short simulator bursts.

    Parameters
    ----------
    delta : float
        Homogenisation length scale (net granularity).
    n_components : int
        Chart dimension ``d``.
    n_landmarks : int, optional
        Landmark paths per net point (``m``); defaults to ``2 * d``.
    n_paths : int
        Paths per net point for drift and diffusion estimation (``p``).
    t0, dt : float, optional
        Burst length and surrogate time step; default ``delta**2`` and
        ``t0 / 5``.
    random_state : int
        Master seed.  Every stream is derived from it.
    n_jobs : int
        Threads used to learn charts.

    Attributes
    ----------
    model_ : AtlasModel
    n_charts_ : int
    """

    def __init__(self, delta=0.1, n_components=1, n_landmarks=None, n_paths=10_000,
                 t0=None, dt=None, random_state=0, n_jobs=1):
        self.delta = delta
        self.n_components = n_components
        self.n_landmarks = n_landmarks
        self.n_paths = n_paths
        self.t0 = t0
        self.dt = dt
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _params(self):
        return AtlasParams(delta=self.delta, d=self.n_components, m=self.n_landmarks,
                           p=self.n_paths, t0=self.t0, dt=self.dt)

    def fit(self, space, initial_points=None):
        self.model_ = learn_atlas(space, self._params(), seed=self.random_state,
                                  n_jobs=self.n_jobs, initial_points=initial_points)
        self.space_ = space
        self.n_charts_ = self.model_.n_charts
        return self

    @classmethod
    def from_model(cls, model, space=None):
        est = cls(delta=model.delta, n_components=model.d, t0=model.t0, dt=model.dt)
        est.model_ = model
        est.space_ = space
        est.n_charts_ = model.n_charts
        return est

    def _start(self, x0):
        if isinstance(x0, AtlasState):
            return x0
        dist = self.space_.distance if self.space_ is not None else None
        return start_state(self.model_, np.asarray(x0), dist)

    def simulate(self, x0, n_steps, random_state=None):
        """Single path from an ambient point or an :class:`AtlasState`."""
        check_is_fitted(self, "model_")
        return run(self.model_, self._start(x0), n_steps, check_random_state(random_state))

    def simulate_ensemble(self, x0, n_paths, n_steps, random_state=None, record_at=None):
        check_is_fitted(self, "model_")
        s = self._start(x0)
        X0 = np.tile(s.x, (n_paths, 1))
        I0 = np.full(n_paths, s.i)
        return run_ensemble(self.model_, X0, I0, n_steps, check_random_state(random_state),
                            record_at)

    def sample_stationary(self, x0, n_samples, burn_in_steps, random_state=None):
        """Stacked draws ``(X, I)`` from the approximate stationary measure."""
        check_is_fitted(self, "model_")
        s = self._start(x0)
        X0 = np.tile(s.x, (n_samples, 1))
        I0 = np.full(n_samples, s.i)
        return sample_qhat(self.model_, (X0, I0), burn_in_steps,
                           check_random_state(random_state))

    def lift(self, charts):
        check_is_fitted(self, "model_")
        return lift(self.model_, charts)
