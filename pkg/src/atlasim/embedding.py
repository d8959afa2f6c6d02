"""Classical MDS on landmarks with the landmark-MDS out-of-sample extension."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError

__all__ = ["Embedding", "mds", "extend", "estimate_dim", "LandmarkMDS"]

EIG_RTOL = 1e-12


@dataclass(frozen=True)
class Embedding:
    """Result of :func:`mds`.

    Attributes
    ----------
    landmark_coords : ndarray, shape (n, d)
    eigenvalues : ndarray, shape (n,)
        Spectrum of the double-centred squared-distance matrix divided by the
        number of landmarks (the variance captured by each axis), sorted
        nonincreasing.
    mean_sq_dist_row : ndarray, shape (n,)
        Column means of the squared landmark distance matrix.
    rank : int
        Number of retained axes with a non-negligible eigenvalue.
    """

    landmark_coords: np.ndarray
    eigenvalues: np.ndarray
    mean_sq_dist_row: np.ndarray
    coords_pinv: np.ndarray
    rank: int
    landmark_points: object = None

    @property
    def d(self):
        return self.landmark_coords.shape[1]

    @property
    def n_landmarks(self):
        return self.landmark_coords.shape[0]


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def mds(distances, d, landmark_points=None):
    """Classical (Torgerson) MDS of a landmark distance matrix.

    Each coordinate axis is oriented so that its largest-magnitude entry is
    positive; negative eigenvalues are clamped to zero.
    """
    D = np.asarray(distances, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ConfigError("distance matrix must be square")
    n = D.shape[0]
    if n < 2:
        raise ConfigError("mds needs at least 2 landmarks")
    if not 1 <= d <= n - 1:
        raise ConfigError(f"d={d} must lie in [1, {n - 1}] for {n} landmarks")

    D2 = D * D
    D2 = 0.5 * (D2 + D2.T)
    row = D2.mean(axis=0)
    B = -0.5 * (D2 - row[:, None] - row[None, :] + row.mean())
    w, V = np.linalg.eigh(B)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]

    wmax = max(w[0], 0.0)
    keep = w[:d].copy()
    keep[keep <= EIG_RTOL * wmax] = 0.0
    rank = int(np.count_nonzero(keep))
    Vd = _fix_signs(V[:, :d])
    coords = Vd * np.sqrt(keep)
    inv_sqrt = np.zeros(d)
    inv_sqrt[keep > 0] = 1.0 / np.sqrt(keep[keep > 0])
    coords_pinv = (Vd * inv_sqrt).T
    return Embedding(
        landmark_coords=coords,
        eigenvalues=w / n,
        mean_sq_dist_row=row,
        coords_pinv=coords_pinv,
        rank=rank,
        landmark_points=landmark_points,
    )


def extend(e, dists_to_landmarks):
    """Chart coordinates of new points from their distances to the landmarks.

    Accepts a single distance vector ``(n,)`` or a stack ``(m, n)``.
    """
    delta = np.asarray(dists_to_landmarks, dtype=float)
    if delta.shape[-1] != e.n_landmarks:
        raise ConfigError(
            f"expected {e.n_landmarks} landmark distances, got {delta.shape[-1]}"
        )
    return -0.5 * (delta * delta - e.mean_sq_dist_row) @ e.coords_pinv.T


def estimate_dim(eigenvalues, delta):
    """Number of eigenvalues at or above ``(delta/4)**2``, at least 1."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        raise ConfigError("empty spectrum")
    return max(1, int(np.count_nonzero(ev >= (delta / 4.0) ** 2)))


class LandmarkMDS(TransformerMixin, BaseEstimator):
    """Landmark MDS as a transformer on precomputed distances.

    ``fit`` takes the ``(n, n)`` landmark distance matrix; ``transform``
    takes distances from new points to those landmarks, shape ``(m, n)``.

    Parameters
    ----------
    n_components : int, default=2
        Chart dimension.
    """

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        self.embedding_ = mds(X, self.n_components)
        self.eigenvalues_ = self.embedding_.eigenvalues
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_.landmark_coords

    def transform(self, X):
        check_is_fitted(self, "embedding_")
        return extend(self.embedding_, np.atleast_2d(X))
