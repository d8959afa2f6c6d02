"""Metric state spaces and greedy delta-nets.

A :class:`StateSpace` bundles the three things the learner needs from the
outside world: a stochastic simulator, a distance and a set of points that
covers the region of interest.  Distances are opaque: nothing here assumes
the ambient coordinates are Euclidean.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import ConfigError

__all__ = [
    "StateSpace",
    "DeltaNet",
    "euclidean",
    "build_delta_net",
    "nearest_net_index",
    "read_points_csv",
]


def euclidean(A, B):
    """Pairwise Euclidean distances between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return cdist(A, B)


@dataclass(frozen=True)
class StateSpace:
    """Inputs of the learning phase.

    Parameters
    ----------
    simulate : callable
        ``simulate(start, n_paths, t0, rng) -> (n_paths, D) array`` of path
        endpoints after running the microscale simulator for time ``t0``.
    distance : callable
        Pairwise distance ``distance(A, B) -> (len(A), len(B))`` between
        row-stacked ambient points.
    initial_points : array or callable
        ``(n, D)`` array of points covering the state space, or a callable
        ``initial_points(rng) -> array`` producing one.
    """

    simulate: Callable
    distance: Callable = euclidean
    initial_points: object = None
    name: str = ""
    micro_dt: Optional[float] = None
    params: dict = field(default_factory=dict)

    def sample_initial(self, rng=None):
        pts = self.initial_points
        if callable(pts):
            pts = pts(rng if rng is not None else np.random.default_rng(0))
        if pts is None:
            raise ConfigError(f"state space {self.name!r} has no initial points")
        return np.atleast_2d(np.asarray(pts))

    def dist(self, a, b):
        """Distance between two single points."""
        return float(self.distance(np.asarray(a)[None], np.asarray(b)[None])[0, 0])


@dataclass(frozen=True)
class DeltaNet:
    """Net points ``points[k]`` with separation and covering radius ``delta``.

    ``neighbors[k]`` lists, in increasing order, every other net index within
    ``2 * delta`` of ``points[k]``.
    """

    points: np.ndarray
    delta: float
    neighbors: tuple

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    def edges(self):
        """Ordered pairs ``(k, j)`` with ``k ~ j``."""
        return [(k, j) for k, nb in enumerate(self.neighbors) for j in nb]

    def to_dict(self):
        return {
            "delta": float(self.delta),
            "points": np.asarray(self.points, dtype=float).tolist(),
            "neighbors": [list(map(int, nb)) for nb in self.neighbors],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            points = np.asarray(data["points"], dtype=float)
            neighbors = tuple(tuple(int(j) for j in nb) for nb in data["neighbors"])
            delta = float(data["delta"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed net: {exc}") from exc
        if points.ndim != 2 or len(neighbors) != len(points):
            raise ConfigError("malformed net: points/neighbors length mismatch")
        return cls(points=points, delta=delta, neighbors=neighbors)

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _neighbor_lists(points, delta, distance):
    D = distance(points, points)
    lists = []
    for k in range(len(points)):
        nb = np.flatnonzero(D[k] <= 2 * delta)
        lists.append(tuple(int(j) for j in nb if j != k))
    return tuple(lists)


def build_delta_net(points, delta, distance=euclidean, block_size=1024):
    """Greedy delta-net of ``points`` in input order.

    A point joins the net when it is farther than ``delta`` from every point
    already in the net.  The result is deterministic for a fixed input order.

    Parameters
    ----------
    points : array-like, shape (n, D)
    delta : float
    distance : callable
        Pairwise distance, see :class:`StateSpace`.
    block_size : int
        Candidates screened per batch against the current net; does not
        affect the result.

    Returns
    -------
    DeltaNet
    """
    pts = np.asarray(points)
    if pts.size == 0 or len(pts) == 0:
        raise ConfigError("no points")
    pts = np.atleast_2d(pts)
    if not delta > 0:
        raise ConfigError(f"delta must be positive, got {delta}")

    chosen = [0]
    for start in range(1, len(pts), block_size):
        block = pts[start : start + block_size]
        dmin = distance(block, pts[chosen]).min(axis=1)
        added_here = []
        for off in np.flatnonzero(dmin > delta):
            cand = block[off : off + 1]
            if added_here:
                if distance(cand, pts[added_here]).min() <= delta:
                    continue
            added_here.append(start + off)
        chosen.extend(added_here)

    net_points = pts[chosen].copy()
    net_points.setflags(write=False)
    return DeltaNet(
        points=net_points,
        delta=float(delta),
        neighbors=_neighbor_lists(net_points, delta, distance),
    )


def nearest_net_index(net, x, distance=euclidean):
    """Index of the net point closest to ``x``; ties go to the smallest index."""
    d = distance(np.asarray(x)[None], net.points)[0]
    return int(np.argmin(d))


def read_points_csv(path):
    """Read one point per row from a comma-separated file (optional header)."""
    path = Path(path)
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        return np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)


def write_points_csv(path, points: Sequence):
    np.savetxt(path, np.atleast_2d(points), delimiter=",", fmt="%.17g")
