"""Comparing two simulators: soft-binned multiscale L1 distances and
transition times between labelled metastable regions."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .netspace import euclidean

__all__ = [
    "SoftDistribution",
    "soft_bin_weights",
    "soft_bin",
    "ComparisonReport",
    "multiscale_compare",
    "dyadic_times",
    "Ball",
    "Predicate",
    "RegionSpec",
    "classify",
    "TransitionStats",
    "transition_times",
    "chart_orientation",
    "effective_potential",
]


@dataclass(frozen=True)
class SoftDistribution:
    centers: object
    weights: np.ndarray


def soft_bin_weights(dist, delta):
    """Row-normalised soft assignment matrix from a sample-to-center distance matrix.

    Centers farther than ``2*delta`` get zero weight.  A sample with no
    center in range is assigned wholly to its nearest center (split evenly
    between exact ties).
    """
    D = np.atleast_2d(np.asarray(dist, dtype=float))
    W = np.where(D < 2 * delta, np.exp(-(D * D) / delta**2), 0.0)
    rowsum = W.sum(axis=1)
    orphans = np.flatnonzero(rowsum == 0)
    if orphans.size:
        nearest = D[orphans] == D[orphans].min(axis=1, keepdims=True)
        W[orphans] = nearest
        rowsum[orphans] = nearest.sum(axis=1)
    return W / rowsum[:, None]


def soft_bin(samples, centers, delta, distance=euclidean, sample_weights=None):
    """Push an empirical distribution onto ``centers``.

    ``sample_weights`` defaults to uniform.  Returns a
    :class:`SoftDistribution` whose weights sum to one.
    """
    n = len(samples)
    if n == 0:
        raise ConfigError("no samples to bin")
    if len(centers) == 0:
        raise ConfigError("no centers")
    nu = np.full(n, 1.0 / n) if sample_weights is None else np.asarray(sample_weights, float)
    W = soft_bin_weights(distance(samples, centers), delta)
    return SoftDistribution(centers=centers, weights=nu @ W)


def dyadic_times(t_min, t_max):
    """Times ``2**k`` with ``t_min <= 2**k <= t_max``."""
    k_lo = int(np.ceil(np.log2(t_min) - 1e-12))
    k_hi = int(np.floor(np.log2(t_max) + 1e-12))
    return [2.0**k for k in range(k_lo, k_hi + 1)]


@dataclass
class ComparisonReport:
    """L1 distances per initial condition (rows) and time slice (columns)."""

    times: np.ndarray
    l1: np.ndarray
    hist_a: np.ndarray = field(repr=False)
    hist_b: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def mean(self):
        return self.l1.mean(axis=0)

    @property
    def std(self):
        return self.l1.std(axis=0)

    def to_dict(self):
        return {
            "times": np.asarray(self.times, float).tolist(),
            "l1": self.l1.tolist(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "meta": self.meta,
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, default=str))

    def to_csv(self, path):
        n_ic = self.l1.shape[0]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "mean_l1", "std_l1"] + [f"ic_{c}" for c in range(n_ic)])
            for s, t in enumerate(self.times):
                w.writerow([repr(float(t)), repr(float(self.mean[s])), repr(float(self.std[s]))]
                           + [repr(float(v)) for v in self.l1[:, s]])

    def histograms_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ic", "time", "bin", "weight_a", "weight_b"])
            n_ic, n_t, n_bins = self.hist_a.shape
            for c in range(n_ic):
                for s in range(n_t):
                    for b in range(n_bins):
                        w.writerow([c, repr(float(self.times[s])), b,
                                    repr(float(self.hist_a[c, s, b])),
                                    repr(float(self.hist_b[c, s, b]))])


def multiscale_compare(samples_a, samples_b, fine_points, coarse_points, delta, delta_c,
                       distance_a, distance_b, distance=euclidean, times=None):
    """Soft-binned L1 comparison of two families of samples.

    Parameters
    ----------
    samples_a, samples_b : list of lists
        ``samples[c][s]`` holds the samples for initial condition ``c`` at
        time slice ``s``, in whatever form the matching distance accepts.
    fine_points, coarse_points : arrays
        Fine net (bins at scale ``delta``) and coarse net (scale ``delta_c``),
        both in ambient coordinates.
    distance_a, distance_b : callables
        ``distance_x(samples, fine_points) -> (n, K)``.  For learned-simulator
        samples this is the chart-Euclidean distance.
    distance : callable
        Ambient distance used to push fine bins onto the coarse net.
    """
    if len(samples_a) != len(samples_b):
        raise ConfigError("sample families cover different numbers of initial conditions")
    for c, (sa, sb) in enumerate(zip(samples_a, samples_b)):
        if len(sa) != len(sb):
            raise ConfigError(f"initial condition {c}: time slices do not match")
    n_ic = len(samples_a)
    n_t = len(samples_a[0]) if n_ic else 0
    if times is not None and len(times) != n_t:
        raise ConfigError("times do not match the number of slices")

    P = soft_bin_weights(distance(fine_points, coarse_points), delta_c)

    def coarse(samples, dist_fn):
        n = len(samples[0]) if isinstance(samples, tuple) else len(samples)
        if n == 0:
            raise ConfigError("no samples to bin")
        mu = soft_bin_weights(dist_fn(samples, fine_points), delta).mean(axis=0)
        return mu @ P

    n_coarse = len(coarse_points)
    hist_a = np.empty((n_ic, n_t, n_coarse))
    hist_b = np.empty((n_ic, n_t, n_coarse))
    for c in range(n_ic):
        for s in range(n_t):
            hist_a[c, s] = coarse(samples_a[c][s], distance_a)
            hist_b[c, s] = coarse(samples_b[c][s], distance_b)
    l1 = np.abs(hist_a - hist_b).sum(axis=-1)
    return ComparisonReport(
        times=np.asarray(times if times is not None else np.arange(n_t), dtype=float),
        l1=l1,
        hist_a=hist_a,
        hist_b=hist_b,
    )


# ---------------------------------------------------------------------------
# regions and transition times


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def contains(self, points, distance=euclidean):
        return distance(points, np.asarray(self.center)[None])[:, 0] < self.radius


@dataclass(frozen=True)
class Predicate:
    """Region given by an arbitrary membership test on stacked points."""

    test: object

    def contains(self, points, distance=euclidean):
        return np.asarray(self.test(points), dtype=bool)


@dataclass(frozen=True)
class RegionSpec:
    """Labelled regions; label ``r + 1`` belongs to ``regions[r]``."""

    regions: tuple
    distance: object = euclidean

    @classmethod
    def balls(cls, centers, radius, distance=euclidean):
        return cls(tuple(Ball(np.asarray(c, dtype=float), radius) for c in centers), distance)

    def memberships(self, points):
        points = np.asarray(points)
        if points.ndim == 1:
            points = points[:, None]
        return np.stack([r.contains(points, self.distance) for r in self.regions], axis=1)

    def check_disjoint(self, points):
        overlap = self.memberships(points).sum(axis=1) > 1
        if np.any(overlap):
            warnings.warn(f"{int(overlap.sum())} sample(s) lie in more than one region",
                          stacklevel=2)
        return not np.any(overlap)


def classify(points, regions):
    """Label of the first region containing each point, 0 for none."""
    member = regions.memberships(points)
    labels = np.argmax(member, axis=1) + 1
    labels[~member.any(axis=1)] = 0
    return labels


@dataclass
class TransitionStats:
    """Samples of region-to-region transition times, in steps."""

    samples: dict
    dt_per_step: float = 1.0

    def count(self, i, j):
        return len(self.samples.get((i, j), ()))

    def mean_steps(self, i, j):
        s = self.samples.get((i, j))
        return float(np.mean(s)) if s else None

    def mean_time(self, i, j):
        m = self.mean_steps(i, j)
        return None if m is None else m * self.dt_per_step

    def merge(self, other):
        if other.dt_per_step != self.dt_per_step:
            raise ConfigError("cannot merge transition statistics with different time steps")
        out = {k: list(v) for k, v in self.samples.items()}
        for k, v in other.samples.items():
            out.setdefault(k, []).extend(v)
        return TransitionStats(out, self.dt_per_step)

    def table(self):
        rows = []
        for (i, j), s in sorted(self.samples.items()):
            rows.append({"from": i, "to": j, "count": len(s),
                         "mean_steps": float(np.mean(s)),
                         "mean_time": float(np.mean(s)) * self.dt_per_step})
        return rows

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, ["from", "to", "count", "mean_steps", "mean_time"])
            w.writeheader()
            w.writerows(self.table())


def transition_times(labels, dt_per_step=1.0):
    """Collect transition-time samples from a time-ordered label sequence.

    Leading unlabelled steps are skipped.  A sample of ``tau[i, j]`` is the
    number of steps from first entering region ``i`` (after the previous
    transition) to first entering a different region ``j``; steps spent in
    no region, or back in ``i``, count towards it.
    """
    labels = np.asarray(labels, dtype=np.int64)
    pos = np.flatnonzero(labels)
    if pos.size == 0:
        raise ConfigError("no region visits")
    lab = labels[pos]
    change = np.flatnonzero(lab[1:] != lab[:-1]) + 1
    starts = np.concatenate([[0], change[:-1]])
    samples = {}
    for s, c in zip(starts, change):
        samples.setdefault((int(lab[s]), int(lab[c])), []).append(int(pos[c] - pos[s]))
    return TransitionStats(samples, float(dt_per_step))


# ---------------------------------------------------------------------------
# one-dimensional atlases


def chart_orientation(model, displacement=None):
    """Sign (+1/-1) relating each 1-D chart axis to the ambient axis.

    Chart ``k`` is positively oriented when its neighbour centers ``c[k, j]``
    mostly agree in sign with ``displacement(y_k, y_j)``, which defaults to
    the ambient difference ``y_j - y_k``.
    """
    if model.d != 1:
        raise ConfigError("orientation is only defined for 1-D charts")
    pts = np.asarray(model.net.points, dtype=float)
    disp = displacement or (lambda a, b: b[0] - a[0])
    out = np.ones(model.n_charts)
    for k, chart in enumerate(model.charts):
        votes = sum(np.sign(chart.centers[j][0]) * np.sign(disp(pts[k], pts[j]))
                    for j in model.net.neighbors[k])
        out[k] = -1.0 if votes < 0 else 1.0
    return out


def effective_potential(model):
    """Potential whose negative gradient is the learned drift of a 1-D atlas.

    Chart drifts are mapped to the ambient axis, linearly interpolated
    between the sorted net points and integrated with the trapezoid rule.

    Returns
    -------
    y, drift, U : arrays over the sorted net
    minima, maxima : lists of interior critical points, located where the
        interpolated drift changes sign
    """
    y = np.asarray(model.net.points, dtype=float)[:, 0]
    b = np.array([c.drift[0] for c in model.charts]) * chart_orientation(model)
    order = np.argsort(y)
    y, b = y[order], b[order]
    U = np.concatenate([[0.0], -np.cumsum(0.5 * (b[1:] + b[:-1]) * np.diff(y))])
    minima, maxima = [], []
    for a in range(len(y) - 1):
        if b[a] > 0 >= b[a + 1]:
            minima.append(y[a] + (y[a + 1] - y[a]) * b[a] / (b[a] - b[a + 1]))
        elif b[a] < 0 <= b[a + 1]:
            maxima.append(y[a] + (y[a + 1] - y[a]) * b[a] / (b[a] - b[a + 1]))
    return y, b, U, minima, maxima
