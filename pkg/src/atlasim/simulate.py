"""The learned simulator.

One step from state ``(x, i)``:

1. pick ``i'`` among ``{i} ∪ neighbours(i)`` whose center ``c[i, i']`` is
   closest to ``x`` (ties to the smallest index);
2. if ``i' != i`` move ``x`` into chart ``i'`` with the switching map;
3. take an Euler step with the constant drift and diffusion of chart ``i'``;
4. confine the result with the wall function.

``step_batch`` is the numpy reference for one step of a stacked ensemble;
``run`` and ``run_ensemble`` hand long loops to a compiled kernel that
performs the same arithmetic.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from ._rng import check_random_state

__all__ = [
    "AtlasState",
    "AtlasTrajectory",
    "PackedAtlas",
    "wall",
    "step",
    "step_batch",
    "run",
    "run_ensemble",
    "sample_qhat",
    "lift",
    "start_state",
]


# largest radius (in units of delta) kept strictly below 2*delta after rounding
WALL_CAP = 2.0 * (1.0 - 8 * np.finfo(float).eps)


def wall(x, delta):
    """Radial confinement to the open ball of radius ``2*delta``.

    Identity up to radius ``1.5*delta``; beyond it the radius ``r`` maps to
    ``2*delta - (delta/2) * exp(3 - 2r/delta)``, capped a few ulps below
    ``2*delta`` so the bound stays strict in floating point.  Works on a
    single vector or on row-stacked vectors.
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    outside = r > 1.5 * delta
    if not np.any(outside):
        return x
    with np.errstate(divide="ignore", invalid="ignore"):
        new_r = np.minimum(2 * delta - 0.5 * delta * np.exp(3 - 2 * r / delta),
                           WALL_CAP * delta)
        scaled = x * (new_r / r)
    return np.where(outside, scaled, x)


@dataclass(frozen=True)
class AtlasState:
    x: np.ndarray
    i: int


class PackedAtlas:
    """Per-chart arrays indexed by ``(chart, slot)``.

    Slot ``s`` of chart ``i`` is the ``s``-th smallest index in
    ``{i} ∪ neighbours(i)``; unused slots hold infinite centers.
    """

    def __init__(self, delta, dt, cand_idx, centers, mu_out, mu_in, T, drift, sigma):
        self.delta = float(delta)
        self.dt = float(dt)
        self.cand_idx = cand_idx
        self.centers = centers
        self.mu_out = mu_out
        self.mu_in = mu_in
        self.T = T
        self.drift = drift
        self.sigma = sigma
        self.d = drift.shape[1]

    @classmethod
    def from_model(cls, model):
        K, d = model.n_charts, model.d
        cands = [sorted({k, *model.net.neighbors[k]}) for k in range(K)]
        S = max(len(c) for c in cands)
        cand_idx = np.full((K, S), -1, dtype=np.int64)
        centers = np.full((K, S, d), np.inf)
        mu_out = np.zeros((K, S, d))
        mu_in = np.zeros((K, S, d))
        T = np.tile(np.eye(d), (K, S, 1, 1))
        for k, cand in enumerate(cands):
            chart = model.charts[k]
            for s, j in enumerate(cand):
                cand_idx[k, s] = j
                centers[k, s] = chart.centers[j]
                if j != k:
                    tm = model.transitions[(k, j)]
                    mu_out[k, s] = tm.mu_kj
                    mu_in[k, s] = tm.mu_jk
                    T[k, s] = tm.T
        drift = np.stack([np.asarray(c.drift, dtype=float) for c in model.charts])
        sigma = np.stack([np.asarray(c.diffusion, dtype=float) for c in model.charts])
        return cls(model.delta, model.dt, cand_idx, centers, mu_out, mu_in, T, drift, sigma)

    def select(self, X, I):
        """Chart selection: returns (slot, new chart index)."""
        diff = X[:, None, :] - self.centers[I]
        slot = np.argmin(np.einsum("nsd,nsd->ns", diff, diff), axis=1)
        return slot, self.cand_idx[I, slot]

    def chart_distances(self, X, I, n_charts):
        """``(n, K)`` chart-Euclidean distances to net points; inf off-neighbourhood."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        I = np.atleast_1d(np.asarray(I, dtype=np.int64))
        out = np.full((len(X), n_charts), np.inf)
        diff = X[:, None, :] - self.centers[I]
        dist = np.sqrt(np.einsum("nsd,nsd->ns", diff, diff))
        cand = self.cand_idx[I]
        rows = np.broadcast_to(np.arange(len(X))[:, None], cand.shape)
        ok = cand >= 0
        out[rows[ok], cand[ok]] = dist[ok]
        return out


def _packed(model):
    return model if isinstance(model, PackedAtlas) else model.packed


def step_batch(model, X, I, eta, dt=None):
    """Advance stacked states ``(X, I)`` by one step with noise ``eta``.

    ``dt`` may be a scalar or a per-path array; it defaults to the model's
    step.  Returns new arrays; inputs are not modified.
    """
    pk = _packed(model)
    X = np.asarray(X, dtype=float)
    I = np.asarray(I, dtype=np.int64)
    dt = pk.dt if dt is None else dt
    slot, I_new = pk.select(X, I)
    moved = I_new != I
    if np.any(moved):
        Im, sm = I[moved], slot[moved]
        X = X.copy()
        X[moved] = (
            np.einsum("nd,nde->ne", X[moved] - pk.mu_out[Im, sm], pk.T[Im, sm])
            + pk.mu_in[Im, sm]
        )
    dt_col = np.reshape(dt, (-1, 1)) if np.ndim(dt) else dt
    noise = np.einsum("nd,nde->ne", eta, pk.sigma[I_new])
    X = X + pk.drift[I_new] * dt_col + noise * np.sqrt(dt_col)
    return wall(X, pk.delta), I_new


def step(model, s, rng):
    """One learned-simulator step from :class:`AtlasState` ``s``."""
    pk = _packed(model)
    rng = check_random_state(rng)
    eta = rng.standard_normal((1, pk.d))
    X, I = step_batch(pk, np.reshape(s.x, (1, pk.d)), np.array([s.i]), eta)
    return AtlasState(X[0], int(I[0]))


@dataclass
class AtlasTrajectory:
    """Times, chart indices and chart coordinates of one path."""

    times: np.ndarray
    charts: np.ndarray
    coords: np.ndarray
    seed: object = None

    def __len__(self):
        return len(self.times)

    def states(self):
        return [AtlasState(x, int(i)) for x, i in zip(self.coords, self.charts)]

    def to_csv(self, path, ambient=None):
        """Write ``time, chart_index, x_1..x_d`` (plus ``y_1..y_D`` if given)."""
        d = self.coords.shape[1]
        header = ["time", "chart_index"] + [f"x_{a + 1}" for a in range(d)]
        if ambient is not None:
            ambient = np.asarray(ambient)
            header += [f"y_{a + 1}" for a in range(ambient.shape[1])]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n in range(len(self.times)):
                row = [repr(float(self.times[n])), int(self.charts[n])]
                row += [repr(float(v)) for v in self.coords[n]]
                if ambient is not None:
                    row += [repr(float(v)) for v in ambient[n]]
                w.writerow(row)


_BLOCK = 4096


def _kernel_args(pk):
    return (pk.cand_idx, pk.centers, pk.mu_out, pk.mu_in, pk.T, pk.drift, pk.sigma,
            pk.delta, pk.dt, WALL_CAP)


def run(model, s0, n_steps, rng):
    """Iterate :func:`step` ``n_steps`` times from ``s0``.

    Noise is drawn from ``rng`` in blocks, in the same order :func:`step`
    would draw it, so the path is a deterministic function of the seed.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    pk = _packed(model)
    rng = check_random_state(rng)
    X = np.array(s0.x, dtype=float).reshape(1, pk.d)
    I = np.array([s0.i], dtype=np.int64)
    coords = np.empty((n_steps + 1, pk.d))
    charts = np.empty(n_steps + 1, dtype=np.int64)
    coords[0], charts[0] = X[0], I[0]
    done = 0
    while done < n_steps:
        b = min(_BLOCK, n_steps - done)
        noise = rng.standard_normal((b, 1, pk.d))
        _kernels.advance(X, I, noise, *_kernel_args(pk),
                         coords[done + 1 : done + 1 + b], charts[done + 1 : done + 1 + b])
        done += b
    times = np.arange(n_steps + 1) * pk.dt
    return AtlasTrajectory(times=times, charts=charts, coords=coords)


def run_ensemble(model, X0, I0, n_steps, rng, record_at=None):
    """Advance many paths together.

    Parameters
    ----------
    X0 : array, shape (n, d)
    I0 : array, shape (n,)
    record_at : iterable of int, optional
        Step counts at which to snapshot the ensemble.

    Returns
    -------
    (X, I) after ``n_steps``, and a dict ``step -> (X, I)`` of snapshots.
    """
    pk = _packed(model)
    rng = check_random_state(rng)
    X = np.array(X0, dtype=float).reshape(-1, pk.d)
    I = np.array(I0, dtype=np.int64).reshape(-1)
    record_at = set(record_at or ())
    stops = sorted({s for s in record_at if 0 <= s <= n_steps} | {n_steps})
    snaps = {}
    done = 0
    block = max(1, _BLOCK * 16 // max(len(X), 1))
    no_rec = (np.empty((0, pk.d)), np.empty(0, dtype=np.int64))
    for stop in stops:
        while done < stop:
            b = min(block, stop - done)
            _kernels.advance(X, I, rng.standard_normal((b,) + X.shape), *_kernel_args(pk),
                             *no_rec)
            done += b
        if stop in record_at:
            snaps[stop] = (X.copy(), I.copy())
    return X, I, snaps


def sample_qhat(model, s0, burn_in_steps, rng, u=None):
    """Draw from the approximate stationary measure.

    Runs ``burn_in_steps`` full steps, then one step of random duration
    ``u ~ Uniform(0, dt)`` which still performs chart selection, switching
    and the wall.  ``s0`` may be a single :class:`AtlasState` or a tuple
    ``(X0, I0)`` of stacked states, in which case stacked samples are
    returned.
    """
    pk = _packed(model)
    rng = check_random_state(rng)
    single = isinstance(s0, AtlasState)
    if single:
        X0, I0 = np.reshape(s0.x, (1, pk.d)), np.array([s0.i])
    else:
        X0, I0 = s0
    X, I, _ = run_ensemble(pk, X0, I0, burn_in_steps, rng)
    if u is None:
        u = rng.uniform(0.0, pk.dt, size=len(X))
    u = np.broadcast_to(np.asarray(u, dtype=float), (len(X),))
    X, I = step_batch(pk, X, I, rng.standard_normal(X.shape), dt=u)
    if single:
        return AtlasState(X[0], int(I[0]))
    return X, I


def lift(model, s):
    """Piecewise-constant lift: the net point of the state's chart."""
    if isinstance(s, AtlasState):
        return model.net.points[s.i]
    return model.net.points[np.asarray(s, dtype=np.int64)]


def start_state(model, y, distance=None):
    """Atlas state at the origin of the chart nearest to ambient point ``y``."""
    from .netspace import euclidean, nearest_net_index

    k = nearest_net_index(model.net, y, distance or euclidean)
    return AtlasState(np.zeros(model.d), k)
