"""Learning phase: charts, local coefficients and switching maps.

For every net point ``y_k`` the learner

1. runs ``m`` short paths to create the landmark set ``A_k = {y_k, a_1..a_m}``;
2. embeds the union of the landmark sets of ``k`` and its neighbours with
   classical MDS (chart ``k``), shifted so ``y_k`` sits at the origin;
3. extends the chart to ``p`` fresh endpoints and matches a constant drift
   and diffusion to their sample mean and covariance;
4. fits an affine least-squares map between the charts of every pair of
   neighbours on their shared landmarks.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._rng import derive_rng
from .embedding import extend, mds
from .exceptions import AtlasError, ConfigError, DegenerateLandmarksError
from .netspace import DeltaNet, build_delta_net

__all__ = [
    "AtlasParams",
    "Chart",
    "TransitionMap",
    "AtlasModel",
    "ChartLearningError",
    "ChartDistortionWarning",
    "generate_landmarks",
    "learn_chart",
    "learn_transition",
    "learn_atlas",
    "psd_sqrt",
]

PINV_RCOND = 1e-10
CENTER_SLACK = 0.3


class ChartDistortionWarning(UserWarning):
    """A neighbour's chart center lies outside the expected annulus."""


class ChartLearningError(AtlasError):
    """One or more charts failed; ``errors`` maps chart index to exception."""

    def __init__(self, errors):
        self.errors = dict(errors)
        detail = "; ".join(f"chart {k}: {e}" for k, e in sorted(self.errors.items()))
        super().__init__(f"{len(self.errors)} chart(s) failed: {detail}")


@dataclass(frozen=True)
class AtlasParams:
    """Learning parameters.

    ``t0`` defaults to ``delta**2`` and ``dt`` to ``t0 / 5`` as in the
    experiments.  The theory instead suggests ``dt ~ delta / ln(1/delta)``
    and ``p ~ delta**-4``; both remain available by passing values
    explicitly.
    """

    delta: float
    d: int = 1
    m: int | None = None
    p: int = 10_000
    t0: float | None = None
    dt: float | None = None

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", 2 * self.d)
        if self.t0 is None:
            object.__setattr__(self, "t0", self.delta**2)
        if self.dt is None:
            object.__setattr__(self, "dt", self.t0 / 5)
        self.validate()

    def validate(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d}")
        if self.m < self.d:
            raise ConfigError(f"m must be >= d, got m={self.m}, d={self.d}")
        if self.p < 2:
            raise ConfigError(f"p must be >= 2, got {self.p}")
        if not 0 < self.dt < self.t0:
            raise ConfigError(f"need 0 < dt < t0, got dt={self.dt}, t0={self.t0}")


def psd_sqrt(C):
    """Symmetric PSD square root; negative eigenvalues are clamped to 0."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class Chart:
    index: int
    drift: np.ndarray
    diffusion: np.ndarray
    centers: dict
    landmarks: object = field(default=None, repr=False, compare=False)
    eigenvalues: object = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class TransitionMap:
    """Affine map ``x -> (x - mu_kj) @ T + mu_jk`` from chart k to chart j."""

    k: int
    j: int
    mu_kj: np.ndarray
    mu_jk: np.ndarray
    T: np.ndarray

    def __call__(self, x):
        return (np.asarray(x) - self.mu_kj) @ self.T + self.mu_jk


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class AtlasModel:
    """The learned reduced simulator; read-only after construction."""

    net: DeltaNet
    d: int
    delta: float
    t0: float
    dt: float
    charts: tuple
    transitions: dict

    def __post_init__(self):
        if not 0 < self.dt < self.t0:
            raise ConfigError(f"need 0 < dt < t0, got dt={self.dt}, t0={self.t0}")
        for k, j in self.net.edges():
            if (k, j) not in self.transitions:
                raise ConfigError(f"missing transition map for edge ({k}, {j})")

    @property
    def n_charts(self):
        return len(self.charts)

    @cached_property
    def packed(self):
        from .simulate import PackedAtlas

        return PackedAtlas.from_model(self)

    def to_dict(self):
        return {
            "delta": float(self.delta),
            "d": int(self.d),
            "t0": float(self.t0),
            "dt": float(self.dt),
            "net": self.net.to_dict(),
            "charts": [
                {
                    "k": int(c.index),
                    "b": _arr(c.drift).tolist(),
                    "sigma": _arr(c.diffusion).tolist(),
                    "centers": {str(j): _arr(v).tolist() for j, v in sorted(c.centers.items())},
                }
                for c in self.charts
            ],
            "transitions": [
                {
                    "k": int(k),
                    "j": int(j),
                    "mu_kj": _arr(tm.mu_kj).tolist(),
                    "mu_jk": _arr(tm.mu_jk).tolist(),
                    "T": _arr(tm.T).tolist(),
                }
                for (k, j), tm in sorted(self.transitions.items())
            ],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            d = int(data["d"])
            charts = tuple(
                Chart(
                    index=int(c["k"]),
                    drift=_arr(c["b"]).reshape(d),
                    diffusion=_arr(c["sigma"]).reshape(d, d),
                    centers={int(j): _arr(v).reshape(d) for j, v in c["centers"].items()},
                )
                for c in data["charts"]
            )
            transitions = {}
            for t in data["transitions"]:
                k, j = int(t["k"]), int(t["j"])
                transitions[(k, j)] = TransitionMap(
                    k, j,
                    _arr(t["mu_kj"]).reshape(d),
                    _arr(t["mu_jk"]).reshape(d),
                    _arr(t["T"]).reshape(d, d),
                )
            model = cls(
                net=DeltaNet.from_dict(data["net"]),
                d=d,
                delta=float(data["delta"]),
                t0=float(data["t0"]),
                dt=float(data["dt"]),
                charts=charts,
                transitions=transitions,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed model: {exc!r}") from exc
        if [c.index for c in model.charts] != list(range(len(model.net))):
            raise ConfigError("malformed model: chart indices do not match net")
        return model

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed model file {path}: {exc}") from exc
        return cls.from_dict(data)


def generate_landmarks(space, y_k, m, t0, rng):
    """``A_k``: the net point followed by ``m`` simulator endpoints at ``t0``."""
    y_k = np.asarray(y_k)
    ends = np.asarray(space.simulate(y_k, m, t0, rng))
    return np.concatenate([y_k[None].astype(ends.dtype), ends], axis=0)


def _chart_members(net, k):
    return sorted({k, *net.neighbors[k]})


def learn_chart(space, net, k, landmarks, p, t0, d, rng, endpoints=None):
    """Learn chart ``k``.

    Parameters
    ----------
    landmarks : mapping or sequence
        ``landmarks[j]`` is ``A_j`` for ``j == k`` and every neighbour.
    endpoints : array, optional
        Precomputed ``(p, D)`` simulator endpoints from ``y_k``; drawn with
        ``rng`` when omitted.

    Returns
    -------
    chart : Chart
    endpoint_coords : ndarray, shape (p, d)
    landmark_coords : dict
        ``j -> Phi_k(A_j)`` for every member ``j`` of the chart.
    """
    if p < 2:
        raise ConfigError(f"p must be >= 2 to estimate a covariance, got {p}")
    members = _chart_members(net, k)
    blocks = [np.asarray(landmarks[j]) for j in members]
    L = np.concatenate(blocks, axis=0)
    if len(L) < d + 1:
        raise DegenerateLandmarksError(k, len(L) - 1, d)
    offsets = np.cumsum([0] + [len(b) for b in blocks])

    emb = mds(space.distance(L, L), d)
    if emb.rank < d:
        raise DegenerateLandmarksError(k, emb.rank, d)

    if endpoints is None:
        endpoints = space.simulate(net.points[k], p, t0, rng)
    endpoints = np.asarray(endpoints)
    x = extend(emb, space.distance(endpoints, L))

    origin = emb.landmark_coords[offsets[members.index(k)]].copy()
    coords = emb.landmark_coords - origin
    x = x - origin

    centers = {}
    lm_coords = {}
    for pos, j in enumerate(members):
        block = coords[offsets[pos] : offsets[pos + 1]]
        lm_coords[j] = block
        centers[j] = block[0].copy()
    centers[k] = np.zeros(d)

    drift = x.sum(axis=0) / (len(x) * t0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    diffusion = psd_sqrt(cov / t0)

    lo, hi = net.delta * (1 - CENTER_SLACK), 2 * net.delta * (1 + CENTER_SLACK)
    bad = {j: float(np.linalg.norm(c)) for j, c in centers.items()
           if j != k and not lo <= np.linalg.norm(c) <= hi}
    if bad:
        detail = ", ".join(f"{j}: {r:.4g}" for j, r in sorted(bad.items()))
        warnings.warn(
            f"chart {k}: neighbour centers outside [{lo:.4g}, {hi:.4g}] ({detail})",
            ChartDistortionWarning,
            stacklevel=2,
        )

    chart = Chart(
        index=k,
        drift=drift,
        diffusion=diffusion,
        centers=centers,
        landmarks=np.asarray(landmarks[k]),
        eigenvalues=emb.eigenvalues,
    )
    return chart, x, lm_coords


def learn_transition(k, j, X, Y):
    """Least-squares affine map from chart ``k`` to chart ``j``.

    ``X`` and ``Y`` hold the shared landmarks ``A_k ∪ A_j`` (same row order)
    in the coordinates of chart ``k`` and chart ``j`` respectively.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape:
        raise ConfigError("landmark coordinate arrays must have equal shapes")
    if len(X) < X.shape[1] + 1:
        raise DegenerateLandmarksError(k, len(X) - 1, X.shape[1])
    mu_kj = X.mean(axis=0)
    mu_jk = Y.mean(axis=0)
    T = np.linalg.pinv(X - mu_kj, rcond=PINV_RCOND) @ (Y - mu_jk)
    return TransitionMap(k=k, j=j, mu_kj=mu_kj, mu_jk=mu_jk, T=T)


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def learn_atlas(space, params, seed=0, n_jobs=1, initial_points=None, net=None):
    """Run the full learning phase and return an :class:`AtlasModel`.

    Each chart draws from its own stream derived from ``seed`` and the chart
    index, so the result does not depend on ``n_jobs``.
    """
    if not isinstance(params, AtlasParams):
        params = AtlasParams(**params)
    if net is None:
        if initial_points is None:
            initial_points = space.sample_initial(derive_rng(seed, "initial"))
        net = build_delta_net(initial_points, params.delta, space.distance)
    K = len(net)

    def landmarks_for(k):
        rng = derive_rng(seed, "landmarks", k)
        return generate_landmarks(space, net.points[k], params.m, params.t0, rng)

    landmarks = _map(landmarks_for, range(K), n_jobs)

    def chart_for(k):
        rng = derive_rng(seed, "paths", k)
        try:
            return learn_chart(space, net, k, landmarks, params.p, params.t0, params.d, rng)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            return exc

    results = _map(chart_for, range(K), n_jobs)
    errors = {k: r for k, r in enumerate(results) if isinstance(r, Exception)}
    if errors:
        raise ChartLearningError(errors)

    charts = tuple(r[0] for r in results)
    lm = [r[2] for r in results]
    transitions = {}
    for k, j in net.edges():
        X = np.concatenate([lm[k][k], lm[k][j]])
        Y = np.concatenate([lm[j][k], lm[j][j]])
        transitions[(k, j)] = learn_transition(k, j, X, Y)

    return AtlasModel(
        net=net,
        d=params.d,
        delta=params.delta,
        t0=params.t0,
        dt=params.dt,
        charts=charts,
        transitions=transitions,
    )
