"""Reference microscale simulators packaged as :class:`StateSpace` objects.

Every simulator is vectorised over paths: ``simulate(start, n, t0, rng)``
returns an ``(n, D)`` array of endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._rng import check_random_state
from .exceptions import ConfigError, NumericalError
from .netspace import StateSpace, euclidean

__all__ = [
    "SdeSystem",
    "euler_maruyama",
    "sde_space",
    "double_well_smooth",
    "double_well_rough",
    "three_well_smooth",
    "three_well_rough",
    "constant_drift_circle",
    "U1",
    "grad_U1",
    "V1",
    "grad_V1",
    "U2",
    "grad_U2",
    "V2",
    "grad_V2",
    "ImageEmbedding",
    "image_space",
    "StringSystem",
    "string_step",
    "smooth5",
    "string_space",
    "Lorenz96Multiscale",
    "lorenz96_multiscale",
    "SYSTEMS",
    "make_system",
]


# ---------------------------------------------------------------------------
# SDEs


@dataclass(frozen=True)
class SdeSystem:
    """``dX = drift(X) dt + sigma dB`` integrated with step ``micro_dt``.

    ``drift`` maps an ``(n, D)`` array to an ``(n, D)`` array.  ``sigma`` is a
    scalar or a constant ``(D, D)`` matrix.  ``period``, if set, wraps states
    into ``[0, period)`` after every step.
    """

    drift: Callable
    micro_dt: float
    dim: int
    sigma: object = 1.0
    period: Optional[float] = None
    potential: Optional[Callable] = None

    def __post_init__(self):
        if not self.micro_dt > 0:
            raise ConfigError(f"micro_dt must be > 0, got {self.micro_dt}")


def _noise(sigma, eta):
    if np.ndim(sigma) == 0:
        return sigma * eta
    return eta @ np.asarray(sigma).T


def euler_maruyama(sys, x0, total_time, rng):
    """Explicit Euler-Maruyama from ``x0`` over ``total_time``.

    ``x0`` is ``(D,)`` or ``(n, D)``.  When ``total_time`` is not a multiple of
    ``micro_dt`` the last step is shortened to land exactly on it.
    """
    if total_time < 0:
        raise ConfigError("total_time must be >= 0")
    rng = check_random_state(rng)
    x = np.array(x0, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    h = sys.micro_dt
    n_full = int(np.floor(total_time / h + 1e-9))
    rest = total_time - n_full * h
    steps = [h] * n_full + ([rest] if rest > 1e-12 * h else [])
    for n, hk in enumerate(steps):
        eta = rng.standard_normal(x.shape)
        # blow-ups are reported below as NumericalError
        with np.errstate(over="ignore", invalid="ignore"):
            x = x + sys.drift(x) * hk + _noise(sys.sigma, eta) * np.sqrt(hk)
        if sys.period is not None:
            x = np.mod(x, sys.period)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite state at Euler-Maruyama step {n + 1}")
    return x[0] if single else x


def _heal(sys, points, time, rng):
    if not time:
        return points
    return euler_maruyama(sys, points, time, rng)


def sde_space(sys, initial_points=None, distance=None, name="", heal_time=0.0, params=None):
    """Wrap an :class:`SdeSystem` as a :class:`StateSpace`.

    ``heal_time`` runs the initial points through the simulator before use.
    """

    def simulate(start, n_paths, t0, rng):
        start = np.asarray(start, dtype=float)
        return euler_maruyama(sys, np.tile(start, (n_paths, 1)), t0, rng)

    init = initial_points
    if heal_time and initial_points is not None:
        base = np.asarray(initial_points, dtype=float)

        def healed(rng):
            return _heal(sys, base, heal_time, rng)

        init = healed

    return StateSpace(
        simulate=simulate,
        distance=distance or euclidean,
        initial_points=init,
        name=name,
        micro_dt=sys.micro_dt,
        params=dict(params or {}, system=sys),
    )


# one-dimensional double well

def U1(x):
    x = np.asarray(x, dtype=float)
    return 16 * x**2 * (x - 1) ** 2


def grad_U1(x):
    x = np.asarray(x, dtype=float)
    return 32 * x * (x - 1) * (2 * x - 1)


RIPPLE = 1.0 / 6.0
RIPPLE_FREQ = 100 * np.pi


def V1(x):
    return U1(x) + RIPPLE * np.cos(RIPPLE_FREQ * np.asarray(x, dtype=float))


def grad_V1(x):
    x = np.asarray(x, dtype=float)
    return grad_U1(x) - RIPPLE * RIPPLE_FREQ * np.sin(RIPPLE_FREQ * x)


def _line_grid(lo=-0.5, hi=1.5, spacing=0.01):
    n = int(round((hi - lo) / spacing)) + 1
    return np.linspace(lo, hi, n)[:, None]


def double_well_smooth(micro_dt=0.005, spacing=0.01):
    sys = SdeSystem(drift=lambda x: -grad_U1(x), micro_dt=micro_dt, dim=1, potential=U1)
    return sde_space(sys, _line_grid(spacing=spacing), name="double-well")


def double_well_rough(micro_dt=0.00005, spacing=0.01, heal_time=0.01):
    sys = SdeSystem(drift=lambda x: -grad_V1(x), micro_dt=micro_dt, dim=1, potential=V1)
    return sde_space(sys, _line_grid(spacing=spacing), name="double-well-rough",
                     heal_time=heal_time)


# two-dimensional three well

WELLS = np.array([[0.0, 0.0], [1.5, 0.0], [0.8, 1.05]])
WELL_WIDTHS = np.array([1 / 5, 1 / 5, 1 / 6])


def _well_exponents(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    diff = x[:, None, :] - WELLS[None]
    return -np.einsum("nkd,nkd->nk", diff, diff) / WELL_WIDTHS, diff


def U2(x):
    """Negative log of a sum of three Gaussian bumps."""
    a, _ = _well_exponents(x)
    amax = a.max(axis=1)
    out = -(amax + np.log(np.exp(a - amax[:, None]).sum(axis=1)))
    return out if np.ndim(x) > 1 else out[0]


def grad_U2(x):
    a, diff = _well_exponents(x)
    w = np.exp(a - a.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    g = np.einsum("nk,nkd->nd", w * (2 / WELL_WIDTHS), diff)
    return g if np.ndim(x) > 1 else g[0]


def V2(x):
    x = np.asarray(x, dtype=float)
    ripple = RIPPLE * np.cos(RIPPLE_FREQ * x).sum(axis=-1)
    return U2(x) + ripple


def grad_V2(x):
    x = np.asarray(x, dtype=float)
    return grad_U2(x) - RIPPLE * RIPPLE_FREQ * np.sin(RIPPLE_FREQ * x)


def three_well_grid(spacing=0.01, cutoff=10.0, box=((-1.5, 3.0), (-1.5, 2.5))):
    """Grid points with ``U2 < cutoff``."""
    (x_lo, x_hi), (y_lo, y_hi) = box
    xs = np.linspace(x_lo, x_hi, int(round((x_hi - x_lo) / spacing)) + 1)
    ys = np.linspace(y_lo, y_hi, int(round((y_hi - y_lo) / spacing)) + 1)
    g = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    return g[U2(g) < cutoff]


def three_well_smooth(micro_dt=0.005, spacing=0.01):
    sys = SdeSystem(drift=lambda x: -grad_U2(x), micro_dt=micro_dt, dim=2, potential=U2)
    return sde_space(sys, three_well_grid(spacing), name="three-well")


def three_well_rough(micro_dt=0.00005, spacing=0.01, heal_time=0.01):
    sys = SdeSystem(drift=lambda x: -grad_V2(x), micro_dt=micro_dt, dim=2, potential=V2)
    return sde_space(sys, three_well_grid(spacing), name="three-well-rough",
                     heal_time=heal_time)


# constant coefficients on a circle

def periodic_distance(period):
    def dist(A, B):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        diff = np.abs(A[:, None, :] - B[None, :, :]) % period
        diff = np.minimum(diff, period - diff)
        return np.sqrt((diff**2).sum(axis=-1))

    return dist


def constant_drift_circle(b=1.0, sigma=1.0, period=2.0, micro_dt=0.01, spacing=0.01):
    """``dX = b dt + sigma dB`` on ``[0, period)`` with periodic distance."""
    sys = SdeSystem(
        drift=lambda x: np.full_like(x, b), micro_dt=micro_dt, dim=1, sigma=sigma,
        period=period,
    )
    n = int(round(period / spacing))
    pts = (np.arange(n) * spacing)[:, None]
    return sde_space(sys, pts, distance=periodic_distance(period), name="circle-drift",
                     params={"b": b, "sigma": sigma, "period": period})


# ---------------------------------------------------------------------------
# images of discs


class ImageEmbedding:
    """Binary images of a disc of radius 1/2 on a 0.04-spaced pixel grid."""

    def __init__(self, x_range=(-1.5, 3.5), y_range=(-1.5, 2.5), spacing=0.04, radius=0.5):
        nx = int(round((x_range[1] - x_range[0]) / spacing))
        ny = int(round((y_range[1] - y_range[0]) / spacing))
        xs = x_range[0] + spacing * np.arange(nx)
        ys = y_range[0] + spacing * np.arange(ny)
        self.grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
        self.radius = radius
        self.spacing = spacing
        self.scale = spacing**2 / 2

    @property
    def dim(self):
        return len(self.grid)

    def embed(self, x, chunk=512):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((len(x), self.dim), dtype=np.uint8)
        r2 = self.radius**2
        for s in range(0, len(x), chunk):
            xb = x[s : s + chunk]
            d2 = (
                (xb[:, 0:1] - self.grid[None, :, 0]) ** 2
                + (xb[:, 1:2] - self.grid[None, :, 1]) ** 2
            )
            out[s : s + chunk] = d2 < r2
        return out

    def approx_invert(self, v):
        """Mean pixel position of each image."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        mass = v.sum(axis=1)
        if np.any(mass == 0):
            raise NumericalError("empty image")
        return (v @ self.grid) / mass[:, None]

    def distance(self, A, B, chunk=1024):
        """Hamming distance scaled by ``spacing**2 / 2``."""
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        Bf = B.astype(np.float32)
        nb = Bf.sum(axis=1, dtype=np.float64)
        out = np.empty((len(A), len(B)))
        for s in range(0, len(A), chunk):
            Af = A[s : s + chunk].astype(np.float32)
            na = Af.sum(axis=1, dtype=np.float64)
            inner = (Af @ Bf.T).astype(np.float64)
            out[s : s + chunk] = na[:, None] + nb[None, :] - 2 * inner
        return out * self.scale


def image_space(base, embedding=None, initial_spacing=0.04):
    """Lift a 2-D state space to binary disc images.

    ``simulate`` inverts the image approximately, runs the base simulator
    and embeds the endpoints.  The initial set is the base system's initial
    set thinned to a grid of ``initial_spacing`` before embedding.
    """
    emb = embedding or ImageEmbedding()

    def simulate(start, n_paths, t0, rng):
        x0 = emb.approx_invert(start)[0]
        return emb.embed(base.simulate(x0, n_paths, t0, rng))

    def initial_points(rng):
        pts = base.sample_initial(rng)
        if initial_spacing:
            key = np.round(pts / initial_spacing).astype(np.int64)
            _, first = np.unique(key, axis=0, return_index=True)
            pts = pts[np.sort(first)]
        return emb.embed(pts)

    return StateSpace(
        simulate=simulate,
        distance=emb.distance,
        initial_points=initial_points,
        name=f"image-{base.name}",
        micro_dt=base.micro_dt,
        params={"embedding": emb, "base": base},
    )


# ---------------------------------------------------------------------------
# randomly forced string


def smooth5(f):
    """Five-point centred moving average; the window shrinks near the ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    c = np.cumsum(np.pad(f, [(0, 0)] * (f.ndim - 1) + [(1, 0)]), axis=-1)
    n = f.shape[-1]
    out[..., 2 : n - 2] = (c[..., 5:] - c[..., : n - 4]) / 5
    out[..., 0] = f[..., 0]
    out[..., 1] = f[..., 0:3].mean(axis=-1)
    out[..., n - 2] = f[..., n - 3 :].mean(axis=-1)
    out[..., n - 1] = f[..., n - 1]
    return out


class StringSystem:
    """Random walk of pinned, fixed-norm functions on a 100-point grid."""

    def __init__(self, n_grid=100):
        self.x = np.linspace(0.0, 1.0, n_grid)
        self.f0 = np.sin(np.pi * self.x)
        self.f_norm = float(np.linalg.norm(self.f0))

    def distance(self, A, B):
        """Euclidean distance scaled to approximate the L2 norm on [0, 1]."""
        return euclidean(A, B) / np.sqrt(len(self.x))

    def step(self, f, rng):
        return string_step(f, rng, self.x, self.f_norm)

    def run(self, f, n_steps, rng):
        rng = check_random_state(rng)
        for _ in range(int(n_steps)):
            f = self.step(f, rng)
        return f


def string_step(f, rng, x=None, f_norm=None):
    """Add a scaled Brownian bridge, smooth, pin the ends and renormalise.

    ``f`` is ``(n_grid,)`` or stacked ``(n, n_grid)``.
    """
    rng = check_random_state(rng)
    f = np.asarray(f, dtype=float)
    n_grid = f.shape[-1]
    if x is None:
        x = np.linspace(0.0, 1.0, n_grid)
    if f_norm is None:
        f_norm = np.linalg.norm(np.sin(np.pi * x))
    W = np.cumsum(rng.standard_normal(f.shape), axis=-1)
    W = W - W[..., :1]
    W = W - x * W[..., -1:]
    g = smooth5(f + W / 100.0)
    g[..., 0] = 0.0
    g[..., -1] = 0.0
    return g * (f_norm / np.linalg.norm(g, axis=-1, keepdims=True))


def string_space(n_initial=50_000, heal_steps=250):
    """String system; time is measured in simulator steps."""
    sysm = StringSystem()

    def simulate(start, n_paths, t0, rng):
        f = np.tile(np.asarray(start, dtype=float), (n_paths, 1))
        return sysm.run(f, int(round(t0)), rng)

    def initial_points(rng):
        g = rng.standard_normal((n_initial, len(sysm.x)))
        g[:, 0] = g[:, -1] = 0.0
        g *= sysm.f_norm / np.linalg.norm(g, axis=1, keepdims=True)
        return sysm.run(g, heal_steps, rng)

    return StateSpace(
        simulate=simulate,
        distance=sysm.distance,
        initial_points=initial_points,
        name="string",
        micro_dt=1.0,
        params={"system": sysm},
    )


# ---------------------------------------------------------------------------
# slow radial system driven by Lorenz-96


I1 = np.concatenate([np.arange(0, 10), np.arange(20, 30), np.arange(40, 50), np.arange(60, 70)])
I2 = np.setdiff1d(np.arange(80), I1)
G_OFFSET = 0.2925


def lorenz96(y, F=8.0):
    """Lorenz-96 right-hand side on the last axis (periodic indices)."""
    return (np.roll(y, -1, axis=-1) - np.roll(y, 2, axis=-1)) * np.roll(y, 1, axis=-1) - y + F


def slow_field(x):
    """Cartesian form of ``r' = -(r-3/4)(r-3/2)(r-2)``, ``theta' = r - 3/2``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    rdot = -(r - 0.75) * (r - 1.5) * (r - 2.0)
    thdot = r - 1.5
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.where(r > 0, rdot / r, 0.0)
    rot = np.stack([-x[..., 1], x[..., 0]], axis=-1)
    return radial * x + thdot * rot


def rk4(rhs, z, h, n_steps):
    for n in range(n_steps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite state at RK4 step {n + 1}")
    return z


class Lorenz96Multiscale:
    """``x' = eps*f(x) + g(y)``, ``y' = L96(y)``; outputs ``[x, y*out_scale]``."""

    def __init__(self, eps=0.01, F=8.0, h=0.05, out_scale=1e-4, jitter=1e-5):
        self.eps, self.F, self.h = eps, F, h
        self.out_scale, self.jitter = out_scale, jitter

    def g(self, y):
        return np.stack(
            [y[..., I1].sum(-1) / 320 - G_OFFSET, y[..., I2].sum(-1) / 320 - G_OFFSET],
            axis=-1,
        )

    def rhs(self, z):
        x, y = z[..., :2], z[..., 2:]
        return np.concatenate(
            [self.eps * slow_field(x) + self.g(y), lorenz96(y, self.F)], axis=-1
        )

    def integrate(self, v, time):
        """Integrate output-scaled states ``v`` for ``time``."""
        z = np.array(v, dtype=float)
        z[..., 2:] /= self.out_scale
        z = rk4(self.rhs, z, self.h, int(round(time / self.h)))
        z[..., 2:] *= self.out_scale
        return z


def lorenz96_multiscale(eps=0.01, n_initial=2000, heal_time=5.0):
    sysm = Lorenz96Multiscale(eps=eps)

    def simulate(start, n_paths, t0, rng):
        v = np.tile(np.asarray(start, dtype=float), (n_paths, 1))
        v = v + sysm.jitter * rng.standard_normal(v.shape)
        return sysm.integrate(v, t0)

    def initial_points(rng):
        v = rng.standard_normal((n_initial, 82))
        v[:, 2:] *= sysm.out_scale
        return sysm.integrate(v, heal_time)

    return StateSpace(
        simulate=simulate,
        distance=euclidean,
        initial_points=initial_points,
        name="lorenz96",
        micro_dt=sysm.h,
        params={"system": sysm},
    )


# ---------------------------------------------------------------------------
# registry


def _image(base_factory):
    def factory(**kw):
        spacing = kw.pop("initial_spacing", 0.04)
        return image_space(base_factory(**kw), initial_spacing=spacing)

    return factory


SYSTEMS = {
    "double-well": double_well_smooth,
    "double-well-rough": double_well_rough,
    "three-well": three_well_smooth,
    "three-well-rough": three_well_rough,
    "image-three-well": _image(three_well_smooth),
    "image-three-well-rough": _image(three_well_rough),
    "circle-drift": constant_drift_circle,
    "string": string_space,
    "lorenz96": lorenz96_multiscale,
}


def make_system(key, **params):
    try:
        factory = SYSTEMS[key]
    except KeyError:
        raise ConfigError(f"unknown system {key!r}; choose from {sorted(SYSTEMS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for system {key!r}: {exc}") from exc
