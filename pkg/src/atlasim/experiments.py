"""Head-to-head runs of a microscale simulator and its learned surrogate."""
from __future__ import annotations

import numpy as np

from ._rng import derive_rng
from .analysis import classify, multiscale_compare, transition_times
from .exceptions import ConfigError
from .netspace import build_delta_net
from .simulate import AtlasState, run, run_ensemble, step_batch
from .systems import SdeSystem, euler_maruyama

__all__ = [
    "pick_initial_charts",
    "direct_slices",
    "atlas_slices",
    "compare_simulators",
    "self_compare",
    "direct_transition_stats",
    "atlas_transition_stats",
]


def pick_initial_charts(model, n_ics, seed):
    """Distinct random net indices used as shared starting points."""
    return _pick(model.n_charts, n_ics, seed)


def _pick(n_points, n_ics, seed):
    rng = derive_rng(seed, "initial-conditions")
    n = min(n_ics, n_points)
    return sorted(int(k) for k in rng.choice(n_points, size=n, replace=False))


def direct_slices(space, x0, n_paths, times, rng):
    """Microscale endpoints at each of the increasing ``times``.

    SDE systems continue one ensemble from slice to slice; other systems
    draw fresh paths from ``x0`` for every slice, which leaves each slice's
    marginal law unchanged.
    """
    sys = space.params.get("system")
    if not isinstance(sys, SdeSystem):
        return [space.simulate(np.asarray(x0), n_paths, t, rng) for t in times]
    X = np.tile(np.asarray(x0, dtype=float), (n_paths, 1))
    out, t_prev = [], 0.0
    for t in times:
        X = euler_maruyama(sys, X, t - t_prev, rng)
        out.append(X)
        t_prev = t
    return out


def atlas_slices(model, chart, n_paths, times, rng):
    """Surrogate ensembles ``(X, I)`` at each of the increasing ``times``.

    A slice time that is not a whole number of steps is reached with a final
    shortened step applied to a copy of the ensemble.
    """
    pk = model.packed
    X = np.zeros((n_paths, model.d))
    I = np.full(n_paths, chart, dtype=np.int64)
    out, n_done = [], 0
    for t in times:
        n_full = int(np.floor(t / pk.dt + 1e-9))
        X, I, _ = run_ensemble(pk, X, I, n_full - n_done, rng)
        n_done = n_full
        rest = t - n_full * pk.dt
        if rest > 1e-12 * pk.dt:
            out.append(step_batch(pk, X, I, rng.standard_normal(X.shape), dt=rest))
        else:
            out.append((X.copy(), I.copy()))
    return out


def compare_simulators(model, space, times, n_ics=10, n_paths=10_000, delta_c=None,
                       coarse_points=None, seed=0, initial_charts=None):
    """Multiscale L1 comparison of ``space``'s simulator against ``model``."""
    delta_c = delta_c or model.delta
    if coarse_points is None:
        coarse_points = build_delta_net(model.net.points, delta_c, space.distance).points
    charts = initial_charts if initial_charts is not None else \
        pick_initial_charts(model, n_ics, seed)
    K = model.n_charts
    samples_a, samples_b = [], []
    for c, k in enumerate(charts):
        samples_a.append(direct_slices(space, model.net.points[k], n_paths, times,
                                       derive_rng(seed, "direct", c)))
        samples_b.append(atlas_slices(model, k, n_paths, times, derive_rng(seed, "atlas", c)))
    report = multiscale_compare(
        samples_a, samples_b, model.net.points, coarse_points, model.delta, delta_c,
        distance_a=space.distance,
        distance_b=lambda s, _: model.packed.chart_distances(s[0], s[1], K),
        distance=space.distance,
        times=times,
    )
    report.meta.update(initial_charts=list(charts), n_paths=n_paths, delta=model.delta,
                       delta_c=delta_c)
    return report


def self_compare(space, net, times, n_ics=10, n_paths=10_000, delta_c=None,
                 coarse_points=None, seed=0, initial_charts=None):
    """Compare the microscale simulator with itself on two disjoint streams.

    Gives the Monte Carlo noise floor of :func:`compare_simulators` at the
    same bin layout.
    """
    delta_c = delta_c or net.delta
    if coarse_points is None:
        coarse_points = build_delta_net(net.points, delta_c, space.distance).points
    if initial_charts is None:
        initial_charts = _pick(len(net), n_ics, seed)
    samples_a, samples_b = [], []
    for c, k in enumerate(initial_charts):
        samples_a.append(direct_slices(space, net.points[k], n_paths, times,
                                       derive_rng(seed, "direct", c)))
        samples_b.append(direct_slices(space, net.points[k], n_paths, times,
                                       derive_rng(seed, "direct-split", c)))
    report = multiscale_compare(samples_a, samples_b, net.points, coarse_points, net.delta,
                                delta_c, space.distance, space.distance, space.distance,
                                times=times)
    report.meta.update(initial_charts=list(initial_charts), n_paths=n_paths,
                       delta=net.delta, delta_c=delta_c)
    return report


def _merge(runs):
    merged = runs[0]
    for s in runs[1:]:
        merged = merged.merge(s)
    return merged


def direct_transition_stats(space, x0, regions, n_runs, horizon, seed, record_dt=None,
                            return_runs=False):
    """Transition statistics of ``n_runs`` long microscale paths.

    With ``return_runs`` the per-run statistics are returned as well.
    """
    sys = space.params.get("system")
    if not isinstance(sys, SdeSystem):
        raise ConfigError(f"long direct runs need an SDE system, not {space.name!r}")
    record_dt = record_dt or sys.micro_dt
    n_rec = int(round(horizon / record_dt))
    X = np.tile(np.asarray(x0, dtype=float), (n_runs, 1))
    rng = derive_rng(seed, "direct-long")
    labels = np.empty((n_rec, n_runs), dtype=np.int64)
    for n in range(n_rec):
        X = euler_maruyama(sys, X, record_dt, rng)
        labels[n] = classify(X, regions)
    runs = [transition_times(labels[:, r], record_dt) for r in range(n_runs)]
    return (_merge(runs), runs) if return_runs else _merge(runs)


def atlas_transition_stats(model, chart, regions, n_runs, n_steps, seed, return_runs=False):
    """Transition statistics of ``n_runs`` long surrogate paths, lifted to net points."""
    net_labels = classify(model.net.points, regions)
    runs = []
    for r in range(n_runs):
        traj = run(model, AtlasState(np.zeros(model.d), chart), n_steps,
                   derive_rng(seed, "atlas-long", r))
        runs.append(transition_times(net_labels[traj.charts], model.dt))
    return (_merge(runs), runs) if return_runs else _merge(runs)
