"""Acceptance criteria AC-1 to AC-9.

Each test records one ``AC-n PASS/FAIL: ...`` line, printed in the
terminal summary.  Run standalone with ``python3 tests/test_acceptance.py``.
"""

import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from atlasim._rng import derive_rng
from atlasim.analysis import (
    RegionSpec,
    chart_orientation,
    classify,
    effective_potential,
    transition_times,
)
from atlasim.embedding import estimate_dim
from atlasim.experiments import (
    atlas_transition_stats,
    compare_simulators,
    direct_transition_stats,
)
from atlasim.learn import AtlasParams, ChartDistortionWarning, learn_atlas
from atlasim.netspace import build_delta_net, nearest_net_index
from atlasim.simulate import AtlasState, lift, run, run_ensemble, wall
from atlasim.systems import euler_maruyama, make_system

import conftest

pytestmark = pytest.mark.acceptance

TESTS = Path(__file__).parent


def record(name, ok, detail):
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def learn_quiet(space, params, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ChartDistortionWarning)
        return learn_atlas(space, params, seed=seed)


def test_ac1_golden_sequence():
    stats = transition_times([0, 1, 1, 0, 0, 1, 0, 2, 0, 3, 3, 0, 1])
    ok = stats.samples == {(1, 2): [6], (2, 3): [2], (3, 1): [3]}
    ok &= stats.count(1, 3) == 0 and stats.count(3, 2) == 0
    record("AC-1", ok, f"samples={stats.samples}")


def test_ac2_wall_suite():
    rng = np.random.default_rng(0)
    worst, ok = 0.0, True
    for delta in (0.05, 0.1, 0.2):
        x = rng.normal(size=(1000, 3))
        x *= 1.5 * delta * rng.uniform(size=(1000, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
        ok &= np.array_equal(wall(x, delta), x)
        z = rng.normal(size=(100_000, 3)) * 10.0 ** rng.uniform(-3, 6, size=(100_000, 1))
        r = np.linalg.norm(wall(z, delta), axis=1) / delta
        worst = max(worst, r.max())
        ok &= bool(np.all(r < 2))

        def radial(s):
            return float(np.linalg.norm(wall(np.array([s, 0.0]), delta)))

        h, s = 1e-7 * delta, 1.5 * delta
        left = (radial(s) - radial(s - h)) / h
        right = (radial(s + h) - radial(s)) / h
        ok &= abs(left - 1) <= 1e-6 and abs(right - 1) <= 1e-6
        ok &= abs(radial(1e8 * delta) - 2 * delta) <= 1e-12
    record("AC-2", ok, f"max |W|/delta over 3e5 inputs = {worst:.15f}")


def test_ac3_constant_coefficient_oracle():
    space = make_system("circle-drift")
    p, t0 = 10_000, 0.01
    m = learn_quiet(space, AtlasParams(delta=0.1, p=p, t0=t0), seed=0)
    o = chart_orientation(m, lambda a, b: ((b[0] - a[0] + 1) % 2) - 1)
    drift = np.array([c.drift[0] for c in m.charts]) * o
    sigma = np.array([c.diffusion[0, 0] for c in m.charts])
    se = 1.0 / np.sqrt(p * t0)
    db, ds = np.abs(drift - 1).max(), np.abs(sigma - 1).max()
    record("AC-3", db <= 3 * se and ds <= 0.05,
           f"{m.n_charts} charts, max|b-1|={db:.4f} (3 SE={3 * se:.2f}), "
           f"max|sigma-1|={ds:.4f} (tol 0.05)")


def test_ac4_delta_trend():
    space = make_system("double-well")
    coarse = build_delta_net(space.sample_initial(), 0.2).points
    starts = np.array([[-0.25], [0.0], [0.5], [1.0], [1.25]])
    err = {}
    for delta in (0.2, 0.1):
        m = learn_quiet(space, AtlasParams(delta=delta, p=10_000), seed=0)
        ics = [nearest_net_index(m.net, x) for x in starts]
        rep = compare_simulators(m, space, [50.0], n_paths=10_000, delta_c=0.2,
                                 coarse_points=coarse, seed=0, initial_charts=ics)
        err[delta] = float(rep.mean[0])
    ok = err[0.1] < err[0.2] and max(err.values()) < 0.5
    record("AC-4", ok, f"mean L1 at T=50: delta=0.2 -> {err[0.2]:.4f}, "
                       f"delta=0.1 -> {err[0.1]:.4f}")


@pytest.mark.parametrize("key,t0", [("double-well", None), ("double-well-rough", 0.02)])
def test_ac5_effective_potential(key, t0):
    space = make_system(key)
    m = learn_quiet(space, AtlasParams(delta=0.1, p=10_000, t0=t0), seed=0)
    _, _, _, minima, maxima = effective_potential(m)
    ok = len(minima) == 2 and abs(minima[0]) <= 0.1 and abs(minima[1] - 1) <= 0.1
    ok &= any(minima[0] < x < minima[-1] for x in maxima) if minima else False
    record(f"AC-5[{key}]", ok,
           f"minima={np.round(minima, 4).tolist()} maxima={np.round(maxima, 4).tolist()}")


def test_ac6_transition_times():
    space = make_system("double-well")
    regions = RegionSpec.balls([[0.0], [1.0]], 0.25)
    m = learn_quiet(space, AtlasParams(delta=0.1, p=10_000), seed=0)
    chart = nearest_net_index(m.net, np.array([0.0]))
    atlas, atlas_runs = atlas_transition_stats(m, chart, regions, 12, 500_000, seed=0,
                                               return_runs=True)
    direct, direct_runs = direct_transition_stats(space, np.array([0.0]), regions, 12,
                                                  1000.0, seed=0, return_runs=True)
    fewest = min(s.count(1, 2) + s.count(2, 1) for s in atlas_runs + direct_runs)
    ratios = [atlas.mean_time(i, j) / direct.mean_time(i, j) for i, j in ((1, 2), (2, 1))]
    ok = fewest >= 100 and all(0.5 <= r <= 2 for r in ratios)
    record("AC-6", ok,
           f"tau12 atlas/direct={atlas.mean_time(1, 2):.3f}/{direct.mean_time(1, 2):.3f}, "
           f"tau21={atlas.mean_time(2, 1):.3f}/{direct.mean_time(2, 1):.3f}, "
           f"ratios={np.round(ratios, 3).tolist()}, fewest transitions per run={fewest}")


def test_ac7_speedup():
    space = make_system("double-well-rough")
    m = learn_quiet(space, AtlasParams(delta=0.1, p=2000, t0=0.02), seed=0)
    ratio = m.dt / space.micro_dt
    horizon, n_paths = 5.0, 100
    sysm = space.params["system"]
    t = time.perf_counter()
    euler_maruyama(sysm, np.zeros((n_paths, 1)), horizon, derive_rng(0, "direct"))
    t_direct = time.perf_counter() - t
    run_ensemble(m, np.zeros((1, 1)), np.zeros(1, int), 2, np.random.default_rng(0))
    t = time.perf_counter()
    run_ensemble(m, np.zeros((n_paths, 1)), np.zeros(n_paths, int),
                 int(round(horizon / m.dt)), derive_rng(0, "atlas"))
    t_atlas = time.perf_counter() - t
    speedup = t_direct / t_atlas
    record("AC-7", ratio >= 50 and speedup >= 10,
           f"dt ratio={ratio:.1f} (>= 50), wall-clock over T={horizon}: "
           f"direct {t_direct:.3f}s, atlas {t_atlas:.4f}s, speedup {speedup:.0f}x (>= 10)")


PROPERTY_SUITES = [
    "test_netspace.py::test_net_properties",
    "test_embedding.py::test_isometry_recovery",
    "test_learn.py::test_affine_recovery",
    "test_analysis.py::test_soft_bin_normalised_and_equivariant",
    "test_simulate.py::test_wall_confines",
    "test_simulate.py::test_confinement_long_run",
    "test_learn.py::test_model_determinism_and_threads",
    "test_cli.py::test_learn_is_reproducible",
    "test_cli.py::test_simulate_reproducible",
]


def test_ac8_property_suites():
    t = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         *[str(TESTS / s) for s in PROPERTY_SUITES]],
        cwd=TESTS.parent, capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - t
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    record("AC-8", proc.returncode == 0 and elapsed < 120,
           f"{len(PROPERTY_SUITES)} suites in {elapsed:.1f}s (< 120s): {tail}")


def test_ac9_image_three_well():
    from atlasim.cli import default_regions

    space = make_system("image-three-well")
    delta = 0.2
    m = learn_quiet(space, AtlasParams(delta=delta, d=2, m=20, p=500), seed=0)
    passing = np.mean([estimate_dim(c.eigenvalues, delta) >= 2 for c in m.charts])
    traj = run(m, AtlasState(np.zeros(2), 0), 100_000, derive_rng(0, "image-run"))
    regions = default_regions("image-three-well", space)
    visited = {int(v) for v in np.unique(classify(lift(m, np.unique(traj.charts)), regions))} - {0}
    record("AC-9", passing >= 0.9 and visited == {1, 2, 3},
           f"{m.n_charts} charts, {passing:.1%} pass the (delta/4)^2 cutoff at d=2, "
           f"regions visited={sorted(visited)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
