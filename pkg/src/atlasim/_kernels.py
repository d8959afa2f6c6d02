"""Compiled inner loop of the learned simulator.

Mirrors :func:`atlasim.simulate.step_batch` operation for operation; it only
exists because a Python-level loop over steps is the bottleneck for long
ensembles and long single paths.
"""
import math

import numba
import numpy as np


@numba.njit(cache=True)
def advance(X, I, noise, cand_idx, centers, mu_out, mu_in, T, drift, sigma, delta, dt,
            cap, out_X, out_I):
    """Apply ``noise.shape[0]`` steps in place to ``X`` (n, d) and ``I`` (n,).

    When ``out_X`` has one row per step, the state of path 0 after step
    ``t`` is written to ``out_X[t]`` and ``out_I[t]``.
    """
    n_steps, n, d = noise.shape
    S = cand_idx.shape[1]
    sq = math.sqrt(dt)
    record = out_X.shape[0] == n_steps
    y = np.empty(d)
    for t in range(n_steps):
        for p in range(n):
            i = I[p]
            best = 0
            best_d = math.inf
            for s in range(S):
                if cand_idx[i, s] < 0:
                    break
                acc = 0.0
                for a in range(d):
                    diff = X[p, a] - centers[i, s, a]
                    acc += diff * diff
                if acc < best_d:
                    best_d = acc
                    best = s
            j = cand_idx[i, best]
            if j != i:
                for b in range(d):
                    acc = 0.0
                    for a in range(d):
                        acc += (X[p, a] - mu_out[i, best, a]) * T[i, best, a, b]
                    y[b] = acc + mu_in[i, best, b]
                for a in range(d):
                    X[p, a] = y[a]
            r2 = 0.0
            for b in range(d):
                acc = 0.0
                for a in range(d):
                    acc += noise[t, p, a] * sigma[j, a, b]
                y[b] = X[p, b] + drift[j, b] * dt + acc * sq
                r2 += y[b] * y[b]
            r = math.sqrt(r2)
            if r > 1.5 * delta:
                scale = min(2 * delta - 0.5 * delta * math.exp(3 - 2 * r / delta),
                            cap * delta) / r
                for a in range(d):
                    X[p, a] = y[a] * scale
            else:
                for a in range(d):
                    X[p, a] = y[a]
            I[p] = j
        if record:
            for a in range(d):
                out_X[t, a] = X[0, a]
            out_I[t] = I[0]
