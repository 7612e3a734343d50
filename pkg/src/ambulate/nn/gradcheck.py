"""Finite-difference verification of the backward pass.

Runs entirely in double precision with dropout disabled. Central differences
are taken on a random subset of parameter coordinates; coordinates whose
perturbation flips a max-pooling winner are skipped, since the loss is not
differentiable across a pooling tie.
"""

from __future__ import annotations

import numpy as np

from .engine import backward, forward_batch, loss_and_grad
from .layers import Parameters


def _loss_and_winners(spec, params, x, label):
    trace = forward_batch(spec, params, x, training=False)
    loss, _ = loss_and_grad(trace.posteriors, label)
    winners = {k: v.copy() for k, v in trace.pool_winners.items()}
    return loss, winners


def _same_winners(a: dict, b: dict) -> bool:
    return all(np.array_equal(a[k], b[k]) for k in a)


def check_gradients(
    spec,
    params: Parameters,
    epoch_data: np.ndarray,
    label: int,
    fraction: float = 0.01,
    min_coords: int = 50,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central differences.

    Relative error per coordinate is |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-8).
    """
    rng = np.random.default_rng(seed)
    p = params.astype(np.float64)
    x = epoch_data.astype(np.float64)[None]
    y = np.array([label])

    trace = forward_batch(spec, p, x, training=False)
    _, out_grad = loss_and_grad(trace.posteriors, y)
    grads = backward(spec, p, trace, out_grad)

    coords = []
    for i, v in enumerate(p.values):
        if v is None:
            continue
        for j in range(2):
            for flat in range(v[j].size):
                coords.append((i, j, flat))
    n_pick = min(len(coords), max(min_coords, int(round(fraction * len(coords)))))
    picked = rng.choice(len(coords), size=n_pick, replace=False)

    max_err = 0.0
    for ci in picked:
        i, j, flat = coords[ci]
        arr = p.values[i][j]
        orig = arr.flat[flat]
        arr.flat[flat] = orig + step
        lp, wp = _loss_and_winners(spec, p, x, y)
        arr.flat[flat] = orig - step
        lm, wm = _loss_and_winners(spec, p, x, y)
        arr.flat[flat] = orig
        if not _same_winners(wp, wm):
            continue  # pooling tie crossed; skip this coordinate
        g_fd = (lp - lm) / (2 * step)
        g_bp = grads.values[i][j].flat[flat]
        err = abs(g_bp - g_fd) / max(abs(g_bp), abs(g_fd), 1e-8)
        max_err = max(max_err, float(err))
    return max_err
