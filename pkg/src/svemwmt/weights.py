"""Anti-correlated fractional bootstrap weights.

Each row gets one uniform draw ``u``; the training weight is ``-log(u)`` and
the validation weight is ``-log(1 - u)``. Both marginals are Exponential(1)
and the pair is perfectly anti-monotone in ``u``.

All weights for an ensemble come from a single stream seeded by ``seed``;
iteration ``b`` consumes row ``b`` of that stream, so ``draw_weight_pair``
and ``draw_weight_matrix`` agree for every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U_MIN = 2.0 ** -53
_U_MAX = 1.0 - 2.0 ** -53


@dataclass(frozen=True)
class WeightPair:
    train: np.ndarray
    valid: np.ndarray


def weights_from_uniform(u):
    u = np.clip(np.asarray(u, dtype=float), _U_MIN, _U_MAX)
    return -np.log(u), -np.log1p(-u)


def draw_uniforms(n: int, n_iter: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.random.default_rng(seed).random((n_iter, n))


def draw_weight_matrix(n: int, n_iter: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Training and validation weights for iterations ``0 .. n_iter-1``, each (n_iter, n)."""
    return weights_from_uniform(draw_uniforms(n, n_iter, seed))


def draw_weight_pair(n: int, seed: int, iteration: int) -> WeightPair:
    u = draw_uniforms(n, iteration + 1, seed)[iteration]
    train, valid = weights_from_uniform(u)
    return WeightPair(train, valid)
