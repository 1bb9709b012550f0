"""Seeded random economies for sweeps and property tests."""

from __future__ import annotations

import numpy as np

from .model import EconomyParams, FirmBelief


def log_uniform(rng: np.random.Generator, lo: float, hi: float, size=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def random_instance(rng: np.random.Generator, n_max: int = 10, *, n: int | None = None, allow_skeptics: bool = True,
                    allow_K_ex: bool = True, allow_no_market: bool = True) -> tuple[EconomyParams, list[FirmBelief]]:
    """Economy with log-uniform parameters that visits every regime family.

    Roughly a third of the draws have ``z <= 0`` (no green technology worth
    buying); a few have ``A <= c``.
    """
    if n is None:
        n = int(rng.integers(1, n_max + 1))
    A = float(rng.uniform(2.0, 20.0))
    if allow_no_market and rng.random() < 0.03:
        c = A * float(rng.uniform(1.0, 1.5))
    else:
        c = A * float(rng.uniform(0.05, 0.9))
    d = A * float(log_uniform(rng, 0.02, 1.0))
    b = float(log_uniform(rng, 0.1, 10.0))
    K_ex = 0.0
    if allow_K_ex and rng.random() < 0.5:
        K_ex = A * float(log_uniform(rng, 1e-3, 1.0))
    params = EconomyParams(A=A, b=b, c=c, d=d, K_ex=K_ex)
    # beliefs centered so that a = d / beta lands near the scale of z
    scale = d / (b * max(abs(params.z), 0.1 * A))
    alpha = scale * log_uniform(rng, 0.1, 30.0, n)
    if allow_skeptics:
        alpha = np.where(rng.random(n) < 0.05, 0.0, alpha)
    return params, [FirmBelief(float(x)) for x in alpha]
