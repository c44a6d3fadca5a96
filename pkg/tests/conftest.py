"""Shared instance builders for the test suite."""

import numpy as np

from harvestopt import DiscreteChannel, SystemParams


def random_channel(rng, n_hi=4, g_lo=0.1, g_hi=5.0):
    n = int(rng.integers(1, n_hi + 1))
    levels = np.sort(rng.uniform(g_lo, g_hi, n))
    while np.any(np.diff(levels) <= 1e-6):
        levels = np.sort(rng.uniform(g_lo, g_hi, n))
    probs = rng.uniform(0.1, 1.0, n)
    return DiscreteChannel(levels=levels, probs=probs)


def random_instance(rng, t_lo=3, t_hi=8, n_hi=4, m_choices=(2.0, 3.0)):
    params = SystemParams(
        T=int(rng.integers(t_lo, t_hi + 1)),
        P=float(rng.uniform(1.0, 10.0)),
        eta=float(rng.uniform(0.3, 1.0)),
        lam=float(rng.uniform(0.05, 1.0)),
        m=float(rng.choice(m_choices)),
    )
    return params, random_channel(rng, n_hi=n_hi)


def unit_deterministic_instance(T=10):
    """Single unit-gain level with eta = P = lam = 1 and m = 2, where the
    controller has hand-derived closed forms: Q(t) = sqrt(T-t),
    gamma(t) = T-t, alpha*(t) = 1/(T-t+1)."""
    params = SystemParams(T=T, P=1.0, eta=1.0, lam=1.0, m=2.0)
    channel = DiscreteChannel(levels=[1.0], probs=[1.0])
    return params, channel
