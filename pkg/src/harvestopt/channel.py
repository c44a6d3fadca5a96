"""Multi-level iid fading channel: discretization of continuous fading laws,
explicit discrete channels, and seeded sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TRUNCATION_QUANTILE",
    "Exponential",
    "Deterministic",
    "FadingLaw",
    "DiscreteChannel",
    "discretize",
    "sample",
]

# Continuous laws are truncated at this quantile before binning; the residual
# upper-tail mass is folded into the top bin.
TRUNCATION_QUANTILE = 0.999


@dataclass(frozen=True)
class Exponential:
    """Exponentially distributed power gain (Rayleigh amplitude fading)."""

    mean: float = 1.0

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError(f"Exponential mean must be positive, got {self.mean}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-x / self.mean), 0.0)

    def quantile(self, p: float) -> float:
        return -self.mean * math.log1p(-p)

    @property
    def gain_mean(self) -> float:
        return self.mean


@dataclass(frozen=True)
class Deterministic:
    """Point-mass gain, used for closed-form test instances."""

    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"Deterministic value must be positive, got {self.value}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.value, 1.0, 0.0)

    def quantile(self, p: float) -> float:
        return self.value

    @property
    def gain_mean(self) -> float:
        return self.value


FadingLaw = Exponential | Deterministic


@dataclass(frozen=True, eq=False)
class DiscreteChannel:
    """Iid multi-level channel: strictly increasing positive gains ``levels``
    drawn each slot with probabilities ``probs``.

    Probabilities are renormalized at construction; zero-mass levels are kept
    so that level indices stay aligned with whatever produced them.
    Instances are immutable and safe to share across workers.
    """

    levels: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        probs = np.array(self.probs, dtype=float)
        if levels.ndim != 1 or probs.ndim != 1 or len(levels) != len(probs):
            raise ValueError("levels and probs must be 1-D and of equal length")
        if len(levels) < 1:
            raise ValueError("channel needs at least one level")
        if not np.all(levels > 0):
            raise ValueError("all gain levels must be positive")
        if not np.all(np.diff(levels) > 0):
            raise ValueError("gain levels must be strictly increasing")
        if not np.all(probs >= 0):
            raise ValueError("probabilities must be nonnegative")
        total = probs.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValueError("probabilities must have a positive finite sum")
        probs = probs / total
        levels.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "probs", probs)
        cum = np.cumsum(probs)
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def cum_probs(self) -> np.ndarray:
        return self._cum

    @property
    def mean_gain(self) -> float:
        return float(self.probs @ self.levels)

    def to_json(self) -> str:
        return json.dumps({"levels": list(self.levels), "probs": list(self.probs)})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteChannel":
        obj = json.loads(text)
        return cls(levels=np.asarray(obj["levels"]), probs=np.asarray(obj["probs"]))


def discretize(law: FadingLaw, n_levels: int) -> DiscreteChannel:
    """Quantize a continuous gain law onto ``n_levels`` equal-width bins.

    The bins span [0, G_max] where G_max is the law's 0.999 quantile. Each
    bin is represented by its midpoint and carries the law's probability mass
    inside it; the tail mass beyond G_max is folded into the top bin and the
    result renormalized. For a point-mass law the atom's bin keeps the atom
    itself as representative (the midpoint would bias it), so a single bin
    reproduces the point mass exactly.
    """
    if n_levels < 1:
        raise ValueError(f"number of levels must be >= 1, got {n_levels}")
    g_max = law.quantile(TRUNCATION_QUANTILE)
    edges = np.linspace(0.0, g_max, n_levels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    cdf_edges = law.cdf(edges)
    probs = np.diff(cdf_edges)
    probs[-1] += 1.0 - cdf_edges[-1]
    if isinstance(law, Deterministic):
        mids[-1] = law.value
    return DiscreteChannel(levels=mids, probs=probs)


def sample(channel: DiscreteChannel, rng: np.random.Generator) -> int:
    """Draw a level index (0-based) with the channel's probabilities.

    Consumes exactly one uniform from ``rng``, so identically seeded streams
    give identical draw sequences.
    """
    u = rng.random()
    idx = int(np.searchsorted(channel.cum_probs, u, side="right"))
    return min(idx, channel.n_levels - 1)
