"""Monte Carlo episode engine.

Simulates harvest-then-transmit frames under a pluggable stopping/spending
policy and aggregates throughput statistics. Episode randomness is keyed by
(master_seed, episode index) alone, so results are bit-reproducible no matter
how episodes are chunked or how many workers run them.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import DiscreteChannel, sample
from .policy import PolicyTables, SystemParams, alpha_star, should_stop

__all__ = [
    "OptimalPolicy",
    "BetaPolicy",
    "ForcedStopPolicy",
    "PolicySpec",
    "EpisodeTrace",
    "MonteCarloSummary",
    "run_episode",
    "run_monte_carlo",
]

# Episodes are simulated in fixed-size chunks; the size never depends on the
# worker count so that float reduction order (and thus output bytes) is the
# same for any parallelism.
_CHUNK = 8192


@dataclass(frozen=True)
class OptimalPolicy:
    """Threshold stopping plus closed-form spend fractions."""


@dataclass(frozen=True)
class BetaPolicy:
    """Harvest for floor(beta * T) slots, then spend equal energy per
    remaining slot (alpha(t) = 1/(T-t+1)), ignoring the observed gain."""

    beta: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class ForcedStopPolicy:
    """Harvest exactly t0 - 1 slots, then spend with the closed-form
    fractions."""

    t0: int

    def __post_init__(self):
        if int(self.t0) != self.t0 or self.t0 < 1:
            raise ValueError(f"forced stop slot must be an integer >= 1, got {self.t0}")
        object.__setattr__(self, "t0", int(self.t0))


PolicySpec = OptimalPolicy | BetaPolicy | ForcedStopPolicy


def _first_transmit_slot(policy: PolicySpec, params: SystemParams) -> int | None:
    """Fixed transmission start for non-adaptive policies, None for Optimal."""
    if isinstance(policy, OptimalPolicy):
        return None
    if isinstance(policy, BetaPolicy):
        # guard against 2/3 * 30 = 19.999... style float droop
        harvest_slots = math.floor(policy.beta * params.T + 1e-9)
        if harvest_slots >= params.T:
            raise ValueError(
                f"beta={policy.beta} leaves no transmission slot for T={params.T}"
            )
        return harvest_slots + 1
    if not policy.t0 <= params.T:
        raise ValueError(f"forced stop slot {policy.t0} exceeds horizon T={params.T}")
    return policy.t0


def _needs_tables(policy: PolicySpec) -> bool:
    return isinstance(policy, (OptimalPolicy, ForcedStopPolicy))


def _check_tables(
    tables: PolicyTables | None,
    params: SystemParams,
    channel: DiscreteChannel,
    policy: PolicySpec,
) -> None:
    if not _needs_tables(policy):
        return
    if tables is None:
        raise ValueError(f"{type(policy).__name__} requires policy tables")
    if tables.params != params or not (
        np.array_equal(tables.channel.levels, channel.levels)
        and np.array_equal(tables.channel.probs, channel.probs)
    ):
        raise ValueError("tables were built for a different (params, channel) pair")


@dataclass(frozen=True, eq=False)
class EpisodeTrace:
    """Per-slot record of one simulated frame.

    ``energy[t-1]`` is the battery at the start of slot t, ``level_index``
    the drawn channel level (harvest gain before the transmission start t0,
    transmit gain from t0 on), ``alpha`` the spend fraction (NaN during
    harvesting), and ``bits`` the bits sent (0 during harvesting).
    """

    t0: int
    total_bits: float
    harvested: float
    level_index: np.ndarray
    energy: np.ndarray
    alpha: np.ndarray
    bits: np.ndarray

    @property
    def phases(self) -> list[str]:
        return ["EH" if t < self.t0 else "IT" for t in range(1, len(self.energy) + 1)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "phase", "level", "energy_J", "alpha", "bits"])
            for t, phase in enumerate(self.phases, start=1):
                a = self.alpha[t - 1]
                writer.writerow(
                    [
                        t,
                        phase,
                        int(self.level_index[t - 1]),
                        repr(float(self.energy[t - 1])),
                        "" if math.isnan(a) else repr(float(a)),
                        repr(float(self.bits[t - 1])),
                    ]
                )


@dataclass(frozen=True)
class MonteCarloSummary:
    """Throughput estimate over independent episodes."""

    episodes: int
    mean_bits: float
    stddev_bits: float
    ci95: float
    mean_harvest: float
    mean_t0: float
    seed: int


def run_episode(
    params: SystemParams,
    channel: DiscreteChannel,
    tables: PolicyTables | None,
    policy: PolicySpec,
    rng: np.random.Generator,
    initial_energy: float = 0.0,
) -> EpisodeTrace:
    """Simulate one frame.

    While harvesting, the stop decision at slot t uses only the battery
    (the device is blind to that slot's gain); the gain is drawn afterwards,
    for charging if the frame continues and for transmission once stopped.
    Exactly one level is drawn per slot, so the stream advances T times.
    """
    _check_tables(tables, params, channel, policy)
    fixed_t0 = _first_transmit_slot(policy, params)
    T, m, lam = params.T, params.m, params.lam
    e_levels = params.harvest_amounts(channel)

    level_index = np.zeros(T, dtype=int)
    energy = np.zeros(T)
    alpha_rec = np.full(T, np.nan)
    bits = np.zeros(T)

    e = initial_energy
    t0 = T
    stopped = False
    total = 0.0
    harvested = 0.0
    for t in range(1, T + 1):
        energy[t - 1] = e
        if not stopped:
            if fixed_t0 is None:
                stopped = should_stop(t, e, tables)
            else:
                stopped = t >= fixed_t0
            if stopped:
                t0 = t
        idx = sample(channel, rng)
        level_index[t - 1] = idx
        if not stopped:
            e += e_levels[idx]
            harvested += e_levels[idx]
            continue
        g = channel.levels[idx]
        if isinstance(policy, BetaPolicy):
            a = 1.0 if t == T else 1.0 / (T - t + 1)
        else:
            a = alpha_star(t, g, tables)
        alpha_rec[t - 1] = a
        sent = (a * e * g / lam) ** (1.0 / m)
        bits[t - 1] = sent
        total += sent
        e = (1.0 - a) * e
    return EpisodeTrace(
        t0=t0,
        total_bits=total,
        harvested=harvested,
        level_index=level_index,
        energy=energy,
        alpha=alpha_rec,
        bits=bits,
    )


def episode_rng(master_seed: int, index: int) -> np.random.Generator:
    """The stream feeding episode ``index``; a pure function of its args."""
    return np.random.default_rng([master_seed, index])


def _run_chunk(
    params: SystemParams,
    channel: DiscreteChannel,
    tables: PolicyTables | None,
    policy: PolicySpec,
    start: int,
    count: int,
    master_seed: int,
    initial_energy: float,
) -> tuple[float, float, float, float]:
    """Vectorized simulation of episodes [start, start+count).

    Mirrors run_episode slot for slot (same draws from the same per-episode
    streams, same arithmetic) and returns the chunk's partial sums.
    """
    T, m, lam = params.T, params.m, params.lam
    levels = channel.levels
    e_levels = params.harvest_amounts(channel)
    fixed_t0 = _first_transmit_slot(policy, params)
    is_beta = isinstance(policy, BetaPolicy)
    if not is_beta:
        g_pow = levels ** (1.0 / (m - 1.0))

    uniforms = np.empty((count, T))
    for i in range(count):
        uniforms[i] = episode_rng(master_seed, start + i).random(T)
    idx = np.searchsorted(channel.cum_probs, uniforms, side="right")
    np.minimum(idx, channel.n_levels - 1, out=idx)

    e = np.full(count, float(initial_energy))
    stopped = np.zeros(count, dtype=bool)
    t0 = np.full(count, T, dtype=np.int64)
    bits_total = np.zeros(count)
    harvested = np.zeros(count)
    for t in range(1, T + 1):
        col = idx[:, t - 1]
        if fixed_t0 is None:
            stop_now = ~stopped & (e >= tables.threshold(t))
        elif t >= fixed_t0:
            stop_now = ~stopped
        else:
            stop_now = np.zeros(count, dtype=bool)
        t0[stop_now] = t
        stopped |= stop_now

        eh = ~stopped
        gain = e_levels[col[eh]]
        e[eh] += gain
        harvested[eh] += gain

        it = stopped
        g = levels[col[it]]
        if t == T:
            a = 1.0
        elif is_beta:
            a = 1.0 / (T - t + 1)
        else:
            gp = g_pow[col[it]]
            a = gp / (gp + tables.q_at(t) ** (m / (m - 1.0)))
        bits_total[it] += (a * e[it] * g / lam) ** (1.0 / m)
        e[it] = (1.0 - a) * e[it]

    return (
        float(bits_total.sum()),
        float((bits_total * bits_total).sum()),
        float(harvested.sum()),
        float(t0.sum()),
    )


def run_monte_carlo(
    params: SystemParams,
    channel: DiscreteChannel,
    tables: PolicyTables | None,
    policy: PolicySpec,
    episodes: int,
    master_seed: int,
    initial_energy: float = 0.0,
    workers: int = 1,
) -> MonteCarloSummary:
    """Estimate expected throughput over independent episodes.

    Episode i draws from ``episode_rng(master_seed, i)`` and chunk partial
    sums are combined in chunk order, so the summary is bit-identical for
    any ``workers`` value.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    if master_seed < 0:
        raise ValueError(f"master seed must be nonnegative, got {master_seed}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    _check_tables(tables, params, channel, policy)
    _first_transmit_slot(policy, params)  # validate policy against horizon

    starts = list(range(0, episodes, _CHUNK))

    def job(start: int):
        return _run_chunk(
            params,
            channel,
            tables,
            policy,
            start,
            min(_CHUNK, episodes - start),
            master_seed,
            initial_energy,
        )

    if workers == 1 or len(starts) == 1:
        partials = [job(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(job, starts))

    s1 = s2 = harvest = t0_sum = 0.0
    for b1, b2, h, t0 in partials:
        s1 += b1
        s2 += b2
        harvest += h
        t0_sum += t0
    n = episodes
    mean = s1 / n
    var = (s2 - n * mean * mean) / (n - 1) if n > 1 else 0.0
    std = math.sqrt(max(var, 0.0))
    return MonteCarloSummary(
        episodes=n,
        mean_bits=mean,
        stddev_bits=std,
        ci95=1.96 * std / math.sqrt(n),
        mean_harvest=harvest / n,
        mean_t0=t0_sum / n,
        seed=master_seed,
    )
