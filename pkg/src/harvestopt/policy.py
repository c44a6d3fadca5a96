"""Closed-form finite-horizon controller.

Backward recursion for the per-slot channel-quality aggregate Q(t), the
optimal battery spend fraction during transmission, the associated value
function, and the time-varying battery thresholds gamma(t) that decide when
to stop harvesting. Slots are 1-based (t = 1..T); Q is indexed 0..T-1 with
the convention Q(T) = 0, and gamma(T) = 0 so the last slot always transmits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DiscreteChannel

__all__ = [
    "SystemParams",
    "PolicyTables",
    "compute_q_table",
    "build_tables",
    "alpha_star",
    "value",
    "expected_stop_value",
    "solve_gamma",
    "should_stop",
]

# Exponents 1/(m-1) blow up as m -> 1, so slightly super-unit m is rejected.
_MIN_M_GAP = 1e-6

_GAMMA_REL_TOL = 1e-12
_GAMMA_MAX_ITER = 200


@dataclass(frozen=True)
class SystemParams:
    """Frame-level constants of one device/access-point pair.

    T: frame length in slots; P: downlink power beacon (W); eta: harvesting
    efficiency in (0, 1]; lam: energy coefficient (J per bits^m); m: monomial
    order of the transmit-energy model (> 1).
    """

    T: int
    P: float = 10.0
    eta: float = 1.0
    lam: float = 0.1
    m: float = 3.0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 2:
            raise ValueError(f"horizon T must be an integer >= 2, got {self.T}")
        object.__setattr__(self, "T", int(self.T))
        if not self.P > 0:
            raise ValueError(f"transmit power P must be positive, got {self.P}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"harvesting efficiency must be in (0, 1], got {self.eta}")
        if not self.lam > 0:
            raise ValueError(f"energy coefficient must be positive, got {self.lam}")
        if not self.m > 1 + _MIN_M_GAP:
            raise ValueError(f"monomial order m must exceed 1, got {self.m}")

    def harvest_amounts(self, channel: DiscreteChannel) -> np.ndarray:
        """Per-level energy harvested in one slot: e_n = eta * g_n * P."""
        return self.eta * self.P * channel.levels


def compute_q_table(params: SystemParams, channel: DiscreteChannel) -> np.ndarray:
    """Backward recursion for Q(t), t = 0..T-1.

    Q(T-1) = sum_n q_n g_n^(1/m); one step back,
    Q(t) = sum_n q_n (g_n^(1/(m-1)) + Q(t+1)^(m/(m-1)))^((m-1)/m).
    Q(t) compresses the expected future worth of one unit of battery energy
    (to the 1/m power) into a single scalar per slot.
    """
    T, m = params.T, params.m
    q, g = channel.probs, channel.levels
    g_pow = g ** (1.0 / (m - 1.0))
    out = np.empty(T)
    out[T - 1] = q @ g ** (1.0 / m)
    for t in range(T - 2, -1, -1):
        out[t] = q @ (g_pow + out[t + 1] ** (m / (m - 1.0))) ** ((m - 1.0) / m)
    return out


@dataclass(frozen=True, eq=False)
class PolicyTables:
    """Precomputed controller tables for one (params, channel) pair.

    q_table[t] = Q(t) for t = 0..T-1; gamma[t-1] = gamma(t) for t = 1..T-1.
    Immutable; all lookups are pure functions.
    """

    params: SystemParams
    channel: DiscreteChannel
    q_table: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        T = self.params.T
        q_table = np.array(self.q_table, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        if q_table.shape != (T,):
            raise ValueError(f"Q table must have length T={T}, got {q_table.shape}")
        if gamma.shape != (T - 1,):
            raise ValueError(f"gamma must have length T-1={T - 1}, got {gamma.shape}")
        q_table.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "q_table", q_table)
        object.__setattr__(self, "gamma", gamma)

    def q_at(self, t: int) -> float:
        """Q(t) with the terminal convention Q(T) = 0."""
        if t == self.params.T:
            return 0.0
        return float(self.q_table[t])

    def threshold(self, t: int) -> float:
        """gamma(t); gamma(T) = 0 so the final slot always stops harvesting."""
        T = self.params.T
        if t == T:
            return 0.0
        if not 1 <= t <= T - 1:
            raise ValueError(f"slot must be in 1..{T}, got {t}")
        return float(self.gamma[t - 1])

    def to_dict(self) -> dict:
        return {"Q": list(self.q_table), "gamma": list(self.gamma)}


def build_tables(params: SystemParams, channel: DiscreteChannel) -> PolicyTables:
    """Compute Q(0..T-1) and eagerly solve gamma(1..T-1)."""
    q_table = compute_q_table(params, channel)
    gamma = np.array(
        [solve_gamma(t, q_table, channel, params) for t in range(1, params.T)]
    )
    return PolicyTables(params=params, channel=channel, q_table=q_table, gamma=gamma)


def _check_slot(t: int, T: int) -> None:
    if not 1 <= t <= T:
        raise ValueError(f"slot must be in 1..{T}, got {t}")


def alpha_star(t: int, g: float, tables: PolicyTables) -> float:
    """Optimal fraction of the battery to spend at slot t under gain g.

    Equals 1 at t = T (drain the battery); in (0, 1) before that.
    """
    params = tables.params
    _check_slot(t, params.T)
    if not g > 0:
        raise ValueError(f"channel gain must be positive, got {g}")
    if t == params.T:
        return 1.0
    m = params.m
    g_pow = g ** (1.0 / (m - 1.0))
    return g_pow / (g_pow + tables.q_at(t) ** (m / (m - 1.0)))


def value(t: int, energy: float, g: float, tables: PolicyTables) -> float:
    """Expected bits sent from slot t to T starting with ``energy`` and
    observed gain g, under the optimal spend fractions."""
    params = tables.params
    _check_slot(t, params.T)
    if energy < 0:
        raise ValueError(f"energy must be nonnegative, got {energy}")
    if not g > 0:
        raise ValueError(f"channel gain must be positive, got {g}")
    m = params.m
    qt = tables.q_at(t)
    base = g ** (1.0 / (m - 1.0)) + qt ** (m / (m - 1.0))
    return (energy / params.lam) ** (1.0 / m) * base ** ((m - 1.0) / m)


def expected_stop_value(t: int, energy: float, tables: PolicyTables) -> float:
    """Expected bits if harvesting ends at slot t with ``energy`` banked,
    before that slot's gain is observed: (E/lam)^(1/m) Q(t-1)."""
    params = tables.params
    _check_slot(t, params.T)
    if energy < 0:
        raise ValueError(f"energy must be nonnegative, got {energy}")
    return (energy / params.lam) ** (1.0 / params.m) * float(tables.q_table[t - 1])


def solve_gamma(
    t: int,
    q_table: np.ndarray,
    channel: DiscreteChannel,
    params: SystemParams,
) -> float:
    """Battery threshold gamma(t): the unique root of

        sum_n q_n (1 + e_n / gamma)^(1/m) = Q(t-1) / Q(t),

    with e_n = eta * g_n * P. The left side falls strictly from +inf to 1 as
    gamma grows, and the right side exceeds 1 because Q is strictly
    decreasing, so bracketed bisection cannot miss.
    """
    T = params.T
    if not 1 <= t <= T - 1:
        raise ValueError(f"threshold slot must be in 1..{T - 1}, got {t}")
    ratio = float(q_table[t - 1] / q_table[t])
    if not ratio > 1.0:
        raise RuntimeError(
            f"Q(t-1)/Q(t) = {ratio} is not > 1 at t={t}; Q table is corrupted"
        )
    e = params.harvest_amounts(channel)
    q = channel.probs
    inv_m = 1.0 / params.m

    def lhs(gamma: float) -> float:
        return float(q @ (1.0 + e / gamma) ** inv_m)

    hi = float(e.max())
    lo = 1e-12 * hi
    for _ in range(_GAMMA_MAX_ITER):
        if lhs(lo) > ratio:
            break
        lo *= 0.5
    for _ in range(_GAMMA_MAX_ITER):
        if lhs(hi) < ratio:
            break
        hi *= 2.0
    else:
        raise RuntimeError(f"failed to bracket the threshold at t={t}")
    for _ in range(_GAMMA_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if lhs(mid) >= ratio:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _GAMMA_REL_TOL * hi:
            break
    return 0.5 * (lo + hi)


def should_stop(t: int, energy: float, tables: PolicyTables) -> bool:
    """True iff harvesting should end at slot t given battery ``energy``.

    Compares the battery to gamma(t) before the slot's gain is observed;
    always True at t = T.
    """
    _check_slot(t, tables.params.T)
    return energy >= tables.threshold(t)
