"""Event-driven Monte Carlo for the TASEP.

Exact Gillespie dynamics: with E enabled jumps (particles whose right
neighbor site is free), wait an Exp(E) time and execute one enabled jump
uniformly at random.  Works on finite configurations and on a windowed
slice of the doubly infinite alternating (flat) configuration x_n(0) = -2n.

Randomness is counter-based: every uniform is a pure function of
(seed, replica index, event counter), so replicas are independent,
individually reproducible, and identical under any thread schedule.

Flat windows are finite stand-ins for an infinite system.  The window's
right-most particle runs free (nothing blocks it), which is wrong by
construction, and the error can only travel inward through nearest-neighbor
blocking.  Each replica therefore tracks a contamination front: the
boundary particle starts contaminated, and contamination spreads to the
next label the moment it becomes adjacent to a contaminated one.  A replica
whose front reaches an observed label is flagged invalid.  The window
half-width invariant (2t + 10 sqrt(t) + observation range) keeps the
invalid fraction at zero in practice; the doubling test in the test suite
checks that the window is statistically invisible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# the portable layer: deterministic startup, no TBB/OMP version probing
_numba_config.THREADING_LAYER = "workqueue"

from tasepdet.fredholm import ThresholdSpec
from tasepdet.schuetz_core import ParticleConfig, WindowError

__all__ = [
    "FlatWindow",
    "SimConfig",
    "TrajectoryRecord",
    "EstimateWithError",
    "flat_half_width",
    "simulate",
    "current",
    "empirical_joint",
    "rescaled_samples",
    "estimates_csv",
    "events_jsonl",
]


def flat_half_width(t: float, observation_range: int = 8) -> int:
    """Smallest window half-width satisfying the flat-mode invariant."""
    return math.ceil(2.0 * t + 10.0 * math.sqrt(t) + observation_range)


@dataclass(frozen=True)
class FlatWindow:
    """Initial condition: every even site in [-half_width, half_width]
    occupied — particle n at site -2n, labels increasing right to left."""

    half_width: int

    def __post_init__(self) -> None:
        if self.half_width < 2:
            raise ValueError("half_width must be at least 2")


@dataclass(frozen=True)
class SimConfig:
    initial: ParticleConfig | FlatWindow
    horizon: float
    seed: int
    replicas: int
    observation_range: int = 8

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.replicas < 1:
            raise ValueError("need at least one replica")
        if self.observation_range < 0:
            raise ValueError("observation_range must be nonnegative")
        if isinstance(self.initial, FlatWindow):
            need = flat_half_width(self.horizon, self.observation_range)
            if self.initial.half_width < need:
                raise ValueError(
                    f"flat window half-width {self.initial.half_width} < {need} "
                    f"= ceil(2t + 10 sqrt(t) + observation_range) at t="
                    f"{self.horizon}"
                )

    @property
    def flat_mode(self) -> bool:
        return isinstance(self.initial, FlatWindow)


@dataclass(frozen=True)
class TrajectoryRecord:
    """One realization: the event log plus the final configuration.

    times/particles/origins are parallel arrays; event k moved particle
    `particles[k]` from site `origins[k]` at time `times[k]`.  Labels are
    1-based for finite initial configurations and window labels (particle n
    started at -2n) in flat mode.
    """

    times: np.ndarray
    particles: np.ndarray
    origins: np.ndarray
    final: ParticleConfig
    horizon: float
    first_label: int
    valid: bool = True

    @property
    def events(self) -> list[tuple[float, int, int]]:
        return list(
            zip(self.times.tolist(), self.particles.tolist(), self.origins.tolist())
        )

    def validate(self, initial: ParticleConfig) -> None:
        """Replay the event log and assert every dynamical invariant:
        strictly increasing times, jumps from the particle's actual site
        into an empty site, labels never crossing."""
        pos = {self.first_label + i: x for i, x in enumerate(initial.positions)}
        occupied = set(initial.positions)
        last = 0.0
        for when, who, origin in zip(self.times, self.particles, self.origins):
            if not when > last:
                raise AssertionError("event times not strictly increasing")
            last = when
            if pos[who] != origin:
                raise AssertionError("event origin disagrees with trajectory")
            if origin + 1 in occupied:
                raise AssertionError("jump into an occupied site")
            occupied.discard(origin)
            occupied.add(origin + 1)
            pos[who] = origin + 1
        labels = sorted(pos)
        final = tuple(pos[n] for n in labels)
        if any(a <= b for a, b in zip(final, final[1:])):
            raise AssertionError("particle order not preserved")
        if final != self.final.positions:
            raise AssertionError("final positions disagree with event replay")


@dataclass(frozen=True)
class EstimateWithError:
    """Indicator-average estimate with its binomial standard error."""

    value: float
    stderr: float
    replicas: int
    invalid: int = 0


# ---------------------------------------------------------------------------
# counter-based randomness (SplitMix64 finalizer as a pure function of
# (seed, replica, counter) -- no state, so any execution order agrees)
# ---------------------------------------------------------------------------

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _stream_key(seed, replica):
    return _mix64(_mix64(seed + _GOLD) ^ _mix64(replica * _MIX1 + _GOLD))


@njit(cache=True)
def _u01(key, counter):
    # in (0, 1): offset by 2^-54 so exponential waits are strictly positive
    z = _mix64(key + counter * _GOLD)
    return (z >> np.uint64(11)) * 2.0**-53 + 2.0**-54


# ---------------------------------------------------------------------------
# Gillespie core
# ---------------------------------------------------------------------------


@njit(cache=True)
def _run_replica(
    pos, horizon, seed, replica, times, particles, origins, record_events,
    track_front,
):
    """Advance one trajectory to the horizon, in place.

    pos is strictly decreasing (index 0 = right-most particle).  Enabled
    jumps live in a swap-remove list for O(1) updates per event.  Returns
    (event count, contamination front index, overflow flag); with
    record_events the log arrays must be long enough, else the overflow
    flag is set and the caller retries with more room.

    The stream key is derived in here so the whole RNG path stays in
    uint64 arithmetic (a key returned to Python would come back as a
    plain int and overflow the signed dispatch).
    """
    key = _stream_key(seed, replica)
    n = pos.shape[0]
    enabled = np.empty(n, np.int64)
    slot = np.full(n, -1, np.int64)
    count = 0
    for i in range(n):
        if i == 0 or pos[i] + 1 < pos[i - 1]:
            enabled[count] = i
            slot[i] = count
            count += 1
    front = 0
    now = 0.0
    counter = np.uint64(0)
    n_events = 0
    capacity = times.shape[0]
    while count > 0:
        u = _u01(key, counter)
        counter += np.uint64(1)
        now += -math.log1p(-u) / count
        if now > horizon:
            break
        u = _u01(key, counter)
        counter += np.uint64(1)
        j = int(u * count)
        if j >= count:
            j = count - 1
        i = enabled[j]
        if record_events:
            if n_events >= capacity:
                return n_events, front, True
            times[n_events] = now
            particles[n_events] = i
            origins[n_events] = pos[i]
        n_events += 1
        pos[i] += 1
        # the particle behind gains room
        k = i + 1
        if k < n and slot[k] == -1 and pos[k] + 1 < pos[i]:
            enabled[count] = k
            slot[k] = count
            count += 1
        # the mover may now be blocked
        if i > 0 and pos[i] + 1 == pos[i - 1]:
            s = slot[i]
            moved = enabled[count - 1]
            enabled[s] = moved
            slot[moved] = s
            slot[i] = -1
            count -= 1
        if track_front:
            while front + 1 < n and pos[front + 1] + 1 == pos[front]:
                front += 1
    return n_events, front, False


@njit(cache=True, parallel=True)
def _batch_final(pos0, horizon, seed, n_replicas, observed, track_front, guard):
    """Final positions of the observed indices for every replica, plus a
    per-replica invalid flag (contamination reached an observed label)."""
    n_obs = observed.shape[0]
    out = np.empty((n_replicas, n_obs), np.int64)
    bad = np.zeros(n_replicas, np.bool_)
    empty_f = np.empty(0, np.float64)
    empty_i = np.empty(0, np.int64)
    for r in prange(n_replicas):
        pos = pos0.copy()
        _, front, _ = _run_replica(
            pos, horizon, seed, np.uint64(r), empty_f, empty_i, empty_i,
            False, track_front,
        )
        if track_front and front >= guard:
            bad[r] = True
        for k in range(n_obs):
            out[r, k] = pos[observed[k]]
    return out, bad


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _initial_positions(config: SimConfig) -> tuple[np.ndarray, int]:
    """(positions array, label of index 0)."""
    if config.flat_mode:
        half = config.initial.half_width // 2
        labels = np.arange(-half, half + 1, dtype=np.int64)
        return -2 * labels, -half
    return np.asarray(config.initial.positions, dtype=np.int64), 1


def _label_index(config: SimConfig, label: int, n_sites: int, first: int) -> int:
    idx = label - first
    if not 0 <= idx < n_sites:
        raise ValueError(f"label {label} outside the simulated window")
    return idx


def simulate(config: SimConfig, replica_index: int) -> TrajectoryRecord:
    """One exact trajectory, reproducible from (config.seed, replica_index)."""
    if not 0 <= replica_index < config.replicas:
        raise ValueError("replica_index outside the configured range")
    pos0, first = _initial_positions(config)
    seed = np.uint64(config.seed & (2**64 - 1))
    mean = pos0.shape[0] * config.horizon
    capacity = int(mean + 12.0 * math.sqrt(mean) + 64.0)
    while True:
        pos = pos0.copy()
        times = np.empty(capacity, np.float64)
        particles = np.empty(capacity, np.int64)
        origins = np.empty(capacity, np.int64)
        n_events, front, overflow = _run_replica(
            pos, config.horizon, seed, np.uint64(replica_index), times,
            particles, origins, True, config.flat_mode,
        )
        if not overflow:
            break
        capacity *= 2
    guard = math.inf
    if config.flat_mode:
        # observed labels must stay clear of the contamination front; the
        # observation range maps to labels >= -(observation_range // 2)
        guard = -(config.observation_range // 2) - first
    return TrajectoryRecord(
        times=times[:n_events].copy(),
        particles=particles[:n_events] + first,
        origins=origins[:n_events].copy(),
        final=ParticleConfig(tuple(int(x) for x in pos)),
        horizon=config.horizon,
        first_label=first,
        valid=not (config.flat_mode and front >= guard),
    )


def current(record: TrajectoryRecord, x: int, t: float) -> int:
    """Jumps across the bond (x, x+1) up to time t: the integrated current."""
    if t > record.horizon:
        raise ValueError("current queried past the simulated horizon")
    return int(np.count_nonzero((record.times <= t) & (record.origins == x)))


def _final_positions_batch(
    config: SimConfig, labels: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    pos0, first = _initial_positions(config)
    observed = np.array(
        [_label_index(config, n, pos0.shape[0], first) for n in labels],
        dtype=np.int64,
    )
    guard = int(observed.min()) if config.flat_mode else pos0.shape[0]
    finals, bad = _batch_final(
        pos0,
        config.horizon,
        np.uint64(config.seed & (2**64 - 1)),
        config.replicas,
        observed,
        config.flat_mode,
        guard,
    )
    n_bad = int(bad.sum())
    if n_bad > 0.01 * config.replicas:
        raise WindowError(
            f"{n_bad}/{config.replicas} replicas invalid: the window "
            f"boundary (half-width {config.initial.half_width}) interacted "
            "with observed labels; enlarge the window"
        )
    return finals, bad


def empirical_joint(config: SimConfig, spec: ThresholdSpec) -> EstimateWithError:
    """Fraction of replicas with x_{sigma(k)}(horizon) >= a_k for every k.

    Selections use the same labels as the exact kernels: 1-based from the
    right for finite configurations, window labels (particle n from -2n)
    in flat mode.  Deterministic given config.seed.
    """
    if config.replicas < 10_000:
        raise ValueError("empirical_joint needs at least 10^4 replicas")
    if any(a != int(a) for a in spec.thresholds):
        raise ValueError("lattice thresholds must be integers")
    if config.flat_mode and any(
        a > config.observation_range for a in spec.thresholds
    ):
        raise ValueError("threshold beyond the declared observation range")
    finals, bad = _final_positions_batch(config, spec.selections)
    good = ~bad
    n_good = int(good.sum())
    thresholds = np.array(spec.thresholds, dtype=np.int64)
    hits = int(np.all(finals[good] >= thresholds, axis=1).sum())
    p = hits / n_good
    return EstimateWithError(
        value=p,
        stderr=math.sqrt(p * (1.0 - p) / n_good),
        replicas=n_good,
        invalid=int(bad.sum()),
    )


def rescaled_samples(t: float, u: float, config: SimConfig) -> np.ndarray:
    """Per replica, the centered and t^{1/3}-scaled position of the particle
    with label nearest t/4 + u t^{2/3} at time t (flat mode only)."""
    if not config.flat_mode:
        raise ValueError("rescaled sampling needs the flat initial condition")
    if t < 50.0:
        raise ValueError("rescaled sampling rated for t >= 50")
    if t > config.horizon:
        raise ValueError("t beyond the configured horizon")
    label = int(round(t / 4.0 + u * t ** (2.0 / 3.0)))
    run = config if t == config.horizon else SimConfig(
        initial=config.initial,
        horizon=t,
        seed=config.seed,
        replicas=config.replicas,
        observation_range=config.observation_range,
    )
    finals, bad = _final_positions_batch(run, [label])
    samples = finals[~bad, 0].astype(np.float64)
    return -(samples + 2.0 * u * t ** (2.0 / 3.0)) / t ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# export helpers
# ---------------------------------------------------------------------------


def estimates_csv(
    rows: Sequence[tuple[ThresholdSpec, EstimateWithError, int]]
) -> str:
    """CSV of joint-estimate rows: (spec, estimate, seed) triples."""
    lines = ["labels,thresholds,estimate,stderr,replicas,seed"]
    for spec, est, seed in rows:
        labels = ";".join(str(n) for n in spec.selections)
        thresholds = ";".join(f"{a:g}" for a in spec.thresholds)
        lines.append(
            f"{labels},{thresholds},{est.value:.10g},{est.stderr:.6g},"
            f"{est.replicas},{seed}"
        )
    return "\n".join(lines) + "\n"


def events_jsonl(record: TrajectoryRecord) -> Iterator[str]:
    """One JSON object per jump event, in time order."""
    for when, who, origin in zip(
        record.times.tolist(), record.particles.tolist(), record.origins.tolist()
    ):
        yield json.dumps(
            {"time": when, "particle": who, "from": origin}, separators=(",", ":")
        )
