"""Continuous-space frog process: killed heat flow feeding a moving pile.

The awake density diffuses against an absorbing edge at the leftmost dormant
pile; absorbed mass joins that pile (``y``).  A pile wakes when its absorbed
feed reaches a threshold, at which point the whole grown pile re-enters the
awake density as a point mass at the pile position and the edge advances to
the next pile.  Two exchangeable wake rules are provided:

* space-driven: thresholds are given up front (one per pile), a pile wakes
  the instant its absorbed feed reaches its threshold (exact >=);
* hazard-driven: the wake time is sampled from the instantaneous rate
  boundary_flux / y via an Exp(1) clock and trapezoid accumulation.

Both produce the same law of the event sequence when the space-driven
thresholds follow the wake-threshold law; that equivalence is verified
statistically, not assumed.

Bookkeeping is exact where the acceptance checks need it to be: the running
available-mass accumulator uses the same floating-point operations as
``compute_ustar``, so a simulated stall and the predicted stall agree
bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .heat import KilledHeatFlow
from .measures import AtomicMeasure, GridDensity, PointPattern

__all__ = [
    "SolverConfig",
    "EventRecord",
    "SnapshotRow",
    "FrogState",
    "FrogResult",
    "simulate_space_driven",
    "simulate_hazard_driven",
    "extract_L",
    "compute_ustar",
    "wake_threshold",
]

EVENT_TIME_TOL = 1e-10  # event bisection: fraction of the current step length


@dataclass(frozen=True)
class SolverConfig:
    """Resolution and run-control knobs for the frog simulators."""

    dx: float = 1e-3
    dt: float = 1e-4
    n_snapshots: int = 64
    pad_left: float = 4.0
    pad_right: float = 2.0
    grow_dt: bool = False       # double dt between events (coarse ensemble runs)
    dt_max_factor: float = 4096.0
    run_to_horizon: bool = True  # False: return at stall or once every pile woke


@dataclass(frozen=True)
class EventRecord:
    """One wake-up: the pile at ``site`` became awake mass ``jump_size``."""

    time: float
    site: float
    jump_size: float
    v: float          # absorbed feed at the wake instant (jump_size - x_i)
    index: int


@dataclass(frozen=True)
class SnapshotRow:
    time: float
    ell: float
    y: float
    x1_mass: float
    pile_mass: float
    total_mass: float


@dataclass
class FrogState:
    """Live state: awake density, untouched piles, and the current pile."""

    heat: KilledHeatFlow
    piles: AtomicMeasure
    y: float
    pile_index: int
    time: float
    ell: float


@dataclass(frozen=True)
class FrogResult:
    events: tuple
    snapshots: tuple
    final: FrogState
    stall_position: float | None  # pile that can never wake, if one was hit
    woke_all: bool
    ustar: float | None           # stall position, or rightmost pile if all woke
    initial_mass: float


def wake_threshold(ws, xs) -> float:
    """Minimal initial awake mass that wakes every pile in sequence.

    Waking pile i needs W_i out of the mass accumulated so far, and waking
    it adds x_i; the binding constraint is max_i (W_i - sum_{j<i} x_j).
    """
    ws = np.asarray(ws, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if ws.shape != xs.shape or ws.ndim != 1 or ws.size == 0:
        raise ValueError("ws and xs must be equal-length nonempty sequences")
    if np.any(ws <= 0) or np.any(xs < 0):
        raise ValueError("thresholds must be positive and masses nonnegative")
    prefix = np.concatenate([[0.0], np.cumsum(xs)[:-1]])
    return float(np.max(ws - prefix))


def compute_ustar(thresholds, piles: AtomicMeasure, initial_x1_mass: float) -> float:
    """Position of the first pile the wake cascade can never reach.

    Walking the piles left to right, pile i is unreachable when
    W_i >= (initial awake mass) + (masses of all piles before it); the
    comparison is exact (>=) and the accumulator matches the simulator's, so
    the two agree to the bit.  Returns the rightmost pile position when every
    pile is reachable.
    """
    ws = [float(w) for w in thresholds]
    if len(ws) != len(piles.positions):
        raise ValueError("one threshold per pile is required")
    avail = float(initial_x1_mass)
    for w, z, x in zip(ws, piles.positions, piles.masses):
        if w >= avail:
            return float(z)
        avail += float(x)
    return float(piles.positions[-1])


def extract_L(events, piles: AtomicMeasure) -> PointPattern:
    """Space-indexed jump pattern: one point (site, absorbed feed) per event."""
    for ev in events:
        if ev.site != piles.positions[ev.index]:
            raise ValueError("event log does not match the pile configuration")
    zs = [ev.site for ev in events]
    rs = [ev.v for ev in events]
    return PointPattern(zs, rs)


class _SpaceRule:
    """Wake when absorbed feed reaches the pile's preset threshold (exact >=)."""

    kind = "space"

    def __init__(self, thresholds):
        self.ws = [float(w) for w in thresholds]
        if any(w <= 0 for w in self.ws):
            raise ValueError("thresholds must be positive")
        self.w = math.nan

    def arrive(self, index: int, x_i: float, avail: float) -> bool:
        self.w = self.ws[index]
        return self.w >= avail  # stall: this pile can never wake

    def crossed(self, fed, f0, f1, y0, y1, dt) -> bool:
        return fed >= self.w

    def overshoot_at(self, fed_s, s, flux_s, x_i) -> bool:
        return fed_s >= self.w

    def wake_value(self, fed: float) -> float:
        # report the intended threshold; the bisection residual stays killed
        return self.w

    def commit_step(self, fed, f0, f1, y0, y1, dt) -> None:
        pass


class _HazardRule:
    """Wake at rate boundary_flux / y, via an Exp(1) clock per pile.

    The hazard integral is accumulated in the absorbed-mass variable: over
    one step, int flux/y dt = int dK/(x_i + K) = log(y_after / y_before),
    exact because y grows by exactly the killed mass.  Time quadrature is
    unusable here: the flux spikes like 1/sqrt(t) whenever awake density
    sits against the pile, and a trapezoid in t overweights that spike.
    """

    kind = "hazard"

    def __init__(self, rng):
        self.rng = rng
        self.e = math.inf
        self.acc = 0.0
        self._y0 = 1.0

    def arrive(self, index: int, x_i: float, avail: float) -> bool:
        self.e = float(self.rng.exponential())
        self.acc = 0.0
        return False  # the clock never declares a stall

    def crossed(self, fed, f0, f1, y0, y1, dt) -> bool:
        self._y0 = y0
        return self.acc + math.log(y1 / y0) >= self.e

    def overshoot_at(self, fed_s, s, flux_s, x_i) -> bool:
        return self.acc + math.log((x_i + fed_s) / self._y0) >= self.e

    def wake_value(self, fed: float) -> float:
        return fed  # the absorbed feed itself is the jump excess

    def commit_step(self, fed, f0, f1, y0, y1, dt) -> None:
        self.acc += math.log(y1 / y0)


def simulate_space_driven(x1_0: GridDensity, piles: AtomicMeasure, thresholds,
                          horizon: float, cfg: SolverConfig = SolverConfig()) -> FrogResult:
    """Deterministic run with one preset wake threshold per pile."""
    ws = list(thresholds)
    if len(ws) != len(piles.positions):
        raise ValueError("one threshold per pile is required")
    return _simulate(x1_0, piles, horizon, cfg, _SpaceRule(ws))


def simulate_hazard_driven(x1_0: GridDensity, piles: AtomicMeasure, rng,
                           horizon: float, cfg: SolverConfig = SolverConfig()) -> FrogResult:
    """Wake times sampled from the boundary-flux hazard (one Exp(1) per pile)."""
    return _simulate(x1_0, piles, horizon, cfg, _HazardRule(rng))


def _build_heat(x1_0: GridDensity, piles: AtomicMeasure, cfg: SolverConfig) -> KilledHeatFlow:
    z0 = float(piles.positions[0])
    dx = cfg.dx
    if x1_0.left >= z0:
        raise ValueError("awake density must start left of the first pile")
    span_left = (z0 - x1_0.left) + cfg.pad_left
    left = z0 - math.ceil(span_left / dx - 1e-9) * dx
    span_right = (float(piles.positions[-1]) - z0) + cfg.pad_right
    right = z0 + math.ceil(span_right / dx - 1e-9) * dx
    heat = KilledHeatFlow(left, right, dx, barrier=z0)
    for z in piles.positions:
        heat.edge_index(float(z))  # every pile must sit on a cell edge
    heat.set_density(x1_0)
    return heat


def _simulate(x1_0, piles, horizon, cfg, rule) -> FrogResult:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if math.isinf(horizon) and cfg.run_to_horizon:
        raise ValueError("an infinite horizon requires run_to_horizon=False")
    if len(piles.positions) == 0:
        raise ValueError("at least one pile is required")
    heat = _build_heat(x1_0, piles, cfg)
    # the same float the caller would pass to compute_ustar
    initial_x1 = float(x1_0.total_mass())
    positions = [float(z) for z in piles.positions]
    masses = [float(x) for x in piles.masses]
    n_piles = len(positions)
    total_0 = initial_x1 + float(np.sum(piles.masses))

    events: list[EventRecord] = []
    snaps: list[SnapshotRow] = []
    snap_times = list(np.linspace(0.0, horizon, cfg.n_snapshots)) \
        if (cfg.n_snapshots > 0 and not math.isinf(horizon)) else []
    snap_pos = 0

    i = 0
    y = masses[0]
    ell = positions[0]
    avail = initial_x1          # exact accumulator shared with compute_ustar
    killed_at_pile = 0.0
    stall_position = None
    woke_all = False
    stalled = False

    def untouched() -> float:
        return float(math.fsum(masses[i + 1:])) if i < n_piles else 0.0

    def snapshot() -> None:
        x1m = heat.dx * float(np.sum(heat.values))
        pm = untouched()
        snaps.append(SnapshotRow(heat.time, ell, y, x1m, pm, x1m + y + pm))

    def emit_due_snapshots() -> None:
        nonlocal snap_pos
        while snap_pos < len(snap_times) and snap_times[snap_pos] <= heat.time + 1e-12:
            snapshot()
            snap_pos += 1

    emit_due_snapshots()  # t = 0
    if rule.arrive(0, masses[0], avail):
        stalled = True
        stall_position = positions[0]
        if not cfg.run_to_horizon:
            return _finish(heat, piles, y, i, ell, events, snaps, stall_position,
                           woke_all, positions, total_0, stalled)

    dt_cur = cfg.dt
    while heat.time < horizon - 1e-12:
        dt_step = min(dt_cur, horizon - heat.time)
        armed = (i < n_piles) and not stalled
        if armed:
            saved_vals = heat.values.copy()
            saved_killed = heat.killed_cum
            saved_time = heat.time
            f0 = heat.boundary_flux()
            y0 = y
        heat.step(dt_step)
        if armed:
            fed = heat.killed_cum - killed_at_pile
            f1 = heat.boundary_flux()
            y1 = masses[i] + fed
            if rule.crossed(fed, f0, f1, y0, y1, dt_step):
                # rewind and localize the wake instant inside the step
                heat.values[:] = saved_vals
                heat.killed_cum = saved_killed
                heat.time = saved_time
                fed_base = saved_killed - killed_at_pile
                lo, hi = 0.0, dt_step
                while hi - lo > EVENT_TIME_TOL * dt_step:
                    mid = 0.5 * (lo + hi)
                    k_mid, flux_mid = heat.peek(mid)
                    if rule.overshoot_at(fed_base + k_mid, mid, flux_mid, masses[i]):
                        hi = mid
                    else:
                        lo = mid
                heat.step(hi)
                fed = heat.killed_cum - killed_at_pile
                y = masses[i] + fed  # pile value at the wake instant
                emit_due_snapshots()
                v = rule.wake_value(fed)
                jump = masses[i] + v
                events.append(EventRecord(heat.time, positions[i], jump, v, i))
                heat.inject_atom(positions[i], jump, single_cell=True)
                heat.flush_pending()
                avail += masses[i]
                i += 1
                if i < n_piles:
                    heat.set_barrier(positions[i])
                    ell = positions[i]
                    y = masses[i]
                    killed_at_pile = heat.killed_cum
                    if rule.arrive(i, masses[i], avail):
                        stalled = True
                        stall_position = positions[i]
                        if not cfg.run_to_horizon:
                            break
                else:
                    woke_all = True
                    heat.clear_barrier()
                    y = 0.0
                    if not cfg.run_to_horizon:
                        break
                snapshot()  # one snapshot per event, post-wake
                dt_cur = cfg.dt
                continue
            rule.commit_step(fed, f0, f1, y0, y1, dt_step)
            y = y1
        elif i < n_piles:
            y = masses[i] + (heat.killed_cum - killed_at_pile)
        emit_due_snapshots()
        if cfg.grow_dt:
            dt_cur = min(dt_cur * 2.0, cfg.dt * cfg.dt_max_factor)
    return _finish(heat, piles, y, i, ell, events, snaps, stall_position,
                   woke_all, positions, total_0, stalled)


def _finish(heat, piles, y, i, ell, events, snaps, stall_position, woke_all,
            positions, total_0, stalled) -> FrogResult:
    remaining = AtomicMeasure(piles.positions[i + 1:], piles.masses[i + 1:]) \
        if i < len(positions) else AtomicMeasure([], [])
    final = FrogState(heat, remaining, y, i, heat.time, ell)
    if stalled:
        ustar = stall_position
    elif woke_all:
        ustar = positions[-1]
    else:
        ustar = None  # run was cut by the horizon before the cascade resolved
    return FrogResult(tuple(events), tuple(snaps), final, stall_position,
                      woke_all, ustar, total_0)
