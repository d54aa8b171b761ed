"""Single-colony wake dynamics in closed form.

A colony is a pair (x1, x2) with x1 * x2 = 0: ``x2`` is dormant mass that
grows by immigration until the cumulative immigration reaches a random
threshold W, at which point the whole pile converts to awake mass ``x1``,
which then decays at rate ``c`` while still collecting immigration.

The threshold law is P[W(x) > r] = x / (x + r): an infinite-mean,
scale-equivariant distribution (W(lambda x) ~ lambda W(x)).  Everything here
is exact: paths are evaluated analytically, no ODE stepping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "sample_wake_threshold",
    "threshold_cdf",
    "threshold_quantile",
    "ImmigrationSchedule",
    "ColonyPath",
    "solve_colony",
    "solve_unit_colony",
]


def sample_wake_threshold(x, u):
    """Wake threshold W(x) from a uniform draw ``u`` in (0, 1).

    Inverse CDF of P[W <= r] = r / (x + r): W = x * u / (1 - u).  Vectorized;
    median is x, mean is infinite.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(x < 0):
        raise ValueError("pile mass x must be nonnegative")
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u must lie strictly inside (0, 1)")
    out = x * u / (1.0 - u)
    return float(out) if out.ndim == 0 else out


def threshold_cdf(x: float, r):
    """P[W(x) <= r] = r / (x + r) for r >= 0."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 0, 0.0, r / (x + r))
    return float(out) if out.ndim == 0 else out


def threshold_quantile(x: float, q):
    """Quantile function of W(x); q in [0, 1)."""
    q = np.asarray(q, dtype=float)
    out = x * q / (1.0 - q)
    return float(out) if out.ndim == 0 else out


class ImmigrationSchedule:
    """Deterministic immigration: continuous piecewise-linear cumulative mass.

    ``knots`` are increasing times starting at 0, ``cums`` the cumulative
    immigration at each knot (``cums[0] == 0``), and ``tail_rate`` the
    constant rate beyond the last knot.
    """

    def __init__(self, knots, cums, tail_rate: float = 0.0):
        knots = np.asarray(knots, dtype=float)
        cums = np.asarray(cums, dtype=float)
        if knots.ndim != 1 or knots.shape != cums.shape or knots.size == 0:
            raise ValueError("knots and cums must be equal-length 1-d arrays")
        if knots[0] != 0.0 or cums[0] != 0.0:
            raise ValueError("schedule must start at (0, 0)")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(cums) < 0) or tail_rate < 0:
            raise ValueError("cumulative immigration must be nondecreasing")
        self.knots = knots
        self.cums = cums
        self.tail_rate = float(tail_rate)

    @classmethod
    def constant(cls, rate: float) -> "ImmigrationSchedule":
        return cls([0.0], [0.0], tail_rate=rate)

    @classmethod
    def from_rates(cls, breaks, rates, tail_rate: float = 0.0) -> "ImmigrationSchedule":
        """Breakpoints [0, t1, .., tn] and the constant rate on each segment."""
        breaks = np.asarray(breaks, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if rates.size != breaks.size - 1:
            raise ValueError("need one rate per segment")
        cums = np.concatenate([[0.0], np.cumsum(rates * np.diff(breaks))])
        return cls(breaks, cums, tail_rate)

    def cumulative(self, t):
        """Total immigration over (0, t]."""
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.knots, self.cums)
        tail = t > self.knots[-1]
        if np.any(tail):
            out = np.where(tail, self.cums[-1] + self.tail_rate * (t - self.knots[-1]), out)
        out = np.where(t <= 0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def inverse(self, w: float) -> float:
        """First time the cumulative immigration reaches ``w`` (inf if never)."""
        if w <= 0:
            return 0.0
        idx = int(np.searchsorted(self.cums, w, side="left"))
        if idx < self.cums.size:
            rate = (self.cums[idx] - self.cums[idx - 1]) / (self.knots[idx] - self.knots[idx - 1])
            return float(self.knots[idx - 1] + (w - self.cums[idx - 1]) / rate)
        if w <= self.cums[-1]:
            return float(self.knots[-1])
        if self.tail_rate == 0.0:
            return math.inf
        return float(self.knots[-1] + (w - self.cums[-1]) / self.tail_rate)

    def _segments(self, upto: float):
        """(a, b, rate) pieces covering (0, min(upto, inf))."""
        ts = self.knots
        for a, b, ca, cb in zip(ts[:-1], ts[1:], self.cums[:-1], self.cums[1:]):
            yield float(a), float(b), float((cb - ca) / (b - a))
        if upto > ts[-1]:
            yield float(ts[-1]), float(upto), self.tail_rate


@dataclass(frozen=True)
class ColonyPath:
    """Exact path of one colony: dormant until ``tau``, awake afterwards."""

    x1_0: float
    x2_0: float
    threshold: float
    decay: float
    schedule: ImmigrationSchedule
    tau: float

    def x2(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < self.tau, self.x2_0 + self.schedule.cumulative(t), 0.0)
        return float(out) if out.ndim == 0 else out

    def _x1_at_wake(self) -> float:
        if self.x2_0 > 0:
            return self.x2_0 + float(self.schedule.cumulative(self.tau))
        return self.x1_0

    def x1(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        awake = t >= self.tau
        if np.any(awake):
            ta = t[awake] if t.ndim else np.asarray([float(t)])
            c = self.decay
            base = self._x1_at_wake() * np.exp(-c * (ta - self.tau)) if c > 0 else np.full_like(ta, self._x1_at_wake())
            conv = np.zeros_like(ta)
            tmax = float(ta.max())
            for a, b, rate in self.schedule._segments(upto=max(tmax, self.tau)):
                if rate == 0.0 or b <= self.tau:
                    continue
                lo = np.clip(np.maximum(a, self.tau), None, ta)
                hi = np.clip(b, None, ta)
                hi = np.maximum(hi, lo)
                if c > 0:
                    conv += (rate / c) * (np.exp(-c * (ta - hi)) - np.exp(-c * (ta - lo)))
                else:
                    conv += rate * (hi - lo)
            vals = base + conv
            if t.ndim:
                out[awake] = vals
            else:
                return float(vals[0])
        return float(out) if out.ndim == 0 else out


def solve_colony(
    x1_0: float,
    x2_0: float,
    schedule: ImmigrationSchedule,
    threshold: float,
    decay: float = 0.0,
) -> ColonyPath:
    """Exact colony path for a given threshold realization.

    While dormant (x2_0 > 0): x2 grows by the schedule, x1 stays 0.  The wake
    time is the first t with cumulative immigration >= threshold; at that
    instant the pile converts to awake mass, which then follows
    x1' = theta_t - decay * x1.  A colony with x2_0 == 0 is awake from the
    start (tau = 0).
    """
    if x1_0 < 0 or x2_0 < 0:
        raise ValueError("masses must be nonnegative")
    if x1_0 > 0 and x2_0 > 0:
        raise ValueError("awake and dormant mass cannot coexist")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if decay < 0:
        raise ValueError("decay must be nonnegative")
    tau = schedule.inverse(threshold) if x2_0 > 0 else 0.0
    return ColonyPath(float(x1_0), float(x2_0), float(threshold), float(decay), schedule, float(tau))


def solve_unit_colony(x2_0: float, threshold: float) -> ColonyPath:
    """Colony fed at unit rate with no decay (conserves x1 + x2 = x2_0 + t)."""
    return solve_colony(0.0, x2_0, ImmigrationSchedule.constant(1.0), threshold, decay=0.0)
