"""Space-indexed view of the wake cascade: marked Poisson patterns.

The jump pattern is a Poisson point process on (position, size) with
intensity f(z) dz x r^-2 dr.  The size marginal is non-integrable at 0, so
sampling truncates at a floor ``r_min``; everything the floor can distort is
flagged rather than silently zero-filled.  From one pattern the per-block
wake thresholds and the cascade's stopping position can be read off directly,
and refining the block width reproduces the pattern itself (the coupling
demonstrated by ``coupling_convergence_report``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import GridDensity, PointPattern

__all__ = [
    "sample_J",
    "build_W_from_J",
    "blocks_to_pattern",
    "ustar_from_J",
    "count_in_rectangle",
    "RectangleCount",
    "CouplingReport",
    "coupling_report_for_pattern",
    "coupling_convergence_report",
]


def _density_quantile(f: GridDensity, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the normalized density, exact per flat cell."""
    w = f.values * f.dx
    cum = np.cumsum(w)
    total = cum[-1]
    t = np.asarray(u, dtype=float) * total
    k = np.searchsorted(cum, t, side="left")
    k = np.clip(k, 0, w.size - 1)
    prev = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
    safe = np.where(w[k] > 0, w[k], 1.0)
    frac = np.clip((t - prev) / safe, 0.0, 1.0)
    return f.left + (k + frac) * f.dx


def sample_J(f: GridDensity, r_min: float, rng) -> PointPattern:
    """Draw the jump pattern above the floor: intensity f(z) dz x r^-2 dr.

    The mark tail above the floor integrates to 1/r_min, so the count is
    Poisson(mass/r_min); positions are i.i.d. from f normalized, and marks
    are r_min/U with U uniform (P[r > c] = r_min/c for c >= r_min).
    """
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    mass = float(f.total_mass())
    n = int(rng.poisson(mass / r_min))
    if n == 0:
        return PointPattern([], [], r_min=r_min)
    zs = _density_quantile(f, rng.uniform(size=n))
    rs = r_min / rng.uniform(size=n)
    return PointPattern(zs, rs, r_min=r_min)


def build_W_from_J(j: PointPattern, mu: GridDensity, eta: float):
    """Per-block wake thresholds read off a pattern.

    Block i covers ((i-1)*eta, i*eta] from mu's left edge; its threshold is
    the best candidate r_j minus the mu-mass between the block's left edge
    and z_j.  Returns (w, censored): blocks with no candidate get 0, and any
    value below the pattern's floor is flagged, because discarded sub-floor
    points could have raised it.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    width = mu.right - mu.left
    n_blocks = max(1, int(math.ceil(width / eta - 1e-9)))
    w = np.zeros(n_blocks)
    if len(j):
        zs, rs = j.zs, j.rs
        if zs[0] < mu.left - 1e-9 or zs[-1] > mu.right + 1e-9:
            raise ValueError("pattern extends beyond the density's support")
        idx = np.ceil((zs - mu.left) / eta - 1e-12).astype(int)
        idx = np.clip(idx, 1, n_blocks)
        block_left = mu.left + (idx - 1) * eta
        cand = rs - (mu.cumulative(zs) - mu.cumulative(block_left))
        np.maximum.at(w, idx - 1, cand)
        w = np.maximum(w, 0.0)  # a negative best candidate is no candidate
    floor = j.r_min if j.r_min is not None else 0.0
    return w, w < floor


def blocks_to_pattern(j: PointPattern, mu: GridDensity, eta: float) -> PointPattern:
    """The block skeleton as a pattern: (block right edge, block threshold).

    Blocks whose threshold is 0 carry no point.  Censored-but-positive values
    are kept; the pattern's floor says how far down it can be trusted.
    """
    w, _ = build_W_from_J(j, mu, eta)
    pos = mu.left + eta * (1.0 + np.arange(w.size))
    keep = w > 0
    return PointPattern(pos[keep], w[keep], r_min=j.r_min)


def ustar_from_J(j: PointPattern, s: float, mu: GridDensity) -> float:
    """First position where the pattern outruns the supply.

    Scans points left to right and returns the first z whose mark exceeds
    s plus the mu-mass already passed; the right edge of mu's support if
    none does.  Refuses s at or below the floor: a discarded point could
    then have been the trigger.
    """
    floor = j.r_min if j.r_min is not None else 0.0
    if s <= floor:
        raise ValueError("supply s must exceed the pattern's truncation floor")
    if len(j):
        hit = j.rs > s + np.asarray(mu.cumulative(j.zs))
        if np.any(hit):
            return float(j.zs[int(np.argmax(hit))])
    return float(mu.right)


def count_in_rectangle(p: PointPattern, z_lo: float, z_hi: float,
                       s_lo: float, s_hi: float = math.inf) -> int:
    """Points with z in [z_lo, z_hi] and mark in [s_lo, s_hi)."""
    keep = (p.zs >= z_lo) & (p.zs <= z_hi) & (p.rs >= s_lo) & (p.rs < s_hi)
    return int(np.count_nonzero(keep))


@dataclass(frozen=True)
class RectangleCount:
    """Counts of one rectangle [z_lo, z_hi] x [s, inf) at every block width."""

    z_lo: float
    z_hi: float
    s: float
    count_exact: int
    counts: tuple          # one per eta, same order
    admissible: tuple      # margin large enough that counts must agree
    exact: tuple           # counts agree

    def to_dict(self) -> dict:
        return {"z_lo": self.z_lo, "z_hi": self.z_hi, "s": self.s,
                "count_exact": self.count_exact, "counts": list(self.counts),
                "admissible": list(self.admissible), "exact": list(self.exact)}


@dataclass(frozen=True)
class CouplingReport:
    etas: tuple
    n_points: int
    rows: tuple

    def admissible_agree(self) -> bool:
        """Every admissible (rectangle, eta) pair counted exactly."""
        return all(ok or not adm
                   for row in self.rows
                   for adm, ok in zip(row.admissible, row.exact))

    def to_dict(self) -> dict:
        return {"etas": list(self.etas), "n_points": self.n_points,
                "rows": [row.to_dict() for row in self.rows],
                "admissible_agree": self.admissible_agree()}


def _rect_admissible(j: PointPattern, z_lo, z_hi, s, eta, sup_f) -> bool:
    """Sufficient margin for exact count agreement at this block width.

    Block edges sit within eta of their point, and a block threshold sits
    within eta*sup_f below its best mark; the rectangle count is then forced
    to match when no relevant point is within eta of a z-edge, no counted
    point is within eta*sup_f above the s-edge, and no two relevant points
    share a block.
    """
    band = eta * sup_f
    sel = (j.rs >= s) & (j.zs >= z_lo - eta) & (j.zs <= z_hi + eta)
    z_rel = j.zs[sel]
    r_rel = j.rs[sel]
    if z_rel.size == 0:
        return True
    if np.any(np.minimum(np.abs(z_rel - z_lo), np.abs(z_rel - z_hi)) <= eta):
        return False
    inside = (z_rel >= z_lo) & (z_rel <= z_hi)
    if np.any(inside & (r_rel < s + band)):
        return False
    if z_rel.size >= 2 and np.min(np.diff(z_rel)) <= eta:
        return False
    return True


def coupling_report_for_pattern(j: PointPattern, mu: GridDensity, etas,
                                rectangles) -> CouplingReport:
    """Rectangle counts of the block skeletons against the pattern itself."""
    etas = [float(e) for e in etas]
    if any(e <= 0 for e in etas):
        raise ValueError("block widths must be positive")
    floor = j.r_min if j.r_min is not None else 0.0
    rects = [(float(a), float(b), float(s)) for a, b, s in rectangles]
    for a, b, s in rects:
        if not (a <= b and s >= 2.0 * floor and s > 0):
            raise ValueError("rectangle must have z_lo <= z_hi and its s-edge "
                             "at least twice the truncation floor")
    sup_f = float(np.max(mu.values)) if mu.values.size else 0.0
    skeletons = [blocks_to_pattern(j, mu, eta) for eta in etas]
    rows = []
    for a, b, s in rects:
        n_exact = count_in_rectangle(j, a, b, s)
        counts = tuple(count_in_rectangle(sk, a, b, s) for sk in skeletons)
        adm = tuple(_rect_admissible(j, a, b, s, eta, sup_f) for eta in etas)
        rows.append(RectangleCount(a, b, s, n_exact, counts, adm,
                                   tuple(c == n_exact for c in counts)))
    return CouplingReport(tuple(etas), len(j), tuple(rows))


def coupling_convergence_report(f: GridDensity, r_min: float, etas,
                                rectangles, rng) -> CouplingReport:
    """Sample one pattern from f and report its block-count convergence."""
    return coupling_report_for_pattern(sample_J(f, r_min, rng), f, etas,
                                       rectangles)
