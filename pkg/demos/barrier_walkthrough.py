"""The barrier process on the line: one narrated path, then the stall law.

Awake mass starts as a density left of the origin and spreads by heat flow
(diffusivity 1/2).  Dormant piles sit at eta, 2*eta, ... and the leftmost
dormant pile absorbs everything that reaches it; a pile wakes when its
absorbed feed crosses its threshold, its whole value re-enters the awake
phase as an atom at the barrier, and the barrier moves to the next pile.
A pile whose threshold exceeds all mass that could ever arrive stalls the
process for good.

The script narrates one path event by event, then compares the simulated
stall position against the prediction computed from the thresholds alone.

Run:  python3 demos/barrier_walkthrough.py
"""

import math

import numpy as np

from frogmodel.colony import sample_wake_threshold
from frogmodel.frog import SolverConfig, compute_ustar, simulate_space_driven
from frogmodel.measures import GridDensity, discretize_density
from frogmodel.runio import replica_rng

ETA = 0.1
CFG = SolverConfig(dx=0.02, dt=2e-3, n_snapshots=0, pad_left=0.6,
                   pad_right=0.1, grow_dt=True, run_to_horizon=False)


def draw_thresholds(piles, rng):
    u = np.clip(rng.random(len(piles.positions)), 1e-12, 1 - 1e-12)
    return [sample_wake_threshold(float(x), float(ui))
            for x, ui in zip(piles.masses, u)]


def main() -> None:
    x1 = GridDensity.uniform(-0.5, 0.0, 0.5, CFG.dx)
    piles = discretize_density(GridDensity.uniform(0.0, 1.0, 1.0, 0.02), ETA)
    print(f"awake mass 0.5 on [-0.5, 0]; ten piles of mass 0.1 at "
          f"{ETA}, {2 * ETA}, ..., 1.0")
    print()

    rng = replica_rng(77, 0)
    ws = draw_thresholds(piles, rng)
    res = simulate_space_driven(x1, piles, ws, math.inf, CFG)

    print("one path, event by event:")
    print(f"  {'time':>8} {'pile':>6} {'threshold':>10} {'woke mass':>10}")
    for ev in res.events:
        print(f"  {ev.time:8.3f} {ev.site:6.2f} {ws[ev.index]:10.4f} "
              f"{ev.jump_size:10.4f}")
    if res.woke_all:
        print(f"  every pile woke; rightmost position {res.ustar:.2f}")
    else:
        print(f"  stalled at {res.stall_position:.2f}: that pile's threshold "
              f"{ws[len(res.events)]:.4f} exceeds everything left of it")
    predicted = compute_ustar(ws, piles, 0.5)
    print(f"  prediction from thresholds alone: {predicted:.2f} "
          f"({'agrees' if predicted == res.ustar else 'DISAGREES'})")
    print()

    # the stall law over an ensemble: mass can run out early or never
    n = 300
    stalls = np.empty(n)
    for k in range(n):
        ws_k = draw_thresholds(piles, replica_rng(77, k))
        stalls[k] = simulate_space_driven(x1, piles, ws_k, math.inf, CFG).ustar
    print(f"stall position over {n} paths:")
    for z in piles.positions:
        frac = float(np.mean(np.isclose(stalls, z)))
        bar = "#" * int(round(60 * frac))
        print(f"  {z:4.1f} {frac:6.1%} {bar}")
    print(f"  (fraction reaching the last pile: "
          f"{np.mean(np.isclose(stalls, 1.0)):.1%})")


if __name__ == "__main__":
    main()
