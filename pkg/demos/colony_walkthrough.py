"""One dormant colony fed at unit rate, worked end to end.

The colony holds dormant mass x2_0 and is fed awake mass at rate 1.  It wakes
when the absorbed feed exceeds a random threshold W with
P[W > r] = x2_0 / (x2_0 + r); before that instant the dormant mass grows
deterministically, and afterwards everything is awake.  The script samples a
few thresholds, prints one full trajectory, and checks the martingale
property of the dormant mass over a small ensemble.

Run:  python3 demos/colony_walkthrough.py
"""

import numpy as np

from frogmodel.colony import sample_wake_threshold, solve_unit_colony, threshold_cdf
from frogmodel.runio import replica_rng

X2_0 = 1.5


def main() -> None:
    rng = replica_rng(2024, 0)

    print(f"colony with dormant mass x2_0 = {X2_0}")
    print()

    # a few threshold draws; the law has median exactly x2_0 and no mean
    u = rng.random(100_000)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    ws = np.array([sample_wake_threshold(X2_0, float(ui)) for ui in u])
    print("threshold law P[W > r] = x/(x+r):")
    print(f"  sampled median  {np.median(ws):.4f}   (exact {X2_0})")
    for q in (0.25, 0.75, 0.9):
        exact = X2_0 * q / (1 - q)
        print(f"  {q:.0%} quantile   {np.quantile(ws, q):8.4f}   (exact {exact:.4f})")
    r = 2.0
    print(f"  P[W <= {r}]      {np.mean(ws <= r):8.4f}   "
          f"(exact {threshold_cdf(X2_0, r):.4f})")
    print()

    # one trajectory: dormant mass grows with the feed until the threshold
    w = sample_wake_threshold(X2_0, float(rng.random()))
    path = solve_unit_colony(X2_0, w)
    print(f"one path with W = {w:.4f}: wake time tau = {path.tau:.4f}")
    print(f"  {'t':>6} {'awake x1':>10} {'dormant x2':>11}")
    for t in np.linspace(0.0, 1.5 * path.tau, 7):
        print(f"  {t:6.3f} {path.x1(t):10.4f} {path.x2(t):11.4f}")
    print("  (x1 + x2 = x2_0 + t at every t: the feed is the only input)")
    print()

    # E[X2_t] = x2_0 for all t: growth before the wake balances the wipeout
    n, t_check = 20_000, 2.0
    vals = np.empty(n)
    for k in range(n):
        uk = float(np.clip(replica_rng(2024, k + 1).random(), 1e-12, 1 - 1e-12))
        vals[k] = solve_unit_colony(X2_0, sample_wake_threshold(X2_0, uk)).x2(t_check)
    se = vals.std(ddof=1) / np.sqrt(n)
    print(f"martingale check at t = {t_check}: "
          f"mean dormant mass {vals.mean():.4f} +- {se:.4f} (target {X2_0})")


if __name__ == "__main__":
    main()
