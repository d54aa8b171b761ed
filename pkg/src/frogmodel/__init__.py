"""Simulators and statistical checks for an infinite-rate wake-up frog model.

The model lives on the real line: a "wake" population spreads by heat flow
while a "dormant" population stands still; dormant mass at a site wakes once
the wake mass absorbed at that site exceeds a random threshold W with
P[W(x) > r] = x / (x + r).  The package provides

* ``measures``  -- atomic / grid / hybrid mass distributions,
* ``colony``    -- single-colony threshold dynamics in closed form,
* ``heat``      -- killed heat flow against an absorbing barrier,
* ``lattice``   -- finite site systems with hazard-driven wake jumps,
* ``frog``      -- the continuous-space barrier process and its stall position,
* ``spatial``   -- the space-indexed Poisson threshold field,
* ``stats``     -- KS / chi-square / drift checks used by the test batteries,
* ``runio``     -- run configuration, per-replica seeding, artifact files,
* ``cli``       -- the ``frogmodel`` command line driver,
* ``acceptance``-- the end-to-end acceptance battery (also via the CLI).

``acceptance`` and ``cli`` are imported lazily by their entry points; import
them explicitly when driving the battery from Python.
"""

__version__ = "0.1.0"

from . import measures, colony, heat, lattice, frog, spatial, stats, runio  # noqa: E402

__all__ = [
    "measures",
    "colony",
    "heat",
    "lattice",
    "frog",
    "spatial",
    "stats",
    "runio",
    "__version__",
]
