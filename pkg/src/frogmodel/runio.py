"""Run configuration, per-replica seeding, and artifact files.

A run is described by one JSON file with four sections: ``model`` (initial
densities, block width eta, horizon), ``solver`` (dx, dt, scheme),
``sampling`` (seed, replicas, r_min), ``output`` (out_dir, snapshots).
Command line flags override file values; the merged, fully defaulted config
is what gets hashed and echoed into the manifest, so a fixed (config, seed)
pair reproduces every artifact byte for byte on the same install.

Config problems raise :class:`ConfigError`, which carries the config path and
the line the offending key sits on when that can be located in the source.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__
from .frog import SolverConfig
from .measures import AtomicMeasure, GridDensity, discretize_density

__all__ = [
    "ConfigError",
    "RunConfig",
    "DEFAULT_CONFIG",
    "load_config",
    "config_from_dict",
    "replica_rng",
    "density_from_spec",
    "build_x1",
    "build_piles",
    "canonical_json",
    "config_digest",
    "run_id_for",
    "build_manifest",
    "write_json",
    "write_jsonl",
    "read_jsonl",
    "write_csv",
    "frog_event_rows",
    "mps_event_rows",
    "snapshot_rows",
    "pattern_rows",
    "SNAPSHOT_HEADER",
    "COLONY_HEADER",
    "PROFILE_HEADER",
]

SNAPSHOT_HEADER = ("time", "ell", "y", "x1_mass", "pile_mass", "total_mass")
COLONY_HEADER = ("time", "x1", "x2")
PROFILE_HEADER = ("time", "x", "density")

DEFAULT_CONFIG = {
    "model": {
        "x1": {"kind": "uniform", "left": -0.5, "right": 0.0, "mass": 0.5},
        "x2": {"kind": "uniform", "left": 0.0, "right": 1.0, "mass": 1.0},
        "eta": 0.05,
        "horizon": 2.0,
    },
    "solver": {"dx": 0.01, "dt": 1e-3, "scheme": "backward-euler"},
    "sampling": {"seed": 0, "replicas": 1, "r_min": 1e-4},
    "output": {"out_dir": "out", "snapshots": 32},
}

_DENSITY_KINDS = ("uniform", "triangular", "custom-grid")


class ConfigError(ValueError):
    """Invalid run configuration; str() includes file:line when known."""

    def __init__(self, message: str, path: str = "", source: str = "",
                 source_name: str = ""):
        self.path = path
        self.line = _locate(source, path) if source else None
        self.source_name = source_name
        super().__init__(message)

    def __str__(self) -> str:
        msg = super().__str__()
        where = f"{self.path}: " if self.path else ""
        if self.source_name and self.line:
            return f"{self.source_name}:{self.line}: {where}{msg}"
        if self.source_name:
            return f"{self.source_name}: {where}{msg}"
        return f"{where}{msg}"


def _locate(source: str, path: str) -> int | None:
    """Best-effort line number of the last key in a dotted config path."""
    if not path:
        return None
    key = path.split(".")[-1]
    needle = f'"{key}"'
    for i, line in enumerate(source.splitlines(), start=1):
        if needle in line:
            return i
    return None


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully defaulted run description."""

    x1_spec: dict
    x2_spec: dict
    etas: tuple
    horizon: float
    dx: float
    dt: float
    scheme: str
    seed: int
    replicas: int
    r_min: float
    out_dir: str
    snapshots: int
    effective: dict

    def solver(self, **overrides) -> SolverConfig:
        """SolverConfig for this run; keyword overrides tweak run control."""
        kw = {"dx": self.dx, "dt": self.dt, "n_snapshots": self.snapshots}
        kw.update(overrides)
        return SolverConfig(**kw)


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, counter-based stream for replica ``index``.

    Streams depend only on (seed, index), never on worker layout, so any
    thread count replays the same draws.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _merge(base: dict, overlay: dict, source: str, name: str) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for section, body in overlay.items():
        if section not in out:
            raise ConfigError(f"unknown section {section!r}", section, source, name)
        if not isinstance(body, dict):
            raise ConfigError("section must be an object", section, source, name)
        for key, value in body.items():
            if key not in out[section]:
                raise ConfigError(f"unknown key {key!r}", f"{section}.{key}",
                                  source, name)
            out[section][key] = value
    return out


def _require_number(value, path: str, source: str, name: str,
                    positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("must be a number", path, source, name)
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError("must be finite", path, source, name)
    if positive and v <= 0:
        raise ConfigError("must be positive", path, source, name)
    return v


def _check_density_spec(spec, path: str, source: str, name: str) -> dict:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError('must be an object with a "kind" field', path, source, name)
    kind = spec["kind"]
    if kind not in _DENSITY_KINDS:
        raise ConfigError(f"kind must be one of {_DENSITY_KINDS}", path, source, name)
    if kind in ("uniform", "triangular"):
        for field in ("left", "right", "mass"):
            if field not in spec:
                raise ConfigError(f"missing field {field!r}", path, source, name)
            _require_number(spec[field], f"{path}.{field}", source, name)
        if float(spec["right"]) <= float(spec["left"]):
            raise ConfigError("right must exceed left", path, source, name)
        if float(spec["mass"]) <= 0:
            raise ConfigError("mass must be positive", path, source, name)
        return {"kind": kind, "left": float(spec["left"]),
                "right": float(spec["right"]), "mass": float(spec["mass"])}
    for field in ("left", "dx", "values"):
        if field not in spec:
            raise ConfigError(f"missing field {field!r}", path, source, name)
    vals = spec["values"]
    if (not isinstance(vals, list) or not vals
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       and float(v) >= 0 and math.isfinite(float(v)) for v in vals)):
        raise ConfigError("values must be a nonempty list of finite numbers >= 0",
                          path, source, name)
    return {"kind": kind,
            "left": _require_number(spec["left"], f"{path}.left", source, name),
            "dx": _require_number(spec["dx"], f"{path}.dx", source, name, True),
            "values": [float(v) for v in vals]}


def config_from_dict(data: dict, overrides: dict | None = None,
                     source: str = "", source_name: str = "") -> RunConfig:
    """Merge ``data`` over the defaults, apply flag overrides, validate."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object", "", source, source_name)
    merged = _merge(DEFAULT_CONFIG, data, source, source_name)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in merged or key not in merged[section]:
            raise ConfigError(f"unknown override {dotted!r}", dotted, "", "")
        merged[section][key] = value

    model, solver, sampling, output = (merged["model"], merged["solver"],
                                       merged["sampling"], merged["output"])

    x1 = _check_density_spec(model["x1"], "model.x1", source, source_name)
    x2 = _check_density_spec(model["x2"], "model.x2", source, source_name)
    if x2["left"] < -1e-12:
        raise ConfigError("dormant support must lie in [0, inf)", "model.x2",
                          source, source_name)

    raw_eta = model["eta"]
    eta_list = raw_eta if isinstance(raw_eta, list) else [raw_eta]
    if not eta_list:
        raise ConfigError("at least one eta is required", "model.eta",
                          source, source_name)
    etas = tuple(_require_number(e, "model.eta", source, source_name, True)
                 for e in eta_list)

    horizon = _require_number(model["horizon"], "model.horizon", source,
                              source_name, True)

    dx = _require_number(solver["dx"], "solver.dx", source, source_name, True)
    dt = _require_number(solver["dt"], "solver.dt", source, source_name, True)
    scheme = solver["scheme"]
    if scheme != "backward-euler":
        raise ConfigError('scheme must be "backward-euler"', "solver.scheme",
                          source, source_name)
    for e in etas:
        ratio = e / dx
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError(f"dx={dx!r} must divide eta={e!r}", "model.eta",
                              source, source_name)
    if x1["kind"] == "custom-grid":
        ratio = x1["dx"] / dx
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError("solver dx must divide the x1 grid dx", "model.x1",
                              source, source_name)

    seed = sampling["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer", "sampling.seed",
                          source, source_name)
    replicas = sampling["replicas"]
    if isinstance(replicas, bool) or not isinstance(replicas, int) or replicas < 1:
        raise ConfigError("replicas must be >= 1", "sampling.replicas",
                          source, source_name)
    r_min = _require_number(sampling["r_min"], "sampling.r_min", source,
                            source_name, True)

    out_dir = output["out_dir"]
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir must be a nonempty string", "output.out_dir",
                          source, source_name)
    snapshots = output["snapshots"]
    if isinstance(snapshots, bool) or not isinstance(snapshots, int) or snapshots < 0:
        raise ConfigError("snapshots must be an integer >= 0", "output.snapshots",
                          source, source_name)

    effective = {
        "model": {"x1": x1, "x2": x2, "eta": list(etas), "horizon": horizon},
        "solver": {"dx": dx, "dt": dt, "scheme": scheme},
        "sampling": {"seed": seed, "replicas": replicas, "r_min": r_min},
        "output": {"out_dir": out_dir, "snapshots": snapshots},
    }
    return RunConfig(x1_spec=x1, x2_spec=x2, etas=etas, horizon=horizon,
                     dx=dx, dt=dt, scheme=scheme, seed=seed, replicas=replicas,
                     r_min=r_min, out_dir=out_dir, snapshots=snapshots,
                     effective=effective)


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    """Read and validate a JSON config file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        err = ConfigError(f"invalid JSON: {exc.msg}")
        err.source_name = path
        err.line = exc.lineno
        raise err from None
    try:
        return config_from_dict(data, overrides, source=text, source_name=path)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "", text, path) from exc


def density_from_spec(spec: dict, dx: float) -> GridDensity:
    """Build the grid density described by a validated model spec."""
    kind = spec["kind"]
    if kind == "uniform":
        return GridDensity.uniform(spec["left"], spec["right"], spec["mass"], dx)
    if kind == "triangular":
        left, right, mass = spec["left"], spec["right"], spec["mass"]
        width = right - left
        slope = 2.0 * mass / (width * width)
        return GridDensity.from_function(lambda z: slope * (z - left),
                                         left, right, dx)
    if kind == "custom-grid":
        return GridDensity(spec["left"], spec["dx"], spec["values"])
    raise ValueError(f"unknown density kind {kind!r}")


def build_x1(cfg: RunConfig) -> GridDensity:
    return density_from_spec(cfg.x1_spec, cfg.dx)


def build_piles(cfg: RunConfig, eta: float) -> AtomicMeasure:
    """Dormant blocks of width ``eta`` from the x2 density spec."""
    density = density_from_spec(cfg.x2_spec, min(cfg.dx, eta / 4.0))
    return discretize_density(density, eta)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(effective: dict) -> str:
    """Content hash over the scientific sections; output paths do not matter."""
    body = {k: effective[k] for k in ("model", "solver", "sampling") if k in effective}
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


def run_id_for(subcommand: str, digest: str, unit: dict | None = None) -> str:
    tail = hashlib.sha256(
        (digest + canonical_json({"sub": subcommand, "unit": unit or {}}))
        .encode("utf-8")).hexdigest()
    return f"{subcommand}-{tail[:12]}"


def build_manifest(subcommand: str, cfg: RunConfig, unit: dict | None = None) -> dict:
    """Manifest body: config echo, content hash, seed, library versions."""
    digest = config_digest(cfg.effective)
    manifest = {
        "run_id": run_id_for(subcommand, digest, unit),
        "subcommand": subcommand,
        "config": cfg.effective,
        "config_sha256": digest,
        "seed": cfg.seed,
        "versions": {
            "frogmodel": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if unit:
        manifest["unit"] = unit
    return manifest


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def frog_event_rows(events) -> list:
    return [{"t": ev.time, "site": ev.site, "jump": ev.jump_size,
             "v": ev.v, "index": ev.index} for ev in events]


def mps_event_rows(events) -> list:
    return [{"t": ev.time, "site": ev.site, "pile": ev.pile} for ev in events]


def snapshot_rows(snapshots) -> list:
    return [(s.time, s.ell, s.y, s.x1_mass, s.pile_mass, s.total_mass)
            for s in snapshots]


def pattern_rows(pattern) -> list:
    return [[float(z), float(r)] for z, r in pattern]
