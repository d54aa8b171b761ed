"""Command line driver: config parsing, seeding, orchestration, artifacts.

Subcommands
    mp0       one colony fed at unit rate; trajectory CSV
    mps       finite site system from a generator matrix file; event log JSONL
    simulate  barrier-process ensemble at one block width
    sweep     simulate across a list of block widths; per-run manifests
    ppp       marked point patterns, block thresholds, coupling reports
    verify    statistical acceptance battery; exits 1 on any failure

Exit codes: 0 success, 1 failed verification, 2 invalid configuration.
Replicas are dispatched to a worker pool; workers share nothing and results
are merged in replica order, so output bytes do not depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .colony import sample_wake_threshold, solve_unit_colony
from .frog import simulate_hazard_driven
from .lattice import MPSState, SiteSystem, simulate_mps
from .runio import (
    COLONY_HEADER,
    PROFILE_HEADER,
    SNAPSHOT_HEADER,
    ConfigError,
    RunConfig,
    build_manifest,
    build_piles,
    build_x1,
    config_from_dict,
    density_from_spec,
    frog_event_rows,
    load_config,
    mps_event_rows,
    pattern_rows,
    replica_rng,
    snapshot_rows,
    write_csv,
    write_json,
    write_jsonl,
)
from .spatial import coupling_report_for_pattern, sample_J

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frogmodel",
        description="Simulators and statistical checks for the wake-up frog model.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file (flags win over file values)")
        p.add_argument("--out-dir", help="output root (default: out)")
        p.add_argument("--seed", type=int, help="base seed for replica streams")
        p.add_argument("--replicas", type=int, help="number of replicas")
        p.add_argument("--eta", type=float, help="dormant block width")
        p.add_argument("--horizon", type=float, help="time horizon")
        p.add_argument("--snapshots", type=int, help="snapshot rows per replica")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes (default 1; output is identical)")

    p = sub.add_parser("mp0", help="one colony fed at unit rate")
    common(p)
    p.set_defaults(func=_cmd_mp0)

    p = sub.add_parser("mps", help="finite site system driven by a generator matrix")
    common(p)
    p.add_argument("--q", required=True,
                   help="JSON file with sites, q matrix, x1 and x2 vectors")
    p.set_defaults(func=_cmd_mps)

    p = sub.add_parser("simulate", help="barrier-process ensemble at one block width")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="barrier-process ensembles across block widths")
    common(p)
    p.add_argument("--etas", help="comma-separated block widths, e.g. 0.1,0.05,0.02")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ppp", help="marked point patterns and block thresholds")
    common(p)
    p.add_argument("--rmin", type=float, help="mark truncation level")
    p.add_argument("--eta-list", help="comma-separated block widths for thresholds")
    p.add_argument("--rect", action="append", default=[],
                   metavar="ZLO,ZHI,S", help="count rectangle (repeatable)")
    p.set_defaults(func=_cmd_ppp)

    p = sub.add_parser("verify", help="run a statistical verification suite")
    common(p)
    p.add_argument("--suite", default="acceptance", help="suite name (acceptance)")
    p.add_argument("--only", help="comma-separated criterion numbers, e.g. 1,3,9")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _overrides(args) -> dict:
    pairs = {
        "output.out_dir": getattr(args, "out_dir", None),
        "sampling.seed": getattr(args, "seed", None),
        "sampling.replicas": getattr(args, "replicas", None),
        "sampling.r_min": getattr(args, "rmin", None),
        "model.horizon": getattr(args, "horizon", None),
        "output.snapshots": getattr(args, "snapshots", None),
    }
    if getattr(args, "eta", None) is not None:
        pairs["model.eta"] = args.eta
    if getattr(args, "etas", None):
        pairs["model.eta"] = _parse_floats(args.etas, "--etas")
    return {k: v for k, v in pairs.items() if v is not None}


def _parse_floats(text: str, flag: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated numbers, got {text!r}")


def _load(args) -> RunConfig:
    overrides = _overrides(args)
    if args.config:
        return load_config(args.config, overrides)
    return config_from_dict({}, overrides)


def _prepare_run_dir(cfg: RunConfig, manifest: dict) -> Path:
    run_dir = Path(cfg.out_dir) / manifest["run_id"]
    run_dir.mkdir(parents=True, exist_ok=True)
    write_json(run_dir / "manifest.json", manifest)
    return run_dir


def _single_eta(cfg: RunConfig, what: str) -> float:
    if len(cfg.etas) != 1:
        raise ConfigError(f"{what} uses a single eta; use sweep for eta lists",
                          "model.eta")
    return cfg.etas[0]


# ---------------------------------------------------------------------------
# mp0


def _cmd_mp0(args) -> int:
    cfg = _load(args)
    if cfg.replicas != 1:
        raise ConfigError("mp0 runs a single colony; set replicas to 1",
                          "sampling.replicas")
    run_dir = _prepare_run_dir(cfg, build_manifest("mp0", cfg))
    x2_0 = float(density_from_spec(cfg.x2_spec, cfg.dx).total_mass())
    rng = replica_rng(cfg.seed, 0)
    u = rng.uniform()
    while not 0.0 < u < 1.0:
        u = rng.uniform()
    path = solve_unit_colony(x2_0, sample_wake_threshold(x2_0, u))
    times = np.linspace(0.0, cfg.horizon, max(cfg.snapshots, 1) + 1)
    rows = [(float(t), float(path.x1(t)), float(path.x2(t))) for t in times]
    write_csv(run_dir / "colony.csv", COLONY_HEADER, rows)
    print(f"mp0: wake time {path.tau:.6g}, trajectory in {run_dir}/colony.csv")
    return 0


# ---------------------------------------------------------------------------
# mps


def _load_site_system(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read generator file: {exc}")
    except json.JSONDecodeError as exc:
        err = ConfigError(f"invalid JSON: {exc.msg}")
        err.source_name = path
        err.line = exc.lineno
        raise err
    for field in ("sites", "q", "x1", "x2"):
        if field not in data:
            raise ConfigError(f"missing field {field!r}", field, "", path)
    try:
        system = SiteSystem(data["sites"], data["q"])
        state = MPSState(data["x1"], data["x2"])
    except ValueError as exc:
        raise ConfigError(str(exc), "q", "", path)
    return system, state


def _cmd_mps(args) -> int:
    cfg = _load(args)
    system, initial = _load_site_system(args.q)
    manifest = build_manifest("mps", cfg, {"generator": Path(args.q).name})
    run_dir = _prepare_run_dir(cfg, manifest)

    event_rows = []
    summary = []
    for k in range(cfg.replicas):
        rng = replica_rng(cfg.seed, k)
        res = simulate_mps(system, initial, cfg.horizon, rng)
        for row in mps_event_rows(res.events):
            event_rows.append({"replica": k, **row})
        summary.append((k, len(res.events), res.final.time,
                        float(np.sum(res.final.x1)), float(np.sum(res.final.x2))))
    write_jsonl(run_dir / "events.jsonl", event_rows)
    write_csv(run_dir / "summary.csv",
              ("replica", "n_events", "final_time", "x1_total", "x2_total"),
              summary)
    print(f"mps: {len(event_rows)} events over {cfg.replicas} replicas in {run_dir}")
    return 0


# ---------------------------------------------------------------------------
# simulate / sweep


def _frog_replica(payload: tuple) -> dict:
    """One ensemble member; runs in a worker process, returns plain rows."""
    effective, eta, index, want_profile = payload
    cfg = config_from_dict(effective)
    x1 = build_x1(cfg)
    piles = build_piles(cfg, eta)
    rng = replica_rng(cfg.seed, index)
    res = simulate_hazard_driven(x1, piles, rng, cfg.horizon, cfg.solver())
    out = {
        "events": frog_event_rows(res.events),
        "snapshots": snapshot_rows(res.snapshots),
        "summary": {
            "n_events": len(res.events),
            "woke_all": res.woke_all,
            "ustar": res.ustar,
            "stall_position": res.stall_position,
            "final_time": res.final.time,
            "total_mass": res.snapshots[-1].total_mass if res.snapshots else None,
        },
    }
    if want_profile:
        out["profile"] = list(res.final.heat.profile_rows())
    return out


def _run_ensemble(cfg: RunConfig, eta: float, threads: int,
                  want_profile: bool) -> list:
    payloads = [(cfg.effective, eta, k, want_profile and k == 0)
                for k in range(cfg.replicas)]
    if threads <= 1 or cfg.replicas == 1:
        return [_frog_replica(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_frog_replica, payloads))


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    eta = _single_eta(cfg, "simulate")
    run_dir = _prepare_run_dir(cfg, build_manifest("simulate", cfg))
    results = _run_ensemble(cfg, eta, args.threads, want_profile=True)

    event_rows, snap_rows, summary = [], [], []
    for k, res in enumerate(results):
        for row in res["events"]:
            event_rows.append({"replica": k, **row})
        for row in res["snapshots"]:
            snap_rows.append((k,) + tuple(row))
        s = res["summary"]
        summary.append((k, eta, s["n_events"], s["woke_all"], s["ustar"],
                        s["final_time"], s["total_mass"]))
    write_jsonl(run_dir / "events.jsonl", event_rows)
    write_csv(run_dir / "snapshots.csv", ("replica",) + SNAPSHOT_HEADER, snap_rows)
    write_csv(run_dir / "summary.csv",
              ("replica", "eta", "n_events", "woke_all", "ustar",
               "final_time", "total_mass"), summary)
    if results and "profile" in results[0]:
        write_csv(run_dir / "profiles.csv", PROFILE_HEADER, results[0]["profile"])
    print(f"simulate: {len(event_rows)} events over {cfg.replicas} replicas "
          f"at eta={eta:g} in {run_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    if not cfg.etas:
        raise ConfigError("sweep needs at least one eta", "model.eta")
    sweep_manifest = build_manifest("sweep", cfg)
    sweep_dir = _prepare_run_dir(cfg, sweep_manifest)

    aggregate = []
    for eta in cfg.etas:
        results = _run_ensemble(cfg, eta, args.threads, want_profile=False)
        for k, res in enumerate(results):
            unit = {"eta": eta, "replica": k}
            manifest = build_manifest("sweep", cfg, unit)
            unit_dir = _prepare_run_dir(cfg, manifest)
            write_jsonl(unit_dir / "events.jsonl",
                        [{"replica": k, **row} for row in res["events"]])
            if cfg.snapshots > 0:
                write_csv(unit_dir / "snapshots.csv", ("replica",) + SNAPSHOT_HEADER,
                          [(k,) + tuple(r) for r in res["snapshots"]])
            s = res["summary"]
            aggregate.append((eta, k, manifest["run_id"], s["n_events"],
                              s["woke_all"], s["ustar"], s["final_time"]))
    write_csv(sweep_dir / "aggregate.csv",
              ("eta", "replica", "run_id", "n_events", "woke_all", "ustar",
               "final_time"), aggregate)
    print(f"sweep: {len(aggregate)} runs across {len(cfg.etas)} block widths; "
          f"aggregate in {sweep_dir}/aggregate.csv")
    return 0


# ---------------------------------------------------------------------------
# ppp


def _parse_rect(text: str) -> tuple:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigError(f"--rect expects ZLO,ZHI,S, got {text!r}")
    z_lo, z_hi, s = (float(p) for p in parts)
    return z_lo, z_hi, s


def _cmd_ppp(args) -> int:
    cfg = _load(args)
    etas = _parse_floats(args.eta_list, "--eta-list") if args.eta_list else []
    rects = [_parse_rect(r) for r in args.rect]
    if rects and not etas:
        raise ConfigError("--rect needs --eta-list to compare block widths")
    manifest = build_manifest("ppp", cfg, {"etas": etas, "rects": rects})
    run_dir = _prepare_run_dir(cfg, manifest)
    mu = density_from_spec(cfg.x2_spec, cfg.dx)

    summary, block_rows = [], []
    reports_dir = run_dir / "reports"
    for k in range(cfg.replicas):
        rng = replica_rng(cfg.seed, k)
        j = sample_J(mu, cfg.r_min, rng)
        name = "patterns.jsonl" if cfg.replicas == 1 else f"patterns-{k:04d}.jsonl"
        write_jsonl(run_dir / name, pattern_rows(j))
        summary.append((k, len(j), float(np.max(j.rs)) if len(j) else 0.0))
        if rects:
            report = coupling_report_for_pattern(j, mu, etas, rects)
            reports_dir.mkdir(exist_ok=True)
            write_json(reports_dir / f"coupling-{k:04d}.json", report.to_dict())
        elif etas:
            from .spatial import build_W_from_J
            for eta in etas:
                w, censored = build_W_from_J(j, mu, eta)
                for i, (wv, cv) in enumerate(zip(w, censored)):
                    block_rows.append((k, eta, i + 1, mu.left + eta * (i + 1),
                                       float(wv), bool(cv)))
    write_csv(run_dir / "summary.csv", ("replica", "n_points", "max_mark"), summary)
    if block_rows:
        write_csv(run_dir / "blocks.csv",
                  ("replica", "eta", "index", "position", "w", "censored"),
                  block_rows)
    print(f"ppp: {cfg.replicas} patterns in {run_dir}")
    return 0


# ---------------------------------------------------------------------------
# verify


def _parse_only(text: str | None) -> list | None:
    if not text:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise ConfigError(f"--only expects criterion numbers, got {tok!r}")
    return out or None


def _cmd_verify(args) -> int:
    from . import acceptance

    if args.suite != "acceptance":
        raise ConfigError(f"unknown suite {args.suite!r}; available: acceptance")
    cfg = _load(args)
    only = _parse_only(args.only)
    known = {c.number for c in acceptance.CRITERIA}
    if only and not set(only) <= known:
        raise ConfigError(f"--only lists unknown criteria "
                          f"{sorted(set(only) - known)}; valid: 1..{max(known)}")
    manifest = build_manifest("verify", cfg, {"suite": args.suite,
                                              "only": only or []})
    run_dir = _prepare_run_dir(cfg, manifest)
    reports_dir = run_dir / "reports"
    reports_dir.mkdir(exist_ok=True)

    results = acceptance.run_suite(only=only, progress=print)
    for crit in results:
        write_json(reports_dir / f"criterion-{crit.number:02d}.json", crit.to_dict())
    failed = [c for c in results if not c.passed]
    print(f"verify: {len(results) - len(failed)}/{len(results)} criteria passed; "
          f"reports in {reports_dir}")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
