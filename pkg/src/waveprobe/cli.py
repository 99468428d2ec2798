"""Experiment orchestration: JSON configs, pipeline commands, reproducible runs.

Subcommands
-----------
validate   check the config: geometry, subsonic condition, block parameters
probe      synthesize the probing signal         -> probe.csv
ansatz     geometric-optics boundary trace       -> trace.csv
simulate   spectral solver boundary measurement  -> measurement.csv
invert     reconstruct interface and contrast    -> reconstruction.json/.csv
verify     run the embedded invariant checks     -> verify.json
roundtrip  probe -> trace -> invert -> compare   -> roundtrip.json

Exit codes: 0 success, 1 validation failure, 2 runtime failure,
3 inversion ambiguous (both contrast roots positive).

Every command writes a run_record.json with the config hash and a sha256
manifest of its artifacts.  All artifact files are byte-reproducible for a
fixed config; the run record's timing block is the one intentionally
non-reproducible field.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from waveprobe import ansatz as ansatz_mod
from waveprobe import inversion as inv_mod
from waveprobe import medium as medium_mod
from waveprobe import probe as probe_mod
from waveprobe import solver as solver_mod
from waveprobe.signals import read_signal_csv, write_signal_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_AMBIGUOUS = 3


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    return cfg


class ConfigError(ValueError):
    pass


def build_medium(cfg: dict) -> medium_mod.MediumSpec:
    block = cfg.get("medium")
    if block is None:
        raise ConfigError("missing 'medium' block")
    for key in ("b", "k", "T"):
        if key not in block:
            raise ConfigError(f"medium block missing '{key}'")
    if "trajectory" not in block:
        raise ConfigError("medium block missing 'trajectory'")
    try:
        traj = medium_mod.trajectory_from_config(block["trajectory"], float(block["T"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"trajectory block invalid: {exc}")
    return medium_mod.MediumSpec(b=float(block["b"]), k=float(block["k"]),
                                 T=float(block["T"]), trajectory=traj)


def build_probe(cfg: dict) -> probe_mod.ProbeSignal:
    block = cfg.get("probe")
    if block is None:
        raise ConfigError("missing 'probe' block")
    T = float(cfg["medium"]["T"])
    dt = float(block.get("dt", T / 2**14))
    kind = block.get("kind", "ladder")
    if kind == "ladder":
        return probe_mod.build_probe(
            r0=float(block["r0"]), T=T, dt=dt,
            n_terms=int(block.get("n_terms", 32)),
            tilt=float(block.get("tilt", 20.0)),
            guard=float(block.get("guard", 0.01)),
        )
    if kind == "smooth-pulse":
        return probe_mod.smooth_pulse_probe(
            T=T, dt=dt, center=float(block["center"]), width=float(block["width"]),
            amplitude=float(block.get("amplitude", 1.0)),
        )
    raise ConfigError(f"unknown probe kind: {kind!r}")


def _solver_block(cfg: dict) -> dict:
    return cfg.get("solver", {})


def _inversion_block(cfg: dict) -> dict:
    return cfg.get("inversion", {})


# ---------------------------------------------------------------------------
# Run record
# ---------------------------------------------------------------------------

def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def write_run_record(out_dir: Path, command: str, cfg: dict, artifacts: list[Path],
                     timings: dict, checks: dict) -> None:
    record = {
        "command": command,
        "config_hash": config_hash(cfg),
        "manifest": {p.name: _sha256_file(p) for p in sorted(artifacts)},
        "checks": checks,
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    (out_dir / "run_record.json").write_text(
        json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(cfg: dict, out_dir: Path, jobs: int) -> int:
    report: dict = {"config_hash": config_hash(cfg)}
    status = EXIT_OK
    try:
        spec = build_medium(cfg)
        sub = medium_mod.validate_subsonic(spec)
        report["subsonic"] = {
            "max_slope": sub.max_slope, "bound": sub.bound,
            "margin": sub.margin, "passed": sub.passed,
        }
        if not sub.passed:
            status = EXIT_VALIDATION
        probe = build_probe(cfg)
        report["probe"] = {"kind": probe.origin, "samples": len(probe.values),
                           "dt": probe.dt, "r0": probe.r0}
        n_modes = int(_solver_block(cfg).get("n_modes", 256))
        if n_modes < 4:
            raise ConfigError("solver n_modes must be >= 4")
        report["solver"] = {"n_modes": n_modes}
    except (ConfigError, medium_mod.TrajectoryRangeError, ValueError) as exc:
        report["error"] = str(exc)
        status = EXIT_VALIDATION
    report["status"] = "ok" if status == EXIT_OK else "failed"
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(out_dir / "validate.json", report)
    print(json.dumps(report, sort_keys=True, indent=2))
    return status


def cmd_probe(cfg: dict, out_dir: Path, jobs: int) -> int:
    t0 = time.perf_counter()
    probe = build_probe(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "probe.csv"
    write_signal_csv(path, probe.values, probe.dt, value_name="f")
    meta = {
        "origin": probe.origin, "r0": probe.r0, "T": probe.T, "dt": probe.dt,
        "medium_hash": config_hash(cfg.get("medium", {})),
    }
    if probe.ladder is not None:
        meta["ladder"] = {
            "positions": probe.ladder.positions.tolist(),
            "weights": probe.ladder.weights.tolist(),
            "exponents": probe.ladder.exponents.tolist(),
        }
    meta_path = out_dir / "probe_meta.json"
    _dump_json(meta_path, meta)
    write_run_record(out_dir, "probe", cfg, [path, meta_path],
                     {"probe": time.perf_counter() - t0}, {})
    print(f"wrote {path}")
    return EXIT_OK


def cmd_ansatz(cfg: dict, out_dir: Path, jobs: int) -> int:
    t0 = time.perf_counter()
    spec = build_medium(cfg)
    probe = build_probe(cfg)
    field = ansatz_mod.build_ansatz(spec, probe)
    trace = ansatz_mod.boundary_trace(field)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "trace.csv"
    write_signal_csv(path, trace.values, trace.dt, value_name="g")
    meta_path = out_dir / "trace_meta.json"
    mu0 = medium_mod.first_echo_time(spec)
    _dump_json(meta_path, {
        "kind": "ansatz-trace", "epsilon": field.epsilon, "first_echo": mu0,
        "medium_hash": config_hash(cfg.get("medium", {})),
    })
    write_run_record(out_dir, "ansatz", cfg, [path, meta_path],
                     {"ansatz": time.perf_counter() - t0}, {})
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(cfg: dict, out_dir: Path, jobs: int) -> int:
    t0 = time.perf_counter()
    spec = build_medium(cfg)
    probe = build_probe(cfg)
    blk = _solver_block(cfg)
    basis = solver_mod.SpectralBasis(n_modes=int(blk.get("n_modes", 256)), b=spec.b)
    lifted = solver_mod.lift_boundary_data(spec, probe, basis)
    dt_ode = blk.get("dt_ode")
    traj = solver_mod.integrate(spec, lifted, basis,
                                dt_ode=None if dt_ode is None else float(dt_ode))
    meas = solver_mod.measure_boundary(
        spec, probe, traj, basis,
        trace_filter=blk.get("trace_filter", "fejer"),
        metadata={"medium_hash": config_hash(cfg.get("medium", {}))},
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "measurement.csv"
    write_signal_csv(path, meas.values, meas.dt, value_name="g")
    meta_path = out_dir / "measurement_meta.json"
    _dump_json(meta_path, meas.metadata)
    write_run_record(out_dir, "simulate", cfg, [path, meta_path],
                     {"simulate": time.perf_counter() - t0}, {})
    print(f"wrote {path}")
    return EXIT_OK


def _reject_unit_contrast(cfg: dict) -> None:
    if abs(float(cfg["medium"]["k"]) - 1.0) < 1e-12:
        raise ConfigError("inversion requires a genuine contrast (k != 1)")


def cmd_invert(cfg: dict, out_dir: Path, jobs: int, measurement: str,
               override_hash: bool = False) -> int:
    t0 = time.perf_counter()
    _reject_unit_contrast(cfg)
    spec = build_medium(cfg)
    probe = build_probe(cfg)
    _, values, dt = read_signal_csv(measurement)
    sidecar = Path(measurement).with_name(Path(measurement).stem + "_meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        expected = config_hash(cfg.get("medium", {}))
        got = meta.get("medium_hash")
        if got is not None and got != expected and not override_hash:
            print(f"measurement medium hash {got[:12]} != config {expected[:12]} "
                  "(use --override-hash to proceed)", file=sys.stderr)
            return EXIT_VALIDATION
    meas = solver_mod.Measurement(values=values, dt=dt)
    blk = _inversion_block(cfg)
    recon = inv_mod.run_inversion(
        meas, probe,
        window_count=int(blk.get("window_count", 48)),
        degree=int(blk.get("degree", 3)),
        jobs=jobs,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    rec_path = out_dir / "reconstruction.json"
    payload = recon.to_dict()
    if recon.verdict == "horizon-before-echo":
        payload["verdict_text"] = "horizon at or before first echo: T <= mu0"
    _dump_json(rec_path, payload)
    artifacts = [rec_path]
    if recon.t is not None:
        a_true = spec.interface(recon.t)
        csv_path = out_dir / "reconstruction.csv"
        lines = ["t,a_true,a_hat"]
        lines.extend(f"{t:.17g},{at:.17g},{ah:.17g}"
                     for t, at, ah in zip(recon.t, a_true, recon.a))
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        artifacts.append(csv_path)
    write_run_record(out_dir, "invert", cfg, artifacts,
                     {"invert": time.perf_counter() - t0},
                     {"verdict": recon.verdict})
    print(json.dumps({"verdict": recon.verdict,
                      "k_hat": None if recon.contrast is None else recon.contrast.k_hat},
                     sort_keys=True))
    return EXIT_AMBIGUOUS if recon.verdict == "ambiguous" else EXIT_OK


def cmd_verify(cfg: dict, out_dir: Path, jobs: int) -> int:
    """Algebraic identity and consistency suites on the configured medium."""
    t0 = time.perf_counter()
    spec = build_medium(cfg)
    maps = medium_mod.travel_time_maps(spec)
    t = np.linspace(0.0, spec.T, 512)
    co = medium_mod.reflection_coefficients(spec, t)
    p0 = np.max(np.abs(co.reflection * co.echo_stretch
                       - co.transmission * co.transmitted_stretch + 1.0))
    p1 = np.max(np.abs(co.reflection + spec.k * co.transmission - 1.0))
    mono = {
        "emission": bool(np.all(np.diff(maps.emission(t)) > 0)),
        "echo": bool(np.all(np.diff(maps.echo(t)) > 0)),
        "transmitted": bool(np.all(np.diff(maps.transmitted(t)) > 0)),
    }
    probes = np.linspace(0.1, spec.T - 0.1, 7)
    inv_err = float(np.max(np.abs(maps.echo_inverse(maps.echo(probes)) - probes)))
    arrivals = [medium_mod.first_arrival(spec, s) for s in np.linspace(0, spec.T / 2, 5)]
    hit_increasing = bool(np.all(np.diff([fa.hit_time for fa in arrivals]) > 0))
    consistency = float(max(
        abs(maps.echo(fa.hit_time) - fa.return_time) for fa in arrivals))
    checks = {
        "identity_reflection_stretch": {"max_residual": float(p0), "passed": bool(p0 < 1e-12)},
        "identity_reflection_transmission": {"max_residual": float(p1), "passed": bool(p1 < 1e-12)},
        "maps_monotone": {"passed": all(mono.values()), **mono},
        "inverse_roundtrip": {"max_error": inv_err, "passed": bool(inv_err < 1e-8)},
        "first_arrival_increasing": {"passed": hit_increasing},
        "echo_of_hit_equals_return": {"max_error": consistency,
                                      "passed": bool(consistency < 1e-9)},
    }
    ok = all(c["passed"] for c in checks.values())
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "verify.json"
    _dump_json(path, checks)
    write_run_record(out_dir, "verify", cfg, [path],
                     {"verify": time.perf_counter() - t0},
                     {"all_passed": ok})
    print(json.dumps(checks, sort_keys=True, indent=2))
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_roundtrip(cfg: dict, out_dir: Path, jobs: int) -> int:
    t_start = time.perf_counter()
    _reject_unit_contrast(cfg)
    spec = build_medium(cfg)
    sub = medium_mod.validate_subsonic(spec)
    if not sub.passed:
        print("subsonic validation failed", file=sys.stderr)
        return EXIT_VALIDATION
    timings = {}
    t0 = time.perf_counter()
    probe = build_probe(cfg)
    timings["probe"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    field = ansatz_mod.build_ansatz(spec, probe)
    trace = ansatz_mod.boundary_trace(field)
    timings["ansatz"] = time.perf_counter() - t0
    meas = solver_mod.Measurement(values=trace.values, dt=trace.dt,
                                  metadata={"source": "ansatz-trace"})
    blk = _inversion_block(cfg)
    t0 = time.perf_counter()
    recon = inv_mod.run_inversion(
        meas, probe,
        window_count=int(blk.get("window_count", 48)),
        degree=int(blk.get("degree", 3)),
        jobs=jobs,
    )
    timings["invert"] = time.perf_counter() - t0

    report: dict = {"verdict": recon.verdict, "config_hash": config_hash(cfg)}
    if recon.t is not None:
        a_true = np.asarray(spec.interface(recon.t), float)
        err_a = float(np.max(np.abs(a_true - recon.a)))
        report["max_interface_error"] = err_a
        report["interface_error_rel_b"] = err_a / spec.b
        mu0_true = medium_mod.first_echo_time(spec)
        report["mu0_true"] = mu0_true
        report["mu0_hat"] = recon.mu0
        report["mu0_error"] = abs(recon.mu0 - mu0_true)
    if recon.contrast is not None:
        report["k_true"] = spec.k
        report["k_low"] = recon.contrast.k_low
        report["k_high"] = recon.contrast.k_high
        report["k_hat"] = recon.contrast.k_hat
        if recon.contrast.k_hat is not None:
            report["k_error_rel"] = abs(recon.contrast.k_hat - spec.k) / spec.k
        report["root_identity_residual"] = recon.contrast.identity_residual
        report["root_equation_residual"] = recon.contrast.equation_residual
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "roundtrip.json"
    _dump_json(path, report)
    rec_path = out_dir / "reconstruction.json"
    _dump_json(rec_path, recon.to_dict())
    timings["total"] = time.perf_counter() - t_start
    write_run_record(out_dir, "roundtrip", cfg, [path, rec_path], timings,
                     {"verdict": recon.verdict})
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_AMBIGUOUS if recon.verdict == "ambiguous" else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waveprobe",
        description="moving-interface wave laboratory: simulate, probe, invert",
    )
    parser.add_argument("command",
                        choices=["validate", "probe", "ansatz", "simulate",
                                 "invert", "verify", "roundtrip"])
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for window sweeps")
    parser.add_argument("--measurement", default=None,
                        help="measurement CSV (invert)")
    parser.add_argument("--override-hash", action="store_true",
                        help="accept a measurement whose medium hash mismatches")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out if args.out is not None else cfg.get("output", "out"))
    try:
        if args.command == "validate":
            return cmd_validate(cfg, out_dir, args.jobs)
        if args.command == "probe":
            return cmd_probe(cfg, out_dir, args.jobs)
        if args.command == "ansatz":
            return cmd_ansatz(cfg, out_dir, args.jobs)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, args.jobs)
        if args.command == "invert":
            if args.measurement is None:
                print("invert needs --measurement", file=sys.stderr)
                return EXIT_VALIDATION
            return cmd_invert(cfg, out_dir, args.jobs, args.measurement,
                              override_hash=args.override_hash)
        if args.command == "verify":
            return cmd_verify(cfg, out_dir, args.jobs)
        if args.command == "roundtrip":
            return cmd_roundtrip(cfg, out_dir, args.jobs)
    except (ConfigError, medium_mod.TrajectoryRangeError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (inv_mod.InversionError, solver_mod.StabilityError, ValueError) as exc:
        print(f"runtime failure [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
