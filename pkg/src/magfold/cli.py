"""Command-line entry point.

Subcommands cover scenario simulation, the built-in steering sequence,
energy landscapes, squeeze and calibration runs, the wireless-power design
calculators, and the live teleoperation server.  Exit codes: 0 success,
2 validation/usage error, 3 simulation divergence.  All file outputs land
in a per-run directory under ``--out`` (default ``./runs``, overridable
with the ``MGOR_OUT_DIR`` environment variable); primary result documents
are timestamp-free so identical invocations produce byte-identical files,
and wall-clock metadata is segregated into ``metadata.json``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (
    Environment,
    SimParams,
    accordion_config,
    end_gap,
    flat_config,
    locked_config,
    total_energy,
)
from .control import (
    ControlScript,
    bench_environment,
    beta_start,
    execute,
    fig3_script,
)
from .errors import ConvergenceError, DivergenceError, ValidationError
from .geometry import rotation_vector
from .scenarios import (
    calibrate_stiffness,
    calibrated_model,
    self_assembly_gap,
    squeeze_test,
    unfold_scenario,
)
from .serialize import (
    config_to_dict,
    environment_to_dict,
    model_to_dict,
    params_to_dict,
    scenario_from_dict,
)
from .states import (
    LandscapeSlice,
    classify,
    energy_landscape,
    export_landscape_csv,
    landscape_minima,
)
from .wpt import (
    CouplingModel,
    LedLoad,
    design_receiver,
    fit_coupling,
    led_budget,
    required_capacitance,
    resonant_frequency,
)

PAPER_COUPLING_POINTS = ((0.0, 58.0), (10.0, 44.2), (20.0, 25.2))


def _out_root(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get("MGOR_OUT_DIR", "runs"))


def _run_dir(args, name: str) -> Path:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S.%f")
    d = _out_root(args) / f"{name}-{stamp}"
    d.mkdir(parents=True, exist_ok=False)
    return d


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_metadata(run_dir: Path, argv) -> None:
    _write_json(run_dir / "metadata.json", {
        "timestamp_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "package_version": __version__,
        "argv": list(argv),
    })


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def write_trajectory_csv(path: Path, model, samples) -> None:
    """Trajectory table: time, generalized coordinates, gap, label, energies.

    Coordinates are base position (3), base rotation vector (3), then the
    hinge angles; the magnetic column sums the internal and controller
    terms.
    """
    n_q = 6 + model.n_hinges
    header = ["t"] + [f"q{i}" for i in range(n_q)] + [
        "end_gap_m", "state", "E_elastic", "E_mag", "E_total",
    ]
    lines = [",".join(header)]
    for s in samples:
        qv = np.concatenate([
            s.config.base_pose.position,
            rotation_vector(s.config.base_pose.rotation),
            s.config.hinge_angles,
        ])
        e = s.energy
        row = ([_fmt(s.t)] + [_fmt(v) for v in qv]
               + [_fmt(s.end_gap), s.label.value,
                  _fmt(e.elastic), _fmt(e.internal_magnetic + e.controller_magnetic),
                  _fmt(e.total)])
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _unfold_samples(model, result, environment):
    """Adapt unfold trajectory samples to the trajectory CSV writer."""
    from .control import TrajectorySample
    from .states import moment_alignment

    env = environment or Environment()
    out = []
    for t, q in result.trajectory:
        out.append(TrajectorySample(
            t, q, classify(model, q), end_gap(model, q),
            moment_alignment(model, q), total_energy(model, q, env),
        ))
    return out


# ---------------------------------------------------------------------------
# subcommand handlers

def _load_scenario(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"scenario file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def _initial_config(model, init):
    if init is None:
        return flat_config(model)
    if isinstance(init, dict):
        preset = init.get("preset")
        presets = {
            "flat": flat_config,
            "beta": beta_start,
            "accordion": accordion_config,
            "locked": locked_config,
        }
        if preset not in presets:
            raise ValidationError(
                f"initial_config preset must be one of {sorted(presets)}, got {preset!r}"
            )
        extra = {k: v for k, v in init.items() if k != "preset"}
        if extra:
            raise ValidationError(f"initial_config: unknown fields {sorted(extra)}")
        return presets[preset](model)
    return init


def cmd_simulate(args) -> int:
    sc = _load_scenario(args.scenario)
    model = sc["model"]
    params = sc["params"]
    environment = sc["environment"]
    options = dict(sc["scenario"])
    kind = options.pop("kind")
    q0 = _initial_config(model, sc["initial_config"])
    run = _run_dir(args, f"simulate-{kind}")
    _write_metadata(run, sys.argv[1:])
    inputs = {
        "model": model_to_dict(model),
        "initial_config": config_to_dict(q0),
        "environment": None if environment is None else environment_to_dict(environment),
        "params": None if params is None else params_to_dict(params),
        "scenario": {"kind": kind, **options},
    }
    _write_json(run / "inputs.json", inputs)

    if kind == "relax":
        known = {"max_time"}
        if set(options) - known:
            raise ValidationError(f"relax scenario: unknown options {sorted(set(options) - known)}")
        result = unfold_scenario(model, q0, params=params,
                                 max_time=float(options.get("max_time", 5.0)),
                                 environment=environment)
        samples = _unfold_samples(model, result, environment)
        write_trajectory_csv(run / "trajectory.csv", model, samples)
        _write_json(run / "report.json", {
            "final_label": result.final_label.value,
            "settled": result.settled,
            "final_end_gap_m": end_gap(model, result.final_config),
        })
        print(f"relax: final state {result.final_label.value} (results in {run})")
        return 0
    if kind == "script":
        script_doc = options.pop("script", None)
        if options:
            raise ValidationError(f"script scenario: unknown options {sorted(options)}")
        script = fig3_script() if script_doc is None else ControlScript.from_dict(script_doc)
        samples, report = execute(script, model, q0, params=params, environment=environment)
        write_trajectory_csv(run / "trajectory.csv", model, samples)
        _write_json(run / "report.json", report.to_dict())
        print(f"script '{script.name}': final state {report.final_label.value} (results in {run})")
        return 0
    raise ValidationError(
        f"simulate handles kinds 'relax' and 'script'; use the dedicated "
        f"subcommand for {kind!r}"
    )


def cmd_sequence(args) -> int:
    model = calibrated_model()
    if args.script == "fig3":
        script = fig3_script()
    else:
        p = Path(args.script)
        if not p.exists():
            raise ValidationError(f"script file not found: {args.script}")
        script = ControlScript.from_json(p.read_text())
    q0 = beta_start(model)
    environment = bench_environment()
    params = SimParams()
    run = _run_dir(args, f"sequence-{script.name}")
    _write_metadata(run, sys.argv[1:])
    _write_json(run / "inputs.json", {
        "model": model_to_dict(model),
        "initial_config": config_to_dict(q0),
        "environment": environment_to_dict(environment),
        "params": params_to_dict(params),
        "script": script.to_dict(),
    })
    samples, report = execute(script, model, q0, params=params, environment=environment)
    write_trajectory_csv(run / "trajectory.csv", model, samples)
    _write_json(run / "report.json", report.to_dict())
    print(f"sequence '{script.name}': final state {report.final_label.value}, "
          f"{report.flip_events} flip events, min gap "
          f"{report.min_end_gap * 1e3:.2f} mm (results in {run})")
    return 0


def cmd_landscape(args) -> int:
    sc = _load_scenario(args.scenario)
    model = sc["model"]
    options = dict(sc["scenario"])
    kind = options.pop("kind")
    if kind != "landscape":
        raise ValidationError(f"landscape expects a scenario of kind 'landscape', got {kind!r}")
    known = {"groups", "ranges", "resolution"}
    if set(options) - known:
        raise ValidationError(f"landscape scenario: unknown options {sorted(set(options) - known)}")
    slice_kwargs = {}
    if "groups" in options:
        slice_kwargs["groups"] = tuple(tuple(g) for g in options["groups"])
    if "ranges" in options:
        slice_kwargs["ranges"] = tuple(tuple(r) for r in options["ranges"])
    if "resolution" in options:
        slice_kwargs["resolution"] = int(options["resolution"])
    sl = LandscapeSlice(**slice_kwargs)
    run = _run_dir(args, "landscape")
    _write_metadata(run, sys.argv[1:])
    _write_json(run / "inputs.json", {
        "model": model_to_dict(model),
        "scenario": {"kind": "landscape", **{k: options.get(k) for k in sorted(options)}},
    })
    land = energy_landscape(model, sl, sc["environment"], sc["params"])
    export_landscape_csv(land, run / "landscape.csv")
    minima = landscape_minima(model, land)
    a0, a1 = sl.axis_values(0), sl.axis_values(1)
    _write_json(run / "minima.json", [
        {
            "cell": [i, j],
            "axis_angles_rad": [a0[i], a1[j]],
            "energy_J": e,
            "label": lab.value,
        }
        for (i, j), e, lab in minima
    ])
    labels = sorted({lab.value for _, _, lab in minima})
    print(f"landscape: {len(minima)} local minima, labels {labels} (results in {run})")
    return 0


def cmd_squeeze(args) -> int:
    model = calibrated_model()
    qg = locked_config(model)
    report = squeeze_test(model, qg, args.force, args.axis, align=not args.edge_on)
    run = _run_dir(args, f"squeeze-{args.axis}-{args.force:g}N")
    _write_metadata(run, sys.argv[1:])
    _write_json(run / "inputs.json", {
        "model": model_to_dict(model),
        "initial_config": config_to_dict(qg),
        "scenario": {"kind": "squeeze", "force": args.force, "axis": args.axis,
                     "edge_on": bool(args.edge_on)},
    })
    _write_json(run / "squeeze.json", report.to_dict())
    print(f"squeeze {args.force:g} N along {args.axis}: recovered={report.recovered}, "
          f"max deflection {report.max_hinge_deflection:.4f} rad (results in {run})")
    return 0


def cmd_calibrate(args) -> int:
    from .chain import ChainModel

    model = ChainModel()
    result = calibrate_stiffness(model, target_gap=args.target_gap * 1e-3)
    run = _run_dir(args, "calibrate")
    _write_metadata(run, sys.argv[1:])
    _write_json(run / "inputs.json", {
        "model": model_to_dict(model),
        "scenario": {"kind": "calibrate", "target_gap_mm": args.target_gap},
    })
    _write_json(run / "calibration.json", result.to_dict())
    print(f"calibrated stiffness {result.hinge_stiffness:.5g} N*m/rad, "
          f"snap gap {result.achieved_gap * 1e3:.2f} mm in {result.iterations} "
          f"iterations (results in {run})")
    return 0


def _coupling_from_args(args) -> CouplingModel:
    pts = args.point or [f"{d}:{v}" for d, v in PAPER_COUPLING_POINTS]
    try:
        pairs = [tuple(float(x) for x in p.split(":")) for p in pts]
    except ValueError as exc:
        raise ValidationError(f"coupling points must be 'mm:volts' pairs: {exc}") from exc
    if any(len(p) != 2 for p in pairs):
        raise ValidationError("coupling points must be 'mm:volts' pairs")
    return fit_coupling([p[0] for p in pairs], [p[1] for p in pairs])


def cmd_wpt(args) -> int:
    doc: dict
    if args.wpt_command == "resonance":
        f = resonant_frequency(args.l_uh * 1e-6, args.c_uf * 1e-6)
        c_alt = None
        print(f"resonant frequency: {f / 1e3:.1f} kHz")
        if args.drive_khz is not None:
            c_alt = required_capacitance(args.l_uh * 1e-6, args.drive_khz * 1e3)
            print(f"capacitance for {args.drive_khz:g} kHz drive: {c_alt * 1e6:.4g} uF")
        doc = {"inductance_uh": args.l_uh, "capacitance_uf": args.c_uf,
               "resonant_hz": f,
               "drive_khz": args.drive_khz,
               "required_capacitance_uf": None if c_alt is None else c_alt * 1e6}
    elif args.wpt_command == "design":
        d = design_receiver(
            mean_radius=args.radius_in * 0.0254,
            winding_depth=args.depth_in * 0.0254,
            turns=args.turns,
            double_sided=not args.single,
            capacitance=args.c_uf * 1e-6,
            drive_frequency=None if args.drive_khz is None else args.drive_khz * 1e3,
            peak_flux=args.flux_uwb * 1e-6,
        )
        print(f"coil: r={args.radius_in:g} in, depth={args.depth_in:g} in, "
              f"{args.turns:g} turns, {'single' if args.single else 'double'}-sided")
        print(f"inductance: {d.inductance * 1e6:.4g} uH")
        print(f"resonance with {args.c_uf:g} uF: {d.resonant_hz / 1e3:.1f} kHz")
        print(f"peak induced voltage at {args.flux_uwb:g} uWb flux swing: {d.peak_voltage:.3g} V")
        doc = {
            "coil": {"mean_radius_in": args.radius_in, "winding_depth_in": args.depth_in,
                     "turns": args.turns, "double_sided": not args.single},
            "inductance_uh": d.inductance * 1e6,
            "capacitance_uf": args.c_uf,
            "resonant_hz": d.resonant_hz,
            "peak_voltage_v": d.peak_voltage,
        }
    elif args.wpt_command == "coupling":
        cm = _coupling_from_args(args)
        print(f"V(d) = {cm.a:.4g} d^2 + {cm.b:.4g} d + {cm.c:.4g}  (d in mm, V in volts)")
        print(f"span: {cm.span[0]:g} .. {cm.span[1]:g} mm, strictly decreasing")
        doc = {"a": cm.a, "b": cm.b, "c": cm.c, "span_mm": list(cm.span)}
    else:  # budget
        cm = _coupling_from_args(args)
        load = LedLoad(count=args.count, led_power=args.led_mw * 1e-3)
        lit, brightness = led_budget(cm, args.distance_mm, load, args.source_w)
        print(f"at {args.distance_mm:g} mm: {lit} of {load.count} LEDs lit, "
              f"brightness fraction {brightness:.3f}")
        doc = {"distance_mm": args.distance_mm, "source_power_w": args.source_w,
               "led_count": load.count, "led_power_w": load.led_power,
               "lit": lit, "brightness": brightness}
    if args.json is not None:
        _write_json(Path(args.json), doc)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .teleop import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="magfold",
        description="Simulation lab for a magnetically steered folding-chain robot.",
    )
    ap.add_argument("--version", action="version", version=f"magfold {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out", default=None,
                       help="output root directory (default ./runs or $MGOR_OUT_DIR)")

    p = sub.add_parser("simulate", help="run a scenario file (kinds: relax, script)")
    p.add_argument("scenario", help="path to a scenario JSON document")
    add_out(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sequence", help="execute a steering script from the flat state")
    p.add_argument("--script", default="fig3",
                   help="'fig3' for the built-in sequence or a script JSON path")
    add_out(p)
    p.set_defaults(handler=cmd_sequence)

    p = sub.add_parser("landscape", help="scan an energy landscape slice")
    p.add_argument("scenario", help="path to a scenario JSON document of kind 'landscape'")
    add_out(p)
    p.set_defaults(handler=cmd_landscape)

    p = sub.add_parser("squeeze", help="plate-squeeze recovery test on the latched loop")
    p.add_argument("--force", type=float, required=True, help="commanded plate force in N")
    p.add_argument("--axis", choices=("x", "z"), required=True, help="plate axis")
    p.add_argument("--edge-on", action="store_true",
                   help="keep the fold plane edge-on to the plates instead of face-on")
    add_out(p)
    p.set_defaults(handler=cmd_squeeze)

    p = sub.add_parser("calibrate", help="calibrate hinge stiffness to a snap-gap target")
    p.add_argument("--target-gap", type=float, default=5.0, help="target snap gap in mm")
    add_out(p)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("wpt", help="wireless power design calculators")
    wsub = p.add_subparsers(dest="wpt_command", required=True)

    w = wsub.add_parser("resonance", help="LC resonance and capacitor sizing")
    w.add_argument("--l-uh", type=float, required=True, help="inductance in uH")
    w.add_argument("--c-uf", type=float, required=True, help="capacitance in uF")
    w.add_argument("--drive-khz", type=float, default=None,
                   help="also size the capacitor for this drive frequency")
    w.add_argument("--json", default=None, help="write the computed values to this JSON file")
    w.set_defaults(handler=cmd_wpt)

    w = wsub.add_parser("design", help="receiver coil + tank design summary")
    w.add_argument("--radius-in", type=float, default=0.5, help="mean coil radius in inches")
    w.add_argument("--depth-in", type=float, default=0.1, help="radial winding depth in inches")
    w.add_argument("--turns", type=float, default=4.0)
    w.add_argument("--single", action="store_true", help="single-sided coil (default double)")
    w.add_argument("--c-uf", type=float, default=1.0)
    w.add_argument("--drive-khz", type=float, default=None)
    w.add_argument("--flux-uwb", type=float, default=1.0, help="peak flux in uWb")
    w.add_argument("--json", default=None)
    w.set_defaults(handler=cmd_wpt)

    w = wsub.add_parser("coupling", help="fit the voltage-vs-distance coupling curve")
    w.add_argument("--point", action="append", default=None, metavar="MM:VOLTS",
                   help="measurement point (repeatable; default: built-in bench points)")
    w.add_argument("--json", default=None)
    w.set_defaults(handler=cmd_wpt)

    w = wsub.add_parser("budget", help="LED illumination budget at a distance")
    w.add_argument("--distance-mm", type=float, required=True)
    w.add_argument("--source-w", type=float, default=1.2, help="power drawn at contact")
    w.add_argument("--count", type=int, default=15, help="number of LEDs")
    w.add_argument("--led-mw", type=float, default=80.0, help="per-LED power in mW")
    w.add_argument("--point", action="append", default=None, metavar="MM:VOLTS")
    w.add_argument("--json", default=None)
    w.set_defaults(handler=cmd_wpt)

    p = sub.add_parser("serve", help="run the live teleoperation service")
    p.add_argument("--port", type=int, default=8090)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(handler=cmd_serve)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, ConvergenceError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
