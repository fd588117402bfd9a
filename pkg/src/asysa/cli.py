"""``asysa`` command line: optimize, simulate, sweep, report.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 functional
check failure (simulated GEMM differs from the reference product).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .charts import energy_report_svg
from .config import ConfigError, DataSource, FloorplanSection, LayerEntry, RunConfig, load_config
from .model import (
    ActivityProfile,
    ArrayConfig,
    BracketError,
    clamped_aspect_ratio,
    numeric_min_aspect_ratio,
    required_accumulator_width,
    round_ratio,
    savings_at_ratio,
    solve_geometry,
    weighted_cost,
)
from .power import MODEL_CAVEAT, CalibratedFraction, build_energy_report
from .sim import BusActivity, aggregate_activity, reference_matmul, run_ws_matmul
from .workload import (
    IntMatrix,
    ShapeError,
    TraceParseError,
    WidthError,
    im2col,
    load_trace,
    lower_conv_to_gemm,
    synth_activations,
    synth_weights,
)

log = logging.getLogger("asysa")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FUNCTIONAL = 4

SWEEP_AXES = ("ratio", "zero_fraction", "bus_width")


class DataError(RuntimeError):
    pass


class MissingActivityError(ConfigError):
    def __init__(self):
        super().__init__(
            "activity",
            "no switching activity available: run 'asysa simulate' and pass --activity <simulate.json>, "
            "or set \"activity\": {\"a_h\": ..., \"a_v\": ...} in the config",
        )


class FunctionalMismatch(RuntimeError):
    def __init__(self, layer: str, index: tuple[int, int], got: int, expected: int):
        super().__init__(
            f"layer {layer}: simulated output differs from reference at [{index[0]}, {index[1]}]: "
            f"got {got}, expected {expected}"
        )
        self.layer = layer
        self.index = index
        self.got = got
        self.expected = expected


# Files ---------------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _threads() -> int:
    raw = os.environ.get("ASYSA_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError("ASYSA_THREADS", f"expected a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("ASYSA_THREADS", f"expected a positive integer, got {raw!r}")
    return value


# Floorplan choice ------------------------------------------------------------


def floorplan_summary(
    cfg: ArrayConfig, profile: ActivityProfile, fp: FloorplanSection, interconnect_fraction: float
) -> dict:
    """Optimal ratio (raw, rounded, used), PE geometry and model savings."""
    raw = clamped_aspect_ratio(cfg, profile, fp.max_ratio)
    load_h, load_v = cfg.bus_h * profile.a_h, cfg.bus_v * profile.a_v
    clamped = load_h == 0 or load_v == 0 or not (1 / fp.max_ratio < load_v / load_h < fp.max_ratio)
    rounded = round_ratio(raw)
    if fp.ratio_override is not None:
        used = fp.ratio_override
    elif fp.ratio_rounding:
        used = rounded
    else:
        used = raw
    geometry = solve_geometry(fp.area, used)
    numeric = None
    if not clamped:
        try:
            numeric = numeric_min_aspect_ratio(cfg, profile, fp.area, 1 / fp.max_ratio, fp.max_ratio)
        except BracketError:
            numeric = None
    return {
        "bus_h": cfg.bus_h,
        "bus_v": cfg.bus_v,
        "a_h": profile.a_h,
        "a_v": profile.a_v,
        "ratio_raw": raw,
        "ratio_rounded": rounded,
        "ratio": used,
        "ratio_numeric_check": numeric,
        "clamped": clamped,
        "geometry": {"width": geometry.width, "height": geometry.height, "area": fp.area},
        "model_savings": savings_at_ratio(cfg, profile, used),
        "model_savings_optimal": savings_at_ratio(cfg, profile, raw),
        "model_total_savings": interconnect_fraction * savings_at_ratio(cfg, profile, used),
    }


def _settings_dict(config: RunConfig) -> dict:
    fp = config.floorplan
    return {
        "seed": config.seed,
        "spatial_divisor": config.spatial_divisor,
        "include_weight_preload": config.include_weight_preload,
        "floorplan": {
            "area": fp.area,
            "ratio_override": fp.ratio_override,
            "ratio_rounding": fp.ratio_rounding,
            "max_ratio": fp.max_ratio,
        },
        "interconnect_fraction": config.interconnect_fraction,
        "activity_override": None
        if config.activity is None
        else {"a_h": config.activity.a_h, "a_v": config.activity.a_v},
    }


def _array_dict(cfg: ArrayConfig) -> dict:
    return {"rows": cfg.rows, "cols": cfg.cols, "bus_h": cfg.bus_h, "bus_v": cfg.bus_v}


# Simulation ------------------------------------------------------------------


@dataclass
class LayerOutcome:
    record: dict | None = None
    error: str | None = None
    mismatch: FunctionalMismatch | None = None


def _layer_inputs(entry: LayerEntry, spec, index: int, cfg: ArrayConfig, config: RunConfig) -> IntMatrix:
    gemm = lower_conv_to_gemm(spec)
    src = entry.data
    if src.kind == "synthetic":
        in_h, in_w = spec.input_size()
        fmap = synth_activations(
            spec.in_channels, in_h * in_w, src.zero_fraction, cfg.bus_h, config.layer_seed(index, 0, src.seed)
        )
        return im2col(fmap, spec)
    mat = load_trace(src.path)
    if mat.signed:
        raise DataError(f"activation trace {src.path} is signed; activations must be unsigned")
    if mat.bits > cfg.bus_h:
        raise DataError(f"activation trace {src.path} is {mat.bits}-bit, wider than the {cfg.bus_h}-bit bus")
    if src.layout == "fmap":
        return im2col(mat, spec)
    if mat.shape != (gemm.m_rows, gemm.k_depth):
        raise ShapeError(f"trace {src.path} has shape {mat.shape}, expected ({gemm.m_rows}, {gemm.k_depth})")
    return mat


def _layer_weights(entry: LayerEntry, spec, index: int, cfg: ArrayConfig, config: RunConfig) -> IntMatrix:
    gemm = lower_conv_to_gemm(spec)
    src = entry.weights
    if src.kind == "synthetic":
        return synth_weights(gemm.k_depth, gemm.n_cols, cfg.bus_h, config.layer_seed(index, 1, src.seed))
    mat = load_trace(src.path)
    if not mat.signed or mat.bits > cfg.bus_h:
        raise DataError(f"weight trace {src.path} must be signed and at most {cfg.bus_h} bits")
    if mat.shape != (gemm.k_depth, gemm.n_cols):
        raise ShapeError(f"trace {src.path} has shape {mat.shape}, expected ({gemm.k_depth}, {gemm.n_cols})")
    return mat


def simulate_layer(config: RunConfig, index: int, entry: LayerEntry) -> LayerOutcome:
    cfg = config.array_config
    spec = entry.spec.scaled(config.spatial_divisor)
    try:
        a = _layer_inputs(entry, spec, index, cfg, config)
        w = _layer_weights(entry, spec, index, cfg, config)
    except (OSError, TraceParseError, WidthError, ShapeError, DataError) as exc:
        return LayerOutcome(error=f"{type(exc).__name__}: {exc}")

    log.info("layer %s: GEMM %dx%dx%d", spec.name, a.rows, a.cols, w.cols)
    result = run_ws_matmul(a, w, cfg, include_weight_preload=config.include_weight_preload)
    expected = reference_matmul(a, w)
    diff = result.output.data != expected.data
    if diff.any():
        r, c = (int(i) for i in np.argwhere(diff)[0])
        return LayerOutcome(
            mismatch=FunctionalMismatch(spec.name, (r, c), int(result.output.data[r, c]), int(expected.data[r, c]))
        )
    act = result.activity
    record = {
        "name": spec.name,
        "K": spec.kernel,
        "H": spec.out_height,
        "W": spec.out_width,
        "C": spec.in_channels,
        "M": spec.out_channels,
        "m": a.rows,
        "k": a.cols,
        "n": w.cols,
        "tiles": result.tiles,
        "cycles": result.cycles,
        "activity": act.to_dict(),
        "a_h": act.a_h,
        "a_v": act.a_v,
        "functional": "pass",
    }
    return LayerOutcome(record=record)


def simulate_layers(config: RunConfig, threads: int | None = None) -> list[LayerOutcome]:
    if not config.layers:
        raise ConfigError("layers", "no layers to simulate")
    threads = threads or _threads()
    jobs = list(enumerate(config.layers))
    if threads == 1 or len(jobs) == 1:
        return [simulate_layer(config, i, e) for i, e in jobs]
    with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(lambda job: simulate_layer(config, *job), jobs))


# Rendering shared by simulate and report -------------------------------------

ENERGY_CSV_HEADER = (
    "layer",
    "m",
    "k",
    "n",
    "tiles",
    "cycles",
    "h_toggles",
    "v_toggles",
    "a_h",
    "a_v",
    "interconnect_energy_square",
    "interconnect_energy_asym",
    "interconnect_power_square",
    "interconnect_power_asym",
    "interconnect_savings",
    "total_savings",
)


def analyze_records(records: Sequence[dict], cfg: ArrayConfig, settings: dict) -> dict:
    """Aggregate layer records, choose the floorplan and build the energy report."""
    activities = [BusActivity.from_dict(r["activity"]) for r in records]
    total = aggregate_activity(activities)
    fp = settings["floorplan"]
    override = settings.get("activity_override")
    if override is not None:
        profile, source = ActivityProfile(override["a_h"], override["a_v"]), "override"
    else:
        profile, source = ActivityProfile(total.a_h, total.a_v), "measured"
    floorplan = floorplan_summary(cfg, profile, FloorplanSection(**fp), settings["interconnect_fraction"])
    floorplan["activity_source"] = source
    report = build_energy_report(
        [(r["name"], act, r["cycles"]) for r, act in zip(records, activities)],
        cfg,
        floorplan["ratio"],
        fp["area"],
        CalibratedFraction(settings["interconnect_fraction"]),
    )
    return {
        "aggregate": {"activity": total.to_dict(), "a_h": total.a_h, "a_v": total.a_v},
        "floorplan": floorplan,
        "energy": report.to_dict(),
        "_report": report,
    }


def render_csv(records: Sequence[dict], analysis: dict) -> str:
    report = analysis["_report"]
    rows = []
    for rec, entry in zip(records, report.layers):
        act = rec["activity"]
        rows.append(
            [
                rec["name"],
                rec["m"],
                rec["k"],
                rec["n"],
                rec["tiles"],
                rec["cycles"],
                act["h_toggles"],
                act["v_toggles"],
                rec["a_h"],
                rec["a_v"],
                entry.energy_square,
                entry.energy_asym,
                entry.power_square,
                entry.power_asym,
                entry.interconnect_savings,
                entry.total_savings,
            ]
        )
    agg = analysis["aggregate"]
    rows.append(
        [
            "Avg",
            None,
            None,
            None,
            None,
            None,
            agg["activity"]["h_toggles"],
            agg["activity"]["v_toggles"],
            agg["a_h"],
            agg["a_v"],
            None,
            None,
            report.average_power_square,
            report.average_power_asym,
            report.average_interconnect_savings,
            report.average_total_savings,
        ]
    )
    return to_csv(ENERGY_CSV_HEADER, rows)


def _write_outputs(outdir: Path, stem: str, formats, payload: dict, csv_text: str | None, svg_text: str | None):
    written = []
    if "json" in formats:
        write_atomic(outdir / f"{stem}.json", dump_json(payload))
        written.append(outdir / f"{stem}.json")
    if "csv" in formats and csv_text is not None:
        write_atomic(outdir / f"{stem}.csv", csv_text)
        written.append(outdir / f"{stem}.csv")
    if "svg" in formats and svg_text is not None:
        write_atomic(outdir / f"{stem}.svg", svg_text)
        written.append(outdir / f"{stem}.svg")
    return written


# Commands --------------------------------------------------------------------


def cmd_simulate(config: RunConfig, threads: int | None = None) -> dict:
    """Simulate every configured layer and write simulate.{json,csv,svg}.

    Returns the JSON payload plus ``exit_code``. Layers with unusable data are
    listed under ``errors`` while the remaining layers are still reported.
    Raises FunctionalMismatch if any layer's output is wrong.
    """
    cfg = config.array_config
    outcomes = simulate_layers(config, threads)
    for outcome in outcomes:
        if outcome.mismatch is not None:
            raise outcome.mismatch
    records = [o.record for o in outcomes if o.record is not None]
    errors = [
        {"layer": entry.spec.name, "error": o.error}
        for entry, o in zip(config.layers, outcomes)
        if o.error is not None
    ]
    payload = {
        "version": 1,
        "command": "simulate",
        "array": _array_dict(cfg),
        "settings": _settings_dict(config),
        "layers": records,
        "errors": errors,
        "caveat": MODEL_CAVEAT,
    }
    csv_text = svg_text = None
    if records:
        analysis = analyze_records(records, cfg, payload["settings"])
        payload.update({k: v for k, v in analysis.items() if not k.startswith("_")})
        csv_text = render_csv(records, analysis)
        svg_text = energy_report_svg(analysis["_report"])
    payload["files"] = [
        str(p.name)
        for p in _write_outputs(config.output.directory, "simulate", config.output.formats, payload, csv_text, svg_text)
    ]
    payload["exit_code"] = EXIT_DATA if errors else EXIT_OK
    return payload


def activity_from_result(path) -> ActivityProfile:
    """Aggregate activity recorded by a simulate run."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        agg = data["aggregate"]
        return ActivityProfile(float(agg["a_h"]), float(agg["a_v"]))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read activity from {path}: {exc}") from exc


def cmd_optimize(config: RunConfig, activity: ActivityProfile | None = None) -> dict:
    profile = activity if activity is not None else config.activity
    if profile is None:
        raise MissingActivityError()
    cfg = config.array_config
    payload = {
        "version": 1,
        "command": "optimize",
        "array": _array_dict(cfg),
        **floorplan_summary(cfg, profile, config.floorplan, config.interconnect_fraction),
        "caveat": MODEL_CAVEAT,
    }
    _write_outputs(config.output.directory, "optimize", config.output.formats, payload, None, None)
    return payload


def format_optimize(payload: dict) -> str:
    g = payload["geometry"]
    lines = [
        f"array {payload['array']['rows']}x{payload['array']['cols']}, "
        f"bus_h={payload['bus_h']} bits, bus_v={payload['bus_v']} bits",
        f"activity a_h={payload['a_h']:.4f} a_v={payload['a_v']:.4f}",
        f"optimal W/H = {payload['ratio_raw']:.4f} (rounded {payload['ratio_rounded']:.1f}; "
        f"using {payload['ratio']:.4f}{', clamped' if payload['clamped'] else ''})",
        f"PE geometry W={g['width']:.4f} H={g['height']:.4f} (area {g['area']:g})",
        f"model interconnect savings vs square: {payload['model_savings'] * 100:.2f}%",
        f"model total power savings: {payload['model_total_savings'] * 100:.2f}%",
        payload["caveat"],
    ]
    return "\n".join(lines)


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            grid = [round(start + i * step, 12) for i in range(n)]
        else:
            grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError("grid", f"cannot parse grid {text!r}; use start:stop:step or a,b,c") from None
    if not grid or not all(math.isfinite(v) for v in grid):
        raise ConfigError("grid", "grid must contain at least one finite value")
    return grid


def _sweep_activity(config: RunConfig, activity: ActivityProfile | None) -> ActivityProfile:
    profile = activity if activity is not None else config.activity
    if profile is None:
        raise MissingActivityError()
    return profile


def cmd_sweep(config: RunConfig, axis: str, grid: Sequence[float], activity: ActivityProfile | None = None) -> dict:
    """One CSV row per grid point; writes sweep_<axis>.csv."""
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"invalid sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")
    if not grid:
        raise ConfigError("grid", "empty grid")
    cfg = config.array_config
    area = config.floorplan.area

    if axis == "ratio":
        profile = _sweep_activity(config, activity)
        if any(v <= 0 for v in grid):
            raise ConfigError("grid", "ratios must be positive")
        optimum = clamped_aspect_ratio(cfg, profile, config.floorplan.max_ratio)
        flagged = min(range(len(grid)), key=lambda i: abs(math.log(grid[i] / optimum)))
        square_cost = weighted_cost(cfg, solve_geometry(area, 1.0), profile)
        header = ("ratio", "width", "height", "weighted_cost", "savings", "is_optimum")
        rows = []
        for i, ratio in enumerate(grid):
            pe = solve_geometry(area, ratio)
            cost = weighted_cost(cfg, pe, profile)
            savings = 0.0 if square_cost == 0 else 1.0 - cost / square_cost
            rows.append([ratio, pe.width, pe.height, cost, savings, int(i == flagged)])

    elif axis == "zero_fraction":
        if any(not 0 <= v <= 1 for v in grid):
            raise ConfigError("grid", "zero fractions must lie in [0, 1]")
        header = ("zero_fraction", "a_h", "a_v", "optimal_ratio", "weighted_cost", "savings")
        rows = []
        for zf in grid:
            layers = tuple(
                replace(e, data=DataSource("synthetic", zero_fraction=zf, seed=e.data.seed)) for e in config.layers
            )
            outcomes = simulate_layers(replace(config, layers=layers))
            for o in outcomes:
                if o.mismatch is not None:
                    raise o.mismatch
                if o.error is not None:
                    raise DataError(o.error)
            total = aggregate_activity(BusActivity.from_dict(o.record["activity"]) for o in outcomes)
            profile = ActivityProfile(total.a_h, total.a_v)
            ratio = clamped_aspect_ratio(cfg, profile, config.floorplan.max_ratio)
            cost = weighted_cost(cfg, solve_geometry(area, ratio), profile)
            rows.append([zf, profile.a_h, profile.a_v, ratio, cost, savings_at_ratio(cfg, profile, ratio)])

    else:
        profile = _sweep_activity(config, activity)
        if any(v < 1 or v != int(v) or v > 24 for v in grid):
            raise ConfigError("grid", "bus widths must be integers in [1, 24]")
        header = ("input_bits", "bus_h", "bus_v", "optimal_ratio", "weighted_cost_square", "weighted_cost", "savings")
        rows = []
        for bits in grid:
            b = int(bits)
            c = ArrayConfig(cfg.rows, cfg.cols, b, required_accumulator_width(b, cfg.rows))
            ratio = clamped_aspect_ratio(c, profile, config.floorplan.max_ratio)
            rows.append(
                [
                    b,
                    c.bus_h,
                    c.bus_v,
                    ratio,
                    weighted_cost(c, solve_geometry(area, 1.0), profile),
                    weighted_cost(c, solve_geometry(area, ratio), profile),
                    savings_at_ratio(c, profile, ratio),
                ]
            )

    text = to_csv(header, rows)
    path = config.output.directory / f"sweep_{axis}.csv"
    write_atomic(path, text)
    return {"axis": axis, "header": list(header), "rows": rows, "csv": text, "path": str(path)}


def cmd_report(inputs: Sequence[Path], config: RunConfig | None = None, outdir: Path | None = None) -> dict:
    """Rebuild CSV and SVG from one or more simulate JSON files."""
    if not inputs:
        raise ConfigError("inputs", "no result files given")
    docs = []
    for path in inputs:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            doc["array"], doc["layers"], doc["settings"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"cannot read simulate result {path}: {exc}") from exc
        docs.append((Path(path), doc))

    first_path, first = docs[0]
    for path, doc in docs[1:]:
        diffs = sorted(k for k in set(first["array"]) | set(doc["array"]) if first["array"].get(k) != doc["array"].get(k))
        if diffs:
            detail = ", ".join(f"{k}: {first['array'].get(k)} vs {doc['array'].get(k)}" for k in diffs)
            raise ConfigError("array", f"{path} uses a different array than {first_path} ({detail})")

    records = []
    seen = set()
    for path, doc in docs:
        for rec in doc["layers"]:
            rec = dict(rec)
            if rec["name"] in seen:
                rec["name"] = f"{path.stem}:{rec['name']}"
            seen.add(rec["name"])
            records.append(rec)
    if not records:
        raise DataError("no successfully simulated layers in the inputs")

    arr = first["array"]
    cfg = ArrayConfig(arr["rows"], arr["cols"], arr["bus_h"], arr["bus_v"])
    settings = _settings_dict(config) if config is not None else first["settings"]
    analysis = analyze_records(records, cfg, settings)
    csv_text = render_csv(records, analysis)
    svg_text = energy_report_svg(analysis["_report"])
    if outdir is None:
        outdir = config.output.directory if config is not None else first_path.parent
    write_atomic(outdir / "report.csv", csv_text)
    write_atomic(outdir / "report.svg", svg_text)
    return {
        "floorplan": analysis["floorplan"],
        "energy": analysis["energy"],
        "csv": csv_text,
        "svg": svg_text,
        "paths": [str(outdir / "report.csv"), str(outdir / "report.svg")],
    }


def format_simulate(payload: dict) -> str:
    lines = []
    for rec in payload["layers"]:
        lines.append(
            f"{rec['name']:>8}: GEMM {rec['m']}x{rec['k']}x{rec['n']}, {rec['tiles']} tiles, "
            f"a_h={rec['a_h']:.4f} a_v={rec['a_v']:.4f}, functional {rec['functional']}"
        )
    for err in payload["errors"]:
        lines.append(f"{err['layer']:>8}: ERROR {err['error']}")
    if "aggregate" in payload:
        fp = payload["floorplan"]
        avg = payload["energy"]["average"]
        lines.append(f"aggregate a_h={payload['aggregate']['a_h']:.4f} a_v={payload['aggregate']['a_v']:.4f}")
        lines.append(f"optimal W/H = {fp['ratio_raw']:.4f} (using {fp['ratio']:.4f})")
        lines.append(
            f"average interconnect savings {avg['interconnect_savings'] * 100:.2f}%, "
            f"total {avg['total_savings'] * 100:.2f}%"
        )
    lines.append(payload["caveat"])
    return "\n".join(lines)


# Entry point -----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asysa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required, help="JSON run configuration")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="base seed for synthetic data")
        sp.add_argument("--ratio-round", action="store_true", help="build the ratio rounded to one decimal")

    sp = sub.add_parser("optimize", help="optimal PE aspect ratio from switching activity")
    common(sp)
    sp.add_argument("--activity", type=Path, help="simulate.json whose aggregate activity to use")

    sp = sub.add_parser("simulate", help="simulate layers and measure bus switching activity")
    common(sp)

    sp = sub.add_parser("sweep", help="sensitivity sweep written as CSV")
    common(sp)
    sp.add_argument("--axis", required=True, help="ratio | zero_fraction | bus_width")
    sp.add_argument("--grid", required=True, help="start:stop:step or comma-separated values")
    sp.add_argument("--activity", type=Path, help="simulate.json whose aggregate activity to use")

    sp = sub.add_parser("report", help="CSV and SVG charts from simulate results")
    common(sp, config_required=False)
    sp.add_argument("inputs", nargs="+", type=Path, help="simulate.json files")
    return p


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be non-negative")
        config = config.with_seed(args.seed)
    if args.ratio_round:
        config = config.with_ratio_rounding(True)
    if args.out is not None:
        config = config.with_output_dir(args.out)
    return config


def run(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = None
        if args.config is not None:
            config = _apply_overrides(load_config(args.config), args)

        if args.command == "optimize":
            activity = activity_from_result(args.activity) if args.activity else None
            print(format_optimize(cmd_optimize(config, activity)))
        elif args.command == "simulate":
            payload = cmd_simulate(config)
            print(format_simulate(payload))
            return payload["exit_code"]
        elif args.command == "sweep":
            activity = activity_from_result(args.activity) if args.activity else None
            result = cmd_sweep(config, args.axis, parse_grid(args.grid), activity)
            print(result["csv"], end="")
        else:
            result = cmd_report(args.inputs, config, args.out)
            print(f"wrote {', '.join(result['paths'])}")
            print(result["energy"]["caveat"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FunctionalMismatch as exc:
        print(f"functional check failed: {exc}", file=sys.stderr)
        return EXIT_FUNCTIONAL
    except (DataError, TraceParseError, WidthError, ShapeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())
