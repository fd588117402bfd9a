"""JSON run configuration.

Example::

    {
      "version": 1,
      "seed": 0,
      "array": {"rows": 32, "cols": 32, "input_bits": 16},
      "layers": [
        {"name": "L1", "K": 1, "H": 56, "W": 56, "C": 256, "M": 64,
         "data": {"synthetic": {"zero_fraction": 0.5}}},
        {"name": "L2", "K": 3, "H": 28, "W": 28, "C": 128, "M": 128,
         "data": {"trace": "l2_fmap.txt", "layout": "fmap"},
         "weights": {"synthetic": {"seed": 11}}}
      ],
      "spatial_divisor": 1,
      "activity": {"a_h": 0.22, "a_v": 0.36},
      "sim": {"include_weight_preload": false},
      "floorplan": {"area": 1.0, "ratio_override": null, "ratio_rounding": false, "max_ratio": 64},
      "power": {"interconnect_fraction": 0.231},
      "output": {"directory": "asysa-out", "formats": ["json", "csv", "svg"]}
    }

Every key except ``version`` and ``array`` is optional. Unknown keys are
rejected. Trace paths are resolved relative to the config file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .model import ActivityProfile, ArrayConfig, required_accumulator_width
from .power import DEFAULT_INTERCONNECT_FRACTION
from .workload import LayerSpec

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "svg")
DEFAULT_ZERO_FRACTION = 0.5


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class ArraySection:
    rows: int = 32
    cols: int = 32
    input_bits: int = 16
    accumulator_bits: int | None = None

    def array_config(self) -> ArrayConfig:
        bus_v = self.accumulator_bits or required_accumulator_width(self.input_bits, self.rows)
        return ArrayConfig(self.rows, self.cols, self.input_bits, bus_v)


@dataclass(frozen=True)
class DataSource:
    """Either ``synthetic`` (zero_fraction, seed) or ``trace`` (path, layout)."""

    kind: str
    zero_fraction: float = DEFAULT_ZERO_FRACTION
    seed: int | None = None
    path: Path | None = None
    layout: str = "fmap"


@dataclass(frozen=True)
class LayerEntry:
    spec: LayerSpec
    data: DataSource
    weights: DataSource


@dataclass(frozen=True)
class FloorplanSection:
    area: float = 1.0
    ratio_override: float | None = None
    ratio_rounding: bool = False
    max_ratio: float = 64.0


@dataclass(frozen=True)
class OutputSection:
    directory: Path = Path("asysa-out")
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfig:
    array: ArraySection
    layers: tuple[LayerEntry, ...] = ()
    seed: int = 0
    spatial_divisor: int = 1
    activity: ActivityProfile | None = None
    include_weight_preload: bool = False
    floorplan: FloorplanSection = field(default_factory=FloorplanSection)
    interconnect_fraction: float = DEFAULT_INTERCONNECT_FRACTION
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def array_config(self) -> ArrayConfig:
        return self.array.array_config()

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)

    def with_ratio_rounding(self, flag: bool = True) -> "RunConfig":
        return replace(self, floorplan=replace(self.floorplan, ratio_rounding=flag))

    def with_output_dir(self, directory) -> "RunConfig":
        return replace(self, output=replace(self.output, directory=Path(directory)))

    def layer_seed(self, index: int, stream: int, explicit: int | None) -> list[int]:
        if explicit is not None:
            return [explicit]
        return [self.seed, index, stream]


# Parsing ---------------------------------------------------------------------


def _keys(obj: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(path, f"unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise ConfigError(path, f"missing key(s) {', '.join(missing)}")
    return obj


def _int(obj: dict, key: str, path: str, default=None, minimum: int = 1):
    if key not in obj or obj[key] is None:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {value}")
    return value


def _float(obj: dict, key: str, path: str, default, lo=None, hi=None, lo_open=False, hi_open=False):
    if key not in obj or obj[key] is None:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{path}.{key}", f"expected a finite number, got {value!r}")
    value = float(value)
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(f"{path}.{key}", f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigError(f"{path}.{key}", f"must be {'<' if hi_open else '<='} {hi}, got {value}")
    return value


def _bool(obj: dict, key: str, path: str, default: bool) -> bool:
    if key not in obj:
        return default
    if not isinstance(obj[key], bool):
        raise ConfigError(f"{path}.{key}", f"expected true/false, got {obj[key]!r}")
    return obj[key]


def _parse_array(obj: Any) -> ArraySection:
    path = "array"
    _keys(obj, path, {"rows", "cols", "input_bits", "accumulator_bits"})
    rows = _int(obj, "rows", path, 32)
    cols = _int(obj, "cols", path, 32)
    bits = _int(obj, "input_bits", path, 16)
    if bits > 24:
        raise ConfigError(f"{path}.input_bits", f"at most 24 bits are supported, got {bits}")
    acc = _int(obj, "accumulator_bits", path, None)
    required = required_accumulator_width(bits, rows)
    if acc is not None:
        if acc < required:
            raise ConfigError(
                f"{path}.accumulator_bits",
                f"{acc} bits cannot hold {rows} accumulated {bits}-bit products (need >= {required})",
            )
        if acc > 48:
            raise ConfigError(f"{path}.accumulator_bits", f"at most 48 bits are supported, got {acc}")
    return ArraySection(rows, cols, bits, acc)


def _parse_source(obj: Any, path: str, base: Path, weights: bool) -> DataSource:
    _keys(obj, path, {"synthetic", "trace", "layout"})
    if ("synthetic" in obj) == ("trace" in obj):
        raise ConfigError(path, "specify exactly one of 'synthetic' or 'trace'")
    if "synthetic" in obj:
        if "layout" in obj:
            raise ConfigError(f"{path}.layout", "only valid with 'trace'")
        spath = f"{path}.synthetic"
        syn = _keys(obj["synthetic"], spath, {"seed"} if weights else {"zero_fraction", "seed"})
        zf = _float(syn, "zero_fraction", spath, DEFAULT_ZERO_FRACTION, 0.0, 1.0)
        seed = _int(syn, "seed", spath, None, minimum=0)
        return DataSource("synthetic", zero_fraction=zf, seed=seed)
    trace = obj["trace"]
    if not isinstance(trace, str) or not trace:
        raise ConfigError(f"{path}.trace", "expected a file path")
    layout = obj.get("layout", "gemm" if weights else "fmap")
    allowed = ("gemm",) if weights else ("fmap", "gemm")
    if layout not in allowed:
        raise ConfigError(f"{path}.layout", f"must be one of {', '.join(allowed)}, got {layout!r}")
    return DataSource("trace", path=(base / trace), layout=layout)


_LAYER_KEYS = {"name", "K", "H", "W", "C", "M", "data", "weights"}


def _parse_layer(obj: Any, index: int, base: Path) -> LayerEntry:
    path = f"layers[{index}]"
    _keys(obj, path, _LAYER_KEYS, {"K", "H", "W", "C", "M"})
    name = obj.get("name", f"layer{index}")
    if not isinstance(name, str) or not name or any(ch in name for ch in ",\n\r\"<>&"):
        raise ConfigError(f"{path}.name", f"invalid layer name {name!r}")
    dims = [_int(obj, key, path) for key in ("K", "H", "W", "C", "M")]
    spec = LayerSpec(name, *dims)
    data = (
        _parse_source(obj["data"], f"{path}.data", base, weights=False)
        if "data" in obj
        else DataSource("synthetic")
    )
    wts = (
        _parse_source(obj["weights"], f"{path}.weights", base, weights=True)
        if "weights" in obj
        else DataSource("synthetic")
    )
    return LayerEntry(spec, data, wts)


def parse_config(obj: Any, base: Path | str = ".") -> RunConfig:
    """Validate a decoded JSON config; raises ConfigError naming the first bad field."""
    base = Path(base)
    _keys(
        obj,
        "",
        {"version", "seed", "array", "layers", "spatial_divisor", "activity", "sim", "floorplan", "power", "output"},
        {"version", "array"},
    )
    if obj["version"] != SCHEMA_VERSION:
        raise ConfigError("version", f"unsupported schema version {obj['version']!r} (expected {SCHEMA_VERSION})")
    array = _parse_array(obj["array"])

    layers_obj = obj.get("layers", [])
    if not isinstance(layers_obj, list):
        raise ConfigError("layers", "expected a list")
    layers = tuple(_parse_layer(l, i, base) for i, l in enumerate(layers_obj))
    names = [l.spec.name for l in layers]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise ConfigError("layers", f"duplicate layer name(s) {', '.join(dup)}")

    seed = _int(obj, "seed", "", 0, minimum=0)
    divisor = _int(obj, "spatial_divisor", "", 1)

    activity = None
    if obj.get("activity") is not None:
        act = _keys(obj["activity"], "activity", {"a_h", "a_v"}, {"a_h", "a_v"})
        activity = ActivityProfile(
            _float(act, "a_h", "activity", None, 0.0, 1.0),
            _float(act, "a_v", "activity", None, 0.0, 1.0),
        )

    sim = _keys(obj.get("sim", {}), "sim", {"include_weight_preload"})
    preload = _bool(sim, "include_weight_preload", "sim", False)

    fp = _keys(obj.get("floorplan", {}), "floorplan", {"area", "ratio_override", "ratio_rounding", "max_ratio"})
    floorplan = FloorplanSection(
        area=_float(fp, "area", "floorplan", 1.0, 0.0, lo_open=True),
        ratio_override=_float(fp, "ratio_override", "floorplan", None, 0.0, lo_open=True),
        ratio_rounding=_bool(fp, "ratio_rounding", "floorplan", False),
        max_ratio=_float(fp, "max_ratio", "floorplan", 64.0, 1.0),
    )

    pw = _keys(obj.get("power", {}), "power", {"interconnect_fraction"})
    fraction = _float(pw, "interconnect_fraction", "power", DEFAULT_INTERCONNECT_FRACTION, 0.0, 1.0, True, True)

    out = _keys(obj.get("output", {}), "output", {"directory", "formats"})
    directory = out.get("directory", "asysa-out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "expected a directory path")
    formats = out.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ConfigError("output.formats", f"expected a non-empty list drawn from {', '.join(FORMATS)}")

    return RunConfig(
        array=array,
        layers=layers,
        seed=seed,
        spatial_divisor=divisor,
        activity=activity,
        include_weight_preload=preload,
        floorplan=floorplan,
        interconnect_fraction=fraction,
        output=OutputSection(base / directory, tuple(dict.fromkeys(formats))),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(obj, path.parent)
