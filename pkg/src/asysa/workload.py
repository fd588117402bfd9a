"""CNN layers, their lowering to GEMM, weight tiling, and integer operand data.

Convolutions are lowered with im2col: the GEMM's left operand has one row per
output pixel (``m = H * W``) and one column per receptive-field element
(``k = K * K * C``, flattened channel-major, then kernel row, then kernel
column). The weight matrix is ``k x M``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
import numpy as np

from .model import ArrayConfig

__all__ = [
    "LayerSpec",
    "GemmSpec",
    "IntMatrix",
    "WeightTile",
    "TileSchedule",
    "ShapeError",
    "WidthError",
    "TraceParseError",
    "RESNET50_LAYERS",
    "lower_conv_to_gemm",
    "im2col",
    "tile_gemm",
    "quantize",
    "synth_activations",
    "synth_weights",
    "load_trace",
    "write_trace",
    "format_trace",
]


class ShapeError(ValueError):
    pass


class WidthError(ValueError):
    """An element does not fit the declared bit width / signedness."""

    def __init__(self, message: str, index: tuple[int, int] | None = None, value: int | None = None):
        super().__init__(message)
        self.index = index
        self.value = value


class TraceParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _positive_int(owner: str, name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{owner}.{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class LayerSpec:
    """Convolution layer: kernel size, output height/width, input and output channels."""

    name: str
    kernel: int
    out_height: int
    out_width: int
    in_channels: int
    out_channels: int

    def __post_init__(self):
        for f in ("kernel", "out_height", "out_width", "in_channels", "out_channels"):
            _positive_int("LayerSpec", f, getattr(self, f))

    def input_size(self, stride: int = 1, padding: int | None = None) -> tuple[int, int]:
        """Smallest input (height, width) producing the output dims; "same" padding by default."""
        if padding is None:
            padding = (self.kernel - 1) // 2
        return (
            (self.out_height - 1) * stride + self.kernel - 2 * padding,
            (self.out_width - 1) * stride + self.kernel - 2 * padding,
        )

    def scaled(self, divisor: int) -> "LayerSpec":
        """Same layer with output spatial dims divided (rounding up) by ``divisor``."""
        if divisor == 1:
            return self
        return LayerSpec(
            self.name,
            self.kernel,
            math.ceil(self.out_height / divisor),
            math.ceil(self.out_width / divisor),
            self.in_channels,
            self.out_channels,
        )


# Selected ResNet50 convolutions used throughout the experiments.
RESNET50_LAYERS: tuple[LayerSpec, ...] = (
    LayerSpec("L1", 1, 56, 56, 256, 64),
    LayerSpec("L2", 3, 28, 28, 128, 128),
    LayerSpec("L3", 1, 28, 28, 128, 512),
    LayerSpec("L4", 1, 14, 14, 512, 256),
    LayerSpec("L5", 1, 14, 14, 1024, 256),
    LayerSpec("L6", 3, 14, 14, 256, 256),
)


@dataclass(frozen=True)
class GemmSpec:
    m_rows: int
    k_depth: int
    n_cols: int

    def __post_init__(self):
        for f in ("m_rows", "k_depth", "n_cols"):
            _positive_int("GemmSpec", f, getattr(self, f))


def lower_conv_to_gemm(layer: LayerSpec) -> GemmSpec:
    return GemmSpec(
        layer.out_height * layer.out_width,
        layer.kernel * layer.kernel * layer.in_channels,
        layer.out_channels,
    )


class IntMatrix:
    """Immutable 2-D integer matrix with a declared two's-complement width.

    Elements are stored as int64, so ``bits`` is limited to 63.
    """

    __slots__ = ("_data", "bits", "signed")

    def __init__(self, data, bits: int, signed: bool):
        if isinstance(bits, bool) or not 1 <= int(bits) <= 63:
            raise ValueError(f"bits must be in [1, 63], got {bits!r}")
        arr = np.array(data, dtype=np.int64, copy=True)
        if arr.ndim != 2:
            raise ShapeError(f"IntMatrix needs a 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        self._data = arr
        self.bits = int(bits)
        self.signed = bool(signed)
        bad = self.first_violation(arr, self.bits, self.signed)
        if bad is not None:
            (r, c), v = bad
            raise WidthError(
                f"element [{r}, {c}] = {v} does not fit {self.bits}-bit "
                f"{'signed' if self.signed else 'unsigned'}",
                index=(r, c),
                value=v,
            )

    @staticmethod
    def value_range(bits: int, signed: bool) -> tuple[int, int]:
        if signed:
            return -(1 << (bits - 1)), (1 << (bits - 1)) - 1
        return 0, (1 << bits) - 1

    @classmethod
    def first_violation(cls, arr: np.ndarray, bits: int, signed: bool):
        """``((row, col), value)`` of the first out-of-range element, or None."""
        lo, hi = cls.value_range(bits, signed)
        if arr.size == 0:
            return None
        mask = (arr < lo) | (arr > hi)
        if not mask.any():
            return None
        flat = int(np.flatnonzero(mask.ravel())[0])
        r, c = divmod(flat, arr.shape[1])
        return (r, c), int(arr[r, c])

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return (
            self.bits == other.bits
            and self.signed == other.signed
            and self.shape == other.shape
            and bool(np.array_equal(self._data, other._data))
        )

    __hash__ = None

    def __repr__(self):
        kind = "s" if self.signed else "u"
        return f"IntMatrix({self.rows}x{self.cols}, {kind}{self.bits})"


def im2col(
    x: IntMatrix,
    layer: LayerSpec,
    stride: int = 1,
    padding: int | None = None,
    in_height: int | None = None,
    in_width: int | None = None,
) -> IntMatrix:
    """Lower a ``C x (H_in * W_in)`` feature map to the ``(H*W) x (K*K*C)`` GEMM operand.

    ``padding`` defaults to "same" padding ``(K - 1) // 2``. Input spatial
    dims default to the smallest ones producing the layer's output dims.
    """
    k = layer.kernel
    if padding is None:
        padding = (k - 1) // 2
    if stride < 1 or padding < 0:
        raise ValueError(f"invalid stride={stride} / padding={padding}")
    h_out, w_out = layer.out_height, layer.out_width
    default_h, default_w = layer.input_size(stride, padding)
    in_height = default_h if in_height is None else in_height
    in_width = default_w if in_width is None else in_width
    if in_height < 1 or in_width < 1:
        raise ShapeError(f"padding {padding} too large for a {k}x{k} kernel with output {h_out}x{w_out}")
    if (in_height + 2 * padding - k) // stride + 1 != h_out or (in_width + 2 * padding - k) // stride + 1 != w_out:
        raise ShapeError(
            f"input {in_height}x{in_width} with K={k}, stride={stride}, padding={padding} "
            f"does not produce output {h_out}x{w_out}"
        )
    if x.shape != (layer.in_channels, in_height * in_width):
        raise ShapeError(
            f"expected feature map of shape ({layer.in_channels}, {in_height * in_width}), got {x.shape}"
        )

    c = layer.in_channels
    fmap = x.data.reshape(c, in_height, in_width)
    padded = np.pad(fmap, ((0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((h_out, w_out, c, k, k), dtype=np.int64)
    h_span = stride * (h_out - 1) + 1
    w_span = stride * (w_out - 1) + 1
    for ky in range(k):
        for kx in range(k):
            window = padded[:, ky:ky + h_span:stride, kx:kx + w_span:stride]
            cols[:, :, :, ky, kx] = window.transpose(1, 2, 0)
    return IntMatrix(cols.reshape(h_out * w_out, c * k * k), x.bits, x.signed)


@dataclass(frozen=True)
class WeightTile:
    """One array-load of weights; edge tiles are zero-padded to R x C."""

    k_block: int
    n_block: int
    weights: np.ndarray
    k_range: tuple[int, int]
    n_range: tuple[int, int]


@dataclass(frozen=True)
class TileSchedule:
    gemm: GemmSpec
    rows: int
    cols: int
    tiles: tuple[WeightTile, ...]

    @property
    def k_blocks(self) -> int:
        return -(-self.gemm.k_depth // self.rows)

    @property
    def n_blocks(self) -> int:
        return -(-self.gemm.n_cols // self.cols)

    def __len__(self):
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)


def tile_gemm(gemm: GemmSpec, weights: IntMatrix, cfg: ArrayConfig) -> TileSchedule:
    """Split a ``k x n`` weight matrix into R x C tiles, n-block major, k-block minor."""
    if weights.shape != (gemm.k_depth, gemm.n_cols):
        raise ShapeError(f"weights shape {weights.shape} != ({gemm.k_depth}, {gemm.n_cols})")
    r, c = cfg.rows, cfg.cols
    k_blocks = -(-gemm.k_depth // r)
    n_blocks = -(-gemm.n_cols // c)
    tiles = []
    for nb in range(n_blocks):
        n0, n1 = nb * c, min((nb + 1) * c, gemm.n_cols)
        for kb in range(k_blocks):
            k0, k1 = kb * r, min((kb + 1) * r, gemm.k_depth)
            block = np.zeros((r, c), dtype=np.int64)
            block[: k1 - k0, : n1 - n0] = weights.data[k0:k1, n0:n1]
            block.setflags(write=False)
            tiles.append(WeightTile(kb, nb, block, (k0, k1), (n0, n1)))
    return TileSchedule(gemm, r, c, tuple(tiles))


def quantize(values, bits: int, signed: bool, scale: float) -> IntMatrix:
    """Per-tensor linear quantization with round-half-away-from-zero and saturation."""
    if not 2 <= bits <= 37:
        raise ValueError(f"bits must be in [2, 37], got {bits}")
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    arr = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 2:
        raise ShapeError(f"quantize expects a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"non-finite input at [{bad[0]}, {bad[1]}]")
    scaled = arr / scale
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    lo, hi = IntMatrix.value_range(bits, signed)
    clipped = np.clip(rounded, lo, hi)
    return IntMatrix(clipped.astype(np.int64), bits, signed)


def _raw_stream(seed, count: int) -> np.ndarray:
    # PCG64 seeded through SeedSequence; NumPy guarantees the bit stream itself
    # is stable across versions and platforms.
    bitgen = np.random.PCG64(np.random.SeedSequence(seed))
    return bitgen.random_raw(count).astype(np.uint64)


def synth_activations(rows: int, cols: int, zero_fraction: float, bits: int, seed) -> IntMatrix:
    """Unsigned ReLU-like activations.

    Draws ``2 * rows * cols`` raw 64-bit PCG64 words. The first block decides
    zeros: element is zero iff ``(word >> 11) * 2**-53 < zero_fraction``. The
    second block sets magnitudes: ``1 + word % (2**bits - 1)``.
    """
    if not 0.0 <= zero_fraction <= 1.0:
        raise ValueError(f"zero_fraction must be in [0, 1], got {zero_fraction}")
    if not 1 <= bits <= 62:
        raise ValueError(f"bits must be in [1, 62], got {bits}")
    n = rows * cols
    raw = _raw_stream(seed, 2 * n)
    uniform = (raw[:n] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    magnitude = (raw[n:] % np.uint64((1 << bits) - 1)).astype(np.int64) + 1
    values = np.where(uniform < zero_fraction, 0, magnitude)
    return IntMatrix(values.reshape(rows, cols), bits, signed=False)


def synth_weights(rows: int, cols: int, bits: int, seed) -> IntMatrix:
    """Signed weights, uniform over the full two's-complement range (``word % 2**bits``)."""
    if not 1 <= bits <= 62:
        raise ValueError(f"bits must be in [1, 62], got {bits}")
    raw = _raw_stream(seed, rows * cols)
    values = (raw % np.uint64(1 << bits)).astype(np.int64) - (1 << (bits - 1))
    return IntMatrix(values.reshape(rows, cols), bits, signed=True)


# Trace files ---------------------------------------------------------------
#
#   trace   := { comment | blank } header NEWLINE payload
#   header  := "width=" INT " signed=" ("0" | "1") " rows=" INT " cols=" INT
#   payload := exactly rows*cols decimal integers in row-major order,
#              separated by any whitespace (line breaks are not significant)
#   comment := line whose first non-blank character is "#"; allowed anywhere
#
# Field order in the header is fixed; extra spaces between fields are allowed.

_HEADER = re.compile(r"^\s*width=(\d+)\s+signed=([01])\s+rows=(\d+)\s+cols=(\d+)\s*$")
_TOKEN = re.compile(r"\S+")
_INT = re.compile(r"^[+-]?\d+$")


def format_trace(matrix: IntMatrix) -> str:
    lines = [f"width={matrix.bits} signed={int(matrix.signed)} rows={matrix.rows} cols={matrix.cols}"]
    for row in matrix.data:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_trace(matrix: IntMatrix, path) -> None:
    Path(path).write_text(format_trace(matrix), encoding="ascii")


def parse_trace(text: str) -> IntMatrix:
    header = None
    values: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if header is None:
            match = _HEADER.match(line)
            if match is None:
                raise TraceParseError(
                    "expected header 'width=<bits> signed=<0|1> rows=<r> cols=<c>'", lineno, 1
                )
            header = tuple(int(g) for g in match.groups())
            width = header[0]
            if not 1 <= width <= 63:
                raise TraceParseError(f"width must be in [1, 63], got {width}", lineno, line.index("width=") + 1)
            continue
        for tok in _TOKEN.finditer(line):
            if not _INT.match(tok.group()):
                raise TraceParseError(f"not an integer: {tok.group()!r}", lineno, tok.start() + 1)
            values.append(int(tok.group()))
    if header is None:
        raise TraceParseError("missing header", 1, 1)
    width, signed, rows, cols = header
    if len(values) != rows * cols:
        raise TraceParseError(
            f"header declares {rows}x{cols} = {rows * cols} values, payload has {len(values)}",
            lineno,
            1,
        )
    lo, hi = IntMatrix.value_range(width, bool(signed))
    for i, v in enumerate(values):
        if not lo <= v <= hi:
            r, c = divmod(i, cols)
            raise WidthError(
                f"element [{r}, {c}] = {v} does not fit {width}-bit {'signed' if signed else 'unsigned'}",
                index=(r, c),
                value=v,
            )
    data = np.array(values, dtype=np.int64).reshape(rows, cols)
    return IntMatrix(data, width, bool(signed))


def load_trace(path) -> IntMatrix:
    return parse_trace(Path(path).read_text(encoding="ascii"))

