"""Stream-accurate weight-stationary systolic array simulation with bus toggle counts.

For each weight tile the array streams every GEMM row ``m`` through its R
rows. The horizontal bus of array row ``r`` carries ``a[m, k0 + r]`` and the
vertical bus below PE(r, c) carries the partial sum

    psum_r(m) = sum_{i <= r} a[m, k0 + i] * w[k0 + i, n0 + c]

In a real array each segment sees its sequence delayed by the skew registers.
Time shifts do not change Hamming transition totals, so the simulator counts
toggles on the unskewed sequences. All C segments of a row carry the same
horizontal sequence, so row toggles are multiplied by C.

Buses start at 0 and tiles of one GEMM follow each other back to back.
Cross-tile (k-block) accumulation happens outside the array and is not
counted. A pipelined array with zero-filled bubbles between tiles differs
from this model by ``zero_bubble_correction``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .model import ActivityProfile, ArrayConfig
from .workload import GemmSpec, IntMatrix, ShapeError, WidthError, tile_gemm

__all__ = [
    "BusActivity",
    "SimResult",
    "ToggleStats",
    "EmptySimulationError",
    "reference_matmul",
    "run_ws_matmul",
    "hamming_toggles",
    "stream_toggle_stats",
    "activity_profile",
    "aggregate_activity",
    "zero_bubble_correction",
]


class EmptySimulationError(ValueError):
    """No transition opportunities were recorded, so activity is undefined."""


@dataclass(frozen=True)
class BusActivity:
    """Toggle totals over all R*C horizontal and R*C vertical bus segments.

    ``h_cycles``/``v_cycles`` are transition opportunities summed over
    segments. Instances add associatively and commutatively.
    """

    h_toggles: int
    v_toggles: int
    h_cycles: int
    v_cycles: int
    bus_h: int
    bus_v: int

    @classmethod
    def empty(cls, cfg: ArrayConfig) -> "BusActivity":
        return cls(0, 0, 0, 0, cfg.bus_h, cfg.bus_v)

    def __add__(self, other: "BusActivity") -> "BusActivity":
        if not isinstance(other, BusActivity):
            return NotImplemented
        if (self.bus_h, self.bus_v) != (other.bus_h, other.bus_v):
            raise ValueError(
                f"cannot merge activity of buses {self.bus_h}/{self.bus_v} with {other.bus_h}/{other.bus_v}"
            )
        return BusActivity(
            self.h_toggles + other.h_toggles,
            self.v_toggles + other.v_toggles,
            self.h_cycles + other.h_cycles,
            self.v_cycles + other.v_cycles,
            self.bus_h,
            self.bus_v,
        )

    @property
    def a_h(self) -> float:
        if self.h_cycles == 0:
            raise EmptySimulationError("no horizontal transition opportunities")
        return self.h_toggles / (self.h_cycles * self.bus_h)

    @property
    def a_v(self) -> float:
        if self.v_cycles == 0:
            raise EmptySimulationError("no vertical transition opportunities")
        return self.v_toggles / (self.v_cycles * self.bus_v)

    def to_dict(self) -> dict:
        return {
            "h_toggles": self.h_toggles,
            "v_toggles": self.v_toggles,
            "h_cycles": self.h_cycles,
            "v_cycles": self.v_cycles,
            "bus_h": self.bus_h,
            "bus_v": self.bus_v,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BusActivity":
        return cls(**{k: int(d[k]) for k in ("h_toggles", "v_toggles", "h_cycles", "v_cycles", "bus_h", "bus_v")})


@dataclass(frozen=True)
class SimResult:
    output: IntMatrix
    activity: BusActivity
    cycles: int
    tiles: int


class ToggleStats(NamedTuple):
    toggles: int
    transitions: int


def hamming_toggles(prev: int, next: int, width: int) -> int:
    """Bits that differ between the ``width``-bit two's-complement encodings."""
    return ((prev ^ next) & ((1 << width) - 1)).bit_count()


def stream_toggle_stats(stream: Iterable[int], width: int) -> ToggleStats:
    """Toggles along a bus carrying ``stream``, starting from an all-zero state."""
    toggles = 0
    transitions = 0
    prev = 0
    for value in stream:
        toggles += hamming_toggles(prev, value, width)
        prev = value
        transitions += 1
    return ToggleStats(toggles, transitions)


def _popcount_sum(x: np.ndarray, mask: int) -> int:
    return int(np.bitwise_count((x & np.int64(mask)).view(np.uint64)).sum())


def _seq_toggles(prev: np.ndarray, seq: np.ndarray, mask: int) -> int:
    # prev: state before the sequence (shape seq.shape[1:]); seq: time along axis 0.
    if seq.shape[0] == 0:
        return 0
    total = _popcount_sum(seq[0] ^ prev, mask)
    if seq.shape[0] > 1:
        total += _popcount_sum(seq[1:] ^ seq[:-1], mask)
    return total


def reference_matmul(a: IntMatrix, w: IntMatrix) -> IntMatrix:
    """Exact integer ``a @ w`` declared at the lossless accumulator width."""
    if a.cols != w.rows:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {w.shape}")
    bits = 2 * max(a.bits, w.bits) + (max(a.cols, 1) - 1).bit_length()
    if bits > 63:
        raise ValueError(f"product needs {bits} bits, beyond int64")
    out = np.zeros((a.rows, w.cols), dtype=np.int64)
    for k in range(a.cols):
        out += np.outer(a.data[:, k], w.data[k, :])
    return IntMatrix(out, bits, signed=True)


def _check_psum(psum: np.ndarray, width: int, tile_index: int) -> None:
    lo, hi = IntMatrix.value_range(width, True)
    bad = (psum < lo) | (psum > hi)
    if bad.any():
        m, r, c = (int(i) for i in np.argwhere(bad)[0])
        raise WidthError(
            f"partial sum {int(psum[m, r, c])} at tile {tile_index}, row {m}, PE({r},{c}) "
            f"overflows the {width}-bit vertical bus",
            value=int(psum[m, r, c]),
        )


def run_ws_matmul(
    a: IntMatrix,
    w: IntMatrix,
    cfg: ArrayConfig,
    *,
    include_weight_preload: bool = False,
) -> SimResult:
    """Execute ``a @ w`` on a weight-stationary array and count bus toggles.

    ``a`` (m x k) streams in from the west on the ``bus_h``-bit buses; ``w``
    (k x n) is preloaded tile by tile. With ``include_weight_preload`` the
    vertical segments also carry each tile's weights as they shift down to
    their rows (bottom row first) before the tile's partial sums.

    The output is declared at ``bus_v`` bits plus the growth of the external
    accumulator over ``ceil(k / R)`` k-blocks.
    """
    if a.cols != w.rows:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {w.shape}")
    if a.rows == 0:
        raise ShapeError("no rows to stream")
    if a.bits > cfg.bus_h:
        raise WidthError(f"{a.bits}-bit activations do not fit the {cfg.bus_h}-bit horizontal bus")
    R, C = cfg.rows, cfg.cols
    if a.bits + w.bits + (R - 1).bit_length() > 62:
        raise ValueError("operand widths exceed int64 simulation range")

    gemm = GemmSpec(a.rows, a.cols, w.cols)
    schedule = tile_gemm(gemm, w, cfg)
    h_mask = (1 << cfg.bus_h) - 1
    v_mask = (1 << cfg.bus_v) - 1
    m = a.rows

    h_state = np.zeros(R, dtype=np.int64)
    v_state = np.zeros((R, C), dtype=np.int64)
    h_toggles = v_toggles = 0
    preload_cycles = 0
    out = np.zeros((m, gemm.n_cols), dtype=np.int64)

    for t, tile in enumerate(schedule):
        k0, k1 = tile.k_range
        n0, n1 = tile.n_range
        block = np.zeros((m, R), dtype=np.int64)
        block[:, : k1 - k0] = a.data[:, k0:k1]

        h_toggles += C * _seq_toggles(h_state, block, h_mask)
        h_state = block[-1].copy()

        if include_weight_preload:
            for r in range(R - 1):
                passing = tile.weights[R - 1:r:-1, :]
                v_toggles += _seq_toggles(v_state[r], passing, v_mask)
                v_state[r] = passing[-1]
                preload_cycles += passing.shape[0] * C

        psum = np.cumsum(block[:, :, None] * tile.weights[None, :, :], axis=1)
        _check_psum(psum, cfg.bus_v, t)
        v_toggles += _seq_toggles(v_state, psum, v_mask)
        v_state = psum[-1].copy()

        out[:, n0:n1] += psum[:, R - 1, : n1 - n0]

    cycles = m * len(schedule)
    activity = BusActivity(
        h_toggles,
        v_toggles,
        R * C * cycles,
        R * C * cycles + preload_cycles,
        cfg.bus_h,
        cfg.bus_v,
    )
    out_bits = cfg.bus_v + (schedule.k_blocks - 1).bit_length()
    return SimResult(IntMatrix(out, out_bits, signed=True), activity, cycles, len(schedule))


def zero_bubble_correction(a: IntMatrix, w: IntMatrix, cfg: ArrayConfig) -> tuple[int, int]:
    """Extra (horizontal, vertical) toggles of a pipelined array with zero bubbles.

    A cycle-level array that zero-fills its skew/drain slots puts at least
    one zero between consecutive tiles on every segment and drains to zero
    after the last tile. For a segment whose tile sequences end with ``l_j``
    and start with ``f_j`` this adds, relative to the back-to-back stream::

        sum_j [pop(l_j) + pop(f_{j+1}) - pop(l_j ^ f_{j+1})] + pop(l_last)

    Weight preload is not modeled here.
    """
    gemm = GemmSpec(a.rows, a.cols, w.cols)
    schedule = tile_gemm(gemm, w, cfg)
    R, C = cfg.rows, cfg.cols
    h_mask = (1 << cfg.bus_h) - 1
    v_mask = (1 << cfg.bus_v) - 1

    h_first, h_last, v_first, v_last = [], [], [], []
    for tile in schedule:
        k0, k1 = tile.k_range
        ends = np.zeros((2, R), dtype=np.int64)
        ends[:, : k1 - k0] = a.data[[0, -1], k0:k1]
        psum = np.cumsum(ends[:, :, None] * tile.weights[None, :, :], axis=1)
        h_first.append(ends[0])
        h_last.append(ends[1])
        v_first.append(psum[0])
        v_last.append(psum[1])

    def correction(first: Sequence[np.ndarray], last: Sequence[np.ndarray], mask: int) -> int:
        total = _popcount_sum(last[-1], mask)
        for lj, fj in zip(last[:-1], first[1:]):
            total += _popcount_sum(lj, mask) + _popcount_sum(fj, mask) - _popcount_sum(lj ^ fj, mask)
        return total

    return C * correction(h_first, h_last, h_mask), correction(v_first, v_last, v_mask)


def activity_profile(result: SimResult | BusActivity, cfg: ArrayConfig | None = None) -> ActivityProfile:
    """Average per-bit toggle rates of a simulation (or merged activity)."""
    act = result.activity if isinstance(result, SimResult) else result
    if cfg is not None and (act.bus_h, act.bus_v) != (cfg.bus_h, cfg.bus_v):
        raise ValueError("activity was recorded for different bus widths")
    return ActivityProfile(act.a_h, act.a_v)


def aggregate_activity(activities: Iterable[BusActivity]) -> BusActivity:
    """Toggle-weighted merge across layers (total toggles over total opportunities)."""
    activities = list(activities)
    if not activities:
        raise EmptySimulationError("nothing to aggregate")
    total = activities[0]
    for act in activities[1:]:
        total = total + act
    return total
