"""Analytical wirelength model of a systolic array and its optimal PE aspect ratio.

Every PE has a fixed area ``A = W * H``. The horizontal input bus (``bus_h``
bits) crosses each PE's width and the vertical partial-sum bus (``bus_v``
bits) crosses each PE's height, so the array-wide wirelength is::

    WL = R * C * (W * bus_h + H * bus_v)

Scaling each bus by its per-bit switching activity gives a cost proportional
to interconnect switching energy. Minimizing either quantity at fixed area
yields ``W / H = (bus_v * a_v) / (bus_h * a_h)``.

Lengths are normalized: the default PE area is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ArrayConfig",
    "PeGeometry",
    "ActivityProfile",
    "ZeroActivityError",
    "GeometryError",
    "BracketError",
    "horizontal_wirelength",
    "vertical_wirelength",
    "total_wirelength",
    "weighted_cost",
    "optimal_aspect_ratio",
    "clamped_aspect_ratio",
    "round_ratio",
    "solve_geometry",
    "numeric_min_aspect_ratio",
    "relative_cost_savings",
    "savings_at_ratio",
    "minimum_weighted_cost",
    "required_accumulator_width",
]

DEFAULT_AREA = 1.0
DEFAULT_BRACKET = (1.0 / 64.0, 64.0)
DEFAULT_TOL = 1e-9

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


class ZeroActivityError(ValueError):
    """A direction carries no switching load, so the optimal ratio is unbounded."""


class GeometryError(ValueError):
    """Non-positive area or aspect ratio."""


class BracketError(RuntimeError):
    """The cost minimum does not lie inside the search bracket."""


@dataclass(frozen=True)
class ArrayConfig:
    """R x C array of PEs with ``bus_h``-bit inputs and ``bus_v``-bit partial sums."""

    rows: int
    cols: int
    bus_h: int
    bus_v: int

    def __post_init__(self):
        for name in ("rows", "cols", "bus_h", "bus_v"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"ArrayConfig.{name} must be a positive integer, got {value!r}")

    @classmethod
    def for_integer_ws(cls, rows: int, cols: int, input_bits: int) -> "ArrayConfig":
        """Weight-stationary integer array with a lossless accumulator bus."""
        return cls(rows, cols, input_bits, required_accumulator_width(input_bits, rows))


@dataclass(frozen=True)
class PeGeometry:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0) or not (
            math.isfinite(self.width) and math.isfinite(self.height)
        ):
            raise GeometryError(f"PE dimensions must be positive and finite: {self.width}, {self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def aspect_ratio(self) -> float:
        return self.width / self.height


@dataclass(frozen=True)
class ActivityProfile:
    """Average per-bit toggle probability on the horizontal and vertical buses."""

    a_h: float
    a_v: float

    def __post_init__(self):
        for name in ("a_h", "a_v"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"ActivityProfile.{name} must lie in [0, 1], got {value!r}")


UNIT_ACTIVITY = ActivityProfile(1.0, 1.0)


def horizontal_wirelength(cfg: ArrayConfig, pe: PeGeometry) -> float:
    return cfg.rows * cfg.cols * (pe.width * cfg.bus_h)


def vertical_wirelength(cfg: ArrayConfig, pe: PeGeometry) -> float:
    return cfg.rows * cfg.cols * (pe.height * cfg.bus_v)


def total_wirelength(cfg: ArrayConfig, pe: PeGeometry) -> float:
    return horizontal_wirelength(cfg, pe) + vertical_wirelength(cfg, pe)


def weighted_cost(cfg: ArrayConfig, pe: PeGeometry, act: ActivityProfile) -> float:
    """Activity-weighted wirelength; equals ``total_wirelength`` at unit activity."""
    return cfg.rows * cfg.cols * (
        pe.width * cfg.bus_h * act.a_h + pe.height * cfg.bus_v * act.a_v
    )


def _loads(cfg: ArrayConfig, act: ActivityProfile) -> tuple[float, float]:
    return cfg.bus_h * act.a_h, cfg.bus_v * act.a_v


def optimal_aspect_ratio(cfg: ArrayConfig, act: ActivityProfile) -> float:
    """Width-over-height ratio minimizing ``weighted_cost`` at fixed PE area.

    Raises ZeroActivityError when either direction has zero effective load;
    use ``clamped_aspect_ratio`` to get a bounded answer instead.
    """
    load_h, load_v = _loads(cfg, act)
    if load_h == 0:
        raise ZeroActivityError("horizontal bus has zero switching load; optimal W/H is unbounded")
    if load_v == 0:
        raise ZeroActivityError("vertical bus has zero switching load; optimal W/H collapses to 0")
    return load_v / load_h


def clamped_aspect_ratio(cfg: ArrayConfig, act: ActivityProfile, max_ratio: float = DEFAULT_BRACKET[1]) -> float:
    """``optimal_aspect_ratio`` limited to ``[1/max_ratio, max_ratio]``.

    Zero load in both directions gives a square PE.
    """
    if max_ratio < 1:
        raise GeometryError(f"max_ratio must be >= 1, got {max_ratio}")
    load_h, load_v = _loads(cfg, act)
    if load_h == 0 and load_v == 0:
        return 1.0
    if load_h == 0:
        return float(max_ratio)
    if load_v == 0:
        return 1.0 / max_ratio
    return min(max(load_v / load_h, 1.0 / max_ratio), float(max_ratio))


def round_ratio(ratio: float, digits: int = 1) -> float:
    return round(ratio, digits)


def solve_geometry(area: float, ratio: float) -> PeGeometry:
    """PE whose width/height equals ``ratio`` and whose area equals ``area``."""
    if not (area > 0 and ratio > 0) or not (math.isfinite(area) and math.isfinite(ratio)):
        raise GeometryError(f"area and ratio must be positive and finite, got area={area}, ratio={ratio}")
    return PeGeometry(math.sqrt(area * ratio), math.sqrt(area / ratio))


def _cost_delta(load_h: float, load_v: float, u1: float, u2: float) -> float:
    # cost(u) = load_h*e^(u/2) + load_v*e^(-u/2) per unit sqrt(area) and PE, u = log(W/H).
    # Exact factorization of cost(u1) - cost(u2); keeps the sign reliable near
    # the minimum where the two costs agree to ~1e-16.
    return math.expm1((u1 - u2) / 2.0) * (load_h * math.exp(u2 / 2.0) - load_v * math.exp(-u1 / 2.0))


def numeric_min_aspect_ratio(
    cfg: ArrayConfig,
    act: ActivityProfile,
    area: float = DEFAULT_AREA,
    lo: float = DEFAULT_BRACKET[0],
    hi: float = DEFAULT_BRACKET[1],
    tol: float = DEFAULT_TOL,
) -> float:
    """Golden-section search for the cost-minimizing ratio over ``log(W/H)``.

    Independent of the closed form: only cost comparisons are used. ``tol``
    bounds the final log-bracket width, i.e. the relative error of the ratio.
    Raises BracketError if an endpoint beats every interior probe.
    """
    if not (0 < lo < hi):
        raise GeometryError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    solve_geometry(area, 1.0)
    load_h, load_v = _loads(cfg, act)

    def less(u1: float, u2: float) -> bool:
        return _cost_delta(load_h, load_v, u1, u2) < 0

    u_lo, u_hi = math.log(lo), math.log(hi)
    a, b = u_lo, u_hi
    c = a + _INV_PHI2 * (b - a)
    d = a + _INV_PHI * (b - a)
    while b - a > tol:
        if less(c, d):
            b, d = d, c
            c = a + _INV_PHI2 * (b - a)
        else:
            a, c = c, d
            d = a + _INV_PHI * (b - a)
    best = c if less(c, d) else d

    if less(u_lo, best) or less(u_hi, best):
        raise BracketError(
            f"cost minimum lies outside [{lo:g}, {hi:g}]; widen the bracket"
        )
    return math.exp((a + b) / 2.0)


def savings_at_ratio(cfg: ArrayConfig, act: ActivityProfile, ratio: float) -> float:
    """Fractional weighted-cost reduction of a ``ratio`` PE versus a square one."""
    load_h, load_v = _loads(cfg, act)
    if load_h + load_v == 0:
        return 0.0
    root = math.sqrt(ratio)
    return 1.0 - (load_h * root + load_v / root) / (load_h + load_v)


def relative_cost_savings(cfg: ArrayConfig, act: ActivityProfile) -> float:
    """Weighted-cost reduction at the optimal ratio versus a square PE of equal area."""
    rho = optimal_aspect_ratio(cfg, act)
    return 1.0 - 2.0 * math.sqrt(rho) / (1.0 + rho)


def minimum_weighted_cost(cfg: ArrayConfig, act: ActivityProfile, area: float = DEFAULT_AREA) -> float:
    load_h, load_v = _loads(cfg, act)
    return 2.0 * cfg.rows * cfg.cols * math.sqrt(area * load_h * load_v)


def required_accumulator_width(input_bits: int, rows: int) -> int:
    """Signed bits needed to sum ``rows`` products of two ``input_bits`` operands.

    Each product fits ``2 * input_bits`` signed bits; summing ``rows`` of them
    grows the range by ``ceil(log2(rows))`` bits.
    """
    if input_bits < 1 or rows < 1:
        raise ValueError(f"input_bits and rows must be >= 1, got {input_bits}, {rows}")
    return 2 * input_bits + (rows - 1).bit_length()
