import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from asysa.model import ArrayConfig, required_accumulator_width
from asysa.sim import (
    BusActivity,
    EmptySimulationError,
    activity_profile,
    aggregate_activity,
    hamming_toggles,
    reference_matmul,
    run_ws_matmul,
    stream_toggle_stats,
    zero_bubble_correction,
)
from asysa.workload import IntMatrix, ShapeError, WidthError, synth_activations, synth_weights

from oracles import cycle_accurate_ws, triple_loop_matmul


def _ws(rows, cols, bits=8):
    return ArrayConfig.for_integer_ws(rows, cols, bits)


@pytest.mark.parametrize("prev, nxt, width, expected", [(0, 0xFFFF, 16, 16), (1, -1, 16, 15), (0x1234, 0x1234, 16, 0)])
def test_hamming_examples(prev, nxt, width, expected):
    assert hamming_toggles(prev, nxt, width) == expected


@given(st.integers(-(2**30), 2**30), st.integers(1, 40))
def test_hamming_self_is_zero(x, width):
    assert hamming_toggles(x, x, width) == 0


@pytest.mark.parametrize(
    "stream, width, expected", [([], 16, (0, 0)), ([0, 1, 0, 1], 1, (3, 4)), ([5, 5, 5], 16, (2, 3))]
)
def test_stream_toggle_stats_examples(stream, width, expected):
    assert tuple(stream_toggle_stats(stream, width)) == expected


@given(st.lists(st.integers(-(2**15), 2**15 - 1), max_size=20), st.integers(0, 10))
def test_stream_toggles_are_shift_invariant(stream, delay):
    # A skew register prepends zeros; the first value still departs from 0.
    shifted = [0] * delay + stream
    assert stream_toggle_stats(shifted, 16).toggles == stream_toggle_stats(stream, 16).toggles


def test_reference_matmul_examples():
    x = IntMatrix([[1, 2], [3, 4]], 8, False)
    eye = IntMatrix([[1, 0], [0, 1]], 8, True)
    assert reference_matmul(x, eye).data.tolist() == [[1, 2], [3, 4]]
    assert reference_matmul(IntMatrix([[3]], 8, False), IntMatrix([[-2]], 8, True)).data.tolist() == [[-6]]
    rng = np.random.default_rng(5)
    a, w = rng.integers(0, 256, (5, 4)), rng.integers(-128, 128, (4, 3))
    got = reference_matmul(IntMatrix(a, 8, False), IntMatrix(w, 8, True))
    assert got.data.tolist() == triple_loop_matmul(a, w)
    with pytest.raises(ShapeError):
        reference_matmul(IntMatrix([[1, 2]], 8, False), IntMatrix([[1, 2]], 8, True))


def test_all_zero_workload():
    res = run_ws_matmul(IntMatrix(np.zeros((6, 5)), 8, False), IntMatrix(np.zeros((5, 3)), 8, True), _ws(2, 2))
    assert not res.output.data.any()
    assert res.activity.h_toggles == res.activity.v_toggles == 0
    prof = activity_profile(res)
    assert (prof.a_h, prof.a_v) == (0.0, 0.0)


def test_single_pe_hand_trace():
    cfg = ArrayConfig(1, 1, 8, 16)
    res = run_ws_matmul(IntMatrix([[1], [1], [1]], 8, False), IntMatrix([[5]], 8, True), cfg)
    assert res.output.data.tolist() == [[5], [5], [5]]
    assert res.activity.v_toggles == 2
    assert res.activity.h_toggles == 1
    assert (res.cycles, res.tiles) == (3, 1)


def test_saturating_horizontal_stream():
    n = 40
    a = np.array([[0xFFFF if i % 2 == 0 else 0] for i in range(n)])
    res = run_ws_matmul(IntMatrix(a, 16, False), IntMatrix([[0]], 16, True), ArrayConfig.for_integer_ws(1, 1, 16))
    prof = activity_profile(res)
    assert prof.a_v == 0.0
    assert prof.a_h == pytest.approx(1.0, abs=1.0 / n)


def test_output_width_contract():
    cfg = ArrayConfig.for_integer_ws(4, 4, 8)
    one_block = run_ws_matmul(IntMatrix(np.ones((2, 4)), 8, False), IntMatrix(np.ones((4, 3)), 8, True), cfg)
    assert one_block.output.bits == required_accumulator_width(8, 4)
    many = run_ws_matmul(IntMatrix(np.ones((2, 9)), 8, False), IntMatrix(np.ones((9, 3)), 8, True), cfg)
    assert many.output.bits == required_accumulator_width(8, 4) + 2


def test_narrow_vertical_bus_overflows():
    cfg = ArrayConfig(2, 1, 8, 8)
    with pytest.raises(WidthError):
        run_ws_matmul(IntMatrix([[255, 255]], 8, False), IntMatrix([[-128], [-128]], 8, True), cfg)
    with pytest.raises(WidthError):
        run_ws_matmul(IntMatrix([[1]], 16, False), IntMatrix([[1]], 8, True), ArrayConfig(1, 1, 8, 20))


@pytest.mark.parametrize("bits", [4, 8, 16])
@pytest.mark.parametrize("rows", [1, 2, 3, 17, 32])
def test_width_safety_extremal(bits, rows):
    cfg = ArrayConfig.for_integer_ws(rows, 2, bits)
    amax, wmin, wmax = (1 << bits) - 1, -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    a = IntMatrix(np.full((3, rows), amax), bits, False)
    for fill in (wmin, wmax):
        w = IntMatrix(np.full((rows, 2), fill), bits, True)
        res = run_ws_matmul(a, w, cfg)
        assert res.output.data[0, 0] == rows * amax * fill


@settings(max_examples=500, deadline=None)
@given(
    st.integers(1, 8), st.integers(1, 8), st.integers(1, 64), st.integers(1, 64), st.integers(1, 64),
    st.integers(0, 2**32 - 1),
)
def test_functional_exactness(r, c, m, k, n, seed):
    a = synth_activations(m, k, 0.3, 8, seed)
    w = synth_weights(k, n, 8, seed + 1)
    res = run_ws_matmul(a, w, _ws(r, c))
    assert np.array_equal(res.output.data, reference_matmul(a, w).data)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.data())
def test_stream_model_matches_cycle_oracle(r, c, m, k, n, data):
    a = data.draw(hnp.arrays(np.int64, (m, k), elements=st.integers(0, 15)))
    w = data.draw(hnp.arrays(np.int64, (k, n), elements=st.integers(-8, 7)))
    cfg = _ws(r, c, 4)
    A, W = IntMatrix(a, 4, False), IntMatrix(w, 4, True)
    res = run_ws_matmul(A, W, cfg)
    out, h_tog, v_tog = cycle_accurate_ws(a, w, r, c, cfg.bus_h, cfg.bus_v)
    dh, dv = zero_bubble_correction(A, W, cfg)
    assert res.output.data.tolist() == out
    assert res.activity.h_toggles + dh == h_tog
    assert res.activity.v_toggles + dv == v_tog


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 12), st.integers(1, 12), st.integers(1, 12),
       st.integers(0, 10**6), st.floats(0.0, 1.0))
def test_activity_bounds(r, c, m, k, n, seed, zf):
    cfg = _ws(r, c)
    res = run_ws_matmul(synth_activations(m, k, zf, 8, seed), synth_weights(k, n, 8, seed), cfg)
    act = res.activity
    assert 0 <= act.h_toggles <= act.h_cycles * act.bus_h
    assert 0 <= act.v_toggles <= act.v_cycles * act.bus_v
    prof = activity_profile(res, cfg)
    assert 0.0 <= prof.a_h <= 1.0 and 0.0 <= prof.a_v <= 1.0


def test_zero_fraction_monotone_statistically():
    cfg = _ws(8, 8, 16)
    fractions = [0.0, 0.3, 0.6, 0.9]
    samples = {zf: [] for zf in fractions}
    for seed in range(12):
        w = synth_weights(16, 8, 16, 1000 + seed)
        for zf in fractions:
            a = synth_activations(64, 16, zf, 16, seed)
            samples[zf].append(run_ws_matmul(a, w, cfg).activity.h_toggles)
    means = [np.mean(samples[zf]) for zf in fractions]
    sems = [np.std(samples[zf], ddof=1) / np.sqrt(len(samples[zf])) for zf in fractions]
    for i in range(len(fractions) - 1):
        band = 3 * np.hypot(sems[i], sems[i + 1])
        assert means[i + 1] <= means[i] + band


def test_weight_preload_flag():
    cfg = _ws(3, 2)
    a = synth_activations(5, 3, 0.2, 8, 1)
    w = synth_weights(3, 2, 8, 2)
    base = run_ws_matmul(a, w, cfg)
    pre = run_ws_matmul(a, w, cfg, include_weight_preload=True)
    assert np.array_equal(base.output.data, pre.output.data)
    assert pre.activity.h_toggles == base.activity.h_toggles
    # segments below rows 0 and 1 see 2 and 1 weight values per column
    assert pre.activity.v_cycles == base.activity.v_cycles + (2 + 1) * 2


def test_weight_preload_hand_trace():
    # 2x1 array, one tile: segment below row 0 carries w[1] then psum_0.
    cfg = ArrayConfig(2, 1, 4, 10)
    a = IntMatrix([[1, 0]], 4, False)
    w = IntMatrix([[3], [-1]], 4, True)
    base = run_ws_matmul(a, w, cfg)
    pre = run_ws_matmul(a, w, cfg, include_weight_preload=True)
    # row 0: 0 -> -1 (10 bits) -> 3 ; without preload 0 -> 3
    extra = hamming_toggles(0, -1, 10) + hamming_toggles(-1, 3, 10) - hamming_toggles(0, 3, 10)
    assert pre.activity.v_toggles - base.activity.v_toggles == extra


acts = st.builds(
    lambda h, v, hc, vc: BusActivity(h, v, hc, vc, 16, 37),
    st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6),
)


@given(acts, acts, acts)
def test_activity_merge_is_associative_and_commutative(x, y, z):
    assert (x + y) + z == x + (y + z)
    assert x + y == y + x
    assert aggregate_activity([x, y, z]) == aggregate_activity([z, x, y])


def test_aggregate_is_toggle_weighted():
    x = BusActivity(10, 0, 10, 10, 1, 1)
    y = BusActivity(0, 0, 90, 90, 1, 1)
    assert aggregate_activity([x, y]).a_h == pytest.approx(0.1)


def test_empty_and_mismatched_activity():
    empty = BusActivity.empty(ArrayConfig(2, 2, 8, 8))
    with pytest.raises(EmptySimulationError):
        empty.a_h
    with pytest.raises(EmptySimulationError):
        activity_profile(empty)
    with pytest.raises(EmptySimulationError):
        aggregate_activity([])
    with pytest.raises(ValueError):
        empty + BusActivity.empty(ArrayConfig(2, 2, 8, 9))
    with pytest.raises(ValueError):
        activity_profile(empty, ArrayConfig(2, 2, 8, 9))


def test_activity_dict_round_trip():
    x = BusActivity(1, 2, 3, 4, 16, 37)
    assert BusActivity.from_dict(x.to_dict()) == x


def test_shape_errors():
    cfg = _ws(2, 2)
    with pytest.raises(ShapeError):
        run_ws_matmul(IntMatrix(np.zeros((2, 3)), 8, False), IntMatrix(np.zeros((2, 2)), 8, True), cfg)
    with pytest.raises(ShapeError):
        run_ws_matmul(IntMatrix(np.zeros((0, 2)), 8, False), IntMatrix(np.zeros((2, 2)), 8, True), cfg)
