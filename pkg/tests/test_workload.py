import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from asysa.model import ArrayConfig
from asysa.workload import (
    RESNET50_LAYERS,
    GemmSpec,
    IntMatrix,
    LayerSpec,
    ShapeError,
    TraceParseError,
    WidthError,
    format_trace,
    im2col,
    load_trace,
    lower_conv_to_gemm,
    parse_trace,
    quantize,
    synth_activations,
    synth_weights,
    tile_gemm,
    write_trace,
)

from oracles import naive_im2col, triple_loop_matmul


def test_table_layers_lower_to_expected_gemms():
    dims = {l.name: lower_conv_to_gemm(l) for l in RESNET50_LAYERS}
    assert dims["L1"] == GemmSpec(3136, 256, 64)
    assert dims["L2"] == GemmSpec(784, 1152, 128)
    assert lower_conv_to_gemm(LayerSpec("t", 1, 1, 1, 1, 1)) == GemmSpec(1, 1, 1)


@pytest.mark.parametrize("layer", [RESNET50_LAYERS[0].scaled(8), RESNET50_LAYERS[1].scaled(8)], ids=["L1", "L2"])
def test_lowering_matches_naive_im2col_shapes(layer):
    rng = np.random.default_rng(3)
    in_h, in_w = layer.input_size()
    fmap = rng.integers(0, 1 << 16, (layer.in_channels, in_h * in_w))
    got = im2col(IntMatrix(fmap, 16, False), layer)
    gemm = lower_conv_to_gemm(layer)
    ref = naive_im2col(fmap.reshape(layer.in_channels, in_h, in_w), layer.kernel,
                       layer.out_height, layer.out_width, (layer.kernel - 1) // 2)
    assert got.shape == ref.shape == (gemm.m_rows, gemm.k_depth)
    assert np.array_equal(got.data, ref)


def test_layer_validation():
    with pytest.raises(ValueError):
        LayerSpec("bad", 0, 1, 1, 1, 1)
    assert RESNET50_LAYERS[5].scaled(4).out_height == 4


def test_im2col_one_by_one_is_reshape():
    x = IntMatrix(np.arange(12).reshape(3, 4), 8, False)
    layer = LayerSpec("p", 1, 2, 2, 3, 5)
    got = im2col(x, layer)
    assert np.array_equal(got.data, np.arange(12).reshape(3, 4).T)


def test_im2col_hand_enumerated_padding():
    x = IntMatrix([[1, 2, 3, 4]], 8, False)
    got = im2col(x, LayerSpec("p", 3, 2, 2, 1, 1), padding=1)
    expected = [
        [0, 0, 0, 0, 1, 2, 0, 3, 4],
        [0, 0, 0, 1, 2, 0, 3, 4, 0],
        [0, 1, 2, 0, 3, 4, 0, 0, 0],
        [1, 2, 0, 3, 4, 0, 0, 0, 0],
    ]
    assert got.data.tolist() == expected
    assert got.data[:, 4].tolist() == [1, 2, 3, 4]


def test_im2col_zero_input_and_shape_errors():
    layer = LayerSpec("z", 3, 4, 4, 2, 1)
    zero = im2col(IntMatrix(np.zeros((2, 16)), 8, False), layer)
    assert not zero.data.any()
    with pytest.raises(ShapeError):
        im2col(IntMatrix(np.zeros((2, 15)), 8, False), layer)
    with pytest.raises(ShapeError):
        im2col(IntMatrix(np.zeros((2, 16)), 8, False), layer, in_height=5, in_width=5)


def test_im2col_strided_matches_naive():
    rng = np.random.default_rng(11)
    layer = LayerSpec("s", 3, 3, 4, 2, 1)
    fmap = rng.integers(0, 9, (2, 7, 9))
    got = im2col(IntMatrix(fmap.reshape(2, -1), 4, False), layer, stride=2, padding=0, in_height=7, in_width=9)
    assert np.array_equal(got.data, naive_im2col(fmap, 3, 3, 4, 0, 2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 5), st.integers(1, 4), st.data())
def test_pointwise_conv_equals_channel_dot_products(c, h, w, m, data):
    fmap = data.draw(hnp.arrays(np.int64, (c, h * w), elements=st.integers(0, 255)))
    weights = data.draw(hnp.arrays(np.int64, (c, m), elements=st.integers(-128, 127)))
    a = im2col(IntMatrix(fmap, 8, False), LayerSpec("pw", 1, h, w, c, m))
    gemm = a.data @ weights
    for pix in range(h * w):
        for oc in range(m):
            assert gemm[pix, oc] == sum(int(fmap[ch, pix]) * int(weights[ch, oc]) for ch in range(c))


def test_tiling_counts_and_padding():
    cfg = ArrayConfig.for_integer_ws(32, 32, 16)
    w = IntMatrix(np.ones((1152, 128)), 16, True)
    assert len(tile_gemm(GemmSpec(784, 1152, 128), w, cfg)) == 144
    assert len(tile_gemm(GemmSpec(10, 32, 32), IntMatrix(np.ones((32, 32)), 16, True), cfg)) == 1
    sched = tile_gemm(GemmSpec(1, 33, 1), IntMatrix(np.ones((33, 1)), 16, True), cfg)
    assert len(sched) == 2
    second = sched.tiles[1]
    assert second.k_range == (32, 33)
    assert second.weights.shape == (32, 32)
    assert second.weights[0, 0] == 1 and second.weights.sum() == 1
    with pytest.raises(ShapeError):
        tile_gemm(GemmSpec(1, 33, 1), IntMatrix(np.ones((32, 1)), 16, True), cfg)


def test_tile_order_is_n_major():
    cfg = ArrayConfig.for_integer_ws(2, 2, 8)
    sched = tile_gemm(GemmSpec(1, 4, 4), IntMatrix(np.zeros((4, 4)), 8, True), cfg)
    assert [(t.n_block, t.k_block) for t in sched] == [(0, 0), (0, 1), (1, 0), (1, 1)]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 9), st.integers(1, 9), st.integers(1, 9), st.data())
def test_tiling_is_complete(r, c, m, k, n, data):
    a = data.draw(hnp.arrays(np.int64, (m, k), elements=st.integers(0, 15)))
    w = data.draw(hnp.arrays(np.int64, (k, n), elements=st.integers(-8, 7)))
    sched = tile_gemm(GemmSpec(m, k, n), IntMatrix(w, 4, True), ArrayConfig.for_integer_ws(r, c, 4))
    assert len(sched) == -(-k // r) * -(-n // c)
    covered = np.zeros((k, n), dtype=int)
    out = np.zeros((m, n), dtype=np.int64)
    for t in sched:
        k0, k1 = t.k_range
        n0, n1 = t.n_range
        covered[k0:k1, n0:n1] += 1
        padded_a = np.zeros((m, r), dtype=np.int64)
        padded_a[:, : k1 - k0] = a[:, k0:k1]
        out[:, n0:n1] += (padded_a @ t.weights)[:, : n1 - n0]
    assert (covered == 1).all()
    assert out.tolist() == triple_loop_matmul(a, w)


def test_quantize_examples():
    assert quantize([[0.0]], 8, True, 0.37).data.tolist() == [[0]]
    assert quantize([[1.0]], 16, False, 1.0).data.tolist() == [[1]]
    assert quantize([[1e9]], 16, False, 1.0).data.tolist() == [[65535]]
    assert quantize([[-1e9]], 8, True, 1.0).data.tolist() == [[-128]]
    assert quantize([[0.5, -0.5, 1.5, -2.5]], 8, True, 1.0).data.tolist() == [[1, -1, 2, -3]]
    assert quantize([[-3.0]], 8, False, 1.0).data.tolist() == [[0]]
    with pytest.raises(ValueError):
        quantize([[float("nan")]], 8, True, 1.0)
    with pytest.raises(ValueError):
        quantize([[1.0]], 1, True, 1.0)


@given(hnp.arrays(np.float64, (3, 4), elements=st.floats(-1e6, 1e6)), st.floats(1e-3, 1e3))
def test_quantize_is_deterministic_and_in_range(values, scale):
    q1 = quantize(values, 12, True, scale)
    q2 = quantize(values.copy(), 12, True, scale)
    assert q1 == q2
    assert q1.data.min() >= -2048 and q1.data.max() <= 2047


def test_synth_activations_examples():
    assert not synth_activations(20, 30, 1.0, 16, 0).data.any()
    full = synth_activations(100, 100, 0.0, 16, 1)
    assert full.data.min() >= 1 and full.data.max() <= 65535
    half = synth_activations(1000, 1000, 0.5, 16, 2)
    assert abs((half.data == 0).mean() - 0.5) < 0.01
    assert not half.signed and half.bits == 16


def test_synth_is_seed_deterministic():
    assert synth_activations(7, 9, 0.3, 16, [5, 1, 0]) == synth_activations(7, 9, 0.3, 16, [5, 1, 0])
    assert synth_activations(7, 9, 0.3, 16, 1) != synth_activations(7, 9, 0.3, 16, 2)
    w = synth_weights(50, 50, 16, 3)
    assert w.signed and w.data.min() >= -32768 and w.data.max() <= 32767
    assert (w.data < 0).any() and (w.data > 0).any()


# First PCG64 outputs for seed 42 mapped by the documented rules; guards against
# silent changes of the generator or the value mapping.
FROZEN_ACT = [53462, 39629, 33625, 34271, 36281, 10003]
FROZEN_WTS = [-22904, 32705, -27100, 2189, 491, -11380]


def test_synth_stream_is_frozen():
    assert synth_activations(1, 6, 0.0, 16, 42).data.tolist() == [FROZEN_ACT]
    assert synth_weights(1, 6, 16, 42).data.tolist() == [FROZEN_WTS]


def test_trace_examples(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("width=16 signed=0 rows=2 cols=2\n1 2\n3 4\n")
    m = load_trace(p)
    assert m.shape == (2, 2) and m.data.tolist() == [[1, 2], [3, 4]] and m.bits == 16 and not m.signed

    p.write_text("width=8 signed=1 rows=0 cols=3\n")
    assert load_trace(p).shape == (0, 3)

    p.write_text("width=16 signed=0 rows=1 cols=2\n5 70000\n")
    with pytest.raises(WidthError) as err:
        load_trace(p)
    assert err.value.index == (0, 1) and err.value.value == 70000


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("rows=2\n", 1, 1),
        ("# comment\nwidth=8 signed=0 rows=1 cols=2\n1 x2\n", 3, 3),
        ("width=8 signed=0 rows=1 cols=2\n1\n", 2, 1),
        ("", 1, 1),
    ],
)
def test_trace_parse_errors(text, line, column):
    with pytest.raises(TraceParseError) as err:
        parse_trace(text)
    assert (err.value.line, err.value.column) == (line, column)


@settings(max_examples=100)
@given(st.integers(1, 40), st.booleans(), st.integers(0, 5), st.integers(1, 5), st.data())
def test_trace_round_trip(bits, signed, rows, cols, data):
    lo, hi = IntMatrix.value_range(bits, signed)
    arr = data.draw(hnp.arrays(np.int64, (rows, cols), elements=st.integers(lo, hi)))
    m = IntMatrix(arr, bits, signed)
    assert parse_trace(format_trace(m)) == m


def test_write_trace_file(tmp_path):
    m = synth_weights(3, 4, 16, 9)
    write_trace(m, tmp_path / "w.txt")
    assert load_trace(tmp_path / "w.txt") == m


def test_intmatrix_is_immutable_and_checked():
    m = IntMatrix([[1, 2]], 4, False)
    with pytest.raises(ValueError):
        m.data[0, 0] = 3
    with pytest.raises(WidthError):
        IntMatrix([[16]], 4, False)
    with pytest.raises(WidthError):
        IntMatrix([[-9]], 4, True)
