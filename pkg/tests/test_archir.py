"""Architecture IR: shape inference, validation, hashing, and the
chat-response parsers."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naquery.archir import (ArchitectureIR, LayerSpec, default_search_space,
                            infer_shapes, parse_candidate_config,
                            parse_candidate_configs, parse_search_space,
                            validate)
from naquery.errors import (NoSpaceFound, SchemaViolation, ShapeUnderflow)
from oracles import brute_valid_out_len


def arch_of(layers, in_shape=(32, 3), out=6, task="classification"):
    return ArchitectureIR(layers=tuple(layers), input_shape=in_shape,
                          output_units=out, task=task)


# --- shape inference -----------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64), st.integers(1, 9), st.integers(1, 4),
       st.integers(1, 8))
def test_valid_window_count_matches_sliding_oracle(in_len, k, s, c):
    arch = arch_of([LayerSpec(kind="Conv1D", filters=2, kernel_size=k,
                              strides=s)], in_shape=(in_len, c))
    if k > in_len:
        with pytest.raises(ShapeUnderflow):
            infer_shapes(arch)
        return
    (_, (out_len, channels)), = infer_shapes(arch)
    assert out_len == brute_valid_out_len(in_len, k, s)
    assert channels == 2


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 64), st.integers(1, 9))
def test_stride_one_valid_identity(in_len, k):
    if k > in_len:
        return
    arch = arch_of([LayerSpec(kind="Conv1D", filters=1, kernel_size=k)],
                   in_shape=(in_len, 1))
    (_, (out_len, _)), = infer_shapes(arch)
    assert out_len + k - 1 == in_len


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 64), st.integers(1, 12), st.integers(1, 4))
def test_same_padding_ceil(in_len, k, s):
    arch = arch_of([LayerSpec(kind="Conv1D", filters=1, kernel_size=k,
                              padding="same")], in_shape=(in_len, 1))
    (_, (out_len, _)), = infer_shapes(arch)
    assert out_len == in_len  # stride 1 keeps the length
    arch_s = arch_of([LayerSpec(kind="Conv1D", filters=1, kernel_size=k,
                                strides=s, padding="same")],
                     in_shape=(in_len, 1))
    (_, (out_s, _)), = infer_shapes(arch_s)
    assert out_s == -(-in_len // s)


def test_shapes_every_kind():
    layers = [
        LayerSpec(kind="Conv1D", filters=8, kernel_size=3),        # 30x8
        LayerSpec(kind="BatchNorm"),                               # 30x8
        LayerSpec(kind="MaxPool1D", kernel_size=2, strides=2),     # 15x8
        LayerSpec(kind="DepthwiseConv1D", kernel_size=3),          # 13x8
        LayerSpec(kind="AvgPool1D", kernel_size=2, strides=2),     # 6x8
        LayerSpec(kind="SeparableConv1D", filters=4, kernel_size=3),  # 4x4
        LayerSpec(kind="Dropout", rate=0.1),                       # 4x4
        LayerSpec(kind="LSTM", units=5, return_sequences=True),    # 4x5
        LayerSpec(kind="LSTM", units=7, return_sequences=False),   # 1x7
        LayerSpec(kind="Dense", units=6),                          # 1x6
    ]
    shapes = [s for _, s in infer_shapes(arch_of(layers))]
    assert shapes == [(30, 8), (30, 8), (15, 8), (13, 8), (6, 8), (4, 4),
                      (4, 4), (4, 5), (1, 7), (1, 6)]


def test_flatten_and_global_pool_collapse():
    shapes = [s for _, s in infer_shapes(arch_of(
        [LayerSpec(kind="Flatten"), LayerSpec(kind="Dense", units=2)],
        in_shape=(7, 3)))]
    assert shapes == [(1, 21), (1, 2)]
    shapes = [s for _, s in infer_shapes(arch_of(
        [LayerSpec(kind="GlobalAvgPool1D")], in_shape=(7, 3)))]
    assert shapes == [(1, 3)]


def test_underflow_reports_layer_index():
    arch = arch_of([LayerSpec(kind="Conv1D", filters=1, kernel_size=3),
                    LayerSpec(kind="MaxPool1D", kernel_size=64,
                              strides=64)])
    with pytest.raises(ShapeUnderflow) as exc:
        infer_shapes(arch)
    assert exc.value.layer_index == 1


# --- validation ----------------------------------------------------------

def good_cls_layers():
    return [LayerSpec(kind="Conv1D", filters=8, kernel_size=3,
                      activation="relu"),
            LayerSpec(kind="GlobalAvgPool1D"),
            LayerSpec(kind="Dense", units=6, activation="softmax")]


def test_validate_accepts_good_arch():
    assert validate(arch_of(good_cls_layers())) == []


def test_validate_head_rules():
    bad_units = good_cls_layers()
    bad_units[-1] = LayerSpec(kind="Dense", units=5, activation="softmax")
    assert any("head units" in v for v in validate(arch_of(bad_units)))

    bad_act = good_cls_layers()
    bad_act[-1] = LayerSpec(kind="Dense", units=6, activation="relu")
    assert any("head activation" in v for v in validate(arch_of(bad_act)))

    reg = arch_of([LayerSpec(kind="GlobalAvgPool1D"),
                   LayerSpec(kind="Dense", units=1, activation="linear")],
                  out=1, task="regression")
    assert validate(reg) == []


def test_validate_time_axis_consumed():
    layers = [LayerSpec(kind="GlobalAvgPool1D"),
              LayerSpec(kind="Conv1D", filters=2, kernel_size=1),
              LayerSpec(kind="Dense", units=6, activation="softmax")]
    assert any("time axis" in v for v in validate(arch_of(layers)))


def test_validate_double_final_lstm():
    layers = [LayerSpec(kind="LSTM", units=4, return_sequences=False),
              LayerSpec(kind="LSTM", units=4, return_sequences=False),
              LayerSpec(kind="Dense", units=6, activation="softmax")]
    assert any("LSTM" in v for v in validate(arch_of(layers)))


def test_validate_structural_problems():
    assert validate(arch_of([]))  # empty layer list
    missing_kernel = [LayerSpec(kind="Conv1D", filters=4),
                      LayerSpec(kind="Dense", units=6,
                                activation="softmax")]
    assert any("kernel_size" in v for v in validate(arch_of(
        missing_kernel)))
    bad_rate = [LayerSpec(kind="Dropout", rate=1.5),
                LayerSpec(kind="Dense", units=6, activation="softmax")]
    assert any("rate" in v for v in validate(arch_of(bad_rate)))


# --- hashing -------------------------------------------------------------

def test_content_hash_stable_and_distinct():
    a = arch_of(good_cls_layers())
    b = arch_of(good_cls_layers())
    assert a.content_hash() == b.content_hash()
    c = arch_of(good_cls_layers(), in_shape=(33, 3))
    assert a.content_hash() != c.content_hash()
    roundtrip = ArchitectureIR.from_dict(a.to_dict())
    assert roundtrip.content_hash() == a.content_hash()


# --- search-space parsing ------------------------------------------------

def test_parse_search_space_known_and_extras():
    text = ('Some prose.\n```python\n{"layer_type": ["Conv1D"],\n'
            ' "LSTM_units": [4, 8],\n "learning_rate": [0.001, 0.01]}\n'
            '```')
    space = parse_search_space(text)
    assert space.dimensions["LSTM_units"] == [4, 8]
    assert "learning_rate" in space.extras
    assert any("learning_rate" in w for w in space.warnings)


def test_parse_search_space_failures():
    with pytest.raises(NoSpaceFound):
        parse_search_space("no dictionary here at all")
    with pytest.raises(NoSpaceFound):
        parse_search_space('{"only_unknown": [1]}')


def test_default_search_space_dimensions_are_known():
    space = default_search_space()
    assert "layer_type" in space.dimensions
    assert space.warnings == []


# --- candidate parsing ---------------------------------------------------

def test_parse_candidate_pooling_descriptor():
    arch = parse_candidate_config(
        {"layer_sequence": [
            {"layer_type": "Conv1D", "filters": 4, "kernel_size": 3,
             "activation": "relu"},
            {"pooling_type": "max", "pool_size": 2},
            {"layer_type": "Dense", "units": 6,
             "activation": "softmax"}]},
        (32, 3), 6, "classification")
    pool = arch.layers[1]
    assert pool.kind == "MaxPool1D"
    assert pool.kernel_size == 2 and pool.strides == 2  # framework default


def test_parse_candidate_batchnorm_flag_appends_layer():
    arch = parse_candidate_config(
        {"layer_sequence": [
            {"layer_type": "Conv1D", "filters": 4, "kernel_size": 3,
             "batch_normalization": True},
            {"layer_type": "Dense", "units": 1,
             "activation": "linear"}]},
        (16, 1), 1, "regression")
    assert [l.kind for l in arch.layers] == ["Conv1D", "BatchNorm",
                                             "Dense"]


def test_parse_candidate_lstm_defaults():
    arch = parse_candidate_config(
        {"layer_sequence": [
            {"layer_type": "LSTM", "units": 8, "activation": "tanh",
             "dropout_rate": 0.2},
            {"layer_type": "Dense", "units": 1,
             "activation": "linear"}]},
        (16, 1), 1, "regression")
    lstm = arch.layers[0]
    assert lstm.return_sequences is False
    assert lstm.rate == 0.2


def test_parse_candidate_rejects_garbage():
    with pytest.raises(SchemaViolation):
        parse_candidate_config({"layer_sequence": []}, (8, 1), 1,
                               "regression")
    with pytest.raises(SchemaViolation):
        parse_candidate_config(
            {"layer_sequence": [{"layer_type": "Perceptron99"}]},
            (8, 1), 1, "regression")


def test_parse_candidate_configs_partitions_good_and_bad():
    text = (
        "First:\n```python\n"
        '{"layer_sequence": [{"layer_type": "Dense", "units": 2, '
        '"activation": "softmax"}]}\n```\n'
        "Second (broken):\n```python\n"
        '{"layer_sequence": [{"layer_type": "Mystery"}]}\n```\n'
        "Unrelated block:\n```python\nprint('hello')\n```\n")
    parsed, rejected = parse_candidate_configs(text, (8, 1), 2,
                                               "classification")
    assert len(parsed) == 1
    assert len(rejected) == 1
