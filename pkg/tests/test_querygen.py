"""Query construction: lenient object parsing, strict aspect schemas,
numeric csv serialization, and chart rendering."""

import numpy as np
import pytest

from naquery.dataset import RepresentativeSeries
from naquery.errors import NoJsonFound, RenderFailure, SchemaViolation
from naquery.querygen import (build_rewrite_prompt, parse_rewritten_query,
                              passthrough_query, render_group_image,
                              serialize_numeric)
from naquery.textparse import extract_fenced_blocks, loads_object

GOOD_REWRITE = """{
"task_description": "classify motions",
"data_aspects": {"name": "d", "description": "x", "features": "f",
                 "context": "c", "patterns": "p"},
"model_aspects": {"name": "m",
                  "hardware_specs": {"device_name": "mcu",
                                     "ram": "32768", "flash": "65536"},
                  "MAC": "", "parameters": "", "latency": "500",
                  "performance": "high accuracy"}
}"""


def rep(mean, std=None, label="g", support=2):
    mean = np.asarray(mean, dtype=float)
    std = np.zeros_like(mean) if std is None else np.asarray(std,
                                                             dtype=float)
    return RepresentativeSeries(group_label=label, mean=mean, std=std,
                                support_count=support)


# --- lenient text parsing ------------------------------------------------

def test_extract_fenced_blocks_langs():
    text = "a\n```python\nx = 1\n```\nb\n```\nplain\n```\nc\n```json\n{}\n```\n"
    assert extract_fenced_blocks(text) == ["x = 1\n", "plain\n", "{}\n"]
    # untagged fences count for any language; mismatched tags do not
    assert extract_fenced_blocks(text, lang="python") == ["x = 1\n",
                                                          "plain\n"]


def test_loads_object_plain_and_fenced():
    assert loads_object('{"a": 1}') == {"a": 1}
    assert loads_object('noise ```json\n{"a": 1}\n``` more') == {"a": 1}


def test_loads_object_comments_and_trailing_commas():
    text = '{\n "a": 1, // a comment\n "b": [1, 2,],\n}'
    assert loads_object(text) == {"a": 1, "b": [1, 2]}


def test_loads_object_python_literals():
    text = "{'a': 'it''s', 'flag': True, 'none': None}"
    obj = loads_object(text)
    assert obj["flag"] is True


def test_loads_object_failure():
    with pytest.raises(NoJsonFound):
        loads_object("nothing object-like here")


# --- rewritten-query schema ----------------------------------------------

def test_parse_rewritten_query_happy():
    q = parse_rewritten_query(GOOD_REWRITE)
    assert q.model.flash == "65536"
    assert q.model.device_name == "mcu"
    assert q.data.patterns == "p"


def test_parse_rewritten_query_missing_key():
    broken = GOOD_REWRITE.replace('"patterns": "p"', '"typo": "p"')
    with pytest.raises(SchemaViolation) as exc:
        parse_rewritten_query(broken)
    assert "patterns" in exc.value.missing
    assert "typo" in exc.value.extra


def test_parse_rewritten_query_bad_bytes():
    broken = GOOD_REWRITE.replace('"ram": "32768"', '"ram": "lots"')
    with pytest.raises(SchemaViolation):
        parse_rewritten_query(broken)


def test_passthrough_query():
    q = passthrough_query("raw words")
    assert q.task_description == "raw words"
    assert q.data.name == "" and q.model.flash == ""


# --- numeric csv ---------------------------------------------------------

def test_serialize_numeric_short_series_verbatim():
    reps = [rep([[1.0], [2.0], [3.0]], label="a"),
            rep([[4.0], [5.0], [6.0]], label="b")]
    csv_text = serialize_numeric(reps, fixed_length=10)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "timestamp,a_f0,b_f0"
    assert lines[1] == "0,1,4"
    assert len(lines) == 4


def test_serialize_numeric_pools_long_series():
    t = 10
    reps = [rep(np.arange(t, dtype=float).reshape(t, 1))]
    csv_text = serialize_numeric(reps, fixed_length=5)
    lines = csv_text.strip().split("\n")
    assert len(lines) == 6  # header + 5 pooled rows
    # segment means of [0..9] over 5 equal chunks
    values = [float(l.split(",")[1]) for l in lines[1:]]
    assert values == [0.5, 2.5, 4.5, 6.5, 8.5]


def test_serialize_numeric_sanitizes_labels():
    reps = [rep([[1.0, 2.0]], label="[90, 95)")]
    header = serialize_numeric(reps).split("\n")[0]
    assert header == "timestamp,[90-95)_f0,[90-95)_f1"
    assert header.count(",") == 2


def test_serialize_numeric_rounds():
    reps = [rep([[1.23456789]])]
    assert "1.2346" in serialize_numeric(reps)


# --- chart rendering -----------------------------------------------------

def test_render_deterministic_bytes():
    r = rep(np.sin(np.arange(20)).reshape(20, 1),
            std=np.full((20, 1), 0.1))
    assert render_group_image(r) == render_group_image(r)


def test_render_multifeature_is_taller():
    r1 = rep(np.zeros((10, 1)))
    r2 = rep(np.zeros((10, 3)))
    png1, png2 = render_group_image(r1), render_group_image(r2)
    assert png1[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(png2) != len(png1)


def test_render_single_timestep_ok():
    assert render_group_image(rep([[1.0, 2.0]]))


def test_render_zero_canvas_rejected():
    with pytest.raises(RenderFailure):
        render_group_image(rep([[1.0]]), subplot_width_px=0)


# --- prompt assembly -----------------------------------------------------

def test_build_rewrite_prompt_contains_context(cls_data_dir):
    from naquery.dataset import load_dataset, representative_series
    ds = load_dataset(cls_data_dir, "motion6")
    csv_text = serialize_numeric(representative_series(ds))
    prompt = build_rewrite_prompt("classify my signals", ds, csv_text)
    assert "classify my signals" in prompt
    assert "{user_prompt}" not in prompt
    assert "[Dataset Description]" in prompt
    assert "acc x" in prompt
    assert "timestamp," in prompt
