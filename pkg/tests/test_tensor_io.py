"""Tensor container format and selection-report serialization."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echoprune.tensor_io import (
    KeptToken,
    SelectionReport,
    TensorFormatError,
    TextTokenSet,
    VisualTokenGrid,
    header_size,
    read_report,
    read_tensor,
    write_report,
    write_tensor,
)


def test_roundtrip_small_grid(tmp_path):
    data = np.arange(2 * 2 * 2 * 3, dtype=np.float32).reshape(2, 2, 2, 3) + 1.0
    path = tmp_path / "grid.ept"
    write_tensor(path, VisualTokenGrid(data))
    back = read_tensor(path)
    assert isinstance(back, VisualTokenGrid)
    assert back.data.tobytes() == data.tobytes()  # bit-exact


def test_magic_bytes(tmp_path):
    path = tmp_path / "t.ept"
    write_tensor(path, TextTokenSet(np.ones((1, 2), dtype=np.float32)))
    raw = path.read_bytes()
    assert raw[:4] == bytes([0x45, 0x50, 0x54, 0x31])  # "EPT1"


def test_payload_encoding_matches_struct(tmp_path):
    # independent float32 little-endian reference via struct
    data = np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32).reshape(1, 1, 1, 4)
    path = tmp_path / "p.ept"
    write_tensor(path, VisualTokenGrid(data))
    raw = path.read_bytes()
    payload = raw[header_size(4):]
    assert payload == struct.pack("<4f", 1.0, 0.0, 0.0, 0.0)


def test_header_size_is_deterministic(tmp_path):
    path = tmp_path / "h.ept"
    write_tensor(path, TextTokenSet(np.ones((2, 3), dtype=np.float32)))
    raw = path.read_bytes()
    assert len(raw) == header_size(2) + 4 * 6
    assert header_size(2) == 24
    assert header_size(4) == 40


def test_rank2_decodes_as_text_set(tmp_path):
    path = tmp_path / "t.ept"
    write_tensor(path, TextTokenSet(np.arange(6, dtype=np.float32).reshape(2, 3) + 1))
    back = read_tensor(path)
    assert isinstance(back, TextTokenSet)
    assert back.count == 2 and back.dim == 3


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ept"
    write_tensor(path, TextTokenSet(np.ones((1, 1), dtype=np.float32)))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.offset == 0


def test_unsupported_version_and_dtype(tmp_path):
    path = tmp_path / "v.ept"
    write_tensor(path, TextTokenSet(np.ones((1, 1), dtype=np.float32)))
    raw = bytearray(path.read_bytes())
    for offset, value in ((4, 9), (5, 7)):
        mutated = bytearray(raw)
        mutated[offset] = value
        path.write_bytes(bytes(mutated))
        with pytest.raises(TensorFormatError) as err:
            read_tensor(path)
        assert err.value.offset == offset


def test_truncated_payload_reports_lengths(tmp_path):
    path = tmp_path / "trunc.ept"
    write_tensor(path, TextTokenSet(np.ones((2, 3), dtype=np.float32)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    msg = str(err.value)
    assert str(len(raw)) in msg and str(len(raw) - 4) in msg


def test_nan_payload_rejected_with_offset(tmp_path):
    path = tmp_path / "nan.ept"
    write_tensor(path, TextTokenSet(np.ones((1, 4), dtype=np.float32)))
    raw = bytearray(path.read_bytes())
    offset = header_size(2) + 4 * 2  # third scalar
    raw[offset : offset + 4] = struct.pack("<f", float("nan"))
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError) as err:
        read_tensor(path)
    assert err.value.offset == offset


def test_write_rejects_nonfinite_before_touching_disk(tmp_path):
    data = np.ones((1, 2), dtype=np.float32)
    data[0, 1] = np.inf
    path = tmp_path / "never.ept"
    bad = TextTokenSet.__new__(TextTokenSet)  # bypass constructor validation
    bad.data = data
    with pytest.raises(ValueError):
        write_tensor(path, bad)
    assert not path.exists()


def test_grid_constructor_validates():
    with pytest.raises(ValueError):
        VisualTokenGrid(np.ones((2, 2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        VisualTokenGrid(np.full((1, 1, 1, 2), np.nan, dtype=np.float32))


@settings(max_examples=30, deadline=None)
@given(
    k=st.integers(1, 3),
    h=st.integers(1, 4),
    w=st.integers(1, 4),
    d=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_property(tmp_path_factory, k, h, w, d, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((k, h, w, d)).astype(np.float32)
    path = tmp_path_factory.mktemp("rt") / "g.ept"
    write_tensor(path, VisualTokenGrid(data))
    back = read_tensor(path)
    assert back.data.tobytes() == data.tobytes()


def _sample_report() -> SelectionReport:
    kept = [
        KeptToken(frame=0, row=0, col=1, score=0.425, r=0.85, d_corr=0.0, d_echo=0.0),
        KeptToken(
            frame=1, row=2, col=0,
            score=-0.123456789, r=0.321654987, d_corr=0.444444444, d_echo=0.322123951,
        ),
    ]
    return SelectionReport(
        config={"tau": 0.5, "window": "full", "history": 1, "lambda": 0.5,
                "variant": "full", "keep": {"ratio": 0.25},
                "tie_break": "score_desc,frame_asc,row_asc,col_asc"},
        budget=2,
        first_frame_quota=1,
        kept=kept,
        stats={"per_frame_kept": [1, 1], "wall_ms": 1.25,
               "zero_norm_visual": 0, "zero_norm_text": 0},
    )


def test_report_key_order_and_parse(tmp_path):
    path = tmp_path / "report.json"
    write_report(path, _sample_report())
    doc = read_report(path)
    assert list(doc.keys()) == ["config", "budget", "first_frame_quota", "kept", "stats"]
    assert len(doc["kept"]) == 2
    assert list(doc["kept"][0].keys()) == [
        "frame", "row", "col", "score", "r", "d_corr", "d_echo",
    ]


def test_report_roundtrip_numeric_fidelity(tmp_path):
    report = _sample_report()
    path = tmp_path / "report.json"
    write_report(path, report)
    doc = read_report(path)
    for tok, parsed in zip(report.kept, doc["kept"]):
        for name in ("score", "r", "d_corr", "d_echo"):
            assert abs(getattr(tok, name) - parsed[name]) < 1e-9


def test_report_floats_have_nine_significant_digits(tmp_path):
    path = tmp_path / "report.json"
    write_report(path, _sample_report())
    text = path.read_text()
    assert "0.322123951" in text
    assert "-0.123456789" in text


def test_report_counts_sum_to_budget(tmp_path):
    report = _sample_report()
    path = tmp_path / "report.json"
    write_report(path, report)
    doc = read_report(path)
    recounted = [0] * 2
    for tok in doc["kept"]:
        recounted[tok["frame"]] += 1
    assert recounted == doc["stats"]["per_frame_kept"]
    assert sum(recounted) == doc["budget"]


def test_report_kept_length_equals_budget(tmp_path):
    report = _sample_report()
    report.kept = report.kept[:1]
    report.budget = 1
    report.stats["per_frame_kept"] = [1, 0]
    path = tmp_path / "single.json"
    write_report(path, report)
    doc = read_report(path)
    assert len(doc["kept"]) == doc["budget"] == 1
