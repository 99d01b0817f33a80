from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from opal.errors import (
    EmptySourceError,
    EncodingError,
    IoError,
    NegativeCountError,
    NonPositivePeakError,
    OpalWarning,
    ParseError,
    SchemaError,
    TooFewRunsError,
)
from opal.ingest import (
    CounterDataset,
    CounterDictionary,
    KernelSource,
    Language,
    RooflineRecord,
    StallSampleSet,
    Vendor,
    parse_counter_dictionary,
    parse_counter_matrix,
    parse_kernel_source,
    parse_pc_sampling,
    parse_roofline_amd,
    parse_roofline_nvidia,
)
from opal.jsonutil import canonical_dumps


# ---------------------------------------------------------------------------
# kernel source
# ---------------------------------------------------------------------------

def test_three_line_file(tmp_path):
    path = tmp_path / "k.cu"
    path.write_text("__global__ void k(){\n}\n\n")
    source = parse_kernel_source(path)
    assert source.lines == ((1, "__global__ void k(){"), (2, "}"), (3, ""))
    assert source.language is Language.CUDA


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "k.cu"
    path.write_bytes(b"")
    with pytest.raises(EmptySourceError):
        parse_kernel_source(path)


def test_crlf_five_line_fixture(tmp_path):
    # hand-counted: five CRLF-terminated lines, texts exclude the terminator
    path = tmp_path / "k.cu"
    path.write_bytes(b"a\r\nbb\r\n\r\nccc\r\ndddd\r\n")
    source = parse_kernel_source(path)
    assert source.lines == ((1, "a"), (2, "bb"), (3, ""), (4, "ccc"), (5, "dddd"))


def test_no_trailing_newline(tmp_path):
    path = tmp_path / "k.cu"
    path.write_text("a\nb")
    assert parse_kernel_source(path).lines == ((1, "a"), (2, "b"))


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        parse_kernel_source(tmp_path / "nope.cu")


def test_non_utf8_is_encoding_error(tmp_path):
    path = tmp_path / "k.cu"
    path.write_bytes(b"\xff\xfe\x00gar")
    with pytest.raises(EncodingError):
        parse_kernel_source(path)


def test_hip_language_inferred(tmp_path):
    path = tmp_path / "k.hip"
    path.write_text("__global__ void k(){}\n")
    assert parse_kernel_source(path).language is Language.HIP


# ---------------------------------------------------------------------------
# NVIDIA roofline CSV
# ---------------------------------------------------------------------------

def _roofline_csv(tmp_path, body: str):
    path = tmp_path / "roofline.csv"
    header = "Metric Name,Metric Value,Metric Unit,Rule Name,Rule Description,Estimated Speedup\n"
    path.write_text(header + body)
    return path


def test_rule_row_becomes_diagnostic(tmp_path):
    message = "This kernel exhibits low compute throughput and memory bandwidth utilization"
    path = _roofline_csv(tmp_path, f',,,SOLBottleneck,"{message}",43.1\n')
    record = parse_roofline_nvidia(path)
    assert record.vendor is Vendor.NVIDIA
    assert len(record.rule_diagnostics) == 1
    diag = record.rule_diagnostics[0]
    assert diag.rule_id == "SOLBottleneck"
    assert diag.message == message
    assert diag.est_speedup == 43.1


def test_metric_row_populates_metrics_only(tmp_path):
    path = _roofline_csv(tmp_path, "dram__bytes.sum,1.5e9,byte,,,\n")
    record = parse_roofline_nvidia(path)
    assert record.rule_diagnostics == []
    assert record.metrics["dram__bytes.sum"].value == 1.5e9
    assert record.metrics["dram__bytes.sum"].unit == "byte"


def test_missing_column_is_schema_error(tmp_path):
    path = tmp_path / "roofline.csv"
    path.write_text("Metric Name,Metric Value,Metric Unit,Rule Name,Estimated Speedup\n")
    with pytest.raises(SchemaError, match="Rule Description"):
        parse_roofline_nvidia(path)


def test_malformed_float_is_parse_error(tmp_path):
    path = _roofline_csv(tmp_path, "dram__bytes.sum,not-a-number,byte,,,\n")
    with pytest.raises(ParseError):
        parse_roofline_nvidia(path)


def test_speedup_out_of_range_rejected(tmp_path):
    path = _roofline_csv(tmp_path, ',,,Rule,"msg",10001\n')
    with pytest.raises(SchemaError):
        parse_roofline_nvidia(path)


def test_quoted_rule_message_with_embedded_newline(tmp_path):
    path = _roofline_csv(tmp_path, ',,,Rule,"first line\nsecond line",5\n')
    record = parse_roofline_nvidia(path)
    assert record.rule_diagnostics[0].message == "first line\nsecond line"


# ---------------------------------------------------------------------------
# AMD roofline JSON
# ---------------------------------------------------------------------------

def test_amd_component(tmp_path):
    path = tmp_path / "roofline.json"
    path.write_text('{"HBM": {"observed": 800, "peak": 1600}}')
    record = parse_roofline_amd(path)
    assert record.peaks["HBM"].observed == 800.0
    assert record.peaks["HBM"].peak == 1600.0
    assert record.peaks["HBM"].utilization == 0.5


def test_amd_zero_peak_rejected(tmp_path):
    path = tmp_path / "roofline.json"
    path.write_text('{"HBM": {"observed": 800, "peak": 0}}')
    with pytest.raises(NonPositivePeakError):
        parse_roofline_amd(path)


def test_amd_eight_component_fixture(fixtures_dir):
    # hand-checked: 4 bandwidths + 4 compute peaks, no rule text
    record = parse_roofline_amd(fixtures_dir / "amd_roofline.json")
    assert set(record.peaks) == {
        "HBM", "L2", "L1", "LDS", "FP32-VALU", "FP32-MFMA", "FP16-MFMA", "INT8-MFMA",
    }
    assert record.rule_diagnostics == []
    assert record.vendor is Vendor.AMD


# ---------------------------------------------------------------------------
# PC sampling
# ---------------------------------------------------------------------------

@pytest.fixture
def kernel_41(fixtures_dir):
    return parse_kernel_source(fixtures_dir / "accuracy.cu")


def test_single_stall_record(tmp_path, kernel_41):
    path = tmp_path / "pc.json"
    path.write_text('[{"line": 6, "stall_type": "stall_wait", "count": 45387}]')
    stalls = parse_pc_sampling(path, kernel_41)
    assert len(stalls.samples) == 1
    assert stalls.samples[0].count == 45387
    assert stalls.samples[0].unmapped is False
    assert stalls.total_samples == 45387


def test_duplicate_records_aggregate(tmp_path, kernel_41):
    path = tmp_path / "pc.json"
    path.write_text(
        '[{"line": 6, "stall_type": "stall_wait", "count": 10},'
        ' {"line": 6, "stall_type": "stall_wait", "count": 5}]'
    )
    stalls = parse_pc_sampling(path, kernel_41)
    assert len(stalls.samples) == 1
    assert stalls.samples[0].count == 15
    assert stalls.total_samples == 15


def test_out_of_range_line_kept_unmapped(tmp_path, kernel_41):
    # hand-checked: line 999 on a 41-line kernel lands in the unmapped bucket
    path = tmp_path / "pc.json"
    path.write_text(
        '[{"line": 999, "stall_type": "stall_wait", "count": 7},'
        ' {"line": 6, "stall_type": "stall_wait", "count": 3}]'
    )
    stalls = parse_pc_sampling(path, kernel_41)
    assert stalls.total_samples == 10
    assert [s.line for s in stalls.unmapped] == [999]
    assert stalls.unmapped[0].count == 7


def test_negative_count_rejected(tmp_path, kernel_41):
    path = tmp_path / "pc.json"
    path.write_text('[{"line": 6, "stall_type": "stall_wait", "count": -1}]')
    with pytest.raises(NegativeCountError):
        parse_pc_sampling(path, kernel_41)


def test_pc_schema_errors(tmp_path, kernel_41):
    path = tmp_path / "pc.json"
    path.write_text('[{"line": 6, "count": 5}]')
    with pytest.raises(SchemaError):
        parse_pc_sampling(path, kernel_41)
    path.write_text('{"line": 6}')
    with pytest.raises(SchemaError):
        parse_pc_sampling(path, kernel_41)


def test_total_equals_sum_including_unmapped(fixtures_dir, kernel_41):
    stalls = parse_pc_sampling(fixtures_dir / "accuracy_pc.json", kernel_41)
    assert stalls.total_samples == sum(s.count for s in stalls.samples)
    assert stalls.total_samples == 100000


stall_records = st.lists(
    st.fixed_dictionaries(
        {
            "line": st.integers(min_value=1, max_value=60),  # 41-line kernel: some unmapped
            "stall_type": st.sampled_from(["stall_wait", "stall_barrier", "stall_membar"]),
            "count": st.integers(min_value=0, max_value=10**9),
        }
    ),
    max_size=40,
)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(records=stall_records)
def test_pc_parse_properties_on_random_inputs(records, tmp_path, kernel_41):
    path = tmp_path / "pc.json"
    path.write_text(json.dumps(records))
    stalls = parse_pc_sampling(path, kernel_41)
    # totals match the raw data, mapped or not
    assert stalls.total_samples == sum(r["count"] for r in records)
    # aggregation by (line, stall) is exact
    expected_pairs = {(r["line"], r["stall_type"]) for r in records}
    assert {(s.line, s.stall_type) for s in stalls.samples} == expected_pairs
    # round trip is identity
    assert StallSampleSet.from_dict(json.loads(canonical_dumps(stalls.to_dict()))) == stalls


# ---------------------------------------------------------------------------
# counter matrix
# ---------------------------------------------------------------------------

def _counter_csv(tmp_path, text: str):
    path = tmp_path / "counters.csv"
    path.write_text(text)
    return path


def test_counter_matrix_shapes(tmp_path):
    path = _counter_csv(
        tmp_path,
        "config,a,b,c,target\n"
        "r1,1,5,3,10\n"
        "r2,2,6,2,11\n"
        "r3,3,7,1,12\n"
        "r4,4,8,0,13\n",
    )
    dataset = parse_counter_matrix(path)
    assert dataset.values.shape == (4, 3)
    assert dataset.target.shape == (4,)
    assert dataset.counter_names == ["a", "b", "c"]
    assert dataset.config_labels == ["r1", "r2", "r3", "r4"]


def test_constant_column_dropped(tmp_path):
    path = _counter_csv(
        tmp_path,
        "config,a,b,target\nr1,7.0,1,10\nr2,7.0,2,11\n",
    )
    with pytest.warns(OpalWarning, match="constant"):
        dataset = parse_counter_matrix(path)
    assert dataset.counter_names == ["b"]
    assert dataset.values.shape == (2, 1)


def test_single_run_rejected(tmp_path):
    path = _counter_csv(tmp_path, "config,a,target\nr1,1,10\n")
    with pytest.raises(TooFewRunsError):
        parse_counter_matrix(path)


def test_bad_header_rejected(tmp_path):
    path = _counter_csv(tmp_path, "run,a,target\nr1,1,10\nr2,2,11\n")
    with pytest.raises(SchemaError):
        parse_counter_matrix(path)


def test_nan_rejected(tmp_path):
    path = _counter_csv(tmp_path, "config,a,target\nr1,nan,10\nr2,2,11\n")
    with pytest.raises(ParseError):
        parse_counter_matrix(path)


def test_duplicate_counter_names_rejected(tmp_path):
    path = _counter_csv(tmp_path, "config,a,a,target\nr1,1,2,10\nr2,2,3,11\n")
    with pytest.raises(SchemaError, match="duplicate"):
        parse_counter_matrix(path)


def test_counter_dictionary(fixtures_dir):
    dictionary = parse_counter_dictionary(fixtures_dir / "counter_dictionary.json")
    assert "bank conflicts" in dictionary.describe("l1tex__data_bank_conflicts")
    assert dictionary.describe("unknown_counter") is None


def test_counter_dictionary_empty_description_rejected(tmp_path):
    path = tmp_path / "dict.json"
    path.write_text('{"a": "  "}')
    with pytest.raises(SchemaError):
        parse_counter_dictionary(path)


# ---------------------------------------------------------------------------
# round trips and determinism
# ---------------------------------------------------------------------------

def test_round_trips(fixtures_dir, kernel_41):
    records = [
        (KernelSource, kernel_41),
        (RooflineRecord, parse_roofline_nvidia(fixtures_dir / "accuracy_roofline_nvidia.csv")),
        (RooflineRecord, parse_roofline_amd(fixtures_dir / "amd_roofline.json")),
        (StallSampleSet, parse_pc_sampling(fixtures_dir / "accuracy_pc.json", kernel_41)),
        (CounterDataset, parse_counter_matrix(fixtures_dir / "accuracy_counters.csv")),
        (CounterDictionary, parse_counter_dictionary(fixtures_dir / "counter_dictionary.json")),
    ]
    for cls, record in records:
        reparsed = cls.from_dict(json.loads(canonical_dumps(record.to_dict())))
        assert reparsed == record, cls.__name__


def test_parsing_deterministic(fixtures_dir, kernel_41):
    a = parse_pc_sampling(fixtures_dir / "accuracy_pc.json", kernel_41)
    b = parse_pc_sampling(fixtures_dir / "accuracy_pc.json", kernel_41)
    assert a == b
    ra = parse_roofline_nvidia(fixtures_dir / "accuracy_roofline_nvidia.csv")
    rb = parse_roofline_nvidia(fixtures_dir / "accuracy_roofline_nvidia.csv")
    assert ra == rb


def test_counter_dataset_equality_uses_arrays():
    a = CounterDataset(np.array([[1.0]]), np.array([2.0]), ["c"], ["r"])
    b = CounterDataset(np.array([[1.0]]), np.array([2.0]), ["c"], ["r"])
    c = CounterDataset(np.array([[1.5]]), np.array([2.0]), ["c"], ["r"])
    assert a == b
    assert a != c
