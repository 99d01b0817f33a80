"""Parsers for canonical profiler exports.

Vendor tools emit huge raw reports; this module consumes the compact
canonical formats documented in the README instead:

* kernel source        -- plain CUDA/HIP text file
* NVIDIA roofline CSV  -- ``Metric Name,Metric Value,Metric Unit,Rule Name,
  Rule Description,Estimated Speedup`` (RFC-4180)
* AMD roofline JSON    -- ``{"<component>": {"observed": f, "peak": f}}``
* PC-sampling JSON     -- ``[{"line": int, "stall_type": str, "count": int}]``
* counter CSV          -- ``config,<counter...>,target``
* counter dictionary   -- ``{"<counter>": "<one line description>"}``

All parsers are pure functions over file contents: same bytes in, same
record out.  Every record serializes to canonical JSON and re-parses to an
identical record.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
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

_LINE_SPLIT = re.compile(r"\r\n|\r|\n")

ROOFLINE_CSV_COLUMNS = (
    "Metric Name",
    "Metric Value",
    "Metric Unit",
    "Rule Name",
    "Rule Description",
    "Estimated Speedup",
)


class Language(str, enum.Enum):
    CUDA = "CUDA"
    HIP = "HIP"


class Vendor(str, enum.Enum):
    NVIDIA = "NVIDIA"
    AMD = "AMD"


# ---------------------------------------------------------------------------
# Kernel source
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSource:
    path: str
    language: Language
    lines: tuple[tuple[int, str], ...]  # (1-based line number, text sans terminator)

    @property
    def line_count(self) -> int:
        return len(self.lines)

    def line_text(self, number: int) -> str | None:
        if 1 <= number <= len(self.lines):
            return self.lines[number - 1][1]
        return None

    def numbered_text(self) -> str:
        return "\n".join(f"{n}: {text}" for n, text in self.lines)

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "language": self.language.value,
            "lines": [[n, text] for n, text in self.lines],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSource":
        return cls(
            path=data["path"],
            language=Language(data["language"]),
            lines=tuple((int(n), str(t)) for n, t in data["lines"]),
        )


def _infer_language(path: Path) -> Language:
    if ".hip" in [s.lower() for s in path.suffixes] or path.suffix.lower() == ".hip":
        return Language.HIP
    return Language.CUDA


def parse_kernel_source(path: str | Path, language: Language | None = None) -> KernelSource:
    """Read a kernel file and number its physical lines 1..n.

    Line texts exclude the terminator; CRLF and bare CR count like LF.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path} is not valid UTF-8: {exc}") from exc
    if not text:
        raise EmptySourceError(f"{path} is empty")

    parts = _LINE_SPLIT.split(text)
    if parts and parts[-1] == "" and _LINE_SPLIT.search(text):
        # a trailing terminator ends the last line, it does not open a new one
        parts = parts[:-1]
    lines = tuple((i + 1, part) for i, part in enumerate(parts))
    return KernelSource(
        path=str(path),
        language=language or _infer_language(path),
        lines=lines,
    )


# ---------------------------------------------------------------------------
# Roofline records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReading:
    value: float
    unit: str


@dataclass(frozen=True)
class RuleDiagnostic:
    rule_id: str
    message: str
    est_speedup: float | None = None


@dataclass(frozen=True)
class ComponentPeak:
    observed: float
    peak: float

    @property
    def utilization(self) -> float:
        return self.observed / self.peak


@dataclass
class RooflineRecord:
    vendor: Vendor
    metrics: dict[str, MetricReading] = field(default_factory=dict)
    rule_diagnostics: list[RuleDiagnostic] = field(default_factory=list)
    peaks: dict[str, ComponentPeak] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "vendor": self.vendor.value,
            "metrics": {
                name: {"value": m.value, "unit": m.unit}
                for name, m in sorted(self.metrics.items())
            },
            "rule_diagnostics": [
                {"rule_id": r.rule_id, "message": r.message, "est_speedup": r.est_speedup}
                for r in self.rule_diagnostics
            ],
            "peaks": {
                name: {"observed": p.observed, "peak": p.peak}
                for name, p in sorted(self.peaks.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RooflineRecord":
        return cls(
            vendor=Vendor(data["vendor"]),
            metrics={
                name: MetricReading(value=m["value"], unit=m["unit"])
                for name, m in data["metrics"].items()
            },
            rule_diagnostics=[
                RuleDiagnostic(
                    rule_id=r["rule_id"],
                    message=r["message"],
                    est_speedup=r["est_speedup"],
                )
                for r in data["rule_diagnostics"]
            ],
            peaks={
                name: ComponentPeak(observed=p["observed"], peak=p["peak"])
                for name, p in data["peaks"].items()
            },
        )


def _parse_float(raw: str, context: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise ParseError(f"malformed float {raw!r} in {context}") from exc
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {raw!r} in {context}")
    return value


def parse_roofline_nvidia(csv_path: str | Path) -> RooflineRecord:
    """Parse the canonical NVIDIA roofline CSV.

    Rows with a non-empty ``Rule Description`` become rule diagnostics;
    rows with a non-empty ``Metric Name`` populate the metric map.
    """
    csv_path = Path(csv_path)
    try:
        text = csv_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {csv_path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{csv_path} is not valid UTF-8: {exc}") from exc

    # StringIO, not splitlines: quoted rule messages may embed newlines
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [col for col in ROOFLINE_CSV_COLUMNS if col not in header]
    if missing:
        raise SchemaError(f"{csv_path}: missing column(s) {', '.join(missing)}")

    record = RooflineRecord(vendor=Vendor.NVIDIA)
    for i, row in enumerate(reader, start=2):
        rule_desc = (row.get("Rule Description") or "").strip()
        if rule_desc:
            speedup_raw = (row.get("Estimated Speedup") or "").strip()
            speedup = None
            if speedup_raw:
                speedup = _parse_float(speedup_raw, f"{csv_path} row {i}")
                if not 0.0 <= speedup <= 10000.0:
                    raise SchemaError(
                        f"{csv_path} row {i}: estimated speedup {speedup} outside [0, 10000]"
                    )
            record.rule_diagnostics.append(
                RuleDiagnostic(
                    rule_id=(row.get("Rule Name") or "").strip(),
                    message=rule_desc,
                    est_speedup=speedup,
                )
            )
        metric_name = (row.get("Metric Name") or "").strip()
        if metric_name:
            value = _parse_float((row.get("Metric Value") or "").strip(), f"{csv_path} row {i}")
            record.metrics[metric_name] = MetricReading(
                value=value, unit=(row.get("Metric Unit") or "").strip()
            )
    return record


def parse_roofline_amd(json_path: str | Path) -> RooflineRecord:
    """Parse the canonical AMD roofline JSON (observed vs. peak per component).

    AMD reports carry no interpretive rule text, so ``rule_diagnostics``
    stays empty.
    """
    json_path = Path(json_path)
    try:
        data = json.loads(json_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {json_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{json_path}: invalid JSON: {exc}") from exc

    if not isinstance(data, dict):
        raise SchemaError(f"{json_path}: expected a component -> values object")

    record = RooflineRecord(vendor=Vendor.AMD)
    for component, values in data.items():
        if not isinstance(values, dict) or not {"observed", "peak"} <= values.keys():
            raise SchemaError(f"{json_path}: component {component!r} needs observed and peak")
        observed, peak = values["observed"], values["peak"]
        if not isinstance(observed, (int, float)) or not isinstance(peak, (int, float)):
            raise SchemaError(f"{json_path}: component {component!r} values must be numbers")
        if peak <= 0:
            raise NonPositivePeakError(f"{json_path}: component {component!r} has peak {peak}")
        if observed < 0:
            raise SchemaError(f"{json_path}: component {component!r} has negative observed value")
        record.peaks[component] = ComponentPeak(observed=float(observed), peak=float(peak))
    return record


# ---------------------------------------------------------------------------
# PC-sampling stall samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StallSample:
    line: int
    stall_type: str
    count: int
    unmapped: bool = False


@dataclass
class StallSampleSet:
    kernel_name: str
    samples: list[StallSample]
    total_samples: int

    @property
    def unmapped(self) -> list[StallSample]:
        return [s for s in self.samples if s.unmapped]

    def to_dict(self) -> dict:
        return {
            "kernel_name": self.kernel_name,
            "samples": [
                {
                    "line": s.line,
                    "stall_type": s.stall_type,
                    "count": s.count,
                    "unmapped": s.unmapped,
                }
                for s in self.samples
            ],
            "total_samples": self.total_samples,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StallSampleSet":
        return cls(
            kernel_name=data["kernel_name"],
            samples=[
                StallSample(
                    line=int(s["line"]),
                    stall_type=s["stall_type"],
                    count=int(s["count"]),
                    unmapped=bool(s["unmapped"]),
                )
                for s in data["samples"]
            ],
            total_samples=int(data["total_samples"]),
        )


def parse_pc_sampling(json_path: str | Path, source: KernelSource) -> StallSampleSet:
    """Parse canonical PC-sampling JSON and aggregate by (line, stall type).

    Lines outside the source range are kept and flagged unmapped rather than
    dropped, so totals (and hence threshold fractions) match the raw data.
    """
    json_path = Path(json_path)
    try:
        data = json.loads(json_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {json_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{json_path}: invalid JSON: {exc}") from exc

    if not isinstance(data, list):
        raise SchemaError(f"{json_path}: expected a list of sample records")

    counts: dict[tuple[int, str], int] = {}
    for i, rec in enumerate(data):
        if not isinstance(rec, dict) or not {"line", "stall_type", "count"} <= rec.keys():
            raise SchemaError(f"{json_path}: record {i} needs line, stall_type, count")
        line, stall, count = rec["line"], rec["stall_type"], rec["count"]
        if not isinstance(line, int) or isinstance(line, bool):
            raise SchemaError(f"{json_path}: record {i} line must be an integer")
        if not isinstance(stall, str) or not stall:
            raise SchemaError(f"{json_path}: record {i} stall_type must be a non-empty string")
        if not isinstance(count, int) or isinstance(count, bool):
            raise SchemaError(f"{json_path}: record {i} count must be an integer")
        if count < 0:
            raise NegativeCountError(f"{json_path}: record {i} has negative count {count}")
        counts[(line, stall)] = counts.get((line, stall), 0) + count

    samples = [
        StallSample(
            line=line,
            stall_type=stall,
            count=count,
            unmapped=not (1 <= line <= source.line_count),
        )
        for (line, stall), count in sorted(counts.items())
    ]
    return StallSampleSet(
        kernel_name=Path(source.path).stem,
        samples=samples,
        total_samples=sum(s.count for s in samples),
    )


# ---------------------------------------------------------------------------
# Hardware-counter dataset
# ---------------------------------------------------------------------------

@dataclass
class CounterDataset:
    values: np.ndarray  # runs x counters, float64
    target: np.ndarray  # runs, float64
    counter_names: list[str]
    config_labels: list[str]

    @property
    def n_runs(self) -> int:
        return self.values.shape[0]

    @property
    def n_counters(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CounterDataset):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.target, other.target)
            and self.counter_names == other.counter_names
            and self.config_labels == other.config_labels
        )

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "target": self.target.tolist(),
            "counter_names": list(self.counter_names),
            "config_labels": list(self.config_labels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CounterDataset":
        return cls(
            values=np.asarray(data["values"], dtype=np.float64),
            target=np.asarray(data["target"], dtype=np.float64),
            counter_names=list(data["counter_names"]),
            config_labels=list(data["config_labels"]),
        )


def parse_counter_matrix(csv_path: str | Path) -> CounterDataset:
    """Parse the canonical counter CSV (``config,<counter...>,target``).

    Constant-valued counter columns carry no variance to attribute and are
    dropped with a warning.  Standardization happens later, in the
    importance module.
    """
    csv_path = Path(csv_path)
    try:
        text = csv_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {csv_path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{csv_path} is not valid UTF-8: {exc}") from exc

    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise SchemaError(f"{csv_path}: empty CSV")
    header = [c.strip() for c in rows[0]]
    if len(header) < 3:
        raise SchemaError(f"{csv_path}: need config, at least one counter, and target columns")
    if header[0] != "config" or header[-1] != "target":
        raise SchemaError(f"{csv_path}: header must start with 'config' and end with 'target'")
    counter_names = header[1:-1]
    if len(set(counter_names)) != len(counter_names):
        raise SchemaError(f"{csv_path}: duplicate counter names")

    body = rows[1:]
    if len(body) < 2:
        raise TooFewRunsError(f"{csv_path}: need at least 2 runs, found {len(body)}")

    labels: list[str] = []
    matrix: list[list[float]] = []
    target: list[float] = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{csv_path} row {i}: expected {len(header)} fields, got {len(row)}")
        labels.append(row[0])
        matrix.append([_parse_float(v, f"{csv_path} row {i}") for v in row[1:-1]])
        target.append(_parse_float(row[-1], f"{csv_path} row {i}"))

    values = np.asarray(matrix, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)

    constant = [j for j in range(values.shape[1]) if np.all(values[:, j] == values[0, j])]
    if constant:
        dropped = [counter_names[j] for j in constant]
        warnings.warn(
            f"{csv_path}: dropping constant counter column(s): {', '.join(dropped)}",
            OpalWarning,
            stacklevel=2,
        )
        keep = [j for j in range(values.shape[1]) if j not in constant]
        values = values[:, keep]
        counter_names = [counter_names[j] for j in keep]
    if not counter_names:
        raise SchemaError(f"{csv_path}: every counter column is constant")

    return CounterDataset(
        values=values, target=t, counter_names=counter_names, config_labels=labels
    )


# ---------------------------------------------------------------------------
# Counter-description dictionary
# ---------------------------------------------------------------------------

@dataclass
class CounterDictionary:
    entries: dict[str, str]

    def describe(self, counter_name: str) -> str | None:
        return self.entries.get(counter_name)

    def to_dict(self) -> dict:
        return {"entries": dict(sorted(self.entries.items()))}

    @classmethod
    def from_dict(cls, data: dict) -> "CounterDictionary":
        return cls(entries=dict(data["entries"]))


def parse_counter_dictionary(json_path: str | Path) -> CounterDictionary:
    """Parse the counter-description dictionary (``{"<counter>": "<text>"}``)."""
    json_path = Path(json_path)
    try:
        data = json.loads(json_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {json_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{json_path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{json_path}: expected a counter -> description object")
    for name, desc in data.items():
        if not isinstance(desc, str) or not desc.strip():
            raise SchemaError(f"{json_path}: description for {name!r} must be a non-empty string")
    return CounterDictionary(entries={k: v for k, v in data.items()})
