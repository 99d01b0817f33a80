"""Compress parsed diagnostics into the natural-language prompt summaries.

Each summary is a deterministic, line-oriented rendering capped at
``MAX_SUMMARY_LINES`` (80) regardless of input size, so prompts stay within
model token limits even for multi-gigabyte captures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptyImportanceError, EmptySamplesError
from .ingest import KernelSource, RooflineRecord, StallSampleSet, Vendor

MAX_SUMMARY_LINES = 80
STALL_THRESHOLD = 0.10
SNIPPET_MAX_CHARS = 60
UNMAPPED_SNIPPET = "<unmapped>"
AMD_PREAMBLE = "lowest-utilization components listed first"


@dataclass
class InsightSet:
    roofline_summary: str | None = None
    stall_summary: str | None = None
    counter_summary: str | None = None
    provenance: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "roofline_summary": self.roofline_summary,
            "stall_summary": self.stall_summary,
            "counter_summary": self.counter_summary,
            "provenance": {k: list(v) for k, v in sorted(self.provenance.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InsightSet":
        return cls(
            roofline_summary=data["roofline_summary"],
            stall_summary=data["stall_summary"],
            counter_summary=data["counter_summary"],
            provenance={k: list(v) for k, v in data["provenance"].items()},
        )


@dataclass(frozen=True)
class StallLineFinding:
    line: int
    code_text: str
    stall_type: str
    fraction: float
    count: int


def _clip(lines: list[str], max_lines: int) -> str:
    return "\n".join(lines[:max_lines])


def _one_line(text: str) -> str:
    # summaries are line-oriented; embedded terminators would break the
    # line cap and the prompt's section indentation
    return text.replace("\r\n", " ").replace("\n", " ").replace("\r", " ")


def summarize_roofline(record: RooflineRecord, max_lines: int = MAX_SUMMARY_LINES) -> str:
    """Render roofline findings, most actionable first.

    NVIDIA records carry tool-authored rule diagnostics; those with speedup
    estimates lead.  AMD records carry only observed-vs-peak numbers, so the
    summary lists components from least to most utilized with a directional
    note.
    """
    if record.vendor is Vendor.NVIDIA:
        diagnostics = sorted(
            record.rule_diagnostics,
            key=lambda r: (r.est_speedup is None, -(r.est_speedup or 0.0), r.rule_id),
        )
        lines = []
        for diag in diagnostics:
            message = _one_line(diag.message)
            if diag.est_speedup is not None:
                lines.append(f"[{diag.rule_id}] {message} (est. speedup {diag.est_speedup:g}%)")
            else:
                lines.append(f"[{diag.rule_id}] {message}")
        return _clip(lines, max_lines)

    components = sorted(record.peaks.items(), key=lambda kv: (kv[1].utilization, kv[0]))
    lines = [AMD_PREAMBLE]
    for name, peak in components:
        lines.append(
            f"{name}: observed {peak.observed:g} of peak {peak.peak:g} "
            f"({peak.utilization * 100:.1f}% utilized)"
        )
    return _clip(lines, max_lines)


def summarize_stalls(
    samples: StallSampleSet,
    source: KernelSource,
    threshold: float = STALL_THRESHOLD,
    max_lines: int = MAX_SUMMARY_LINES,
    per_stall_type: bool = False,
) -> tuple[str, list[StallLineFinding]]:
    """Report (line, stall type) pairs whose share of samples strictly exceeds
    the threshold, largest share first.

    The denominator is the kernel's total sample count across all stall
    types (including unmapped lines); pass ``per_stall_type=True`` to divide
    by each stall type's own total instead.
    """
    if samples.total_samples == 0:
        raise EmptySamplesError(f"{samples.kernel_name}: no stall samples")

    type_totals: dict[str, int] = {}
    if per_stall_type:
        for s in samples.samples:
            type_totals[s.stall_type] = type_totals.get(s.stall_type, 0) + s.count

    findings = []
    for s in samples.samples:
        if s.count == 0:
            continue  # can never exceed the threshold; avoids 0/0 per-type totals
        denom = type_totals[s.stall_type] if per_stall_type else samples.total_samples
        fraction = s.count / denom
        if fraction > threshold:
            snippet = source.line_text(s.line)
            if snippet is None:
                snippet = UNMAPPED_SNIPPET
            else:
                snippet = snippet.strip()
                if len(snippet) > SNIPPET_MAX_CHARS:
                    snippet = snippet[: SNIPPET_MAX_CHARS - 3] + "..."
            findings.append(
                StallLineFinding(
                    line=s.line,
                    code_text=snippet,
                    stall_type=s.stall_type,
                    fraction=fraction,
                    count=s.count,
                )
            )
    findings.sort(key=lambda f: (-f.fraction, f.line, f.stall_type))

    lines = [
        f"line {f.line} ({f.code_text}): {f.stall_type} = {f.fraction * 100:.1f}% of samples"
        for f in findings
    ]
    return _clip(lines, max_lines), findings


def summarize_importance(
    top: list[tuple[str, str, float]], max_lines: int = MAX_SUMMARY_LINES
) -> str:
    """Render ranked counters with their descriptions, one per line."""
    if not top:
        raise EmptyImportanceError("no counters to summarize")
    lines = [
        f"{name} (importance {score:.2f}): {_one_line(description)}"
        for name, description, score in top
    ]
    return _clip(lines, max_lines)
