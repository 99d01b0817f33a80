"""Parse the model reply: optimized code plus the two optimization lists.

Replies follow the required output format (one fenced code block, then
``optimizations = [...]`` and ``suggested_but_not_applied = [...]``), but
LLM output drifts, so parsing is tolerant: single- or double-quoted
strings, trailing commas, a bare ``int`` where a line list was expected,
and a missing deferred list are all accepted.  Arbitrary bytes never
crash the parser; they produce a typed error instead.
"""

from __future__ import annotations

import ast
import re
import warnings
from dataclasses import dataclass

from .errors import (
    MalformedOptimizationListError,
    NoCodeBlockError,
    OpalWarning,
    TruncatedOutputError,
)
from .gateway import Completion

CODE_FENCE = re.compile(r"```[ \t]*[A-Za-z0-9+._-]*[ \t]*\r?\n(.*?)(?:```|\Z)", re.DOTALL)
APPLIED_LIST_NAME = "optimizations"
DEFERRED_LIST_NAME = "suggested_but_not_applied"


@dataclass
class OptimizationRecord:
    lines: list[int]
    reason: str
    applied: bool
    out_of_range: bool = False

    def to_dict(self) -> dict:
        return {
            "lines": list(self.lines),
            "reason": self.reason,
            "applied": self.applied,
            "out_of_range": self.out_of_range,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationRecord":
        return cls(
            lines=[int(n) for n in data["lines"]],
            reason=data["reason"],
            applied=bool(data["applied"]),
            out_of_range=bool(data.get("out_of_range", False)),
        )


@dataclass
class GenerationResult:
    optimized_code: str
    applied: list[OptimizationRecord]
    deferred: list[OptimizationRecord]
    completion: Completion | None = None

    def to_dict(self, completion_ref: str | None = None) -> dict:
        return {
            "optimized_code": self.optimized_code,
            "applied": [r.to_dict() for r in self.applied],
            "deferred": [r.to_dict() for r in self.deferred],
            "completion_ref": completion_ref,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationResult":
        return cls(
            optimized_code=data["optimized_code"],
            applied=[OptimizationRecord.from_dict(r) for r in data["applied"]],
            deferred=[OptimizationRecord.from_dict(r) for r in data["deferred"]],
            completion=None,
        )


def _find_list_literal(text: str, name: str) -> tuple[str, int] | None:
    """Locate ``name = [ ... ]`` and return the bracketed slice + its offset."""
    pattern = re.compile(rf"(?<![A-Za-z0-9_]){re.escape(name)}\s*=\s*\[")
    match = pattern.search(text)
    if match is None:
        return None
    start = match.end() - 1
    depth = 0
    quote: str | None = None
    i = start
    while i < len(text):
        ch = text[i]
        if quote is not None:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch in "[{(":
            depth += 1
        elif ch in "]})":
            depth -= 1
            if depth == 0:
                return text[start : i + 1], start
        i += 1
    raise MalformedOptimizationListError(f"unterminated {name} list", offset=start)


def _coerce_lines(value, name: str, index: int, offset: int) -> list[int]:
    if isinstance(value, bool):
        raise MalformedOptimizationListError(
            f"{name}[{index}]: 'lines' must be integers", offset=offset
        )
    if isinstance(value, int):
        value = [value]
    if not isinstance(value, (list, tuple)) or not value:
        raise MalformedOptimizationListError(
            f"{name}[{index}]: 'lines' must be a non-empty list", offset=offset
        )
    lines = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise MalformedOptimizationListError(
                f"{name}[{index}]: line numbers must be integers", offset=offset
            )
        if isinstance(item, float):
            if not item.is_integer():
                raise MalformedOptimizationListError(
                    f"{name}[{index}]: line numbers must be integers", offset=offset
                )
            item = int(item)
        lines.append(item)
    return lines


def _parse_records(text: str, name: str, applied: bool) -> list[OptimizationRecord]:
    found = _find_list_literal(text, name)
    if found is None:
        return []
    literal, offset = found
    try:
        value = ast.literal_eval(literal)
    except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError) as exc:
        raise MalformedOptimizationListError(
            f"cannot parse {name} list: {exc}", offset=offset
        ) from exc
    if not isinstance(value, (list, tuple)):
        raise MalformedOptimizationListError(f"{name} is not a list", offset=offset)

    records = []
    for i, entry in enumerate(value):
        if not isinstance(entry, dict):
            raise MalformedOptimizationListError(
                f"{name}[{i}] is not a record", offset=offset
            )
        if "lines" not in entry or "reason" not in entry:
            raise MalformedOptimizationListError(
                f"{name}[{i}] needs 'lines' and 'reason'", offset=offset
            )
        reason = entry["reason"]
        if not isinstance(reason, str) or not reason.strip():
            raise MalformedOptimizationListError(
                f"{name}[{i}]: 'reason' must be a non-empty string", offset=offset
            )
        records.append(
            OptimizationRecord(
                lines=_coerce_lines(entry["lines"], name, i, offset),
                reason=reason,
                applied=applied,
            )
        )
    return records


def parse_response(completion: Completion) -> GenerationResult:
    """Extract the optimized kernel and the applied/deferred record lists.

    Only the first fenced block is the kernel; extra blocks are ignored
    with a warning.  Line numbers are recorded verbatim as model-reported;
    records whose lines fall outside the optimized code are flagged, not
    rejected.  An empty or absent ``optimizations`` list is valid (prompts
    with no insights legitimately produce none).
    """
    if not completion.finished:
        raise TruncatedOutputError("completion is truncated; refusing to parse")

    blocks = CODE_FENCE.findall(completion.text)
    if not blocks or not blocks[0].strip():
        raise NoCodeBlockError("reply contains no fenced code block")
    if len(blocks) > 1:
        warnings.warn(
            f"reply contains {len(blocks)} fenced blocks; using the first as the kernel",
            OpalWarning,
            stacklevel=2,
        )
    optimized_code = blocks[0]

    # strip the code block before scanning so list-shaped code lines cannot shadow the records
    scan_text = CODE_FENCE.sub("", completion.text, count=1)
    applied = _parse_records(scan_text, APPLIED_LIST_NAME, applied=True)
    deferred = _parse_records(scan_text, DEFERRED_LIST_NAME, applied=False)

    line_count = len(optimized_code.splitlines())
    for record in applied:
        if any(n < 1 or n > line_count for n in record.lines):
            record.out_of_range = True
            warnings.warn(
                f"model-reported lines {record.lines} outside the optimized code "
                f"(1..{line_count})",
                OpalWarning,
                stacklevel=2,
            )
    return GenerationResult(
        optimized_code=optimized_code,
        applied=applied,
        deferred=deferred,
        completion=completion,
    )
