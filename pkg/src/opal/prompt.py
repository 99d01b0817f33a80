"""Prompt assembly and the n-gram reference dictionary.

The prompt layout is fixed: numbered source code, one optional section per
diagnostic summary (omitted entirely when the source was not selected), the
task instruction, and the required output format that makes replies machine
parseable.  Rebuilding from identical inputs is byte-identical; the golden
files under ``tests/goldens`` are the normative rendering.

The reference dictionary collects every 1..4-gram of the prompt text after
lowercasing and stripping boundary punctuation from whitespace tokens.
Belief tracing later uses it to reassemble subword tokens into the phrases
the model leaned on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ConfigError, PromptTooLargeError
from .ingest import KernelSource
from .insights import InsightSet

MAX_NGRAM = 4
DEFAULT_MAX_PROMPT_TOKENS = 24_000
CHARS_PER_TOKEN_ESTIMATE = 4

SLOT_ROOFLINE = "roofline"
SLOT_STALL = "stall"
SLOT_COUNTERS = "counters"

_SECTION_HEADERS = {
    SLOT_ROOFLINE: "roofline_summary",
    SLOT_STALL: "stall_analysis_summary",
    SLOT_COUNTERS: "key_hardware_events",
}

TASK_INSTRUCTION_TEMPLATE = """\
task_instruction: You are an HPC performance optimization expert. Optimize
    the provided {language} code specifically for {architecture}
    on input configuration {input_config}. Clearly reference the diagnostic
    data by number or quoted text in each inline comment.
"""

REQUIRED_OUTPUT_FORMAT = """\
Required Output Format:

1. Provide the complete optimized code wrapped within ```cpp code blocks```.
2. After the code, list applied changes:
    optimizations = [ {'lines': [line_numbers], 'reason': 'justification from
    diagnostic'}, ... ]
3. List suggestions not applied: suggested_but_not_applied =
    [ {'lines': [line_numbers], 'reason': 'diagnostic, but deferred due to
    uncertainty'}, ... ]
4. Do not include any additional explanation beyond the code and the two lists.
"""

_BOUNDARY_STRIP = re.compile(r"^[^a-z0-9]+|[^a-z0-9]+$")


@dataclass(frozen=True)
class PromptMetadata:
    language: str
    architecture: str
    input_config: str

    def __post_init__(self):
        for name in ("language", "architecture", "input_config"):
            if not getattr(self, name).strip():
                raise ConfigError(f"prompt metadata field {name!r} must be non-empty")


@dataclass
class PromptDocument:
    text: str
    slots_filled: frozenset[str]
    metadata: PromptMetadata
    reference_dictionary: frozenset[str]

    def estimated_tokens(self) -> int:
        return -(-len(self.text) // CHARS_PER_TOKEN_ESTIMATE)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "slots_filled": sorted(self.slots_filled),
            "metadata": {
                "language": self.metadata.language,
                "architecture": self.metadata.architecture,
                "input_config": self.metadata.input_config,
            },
            "reference_dictionary": sorted(self.reference_dictionary),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PromptDocument":
        return cls(
            text=data["text"],
            slots_filled=frozenset(data["slots_filled"]),
            metadata=PromptMetadata(**data["metadata"]),
            reference_dictionary=frozenset(data["reference_dictionary"]),
        )


def normalize_token(token: str) -> str:
    """Lowercase and strip boundary punctuation; interior punctuation stays.

    ``__restrict__`` becomes ``restrict`` while counter names such as
    ``l1tex__data_bank_conflicts`` survive whole.
    """
    return _BOUNDARY_STRIP.sub("", token.lower())


def build_reference_dictionary(text: str, max_ngram: int = MAX_NGRAM) -> set[str]:
    """All contiguous n-grams (n <= 4) of the normalized token stream."""
    tokens = [normalize_token(t) for t in text.split()]
    tokens = [t for t in tokens if t]
    ngrams: set[str] = set()
    for n in range(1, max_ngram + 1):
        for i in range(len(tokens) - n + 1):
            ngrams.add(" ".join(tokens[i : i + n]))
    return ngrams


def _indent(block: str, prefix: str = "    ") -> str:
    return "\n".join(prefix + line if line else "" for line in block.split("\n"))


def build_prompt(
    source: KernelSource,
    insights: InsightSet,
    metadata: PromptMetadata,
    max_tokens: int = DEFAULT_MAX_PROMPT_TOKENS,
) -> PromptDocument:
    """Instantiate the prompt and its reference dictionary.

    Sections for absent summaries are omitted header and all; the model is
    never told that a diagnostic source exists but was not provided.
    """
    parts: list[str] = []
    parts.append("code:\n  snippet: |\n" + _indent(source.numbered_text()) + "\n")

    slots_filled = set()
    for slot, summary in (
        (SLOT_ROOFLINE, insights.roofline_summary),
        (SLOT_STALL, insights.stall_summary),
        (SLOT_COUNTERS, insights.counter_summary),
    ):
        if summary:
            slots_filled.add(slot)
            parts.append(f"{_SECTION_HEADERS[slot]}: |\n" + _indent(summary) + "\n")

    parts.append(
        TASK_INSTRUCTION_TEMPLATE.format(
            language=metadata.language,
            architecture=metadata.architecture,
            input_config=metadata.input_config,
        )
    )
    parts.append(REQUIRED_OUTPUT_FORMAT)
    text = "\n".join(parts)

    estimated = -(-len(text) // CHARS_PER_TOKEN_ESTIMATE)
    if estimated > max_tokens:
        raise PromptTooLargeError(
            f"prompt estimated at {estimated} tokens exceeds the {max_tokens} token budget"
        )

    return PromptDocument(
        text=text,
        slots_filled=frozenset(slots_filled),
        metadata=metadata,
        reference_dictionary=frozenset(build_reference_dictionary(text)),
    )
