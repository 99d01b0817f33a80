"""opal: performance-analytics-guided kernel optimization with LLMs.

The pipeline turns profiler exports (roofline, PC-sampling stalls, hardware
counters) into a structured prompt, obtains optimized code plus per-change
justifications from a pluggable chat-completion backend, and explains the
model's reasoning through token-level belief tracing.
"""

from .belief import BeliefReport, BeliefToken, KeywordBelief, filter_and_scale, reconstruct_phrases, score_tokens, trace_beliefs
from .gateway import BackendConfig, Completion, GenerationRequest, LiveBackend, MockBackend, generate
from .importance import ImportanceResult, OmpConfig, ensemble_omp, omp_solve, rank_counters, summarize_counters
from .ingest import (
    CounterDataset,
    CounterDictionary,
    KernelSource,
    RooflineRecord,
    StallSampleSet,
    parse_counter_dictionary,
    parse_counter_matrix,
    parse_kernel_source,
    parse_pc_sampling,
    parse_roofline_amd,
    parse_roofline_nvidia,
)
from .insights import InsightSet, StallLineFinding, summarize_importance, summarize_roofline, summarize_stalls
from .pipeline import Job, JobStore, RunConfig, run_pipeline
from .prompt import PromptDocument, PromptMetadata, build_prompt, build_reference_dictionary
from .response import GenerationResult, OptimizationRecord, parse_response

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BeliefReport",
    "BeliefToken",
    "Completion",
    "CounterDataset",
    "CounterDictionary",
    "GenerationRequest",
    "GenerationResult",
    "ImportanceResult",
    "InsightSet",
    "Job",
    "JobStore",
    "KernelSource",
    "KeywordBelief",
    "LiveBackend",
    "MockBackend",
    "OmpConfig",
    "OptimizationRecord",
    "PromptDocument",
    "PromptMetadata",
    "RooflineRecord",
    "RunConfig",
    "StallLineFinding",
    "StallSampleSet",
    "build_prompt",
    "build_reference_dictionary",
    "ensemble_omp",
    "filter_and_scale",
    "generate",
    "omp_solve",
    "parse_counter_dictionary",
    "parse_counter_matrix",
    "parse_kernel_source",
    "parse_pc_sampling",
    "parse_response",
    "parse_roofline_amd",
    "parse_roofline_nvidia",
    "rank_counters",
    "reconstruct_phrases",
    "run_pipeline",
    "score_tokens",
    "summarize_counters",
    "summarize_importance",
    "summarize_roofline",
    "summarize_stalls",
    "trace_beliefs",
]
