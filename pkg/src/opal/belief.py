"""Token-level belief tracing: rank the phrases the model leaned on.

Each generated token gets a belief score ``P(token)^alpha`` (equivalently
``exp(alpha * logprob)``), mapping log-probabilities onto [0, 1] where 1 is
full confidence.  Subword tokens are then reassembled into human-readable
phrases with a greedy longest-match sliding window over the prompt's n-gram
reference dictionary; a phrase's belief is the product of its constituent
token beliefs, so compound phrases score high only when every piece was
confidently generated.

Surviving phrases are log-scaled (with epsilon to keep log finite at zero),
min-max normalized to [0, 1], and ranked; the report also carries the
belief-distribution histogram and per-phrase occurrence counts that feed
the dashboard charts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import MissingLogprobsError
from .gateway import Completion
from .prompt import MAX_NGRAM, normalize_token

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 2.0
SCALE_EPSILON = 1e-7
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class BeliefToken:
    token_text: str
    logprob: float
    belief: float


@dataclass
class KeywordBelief:
    phrase: str
    raw_belief: float
    scaled_score: float
    token_span: tuple[int, int]  # [start, end) indices into the token stream
    in_dictionary: bool = True
    count: int = 1


@dataclass(frozen=True)
class HistogramBin:
    lo: float
    hi: float
    count: int


@dataclass
class BeliefReport:
    keywords: list[KeywordBelief]
    histogram: list[HistogramBin]
    keyword_frequency: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "keywords": [
                {
                    "phrase": k.phrase,
                    "raw_belief": k.raw_belief,
                    "scaled_score": k.scaled_score,
                    "span": [k.token_span[0], k.token_span[1]],
                    "count": k.count,
                }
                for k in self.keywords
            ],
            "histogram": [{"lo": b.lo, "hi": b.hi, "count": b.count} for b in self.histogram],
        }


def score_tokens(completion: Completion, alpha: float = DEFAULT_ALPHA) -> list[BeliefToken]:
    """Belief per token: P^alpha, clamped to 0.0 on underflow.

    A zero logprob (P = 1) maps to exactly 1.0; more surprising tokens map
    strictly lower.
    """
    if not completion.tokens:
        raise MissingLogprobsError("completion has no token logprobs", completion=completion)
    scored = []
    for text, logprob in completion.tokens:
        logprob = min(logprob, 0.0)
        try:
            belief = math.exp(alpha * logprob)
        except OverflowError:
            belief = 0.0
        scored.append(BeliefToken(token_text=text, logprob=logprob, belief=belief))
    return scored


def _assemble_words(tokens: list[BeliefToken]) -> list[tuple[str, list[int]]]:
    """Split the concatenated token text into words, mapping each word to the
    tokens whose first non-space character falls inside it.

    Pure-whitespace tokens join no word; they are glue and carry no phrase.
    """
    text = "".join(t.token_text for t in tokens)
    words: list[tuple[int, int, str]] = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < len(text) and not text[j].isspace():
            j += 1
        words.append((i, j, text[i:j]))
        i = j

    anchored: list[tuple[str, list[int]]] = [(w, []) for _, _, w in words]
    offset = 0
    word_idx = 0
    for tok_idx, tok in enumerate(tokens):
        anchor = None
        for k, ch in enumerate(tok.token_text):
            if not ch.isspace():
                anchor = offset + k
                break
        offset += len(tok.token_text)
        if anchor is None:
            logger.debug("token %d is whitespace-only; excluded from phrases", tok_idx)
            continue
        while word_idx < len(words) and words[word_idx][1] <= anchor:
            word_idx += 1
        anchored[word_idx][1].append(tok_idx)
    return anchored


def reconstruct_phrases(
    tokens: list[BeliefToken], dictionary: frozenset[str] | set[str]
) -> list[KeywordBelief]:
    """Greedy longest-match merge of subword tokens into dictionary phrases.

    Scans left to right; at each word position tries spans of 4, 3, 2, then
    1 words and emits the longest span found in the dictionary, with belief
    equal to the product of the member tokens' beliefs.  Words with no
    dictionary match fall back to their individual tokens, each retained
    with its own belief.
    """
    words = _assemble_words(tokens)
    normalized = [normalize_token(w) for w, _ in words]
    occurrences: list[KeywordBelief] = []

    def emit(phrase: str, token_ids: list[int], in_dictionary: bool) -> None:
        if not token_ids:
            return
        raw = 1.0
        for t in token_ids:
            raw *= tokens[t].belief
        occurrences.append(
            KeywordBelief(
                phrase=phrase,
                raw_belief=raw,
                scaled_score=0.0,
                token_span=(min(token_ids), max(token_ids) + 1),
                in_dictionary=in_dictionary,
            )
        )

    i = 0
    while i < len(words):
        matched = False
        for n in range(min(MAX_NGRAM, len(words) - i), 0, -1):
            parts = normalized[i : i + n]
            if any(not p for p in parts):
                continue
            phrase = " ".join(parts)
            if phrase in dictionary:
                token_ids = [t for _, ids in words[i : i + n] for t in ids]
                emit(phrase, token_ids, in_dictionary=True)
                i += n
                matched = True
                break
        if not matched:
            word_text, token_ids = words[i]
            for t in token_ids:
                phrase = normalize_token(tokens[t].token_text) or tokens[t].token_text.strip()
                emit(phrase, [t], in_dictionary=False)
            i += 1
    return occurrences


def _keep(keyword: KeywordBelief) -> bool:
    phrase = keyword.phrase
    if not any(ch.isalpha() for ch in phrase):
        return False  # punctuation or numeric fragment
    if len(phrase) <= 2 and not phrase.isalpha():
        return False
    return keyword.in_dictionary


def filter_and_scale(
    keywords: list[KeywordBelief],
    tokens: list[BeliefToken],
    bins: int = HISTOGRAM_BINS,
) -> BeliefReport:
    """Drop noise phrases, aggregate repeats, and min-max scale the ranking.

    Scaled score is ``log(raw_belief + epsilon)`` min-max normalized over
    the surviving set, which preserves the raw ranking; if every survivor
    shares one belief the normalization degenerates to uniform confidence,
    1.0.  The histogram bins the raw beliefs of every token covered by a
    surviving phrase occurrence.
    """
    survivors = [k for k in keywords if _keep(k)]

    by_phrase: dict[str, KeywordBelief] = {}
    frequency: dict[str, int] = {}
    for k in survivors:
        frequency[k.phrase] = frequency.get(k.phrase, 0) + 1
        best = by_phrase.get(k.phrase)
        if best is None or (k.raw_belief, -k.token_span[0]) > (best.raw_belief, -best.token_span[0]):
            by_phrase[k.phrase] = k

    aggregated = [
        KeywordBelief(
            phrase=k.phrase,
            raw_belief=k.raw_belief,
            scaled_score=0.0,
            token_span=k.token_span,
            in_dictionary=k.in_dictionary,
            count=frequency[k.phrase],
        )
        for k in by_phrase.values()
    ]

    if aggregated:
        logs = [math.log(k.raw_belief + SCALE_EPSILON) for k in aggregated]
        lo, hi = min(logs), max(logs)
        for k, value in zip(aggregated, logs):
            k.scaled_score = (value - lo) / (hi - lo) if hi > lo else 1.0
    aggregated.sort(key=lambda k: (-k.scaled_score, k.phrase))

    counts = [0] * bins
    for k in survivors:
        for t in range(k.token_span[0], k.token_span[1]):
            belief = tokens[t].belief
            idx = min(int(belief * bins), bins - 1)
            counts[idx] += 1
    histogram = [HistogramBin(lo=b / bins, hi=(b + 1) / bins, count=counts[b]) for b in range(bins)]

    return BeliefReport(keywords=aggregated, histogram=histogram, keyword_frequency=frequency)


def trace_beliefs(
    completion: Completion,
    reference_dictionary: frozenset[str] | set[str],
    alpha: float = DEFAULT_ALPHA,
    bins: int = HISTOGRAM_BINS,
) -> BeliefReport:
    """Full chain: score tokens, reconstruct phrases, filter and scale."""
    tokens = score_tokens(completion, alpha=alpha)
    occurrences = reconstruct_phrases(tokens, reference_dictionary)
    return filter_and_scale(occurrences, tokens, bins=bins)
