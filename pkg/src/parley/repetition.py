"""Cross-turn and in-turn repetition detection for candidate responses.

A candidate is flagged when it shares a long common token run with any
earlier turn in the conversation (either speaker). "Long" defaults to
max(3 tokens, half the shorter turn); both the threshold and the run
definition (contiguous substring vs. non-contiguous subsequence) are
configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

_PUNCT = ".,!?;:'\"()[]…“”‘’"


@dataclass(frozen=True)
class RepetitionConfig:
    mode: str = "contiguous"  # or "subsequence"
    min_tokens: int = 3
    min_fraction: float = 0.5
    normalize: bool = True

    def __post_init__(self):
        if self.mode not in ("contiguous", "subsequence"):
            raise ValueError("mode must be 'contiguous' or 'subsequence'")
        if self.min_tokens < 1:
            raise ValueError("min_tokens must be >= 1")
        if not 0 < self.min_fraction <= 1:
            raise ValueError("min_fraction must be in (0, 1]")


def normalize_tokens(text: str) -> List[str]:
    """Whitespace tokens, lowercased, edge punctuation stripped per token."""
    out = []
    for raw in text.split():
        tok = raw.lower().strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


def _tokens(turn, cfg: RepetitionConfig) -> List[str]:
    if isinstance(turn, str):
        return normalize_tokens(turn) if cfg.normalize else turn.split()
    return list(turn)


def longest_common_run(a: Sequence, b: Sequence, mode: str = "contiguous") -> int:
    """Longest common substring (contiguous) or classic LCS (subsequence)."""
    if mode not in ("contiguous", "subsequence"):
        raise ValueError("mode must be 'contiguous' or 'subsequence'")
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    best = 0
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if mode == "contiguous" and cur[j] > best:
                    best = cur[j]
            elif mode == "subsequence":
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)] if mode == "subsequence" else best


def _threshold(len_a: int, len_b: int, cfg: RepetitionConfig) -> int:
    return max(cfg.min_tokens, math.ceil(cfg.min_fraction * min(len_a, len_b)))


def is_cross_turn_repetition(
    history: Sequence, candidate, cfg: RepetitionConfig = RepetitionConfig()
) -> Tuple[bool, Optional[int]]:
    """Does the candidate share a long common run with any prior turn?

    Turns may be strings (tokenized/normalized here) or token sequences.
    Returns (flagged, index of the lowest matching turn).
    """
    cand = _tokens(candidate, cfg)
    for idx, turn in enumerate(history):
        other = _tokens(turn, cfg)
        if not cand or not other:
            continue
        run = longest_common_run(cand, other, cfg.mode)
        if run >= _threshold(len(cand), len(other), cfg):
            return True, idx
    return False, None


def is_in_turn_repetition(candidate, n: int = 3, cfg: RepetitionConfig = RepetitionConfig()) -> bool:
    """True iff some token n-gram occurs at least twice within the turn."""
    if n < 1:
        raise ValueError("n must be >= 1")
    toks = _tokens(candidate, cfg)
    seen = set()
    for i in range(len(toks) - n + 1):
        gram = tuple(toks[i : i + n])
        if gram in seen:
            return True
        seen.add(gram)
    return False


@dataclass
class FilterOutcome:
    """Survivors of the repetition filter, in their original rank order."""

    survivors: List[int] = field(default_factory=list)  # indices into the input list
    removals: List[Tuple[int, int]] = field(default_factory=list)  # (cand idx, turn idx)
    forced: bool = False


def filter_candidates(
    history: Sequence, candidates: Sequence, cfg: RepetitionConfig = RepetitionConfig()
) -> FilterOutcome:
    """Drop cross-turn repeats from a ranked candidate list.

    Order is preserved. If every candidate is flagged, the top-ranked one
    is kept anyway (the session needs a bot turn) and marked forced.
    """
    out = FilterOutcome()
    for i, cand in enumerate(candidates):
        flagged, turn_idx = is_cross_turn_repetition(history, cand, cfg)
        if flagged:
            out.removals.append((i, turn_idx))
        else:
            out.survivors.append(i)
    if not out.survivors and len(candidates) > 0:
        out.survivors = [0]
        out.forced = True
    return out
