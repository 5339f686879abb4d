"""Decoders: temperature sampling, top-k filtering, sample-and-rank, beam search.

All operations are pure functions of (model, context, config, seed). The
RNG is Python's Mersenne Twister (`random.Random`), seeded explicitly, so
any decode replays bit-for-bit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .lm import LmInterface, check_distribution, next_distribution


@dataclass(frozen=True)
class DecodingConfig:
    temperature: float = 1.0
    top_k: Optional[int] = None
    num_samples: int = 1
    max_response_tokens: int = 128
    rng_seed: int = 0
    rank_by: str = "normalized"  # or "raw"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("invalid temperature")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("invalid k")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.max_response_tokens < 1:
            raise ValueError("max_response_tokens must be >= 1")
        if self.rank_by not in ("normalized", "raw"):
            raise ValueError("rank_by must be 'normalized' or 'raw'")


@dataclass(frozen=True)
class Candidate:
    """A decoded response with its likelihood bookkeeping.

    `score` is the length-normalized log-likelihood: logprob_sum divided
    by the number of generated tokens (EOS included when generated).
    """

    tokens: Tuple[int, ...]
    logprob_sum: float

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    @property
    def score(self) -> float:
        return self.logprob_sum / len(self.tokens)


def top_k_filter(probs: np.ndarray, k: int) -> np.ndarray:
    """Zero all mass outside the k most probable tokens and renormalize.

    Ties at the k-th rank are broken toward the lower token id.
    """
    if k < 1:
        raise ValueError("invalid k")
    probs = np.asarray(probs, dtype=np.float64)
    check_distribution(probs)
    n = len(probs)
    if k >= n:
        return probs.copy()
    # lexsort: primary key last -> sort by descending prob, then ascending id
    order = np.lexsort((np.arange(n), -probs))
    keep = order[:k]
    out = np.zeros(n)
    out[keep] = probs[keep]
    out /= out.sum()
    return out


def _sample_index(probs: np.ndarray, rng: random.Random) -> int:
    r = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if r < acc:
            return i
    # numerical leftover: fall back to the last nonzero entry
    return int(np.flatnonzero(probs)[-1])


def sample_response(
    model: LmInterface,
    context: Sequence[int],
    cfg: DecodingConfig,
    rng: random.Random,
) -> Candidate:
    """Draw one response token-by-token from the temperature softmax.

    logprob_sum accumulates the log-probability of each chosen token
    under the distribution actually sampled from (after top-k when
    enabled). Generation stops at EOS or max_response_tokens.
    """
    eos = model.vocab.eos_id
    generated: List[int] = []
    logprob = 0.0
    ctx = list(context)
    while len(generated) < cfg.max_response_tokens:
        dist = next_distribution(model, ctx, cfg.temperature)
        if cfg.top_k is not None:
            dist = top_k_filter(dist, cfg.top_k)
        tok = _sample_index(dist, rng)
        logprob += math.log(dist[tok])
        generated.append(tok)
        ctx.append(tok)
        if tok == eos:
            break
    return Candidate(tokens=tuple(generated), logprob_sum=logprob)


def score_response(
    model: LmInterface,
    context: Sequence[int],
    response: Sequence[int],
    temperature: float = 1.0,
    top_k: Optional[int] = None,
) -> Candidate:
    """Conditional log-likelihood of an existing response; no sampling.

    Defaults score under the unmodified model (T=1, no filter); pass the
    decoding settings to reproduce a sampled candidate's logprob_sum.
    """
    if not response:
        raise ValueError("empty response")
    ctx = list(context)
    logprob = 0.0
    for tok in response:
        dist = next_distribution(model, ctx, temperature)
        if top_k is not None:
            dist = top_k_filter(dist, top_k)
        p = dist[tok]
        if p <= 0:
            raise ValueError("response has zero probability under the model")
        logprob += math.log(p)
        ctx.append(tok)
    return Candidate(tokens=tuple(response), logprob_sum=logprob)


def _rank_key(cand: Candidate, rank_by: str):
    primary = cand.score if rank_by == "normalized" else cand.logprob_sum
    secondary = cand.logprob_sum if rank_by == "normalized" else cand.score
    return (-primary, -secondary, cand.tokens)


def sample_and_rank(
    model: LmInterface, context: Sequence[int], cfg: DecodingConfig
) -> List[Candidate]:
    """Draw N independent samples and sort them best-first.

    Ranking is by length-normalized score by default (cfg.rank_by="raw"
    ranks by total log-likelihood); ties go to the higher raw
    log-likelihood, then lexicographically smaller token ids. Element 0
    is the final output.
    """
    rng = random.Random(cfg.rng_seed)
    candidates = [sample_response(model, context, cfg, rng) for _ in range(cfg.num_samples)]
    return sorted(candidates, key=lambda c: _rank_key(c, cfg.rank_by))


@dataclass
class _Hyp:
    tokens: Tuple[int, ...]
    logprob: float


def beam_search(
    model: LmInterface,
    context: Sequence[int],
    beam_width: int,
    max_response_tokens: int = 128,
) -> Candidate:
    """Standard beam search; hypotheses compared by normalized score at the end.

    Partial hypotheses are pruned by total log-likelihood (ties toward
    lower token ids); EOS-finished hypotheses leave the beam and are
    never discarded. The result is the length-normalized argmax over all
    finished hypotheses plus the unfinished ones at max length.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    eos = model.vocab.eos_id
    beam: List[_Hyp] = [_Hyp(tokens=(), logprob=0.0)]
    finished: List[Candidate] = []
    for _ in range(max_response_tokens):
        expansions: List[_Hyp] = []
        for hyp in beam:
            dist = next_distribution(model, list(context) + list(hyp.tokens))
            logs = np.log(np.maximum(dist, 1e-300))
            for tok in range(len(dist)):
                if dist[tok] <= 0:
                    continue
                expansions.append(
                    _Hyp(tokens=hyp.tokens + (tok,), logprob=hyp.logprob + float(logs[tok]))
                )
        expansions.sort(key=lambda h: (-h.logprob, h.tokens))
        beam = []
        for hyp in expansions:
            if hyp.tokens[-1] == eos:
                finished.append(Candidate(tokens=hyp.tokens, logprob_sum=hyp.logprob))
            elif len(beam) < beam_width:
                beam.append(hyp)
        if not beam:
            break
    pool = finished + [Candidate(h.tokens, h.logprob) for h in beam]
    return min(pool, key=lambda c: _rank_key(c, "normalized"))
