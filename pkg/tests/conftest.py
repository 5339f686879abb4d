"""Shared fixtures: tiny table models and a brute-force decode oracle."""

import itertools
import math
import random

import numpy as np
import pytest

from parley.decoding import Candidate
from parley.lm import TableLm, Vocab, next_distribution


def chain_lm(vocab, chain):
    """Deterministic model: after each context suffix, the named token has
    probability 1. `chain` maps context token-string tuples to a token."""
    rows = {ctx: {tok: 1.0} for ctx, tok in chain.items() if ctx != ()}
    default = {chain[()]: 1.0} if () in chain else {}
    return TableLm.from_probs(vocab, rows, default=default)


def brute_force_best(model, context, max_len):
    """Exhaustive argmax of length-normalized score over all responses of
    length <= max_len (EOS-terminated or truncated), with the decoder's
    tie-break: higher raw log-likelihood, then lexicographic tokens."""
    eos = model.vocab.eos_id
    vocab_ids = range(len(model.vocab))
    best = None

    def consider(tokens, logprob):
        nonlocal best
        cand = Candidate(tokens=tuple(tokens), logprob_sum=logprob)
        key = (-cand.score, -cand.logprob_sum, cand.tokens)
        if best is None or key < (-best.score, -best.logprob_sum, best.tokens):
            best = cand

    def walk(tokens, logprob):
        if len(tokens) == max_len:
            consider(tokens, logprob)
            return
        dist = next_distribution(model, list(context) + tokens)
        for tok in vocab_ids:
            p = float(dist[tok])
            if p <= 0:
                continue
            lp = logprob + math.log(p)
            if tok == eos:
                consider(tokens + [tok], lp)
            else:
                walk(tokens + [tok], lp)

    walk([], 0.0)
    return best


def random_table_lm(seed, n_extra_tokens=1, n_rows=4, max_suffix=2):
    """Seeded random TableLm over the 4 reserved tokens plus a few extras."""
    rng = random.Random(seed)
    vocab = Vocab(f"t{i}" for i in range(n_extra_tokens))
    v = len(vocab)

    def rand_logits():
        return np.array([rng.uniform(-3, 3) for _ in range(v)])

    table = {}
    for _ in range(n_rows):
        suffix = tuple(rng.randrange(v) for _ in range(rng.randint(1, max_suffix)))
        table[suffix] = rand_logits()
    return TableLm(vocab, table, rand_logits())


@pytest.fixture
def small_vocab():
    return Vocab(["a", "b", "c"])
