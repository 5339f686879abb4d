"""Token vocabulary and pluggable next-token language models.

Two backends are provided: a deterministic table-backed model (a test
oracle for the decoders) and an interpolated add-delta n-gram model that
can be trained on small corpora. Both expose the same interface: given a
context of token ids, produce a finite logit vector over the vocabulary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SEP = "<sep>"

RESERVED = (BOS, EOS, UNK, SEP)

# Logit assigned to zero-probability entries; finite, but far enough below
# any realistic logit that it underflows to exactly 0 after softmax.
NEG_INF_LOGIT = -1.0e9

DEFAULT_CONTEXT_WINDOW = 128


class Vocab:
    """Dense token-id mapping with the four reserved tokens always present."""

    def __init__(self, tokens: Iterable[str]):
        seen = set(RESERVED)
        ordered: List[str] = list(RESERVED)
        for t in tokens:
            if t not in seen:
                seen.add(t)
                ordered.append(t)
        self._tokens: Tuple[str, ...] = tuple(ordered)
        self._ids: Dict[str, int] = {t: i for i, t in enumerate(self._tokens)}

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._tokens

    @property
    def bos_id(self) -> int:
        return self._ids[BOS]

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    @property
    def unk_id(self) -> int:
        return self._ids[UNK]

    @property
    def sep_id(self) -> int:
        return self._ids[SEP]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        """Token id; unknown tokens map to UNK."""
        return self._ids.get(token, self._ids[UNK])

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self._tokens[i] for i in ids]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self._tokens == other._tokens


def check_distribution(probs: np.ndarray, tol: float = 1e-9) -> None:
    if np.any(probs < 0):
        raise ValueError("distribution has negative entries")
    if abs(float(probs.sum()) - 1.0) > tol:
        raise ValueError("distribution does not sum to 1")


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for numerical stability."""
    if temperature <= 0:
        raise ValueError("invalid temperature")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


class LmInterface:
    """Deterministic conditional next-token model over a fixed vocabulary."""

    vocab: Vocab
    context_window: int = DEFAULT_CONTEXT_WINDOW

    def next_token_logits(self, context: Sequence[int]) -> np.ndarray:
        raise NotImplementedError


def next_distribution(
    model: LmInterface, context: Sequence[int], temperature: float = 1.0
) -> np.ndarray:
    """Next-token distribution: logits divided by T, then softmax.

    The context is truncated from the left at the model's window before
    the model sees it.
    """
    if temperature <= 0:
        raise ValueError("invalid temperature")
    ctx = list(context)[-model.context_window :]
    probs = softmax(model.next_token_logits(ctx), temperature)
    check_distribution(probs)
    return probs


class TableLm(LmInterface):
    """Explicit suffix-table model: longest matching context suffix wins.

    A total function over contexts: anything not in the table falls back
    to the default logits.
    """

    def __init__(
        self,
        vocab: Vocab,
        table: Dict[Tuple[int, ...], np.ndarray],
        default_logits: np.ndarray,
        context_window: int = DEFAULT_CONTEXT_WINDOW,
    ):
        self.vocab = vocab
        self.table = {tuple(k): np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.default_logits = np.asarray(default_logits, dtype=np.float64)
        self.context_window = context_window
        self._max_suffix = max((len(k) for k in self.table), default=0)
        for arr in list(self.table.values()) + [self.default_logits]:
            if arr.shape != (len(vocab),):
                raise ValueError("logit row length must equal vocab size")
            if not np.all(np.isfinite(arr)):
                raise ValueError("logits must be finite")

    @classmethod
    def from_probs(
        cls,
        vocab: Vocab,
        rows: Dict[Tuple[str, ...], Dict[str, float]],
        default: Dict[str, float],
        context_window: int = DEFAULT_CONTEXT_WINDOW,
    ) -> "TableLm":
        """Build from per-context probability rows keyed by token strings.

        Zero-probability tokens get a large negative (finite) logit.
        """

        def to_logits(row: Dict[str, float]) -> np.ndarray:
            arr = np.full(len(vocab), NEG_INF_LOGIT)
            for tok, p in row.items():
                if p > 0:
                    arr[vocab.id(tok)] = math.log(p)
            return arr

        table = {
            tuple(vocab.id(t) for t in ctx): to_logits(row) for ctx, row in rows.items()
        }
        return cls(vocab, table, to_logits(default), context_window)

    def next_token_logits(self, context: Sequence[int]) -> np.ndarray:
        ctx = tuple(context)
        for length in range(min(len(ctx), self._max_suffix), -1, -1):
            key = ctx[len(ctx) - length :]
            if key in self.table:
                return self.table[key].copy()
        return self.default_logits.copy()


def uniform_lm(vocab: Vocab) -> TableLm:
    """Model assigning equal probability to every token in every context."""
    return TableLm(vocab, {}, np.zeros(len(vocab)))


@dataclass
class NGramLm(LmInterface):
    """Interpolated add-delta n-gram model.

    For each order k = 1..n the conditional estimate is
    (count(ctx, t) + delta) / (count(ctx) + delta * |V|); the final
    probability is the weight-averaged mixture over orders. Smoothing
    keeps every token's probability strictly positive, so perplexity is
    finite on any test set drawn from the vocabulary.
    """

    vocab: Vocab
    order: int
    delta: float
    weights: Tuple[float, ...]
    # counts[k-1]: context tuple of k-1 ids -> {next id: count}
    counts: List[Dict[Tuple[int, ...], Dict[int, int]]] = field(default_factory=list)
    context_totals: List[Dict[Tuple[int, ...], int]] = field(default_factory=list)
    context_window: int = DEFAULT_CONTEXT_WINDOW

    def _order_probs(self, k: int, context: Sequence[int]) -> np.ndarray:
        padded = [self.vocab.bos_id] * (k - 1) + list(context)
        ctx = tuple(padded[len(padded) - (k - 1) :]) if k > 1 else ()
        v = len(self.vocab)
        arr = np.full(v, self.delta, dtype=np.float64)
        for tok, c in self.counts[k - 1].get(ctx, {}).items():
            arr[tok] += c
        total = self.context_totals[k - 1].get(ctx, 0) + self.delta * v
        return arr / total

    def next_probs(self, context: Sequence[int]) -> np.ndarray:
        probs = np.zeros(len(self.vocab), dtype=np.float64)
        for k in range(1, self.order + 1):
            probs += self.weights[k - 1] * self._order_probs(k, context)
        return probs

    def next_token_logits(self, context: Sequence[int]) -> np.ndarray:
        return np.log(self.next_probs(context))

    def save(self, path: str) -> None:
        payload = {
            "format": "parley-ngram",
            "version": 1,
            "tokens": list(self.vocab.tokens),
            "order": self.order,
            "delta": self.delta,
            "weights": list(self.weights),
            "context_window": self.context_window,
            "counts": [
                [[list(ctx), sorted(nxt.items())] for ctx, nxt in sorted(table.items())]
                for table in self.counts
            ],
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path: str) -> "NGramLm":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        if payload.get("format") != "parley-ngram" or payload.get("version") != 1:
            raise ValueError("unrecognized model file")
        vocab = Vocab(payload["tokens"])
        counts: List[Dict[Tuple[int, ...], Dict[int, int]]] = []
        totals: List[Dict[Tuple[int, ...], int]] = []
        for table in payload["counts"]:
            d = {tuple(ctx): {int(t): int(c) for t, c in nxt} for ctx, nxt in table}
            counts.append(d)
            totals.append({ctx: sum(nxt.values()) for ctx, nxt in d.items()})
        return cls(
            vocab=vocab,
            order=int(payload["order"]),
            delta=float(payload["delta"]),
            weights=tuple(float(w) for w in payload["weights"]),
            counts=counts,
            context_totals=totals,
            context_window=int(payload["context_window"]),
        )


def train_ngram(
    corpus: Sequence[Sequence[str]],
    order: int,
    delta: float,
    vocab: Vocab | None = None,
    weights: Sequence[float] | None = None,
) -> NGramLm:
    """Fit an interpolated add-delta n-gram model on token sequences.

    Sequences are counted exactly as given (no implicit EOS); callers
    that want the model to learn sequence endings should append EOS
    themselves. Weights default to uniform over orders.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if order < 1:
        raise ValueError("order must be >= 1")
    if delta <= 0:
        raise ValueError("invalid smoothing")
    if vocab is None:
        vocab = Vocab(t for seq in corpus for t in seq)
    if weights is None:
        weights = [1.0 / order] * order
    if len(weights) != order or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("weights must have one entry per order and sum to 1")

    counts: List[Dict[Tuple[int, ...], Dict[int, int]]] = [{} for _ in range(order)]
    totals: List[Dict[Tuple[int, ...], int]] = [{} for _ in range(order)]
    for seq in corpus:
        ids = vocab.encode(seq)
        for k in range(1, order + 1):
            padded = [vocab.bos_id] * (k - 1) + ids
            for j, tok in enumerate(ids):
                ctx = tuple(padded[j : j + k - 1])
                nxt = counts[k - 1].setdefault(ctx, {})
                nxt[tok] = nxt.get(tok, 0) + 1
                totals[k - 1][ctx] = totals[k - 1].get(ctx, 0) + 1
    return NGramLm(
        vocab=vocab,
        order=order,
        delta=float(delta),
        weights=tuple(float(w) for w in weights),
        counts=counts,
        context_totals=totals,
    )
