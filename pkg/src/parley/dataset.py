"""Training-corpus pipeline: message trees -> filtered (context, response)
pairs, plus a byte-pair-encoding subword tokenizer.

The pipeline is two-pass: pass 1 counts message texts across the whole
corpus (the global-repeat rule needs corpus-wide statistics), pass 2
filters and extracts. A removed message drops its entire subtree.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .lm import SEP, UNK

# ---------------------------------------------------------------------------
# BPE tokenizer


@dataclass
class BpeModel:
    """Character inventory plus an ordered merge list."""

    chars: Tuple[str, ...]
    merges: Tuple[Tuple[str, str], ...]
    vocab_size: int

    def vocab_tokens(self) -> List[str]:
        return list(self.chars) + [a + b for a, b in self.merges]

    def save(self, path: str) -> None:
        payload = {
            "format": "parley-bpe",
            "version": 1,
            "chars": list(self.chars),
            "merges": [list(m) for m in self.merges],
            "vocab_size": self.vocab_size,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path: str) -> "BpeModel":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        if payload.get("format") != "parley-bpe" or payload.get("version") != 1:
            raise ValueError("unrecognized BPE file")
        return cls(
            chars=tuple(payload["chars"]),
            merges=tuple((a, b) for a, b in payload["merges"]),
            vocab_size=int(payload["vocab_size"]),
        )


def _pair_counts(seqs: Sequence[List[str]]) -> Counter:
    counts: Counter = Counter()
    for seq in seqs:
        for i in range(len(seq) - 1):
            counts[(seq[i], seq[i + 1])] += 1
    return counts


def _apply_merge(seq: List[str], pair: Tuple[str, str]) -> List[str]:
    out: List[str] = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and (seq[i], seq[i + 1]) == pair:
            out.append(seq[i] + seq[i + 1])
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def bpe_train(corpus: Sequence[str], vocab_size: int) -> BpeModel:
    """Learn merges greedily by pair frequency until the budget is spent.

    Stops early when no adjacent pair occurs at least twice. Frequency
    ties break lexicographically on the pair.
    """
    chars = tuple(sorted({c for s in corpus for c in s}))
    if vocab_size < len(chars):
        raise ValueError("vocab_size smaller than character inventory")
    seqs = [list(s) for s in corpus]
    merges: List[Tuple[str, str]] = []
    while len(chars) + len(merges) < vocab_size:
        counts = _pair_counts(seqs)
        if not counts:
            break
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if best[1] < 2:
            break
        merges.append(best[0])
        seqs = [_apply_merge(seq, best[0]) for seq in seqs]
    return BpeModel(chars=chars, merges=tuple(merges), vocab_size=vocab_size)


def bpe_encode(model: BpeModel, text: str) -> List[str]:
    """Split to characters, then replay merges in learned order.

    Characters outside the inventory become UNK.
    """
    known = set(model.chars)
    seq = [c if c in known else UNK for c in text]
    for pair in model.merges:
        seq = _apply_merge(seq, pair)
    return seq


def bpe_decode(model: BpeModel, tokens: Sequence[str]) -> str:
    return "".join(tokens)


# ---------------------------------------------------------------------------
# Message trees


@dataclass
class Message:
    id: str
    author: str
    text: str
    parent_id: Optional[str] = None


@dataclass
class MessageTree:
    root_id: str
    messages: Dict[str, Message]
    children: Dict[str, List[str]] = field(default_factory=dict)

    @classmethod
    def build(cls, messages: Iterable[Message]) -> "MessageTree":
        by_id: Dict[str, Message] = {}
        for m in messages:
            if m.id in by_id:
                raise ValueError(f"duplicate message id {m.id!r}")
            by_id[m.id] = m
        roots = [m.id for m in by_id.values() if m.parent_id is None]
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        children: Dict[str, List[str]] = {mid: [] for mid in by_id}
        for m in by_id.values():
            if m.parent_id is not None:
                if m.parent_id not in by_id:
                    raise ValueError(f"missing parent {m.parent_id!r}")
                children[m.parent_id].append(m.id)
        for kids in children.values():
            kids.sort()
        tree = cls(root_id=roots[0], messages=by_id, children=children)
        tree._check_acyclic()
        return tree

    def _check_acyclic(self) -> None:
        seen = set()
        stack = [self.root_id]
        while stack:
            mid = stack.pop()
            if mid in seen:
                raise ValueError("cycle in message tree")
            seen.add(mid)
            stack.extend(self.children[mid])
        if len(seen) != len(self.messages):
            raise ValueError("unreachable messages (cycle or orphan)")


# ---------------------------------------------------------------------------
# Filtering


@dataclass
class FilterConfig:
    min_subwords: int = 2
    max_subwords: int = 128
    min_alpha_fraction: float = 0.70
    max_global_repeats: int = 100
    parent_overlap_threshold: float = 0.5
    overlap_ngram_order: int = 3
    bot_word_boundary: bool = False
    max_context_turns: int = 7
    safety_predicate: Callable[[str], bool] = field(default=lambda text: True)


@dataclass(frozen=True)
class TrainingPair:
    context: Tuple[str, ...]  # 1..7 prior turns, oldest first
    response: str


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def strip_parent_quote(msg_text: str, parent_text: str) -> str:
    """Remove every copy of the full parent text quoted inside a message."""
    msg = normalize_ws(msg_text)
    parent = normalize_ws(parent_text)
    if not parent:
        return msg
    return normalize_ws(msg.replace(parent, " "))


def ngram_overlap(a_text: str, b_text: str, n: int) -> float:
    """Fraction of a's distinct token n-grams that also occur in b."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a_toks = a_text.lower().split()
    b_toks = b_text.lower().split()
    a_grams = {tuple(a_toks[i : i + n]) for i in range(len(a_toks) - n + 1)}
    if not a_grams:
        return 0.0
    b_grams = {tuple(b_toks[i : i + n]) for i in range(len(b_toks) - n + 1)}
    return len(a_grams & b_grams) / len(a_grams)


_URL_MARKERS = ("http://", "https://", "www.")


def _contains_bot(author: str, word_boundary: bool) -> bool:
    low = author.lower()
    if not word_boundary:
        return "bot" in low
    return re.search(r"\bbot\b", low) is not None


def message_passes_filters(
    text: str,
    author: str,
    parent_text: Optional[str],
    global_count: int,
    cfg: FilterConfig,
    tokenizer: Callable[[str], Sequence[str]],
) -> Optional[int]:
    """Evaluate removal rules in order 1..7; return the first violated
    rule id, or None when the message passes."""
    n_subwords = len(tokenizer(text))
    if n_subwords < cfg.min_subwords or n_subwords > cfg.max_subwords:
        return 1
    visible = [c for c in text if not c.isspace()]
    alpha_fraction = sum(c.isalpha() for c in visible) / len(visible) if visible else 0.0
    if alpha_fraction < cfg.min_alpha_fraction:
        return 2
    low = text.lower()
    if any(marker in low for marker in _URL_MARKERS):
        return 3
    if _contains_bot(author, cfg.bot_word_boundary):
        return 4
    if global_count > cfg.max_global_repeats:
        return 5
    if parent_text is not None and (
        ngram_overlap(text, parent_text, cfg.overlap_ngram_order) > cfg.parent_overlap_threshold
    ):
        return 6
    if not cfg.safety_predicate(text):
        return 7
    return None


def corpus_pass1(trees: Sequence[MessageTree]) -> Counter:
    """Exact multiset counts of raw message texts across all trees."""
    counts: Counter = Counter()
    for tree in trees:
        for m in tree.messages.values():
            counts[m.text] += 1
    return counts


def extract_pairs(
    tree: MessageTree,
    cfg: FilterConfig,
    tokenizer: Callable[[str], Sequence[str]],
    global_counts: Counter,
) -> Tuple[List[TrainingPair], List[Tuple[str, int]]]:
    """Walk one tree depth-first (children by id) and emit training pairs.

    Parent quotes are stripped before filtering; a removed message drops
    its whole subtree and is reported once as (message id, rule id).
    """
    pairs: List[TrainingPair] = []
    removals: List[Tuple[str, int]] = []

    def visit(mid: str, ancestors: List[str]) -> None:
        msg = tree.messages[mid]
        parent_eff = ancestors[-1] if ancestors else None
        effective = normalize_ws(msg.text)
        if parent_eff is not None:
            effective = strip_parent_quote(effective, parent_eff)
        rule = message_passes_filters(
            effective, msg.author, parent_eff, global_counts[msg.text], cfg, tokenizer
        )
        if rule is not None:
            removals.append((mid, rule))
            return
        if ancestors:
            context = tuple(ancestors[-cfg.max_context_turns :])
            pairs.append(TrainingPair(context=context, response=effective))
        for child in tree.children[mid]:
            visit(child, ancestors + [effective])

    visit(tree.root_id, [])
    return pairs, removals


def mine_forest(
    trees: Sequence[MessageTree],
    cfg: FilterConfig,
    tokenizer: Callable[[str], Sequence[str]],
) -> Tuple[List[TrainingPair], List[Tuple[str, int]]]:
    """Two-pass pipeline over a forest, in canonical (root id) order."""
    counts = corpus_pass1(trees)
    pairs: List[TrainingPair] = []
    removals: List[Tuple[str, int]] = []
    for tree in sorted(trees, key=lambda t: t.root_id):
        p, r = extract_pairs(tree, cfg, tokenizer, counts)
        pairs.extend(p)
        removals.extend(r)
    return pairs, removals


# ---------------------------------------------------------------------------
# File formats (tab-separated with backslash escaping)


def escape_field(s: str) -> str:
    return s.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_field(s: str) -> str:
    out: List[str] = []
    i = 0
    while i < len(s):
        c = s[i]
        if c == "\\" and i + 1 < len(s):
            nxt = s[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def parse_message_line(line: str) -> Message:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise ValueError("message line must have 4 tab-separated fields")
    mid, parent, author, text = (unescape_field(p) for p in parts)
    return Message(id=mid, parent_id=parent or None, author=author, text=text)


def format_message_line(m: Message) -> str:
    return "\t".join(
        escape_field(p) for p in (m.id, m.parent_id or "", m.author, m.text)
    )


def read_forest(lines: Iterable[str]) -> List[MessageTree]:
    """Parse one message per line and group into trees by root."""
    messages = [parse_message_line(ln) for ln in lines if ln.strip()]
    by_id = {m.id: m for m in messages}
    groups: Dict[str, List[Message]] = {}
    for m in messages:
        root = m
        hops = 0
        while root.parent_id is not None:
            if root.parent_id not in by_id or hops > len(messages):
                raise ValueError(f"missing parent or cycle at message {m.id!r}")
            root = by_id[root.parent_id]
            hops += 1
        groups.setdefault(root.id, []).append(m)
    return [MessageTree.build(ms) for _, ms in sorted(groups.items())]


def format_pair_line(pair: TrainingPair) -> str:
    """One pair per line: all turns joined by the separator token.

    Whitespace-splitting the line yields a token sequence directly
    usable for word-level model training.
    """
    return escape_field(f" {SEP} ".join(list(pair.context) + [pair.response]))


def parse_pair_line(line: str) -> TrainingPair:
    turns = [t.strip() for t in unescape_field(line.rstrip("\n")).split(SEP)]
    if len(turns) < 2:
        raise ValueError("pair line must contain at least context and response")
    return TrainingPair(context=tuple(turns[:-1]), response=turns[-1])
