"""Evaluation harness: reference bots, static evaluation over fixed
contexts, and the interactive session state machine.

Sessions open with a bot "Hi!", alternate speakers strictly, and may
only finish between 14 and 28 total turns with every bot turn labeled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .decoding import DecodingConfig, sample_and_rank
from .lm import BOS, EOS, SEP, LmInterface
from .repetition import FilterOutcome, RepetitionConfig, filter_candidates

MIN_TURNS = 14
MAX_TURNS = 28
OPENER = "Hi!"
MAX_CONTEXT_TURNS = 7

_CLOSING = "!.\"')]”’ \t"


class BotInterface:
    def reply(self, history: Sequence[str]) -> str:
        raise NotImplementedError


class GenericBot(BotInterface):
    """Replies "I don't know" to questions and "ok" to statements.

    A turn is a question when, after stripping trailing whitespace and
    closing punctuation, it ends with '?'.
    """

    def reply(self, history: Sequence[str]) -> str:
        if not history:
            raise ValueError("history must contain the user's turn")
        last = history[-1].rstrip(_CLOSING)
        return "I don't know" if last.endswith("?") else "ok"


def whitespace_tokenize(text: str) -> List[str]:
    return text.split()


def detokenize(model: LmInterface, token_ids: Sequence[int]) -> str:
    skip = {model.vocab.id(t) for t in (BOS, EOS, SEP)}
    words = [model.vocab.token(i) for i in token_ids if i not in skip]
    return " ".join(words)


@dataclass
class ReplyDiagnostics:
    candidates: List[Tuple[str, float, float, int]]  # (text, score, logprob_sum, count)
    outcome: FilterOutcome
    seed: int


class LmBot(BotInterface):
    """Sampling bot: sample-and-rank over a language model, with the
    cross-turn repetition filter applied to the ranked candidates.

    The per-reply RNG seed is base seed + number of history turns, so a
    whole conversation replays deterministically.
    """

    def __init__(
        self,
        model: LmInterface,
        decoding: DecodingConfig = DecodingConfig(),
        repetition: RepetitionConfig = RepetitionConfig(),
    ):
        self.model = model
        self.decoding = decoding
        self.repetition = repetition

    def _context_ids(self, history: Sequence[str]) -> List[int]:
        vocab = self.model.vocab
        ids: List[int] = []
        for turn in list(history)[-MAX_CONTEXT_TURNS:]:
            ids.extend(vocab.encode(whitespace_tokenize(turn)))
            ids.append(vocab.sep_id)
        return ids

    def reply_with_diagnostics(self, history: Sequence[str]) -> Tuple[str, ReplyDiagnostics]:
        seed = self.decoding.rng_seed + len(history)
        cfg = replace(self.decoding, rng_seed=seed)
        cands = sample_and_rank(self.model, self._context_ids(history), cfg)
        texts = [detokenize(self.model, c.tokens) for c in cands]
        outcome = filter_candidates(list(history), texts, self.repetition)
        diag = ReplyDiagnostics(
            candidates=[(t, c.score, c.logprob_sum, c.token_count) for t, c in zip(texts, cands)],
            outcome=outcome,
            seed=seed,
        )
        return texts[outcome.survivors[0]], diag

    def reply(self, history: Sequence[str]) -> str:
        return self.reply_with_diagnostics(history)[0]


# ---------------------------------------------------------------------------
# Static evaluation


@dataclass(frozen=True)
class MtbContext:
    """1 to 3 alternating turns ending with the user."""

    turns: Tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.turns) <= 3:
            raise ValueError("context must have between 1 and 3 turns")


def load_mtb(lines: Sequence[str]) -> List[MtbContext]:
    """One JSON array of 1-3 turn strings per line."""
    contexts = []
    for ln in lines:
        if not ln.strip():
            continue
        turns = json.loads(ln)
        if not isinstance(turns, list) or not all(isinstance(t, str) for t in turns):
            raise ValueError("each line must be a JSON array of strings")
        contexts.append(MtbContext(turns=tuple(turns)))
    return contexts


def mtb_turn_counts(contexts: Sequence[MtbContext]) -> Dict[int, int]:
    counts: Dict[int, int] = {1: 0, 2: 0, 3: 0}
    for c in contexts:
        counts[len(c.turns)] += 1
    return counts


def run_static_eval(
    bot: BotInterface, contexts: Sequence[MtbContext]
) -> List[Tuple[MtbContext, str]]:
    out = []
    for i, ctx in enumerate(contexts):
        try:
            out.append((ctx, bot.reply(list(ctx.turns))))
        except Exception as exc:
            raise RuntimeError(f"bot failed on context {i}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Interactive sessions


class ProtocolError(Exception):
    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


@dataclass
class SessionRecord:
    session_id: str
    config: Dict = field(default_factory=dict)
    turns: List[Tuple[str, str]] = field(default_factory=list)  # (speaker, text)
    labels: Dict[int, Dict[str, Tuple[bool, bool]]] = field(default_factory=dict)
    status: str = "active"


def new_session(session_id: str, config: Optional[Dict] = None) -> SessionRecord:
    return SessionRecord(
        session_id=session_id,
        config=dict(config or {}),
        turns=[("bot", OPENER)],
    )


def session_step(record: SessionRecord, event: Dict) -> SessionRecord:
    """Apply one event to a session, enforcing the protocol.

    Events are dicts with a "type" of user_turn, bot_turn, label, or
    finish; illegal events raise ProtocolError with a reason code.
    """
    kind = event.get("type")
    if record.status != "active":
        raise ProtocolError("session_not_active", f"session is {record.status}")
    if kind == "user_turn" or kind == "bot_turn":
        speaker = "user" if kind == "user_turn" else "bot"
        if len(record.turns) >= MAX_TURNS:
            raise ProtocolError("session_full", f"already at {MAX_TURNS} turns")
        if record.turns and record.turns[-1][0] == speaker:
            raise ProtocolError("protocol_violation", f"not {speaker}'s turn")
        text = event.get("text")
        if not isinstance(text, str) or not text:
            raise ProtocolError("protocol_violation", "turn text required")
        record.turns.append((speaker, text))
    elif kind == "label":
        idx = event.get("turn_index")
        if not isinstance(idx, int) or not 0 <= idx < len(record.turns):
            raise ProtocolError("bad_turn_index", f"no turn {idx!r}")
        if record.turns[idx][0] != "bot":
            raise ProtocolError("label_on_user_turn", f"turn {idx} is a user turn")
        worker = str(event.get("worker", ""))
        if not worker:
            raise ProtocolError("protocol_violation", "worker id required")
        sensible = bool(event.get("sensible"))
        specific = bool(event.get("specific")) and sensible  # coercion at ingest
        record.labels.setdefault(idx, {})[worker] = (sensible, specific)
    elif kind == "finish":
        n = len(record.turns)
        if n < MIN_TURNS:
            raise ProtocolError("session_too_short", f"{n} turns < minimum {MIN_TURNS}")
        unlabeled = [
            i for i, (sp, _) in enumerate(record.turns) if sp == "bot" and i not in record.labels
        ]
        if unlabeled:
            raise ProtocolError("unlabeled_bot_turns", f"turns {unlabeled} have no labels")
        record.status = "complete"
    else:
        raise ProtocolError("protocol_violation", f"unknown event type {kind!r}")
    return record


def validate_complete(record: SessionRecord) -> None:
    """Replay-style invariant check for a finished session."""
    if record.status != "complete":
        raise ValueError("session is not complete")
    if not record.turns or record.turns[0] != ("bot", OPENER):
        raise ValueError("session does not open with the bot greeting")
    for a, b in zip(record.turns, record.turns[1:]):
        if a[0] == b[0]:
            raise ValueError("speakers do not alternate")
    if not MIN_TURNS <= len(record.turns) <= MAX_TURNS:
        raise ValueError("turn count out of bounds")
    bot_turns = [i for i, (sp, _) in enumerate(record.turns) if sp == "bot"]
    if len(bot_turns) < MIN_TURNS // 2:
        raise ValueError("too few bot turns")
    if any(i not in record.labels for i in bot_turns):
        raise ValueError("unlabeled bot turn in complete session")
