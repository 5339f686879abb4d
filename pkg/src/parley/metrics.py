"""Human-evaluation metrics: sensibleness/specificity/SSA aggregation,
inter-rater agreement, Krippendorff's alpha, perplexity, and ordinary
least squares for the perplexity-vs-SSA correlation.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .lm import LmInterface, next_distribution


@dataclass(frozen=True)
class TurnLabels:
    """Per-worker labels for one bot turn.

    A worker marking a turn not sensible cannot mark it specific; the
    coercion is applied at construction so the invariant holds for every
    instance.
    """

    sensible: Tuple[bool, ...]
    specific: Tuple[bool, ...]

    def __post_init__(self):
        if not self.sensible or len(self.sensible) != len(self.specific):
            raise ValueError("label lists must be non-empty and equal length")
        coerced = tuple(sp and se for se, sp in zip(self.sensible, self.specific))
        object.__setattr__(self, "specific", coerced)


@dataclass(frozen=True)
class EvalResult:
    sensibleness: float
    specificity: float
    ssa: float
    n_turns: int
    per_turn: Tuple[Tuple[bool, bool], ...]  # (majority sensible, majority specific)


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float


def majority(labels: Sequence[bool]) -> bool:
    """Strict majority; exact ties resolve to False."""
    if not labels:
        raise ValueError("empty label list")
    return sum(labels) * 2 > len(labels)


def aggregate(turns: Sequence[TurnLabels]) -> EvalResult:
    """Sensibleness and specificity rates over majority-voted turns;
    SSA is their simple average."""
    if not turns:
        raise ValueError("no labeled turns")
    per_turn = tuple((majority(t.sensible), majority(t.specific)) for t in turns)
    sens = sum(1 for s, _ in per_turn if s) / len(per_turn)
    spec = sum(1 for _, s in per_turn if s) / len(per_turn)
    return EvalResult(
        sensibleness=sens,
        specificity=spec,
        ssa=(sens + spec) / 2,
        n_turns=len(per_turn),
        per_turn=per_turn,
    )


def pairwise_agreement(label_matrix: Sequence[Sequence[bool]]) -> float:
    """Mean over items of (agreeing unordered worker pairs / total pairs)."""
    if not label_matrix:
        raise ValueError("no items")
    per_item = []
    for labels in label_matrix:
        m = len(labels)
        if m < 2:
            raise ValueError("every item needs at least 2 labels")
        agree = sum(
            1 for i in range(m) for j in range(i + 1, m) if labels[i] == labels[j]
        )
        per_item.append(agree / (m * (m - 1) / 2))
    return sum(per_item) / len(per_item)


def krippendorff_alpha(label_matrix: Sequence[Sequence[Optional[object]]]) -> float:
    """Nominal-data alpha, 1 - D_o/D_e, via the coincidence matrix.

    Missing labels may be passed as None; items with fewer than two
    labels are excluded. All-identical data has zero expected
    disagreement and raises.
    """
    units = [[v for v in row if v is not None] for row in label_matrix]
    units = [u for u in units if len(u) >= 2]
    if not units:
        raise ValueError("need at least one item with 2+ labels")
    coincidence: Counter = Counter()
    for u in units:
        m = len(u)
        for i, c in enumerate(u):
            for j, k in enumerate(u):
                if i != j:
                    coincidence[(c, k)] += 1.0 / (m - 1)
    n_total = sum(coincidence.values())
    marginals: Counter = Counter()
    for (c, _), v in coincidence.items():
        marginals[c] += v
    d_o = sum(v for (c, k), v in coincidence.items() if c != k) / n_total
    d_e = sum(
        marginals[c] * marginals[k]
        for c in marginals
        for k in marginals
        if c != k
    ) / (n_total * (n_total - 1))
    if d_e == 0:
        raise ValueError("zero expected disagreement")
    return 1.0 - d_o / d_e


def sequence_nll(model: LmInterface, tokens: Sequence[int]) -> Tuple[float, int]:
    """Total negative log-likelihood of a sequence plus its terminating
    EOS, and the number of scored tokens."""
    eos = model.vocab.eos_id
    ctx: List[int] = []
    nll = 0.0
    count = 0
    for tok in list(tokens) + [eos]:
        p = float(next_distribution(model, ctx)[tok])
        if p <= 0:
            raise ValueError("zero-probability token in test set")
        nll -= math.log(p)
        count += 1
        ctx.append(tok)
    return nll, count


def perplexity(model: LmInterface, test: Sequence[Sequence[int]]) -> float:
    """exp(total NLL / total token count); EOS is scored per sequence."""
    if not test:
        raise ValueError("empty test set")
    total_nll = 0.0
    total_count = 0
    for seq in test:
        nll, count = sequence_nll(model, seq)
        total_nll += nll
        total_count += count
    return math.exp(total_nll / total_count)


def fit_line(x: Sequence[float], y: Sequence[float]) -> RegressionFit:
    """Ordinary least squares with coefficient of determination."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need at least 2 paired points")
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    sxx = sum((xi - mean_x) ** 2 for xi in x)
    if sxx == 0:
        raise ValueError("constant x")
    sxy = sum((xi - mean_x) * (yi - mean_y) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_tot = sum((yi - mean_y) ** 2 for yi in y)
    if ss_tot == 0:
        raise ValueError("degenerate variance")
    ss_res = sum((yi - (slope * xi + intercept)) ** 2 for xi, yi in zip(x, y))
    return RegressionFit(slope=slope, intercept=intercept, r_squared=1.0 - ss_res / ss_tot)


def read_label_records(
    lines: Sequence[str],
) -> Dict[Tuple[str, int], Dict[str, Tuple[bool, bool]]]:
    """Parse the label ingest format: one record per line,
    conversation id \\t turn index \\t worker id \\t sensible \\t specific.

    Later records for the same (conversation, turn, worker) overwrite
    earlier ones.
    """
    out: Dict[Tuple[str, int], Dict[str, Tuple[bool, bool]]] = {}
    for ln in lines:
        if not ln.strip():
            continue
        parts = ln.rstrip("\n").split("\t")
        if len(parts) != 5:
            raise ValueError("label line must have 5 tab-separated fields")
        conv, turn, worker, sens, spec = parts
        key = (conv, int(turn))
        out.setdefault(key, {})[worker] = (sens == "1", spec == "1")
    return out


def labels_to_turns(
    records: Dict[Tuple[str, int], Dict[str, Tuple[bool, bool]]]
) -> List[TurnLabels]:
    """Collapse ingested records into per-turn worker label lists, in
    (conversation, turn) order with workers sorted by id."""
    turns = []
    for key in sorted(records):
        workers = sorted(records[key])
        turns.append(
            TurnLabels(
                sensible=tuple(records[key][w][0] for w in workers),
                specific=tuple(records[key][w][1] for w in workers),
            )
        )
    return turns
