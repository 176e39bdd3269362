"""Joint goal accuracy with slot-type and per-domain breakdowns plus an error taxonomy.

A turn is correct only when its predicted state agrees with gold on every
(domain, slot) pair of the schema: same pairs present, every present value
matching. The categorical / non-categorical / per-domain numbers apply the
same rule with the pair universe restricted, so a turn that is correct
overall is correct under every restriction.
"""
from __future__ import annotations

import difflib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Dialogue, DialogueState, gold_state_at
from .schema import Schema, SlotDef
from .state import TurnPrediction

logger = logging.getLogger(__name__)


class EvalMismatchError(ValueError):
    """Predictions and gold turns do not line up."""


class MatchMode(str, Enum):
    EXACT = "exact"
    FUZZY = "fuzzy"


class ErrorCategory(str, Enum):
    MISSED_SLOT = "missed_slot"
    SPURIOUS_SLOT = "spurious_slot"
    WRONG_VALUE = "wrong_value"
    MIXED = "mixed"


@dataclass(frozen=True)
class EvalOptions:
    match_mode: MatchMode = MatchMode.EXACT
    fuzzy_threshold: float = 0.95
    # "turn" scores the global state once per user turn (the headline metric);
    # "frame" scores each (turn, domain) restriction as its own unit.
    aggregation: str = "turn"


def value_match(
    predicted: str,
    gold_alternatives: Sequence[str],
    slot: SlotDef,
    mode: MatchMode = MatchMode.EXACT,
    fuzzy_threshold: float = 0.95,
) -> bool:
    """Case-insensitive, whitespace-trimmed match against any gold alternative.

    FUZZY additionally accepts non-categorical values whose normalized edit
    similarity (difflib ratio) reaches the threshold; categorical slots are
    always matched exactly.
    """
    if not gold_alternatives:
        raise ValueError("gold_alternatives must be non-empty")
    pred = predicted.strip().casefold()
    golds = [g.strip().casefold() for g in gold_alternatives]
    if pred in golds:
        return True
    if mode is MatchMode.FUZZY and not slot.is_categorical:
        return any(
            difflib.SequenceMatcher(None, pred, g).ratio() >= fuzzy_threshold for g in golds
        )
    return False


@dataclass
class TurnScore:
    """Per-turn comparison detail; the building block for reports and run diffs."""

    dialogue_id: str
    turn_index: int
    correct: bool
    gold: dict[tuple[str, str], str]
    predicted: dict[tuple[str, str], str]
    missed: list[tuple[str, str]] = field(default_factory=list)
    spurious: list[tuple[str, str]] = field(default_factory=list)
    wrong_value: list[tuple[str, str]] = field(default_factory=list)
    domain_correct: dict[str, bool] = field(default_factory=dict)
    cat_correct: bool = True
    noncat_correct: bool = True

    @property
    def turn_id(self) -> tuple[str, int]:
        return (self.dialogue_id, self.turn_index)

    @property
    def category(self) -> ErrorCategory | None:
        if self.correct:
            return None
        if self.missed and not self.spurious and not self.wrong_value:
            return ErrorCategory.MISSED_SLOT
        if self.spurious and not self.missed and not self.wrong_value:
            return ErrorCategory.SPURIOUS_SLOT
        if self.wrong_value and not self.missed and not self.spurious:
            return ErrorCategory.WRONG_VALUE
        return ErrorCategory.MIXED


@dataclass
class EvalReport:
    jga: float
    cat_jga: float
    noncat_jga: float
    per_domain_jga: dict[str, float]
    turns_evaluated: int
    error_counts: dict[ErrorCategory, int]
    match_mode: MatchMode = MatchMode.EXACT
    frame_jga: float | None = None


@dataclass
class EvalRun:
    """A report plus the per-turn detail needed for run comparisons."""

    report: EvalReport
    turns: list[TurnScore]
    metadata: dict = field(default_factory=dict)


def score_turns(
    predictions: Sequence[TurnPrediction],
    gold_dialogues: Sequence[Dialogue],
    schema: Schema,
    options: EvalOptions = EvalOptions(),
) -> list[TurnScore]:
    """Score every gold user turn; exactly one prediction per turn is required."""
    by_turn: dict[tuple[str, int], TurnPrediction] = {}
    for pred in predictions:
        if pred.turn_id in by_turn:
            raise EvalMismatchError(f"duplicate prediction for turn {pred.turn_id}")
        by_turn[pred.turn_id] = pred

    gold_ids = [
        (d.dialogue_id, t) for d in gold_dialogues for t in range(1, d.num_user_turns + 1)
    ]
    missing = [t for t in gold_ids if t not in by_turn]
    extra = sorted(set(by_turn) - set(gold_ids))
    if missing or extra:
        raise EvalMismatchError(
            f"prediction/gold turn mismatch: {len(missing)} gold turns unpredicted "
            f"(first: {missing[:5]}), {len(extra)} predictions without gold (first: {extra[:5]})"
        )

    scores = []
    for dialogue in gold_dialogues:
        for t in range(1, dialogue.num_user_turns + 1):
            gold = gold_state_at(dialogue, t)
            pred = by_turn[(dialogue.dialogue_id, t)]
            scores.append(_score_one(dialogue.dialogue_id, t, pred.state, gold, schema, options))
    return scores


def _score_one(
    dialogue_id: str,
    turn_index: int,
    pred: DialogueState,
    gold: DialogueState,
    schema: Schema,
    options: EvalOptions,
) -> TurnScore:
    unknown = [k for k in pred.entries if not schema.has_pair(*k)]
    if unknown:
        logger.warning(
            "turn (%s, %d): prediction names %d pairs outside the schema, counting them as spurious",
            dialogue_id, turn_index, len(unknown),
        )

    score = TurnScore(
        dialogue_id=dialogue_id,
        turn_index=turn_index,
        correct=True,
        gold=dict(gold.entries),
        predicted=dict(pred.entries),
        spurious=list(unknown),
    )
    domain_ok: dict[str, bool] = {d.name: True for d in schema.domains}
    for domain, slot in schema.pairs():
        key = (domain.name, slot.name)
        gold_has, pred_has = key in gold.entries, key in pred.entries
        pair_ok = True
        if gold_has and not pred_has:
            score.missed.append(key)
            pair_ok = False
        elif pred_has and not gold_has:
            score.spurious.append(key)
            pair_ok = False
        elif gold_has and pred_has:
            pair_ok = value_match(
                pred.entries[key], gold.alts(*key), slot, options.match_mode, options.fuzzy_threshold
            )
            if not pair_ok:
                score.wrong_value.append(key)
        if not pair_ok:
            domain_ok[domain.name] = False
            if slot.is_categorical:
                score.cat_correct = False
            else:
                score.noncat_correct = False

    score.domain_correct = domain_ok
    score.correct = (
        not unknown and not score.missed and not score.spurious and not score.wrong_value
    )
    return score


def aggregate(scores: Sequence[TurnScore], schema: Schema, options: EvalOptions = EvalOptions()) -> EvalReport:
    n = len(scores)
    if n == 0:
        raise EvalMismatchError("no turns to evaluate")
    per_domain = {
        d.name: sum(1 for s in scores if s.domain_correct.get(d.name, True)) / n
        for d in schema.domains
    }
    counts = {cat: 0 for cat in ErrorCategory}
    for s in scores:
        if s.category is not None:
            counts[s.category] += 1
    frame_units = [ok for s in scores for ok in s.domain_correct.values()]
    return EvalReport(
        jga=sum(1 for s in scores if s.correct) / n,
        cat_jga=sum(1 for s in scores if s.cat_correct) / n,
        noncat_jga=sum(1 for s in scores if s.noncat_correct) / n,
        per_domain_jga=per_domain,
        turns_evaluated=n,
        error_counts=counts,
        match_mode=options.match_mode,
        frame_jga=(sum(frame_units) / len(frame_units)) if frame_units else None,
    )


def jga(
    predictions: Sequence[TurnPrediction],
    gold_dialogues: Sequence[Dialogue],
    schema: Schema,
    options: EvalOptions = EvalOptions(),
) -> EvalReport:
    return aggregate(score_turns(predictions, gold_dialogues, schema, options), schema, options)


def evaluate_run(
    predictions: Sequence[TurnPrediction],
    gold_dialogues: Sequence[Dialogue],
    schema: Schema,
    options: EvalOptions = EvalOptions(),
    metadata: Mapping | None = None,
) -> EvalRun:
    scores = score_turns(predictions, gold_dialogues, schema, options)
    return EvalRun(
        report=aggregate(scores, schema, options),
        turns=scores,
        metadata=dict(metadata or {}),
    )


@dataclass
class ErrorBucket:
    count: int
    fraction: float
    turn_ids: list[tuple[str, int]]


def categorize_errors(
    predictions: Sequence[TurnPrediction],
    gold_dialogues: Sequence[Dialogue],
    schema: Schema,
    options: EvalOptions = EvalOptions(),
) -> dict[ErrorCategory, ErrorBucket]:
    """Classify every erroneous turn into exactly one category.

    MISSED_SLOT: gold pairs absent from the prediction and nothing else wrong.
    SPURIOUS_SLOT: predicted pairs absent from gold and nothing else wrong.
    WRONG_VALUE: pair sets agree but at least one value differs.
    MIXED: any combination of the above.
    """
    scores = score_turns(predictions, gold_dialogues, schema, options)
    wrong = [s for s in scores if not s.correct]
    buckets = {}
    for cat in ErrorCategory:
        hits = [s.turn_id for s in wrong if s.category is cat]
        buckets[cat] = ErrorBucket(
            count=len(hits),
            fraction=len(hits) / len(wrong) if wrong else 0.0,
            turn_ids=hits,
        )
    return buckets


@dataclass
class TurnDiff:
    dialogue_id: str
    turn_index: int
    slot_diffs: list[dict]


@dataclass
class RunDiff:
    a_only_correct: list[TurnDiff]
    b_only_correct: list[TurnDiff]

    def summary(self) -> str:
        return (
            f"correct only in A: {len(self.a_only_correct)} turns; "
            f"correct only in B: {len(self.b_only_correct)} turns"
        )


def compare_runs(run_a: EvalRun, run_b: EvalRun) -> RunDiff:
    """Turns correct in one run but not the other, with per-pair value diffs."""
    a_by_id = {s.turn_id: s for s in run_a.turns}
    b_by_id = {s.turn_id: s for s in run_b.turns}
    if set(a_by_id) != set(b_by_id):
        raise EvalMismatchError("runs were evaluated on different turn sets")

    def diffs(sa: TurnScore, sb: TurnScore) -> TurnDiff:
        pairs = sorted(set(sa.gold) | set(sa.predicted) | set(sb.predicted))
        rows = []
        for pair in pairs:
            row = {
                "domain": pair[0],
                "slot": pair[1],
                "gold": sa.gold.get(pair),
                "a": sa.predicted.get(pair),
                "b": sb.predicted.get(pair),
            }
            if row["a"] != row["b"] or (row["gold"] is not None) != (row["a"] is not None):
                rows.append(row)
        return TurnDiff(dialogue_id=sa.dialogue_id, turn_index=sa.turn_index, slot_diffs=rows)

    a_only = [
        diffs(a_by_id[t], b_by_id[t])
        for t in sorted(a_by_id)
        if a_by_id[t].correct and not b_by_id[t].correct
    ]
    b_only = [
        diffs(a_by_id[t], b_by_id[t])
        for t in sorted(b_by_id)
        if b_by_id[t].correct and not a_by_id[t].correct
    ]
    return RunDiff(a_only_correct=a_only, b_only_correct=b_only)


def render_diff(diff: RunDiff, label_a: str = "A", label_b: str = "B") -> str:
    lines = [diff.summary()]
    for label, turn_diffs in ((label_a, diff.a_only_correct), (label_b, diff.b_only_correct)):
        if turn_diffs:
            lines.append(f"-- turns correct only in {label} --")
        for td in turn_diffs:
            lines.append(f"{td.dialogue_id} turn {td.turn_index}:")
            for row in td.slot_diffs:
                lines.append(
                    f"  ({row['domain']}, {row['slot']}) gold={row['gold']!r} "
                    f"{label_a}={row['a']!r} {label_b}={row['b']!r}"
                )
    return "\n".join(lines)


# -- report serialization ------------------------------------------------


def run_to_json(run: EvalRun) -> dict:
    rep = run.report
    return {
        "jga": rep.jga,
        "cat_jga": rep.cat_jga,
        "noncat_jga": rep.noncat_jga,
        "per_domain_jga": rep.per_domain_jga,
        "frame_jga": rep.frame_jga,
        "turns_evaluated": rep.turns_evaluated,
        "error_counts": {cat.value: n for cat, n in rep.error_counts.items()},
        "match_mode": rep.match_mode.value,
        "metadata": run.metadata,
        "turns": [
            {
                "dialogue_id": s.dialogue_id,
                "turn_index": s.turn_index,
                "correct": s.correct,
                "gold": [[d, sl, v] for (d, sl), v in sorted(s.gold.items())],
                "predicted": [[d, sl, v] for (d, sl), v in sorted(s.predicted.items())],
            }
            for s in run.turns
        ],
    }


def write_run(run: EvalRun, path: str | Path) -> None:
    Path(path).write_text(json.dumps(run_to_json(run), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def read_run(path: str | Path) -> EvalRun:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    turns = [
        TurnScore(
            dialogue_id=t["dialogue_id"],
            turn_index=t["turn_index"],
            correct=t["correct"],
            gold={(d, s): v for d, s, v in t["gold"]},
            predicted={(d, s): v for d, s, v in t["predicted"]},
        )
        for t in obj.get("turns", [])
    ]
    report = EvalReport(
        jga=obj["jga"],
        cat_jga=obj["cat_jga"],
        noncat_jga=obj["noncat_jga"],
        per_domain_jga=obj["per_domain_jga"],
        turns_evaluated=obj["turns_evaluated"],
        error_counts={ErrorCategory(k): v for k, v in obj["error_counts"].items()},
        match_mode=MatchMode(obj.get("match_mode", "exact")),
        frame_jga=obj.get("frame_jga"),
    )
    return EvalRun(report=report, turns=turns, metadata=obj.get("metadata", {}))


def summary_table(report: EvalReport) -> str:
    """Plain-text summary, one metric column per breakdown."""
    headers = ["JGA", "CAT", "NON-CAT"] + sorted(report.per_domain_jga)
    values = [report.jga, report.cat_jga, report.noncat_jga] + [
        report.per_domain_jga[d] for d in sorted(report.per_domain_jga)
    ]
    width = max(len(h) for h in headers) + 2
    lines = [
        "".join(h.rjust(width) for h in headers),
        "".join(f"{100 * v:.1f}".rjust(width) for v in values),
        f"turns evaluated: {report.turns_evaluated}   match mode: {report.match_mode.value}",
        "errors: "
        + ", ".join(f"{cat.value}={n}" for cat, n in report.error_counts.items() if n),
    ]
    return "\n".join(lines)
