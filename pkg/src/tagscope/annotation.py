"""Masked-context human study: batch construction with quality-control items,
answer filtering, majority labeling, and error-class reporting.

A batch holds exactly ten items: eight normal ones, one hidden repeat of a
normal item in the same batch, and one instruction-check item with a known
expected answer.  Annotators answer every item with one or more type options;
an annotator's batch is dropped when the repeated pair gets different answer
sets or the instruction check misses the expected option.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Sentence
from .nn import RngState

BLANK = "___"

ROLE_NORMAL = "normal"
ROLE_REPEAT = "repeat"
ROLE_CHECK = "instruction_check"

# No-majority outcome marker (exact top-count ties).
NO_MAJORITY = None


class AnnotationError(Exception):
    pass


class InsufficientItems(AnnotationError):
    pass


class TargetLeakage(AnnotationError):
    """The masked surface would still be visible in the rendered text."""


class NoAnswers(AnnotationError):
    pass


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    text: str                     # masked sentence; the target is rendered as ___
    options: tuple[str, ...]
    gold: str                     # hidden from annotators
    word: str | None = None       # hidden masked surface
    role: str = ROLE_NORMAL
    partner_id: str | None = None     # repeat items: the duplicated item
    expected: str | None = None       # instruction checks: minimal required answer
    system_pred: str | None = None    # probed system's prediction, if any

    def public_view(self) -> dict:
        """The only shape ever served to annotators: no gold, role, or surface."""
        return {"item_id": self.item_id, "text": self.text,
                "options": list(self.options)}

    def same_content(self, other: "AnnotationItem") -> bool:
        return self.text == other.text and self.options == other.options


def render_masked(sentence: Sentence, position: int) -> str:
    surfaces = list(sentence.surfaces)
    surfaces[position] = BLANK
    return " ".join(surfaces)


def make_item(item_id: str, sentence: Sentence, position: int,
              options: Sequence[str], system_pred: str | None = None) -> AnnotationItem:
    """Build a normal item from a corpus sentence; refuses items whose target
    surface also occurs elsewhere in the sentence (it would leak)."""
    if not (0 <= position < len(sentence)):
        raise AnnotationError(f"position {position} out of range")
    word = sentence.tokens[position].surface
    others = [s for i, s in enumerate(sentence.surfaces) if i != position]
    if word in others:
        raise TargetLeakage(f"{word!r} occurs elsewhere in the sentence")
    return AnnotationItem(item_id=item_id, text=render_masked(sentence, position),
                          options=tuple(options), gold=sentence.gold[position],
                          word=word, system_pred=system_pred)


# Obvious constraining contexts with a single defensible answer; one is
# cloned into every batch as the instruction check.
INSTRUCTION_CHECKS: tuple[tuple[str, str], ...] = (
    ("My name is ___ .", "PER"),
    ("The flight to ___ leaves in two hours .", "LOC"),
    ("The CEO of ___ resigned .", "ORG"),
)


@dataclass(frozen=True)
class AnnotationBatch:
    batch_id: str
    items: tuple[AnnotationItem, ...]

    def __post_init__(self):
        if len(self.items) != 10:
            raise AnnotationError(f"batch {self.batch_id}: expected 10 items, "
                                  f"got {len(self.items)}")
        repeats = [it for it in self.items if it.role == ROLE_REPEAT]
        checks = [it for it in self.items if it.role == ROLE_CHECK]
        if len(repeats) != 1 or len(checks) != 1:
            raise AnnotationError(f"batch {self.batch_id}: need exactly one repeat "
                                  f"and one instruction check")
        partner = self.item(repeats[0].partner_id)
        if not repeats[0].same_content(partner):
            raise AnnotationError(f"batch {self.batch_id}: repeat differs from partner")

    def item(self, item_id: str) -> AnnotationItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise KeyError(item_id)

    @property
    def repeat_pair(self) -> tuple[AnnotationItem, AnnotationItem]:
        rep = next(it for it in self.items if it.role == ROLE_REPEAT)
        return rep, self.item(rep.partner_id)

    @property
    def check_item(self) -> AnnotationItem:
        return next(it for it in self.items if it.role == ROLE_CHECK)

    @property
    def normal_items(self) -> tuple[AnnotationItem, ...]:
        return tuple(it for it in self.items if it.role == ROLE_NORMAL)

    def public_view(self) -> dict:
        return {"batch_id": self.batch_id,
                "items": [it.public_view() for it in self.items]}


def build_batches(items: Sequence[AnnotationItem], rng: RngState,
                  options: Sequence[str] | None = None) -> list[AnnotationBatch]:
    """Deterministically pack normal items into batches of 8 + repeat + check.

    Leftover items (fewer than 8 at the tail) are dropped.  Raises
    InsufficientItems when not even one batch can be formed.
    """
    normals = [it for it in items if it.role == ROLE_NORMAL]
    if len(normals) < 8:
        raise InsufficientItems(f"need at least 8 normal items, got {len(normals)}")
    if len({it.item_id for it in normals}) != len(normals):
        raise AnnotationError("duplicate item ids")
    order = rng.permutation(len(normals))
    shuffled = [normals[i] for i in order]
    batches = []
    for bi in range(len(shuffled) // 8):
        batch_id = f"batch-{bi:03d}"
        chunk = shuffled[bi * 8:(bi + 1) * 8]
        partner = chunk[rng.integers(0, len(chunk))]
        repeat = AnnotationItem(item_id=f"{batch_id}-repeat", text=partner.text,
                                options=partner.options, gold=partner.gold,
                                word=partner.word, role=ROLE_REPEAT,
                                partner_id=partner.item_id,
                                system_pred=partner.system_pred)
        text, expected = INSTRUCTION_CHECKS[rng.integers(0, len(INSTRUCTION_CHECKS))]
        check_options = tuple(options) if options is not None else chunk[0].options
        check = AnnotationItem(item_id=f"{batch_id}-check", text=text,
                               options=check_options, gold=expected,
                               role=ROLE_CHECK, expected=expected)
        ten = chunk + [repeat, check]
        positions = rng.permutation(10)
        batches.append(AnnotationBatch(batch_id, tuple(ten[i] for i in positions)))
    return batches


@dataclass(frozen=True)
class AnnotatorAnswer:
    annotator_id: str
    item_id: str
    selected: tuple[str, ...]
    timestamp: str  # ISO-8601

    def __post_init__(self):
        if not self.selected:
            raise AnnotationError("answer must select at least one option")

    def to_json(self) -> dict:
        return {"annotator_id": self.annotator_id, "item_id": self.item_id,
                "selected": list(self.selected), "timestamp": self.timestamp}


def write_answer_log(answers: Iterable[AnnotatorAnswer], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ans in answers:
            fh.write(json.dumps(ans.to_json(), ensure_ascii=False) + "\n")


def read_answer_log(path: str | Path) -> list[AnnotatorAnswer]:
    answers = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                answers.append(AnnotatorAnswer(doc["annotator_id"], doc["item_id"],
                                               tuple(doc["selected"]), doc["timestamp"]))
            except (json.JSONDecodeError, KeyError, TypeError) as err:
                raise AnnotationError(f"{path}: line {lineno}: {err}") from None
    return answers


# ---------------------------------------------------------------------------
# Quality control and aggregation
# ---------------------------------------------------------------------------

@dataclass
class QcResult:
    retained: set[tuple[str, str]]    # (annotator_id, batch_id)
    dropped: set[tuple[str, str]]
    incomplete: set[tuple[str, str]]

    def keeps(self, annotator_id: str, batch_id: str) -> bool:
        return (annotator_id, batch_id) in self.retained


def qc_filter(batches: Sequence[AnnotationBatch],
              answers: Sequence[AnnotatorAnswer],
              global_drop: bool = False) -> QcResult:
    """Per-batch annotator filtering: drop a batch when the repeat pair got
    different answer sets or the instruction check misses the expected option.
    With global_drop, one dropped batch discards the annotator everywhere."""
    by_annotator: dict[str, dict[str, set[str]]] = {}
    for ans in answers:
        by_annotator.setdefault(ans.annotator_id, {})[ans.item_id] = set(ans.selected)
    retained, dropped, incomplete = set(), set(), set()
    for annotator, given in by_annotator.items():
        for batch in batches:
            ids = {it.item_id for it in batch.items}
            answered = ids & given.keys()
            if not answered:
                continue
            pair = (annotator, batch.batch_id)
            if answered != ids:
                incomplete.add(pair)
                continue
            repeat, partner = batch.repeat_pair
            consistent = given[repeat.item_id] == given[partner.item_id]
            attentive = batch.check_item.expected in given[batch.check_item.item_id]
            (retained if consistent and attentive else dropped).add(pair)
    if global_drop:
        bad = {a for a, _ in dropped}
        moved = {pair for pair in retained if pair[0] in bad}
        retained -= moved
        dropped |= moved
    return QcResult(retained, dropped, incomplete)


def majority_label(selections: Sequence[Iterable[str]]) -> str | None:
    """The option with strictly the most votes; each selected option in a
    multi-select answer contributes one vote.  Ties return NO_MAJORITY."""
    if not selections:
        raise NoAnswers("no retained answers for item")
    votes: dict[str, int] = {}
    for sel in selections:
        for opt in set(sel):
            votes[opt] = votes.get(opt, 0) + 1
    top = max(votes.values())
    winners = [opt for opt, v in votes.items() if v == top]
    return winners[0] if len(winners) == 1 else NO_MAJORITY


def vote_counts(selections: Sequence[Iterable[str]],
                options: Sequence[str]) -> dict[str, int]:
    votes = {opt: 0 for opt in options}
    for sel in selections:
        for opt in set(sel):
            if opt in votes:
                votes[opt] += 1
    return votes


# ---------------------------------------------------------------------------
# Study report (error classes + per-item label breakdown)
# ---------------------------------------------------------------------------

CLASS_HUMAN_CORRECT = "class1_human_correct"
CLASS_MAJORITY_WRONG = "class2_majority_wrong"
CLASS_NO_MAJORITY = "class2_no_majority"


@dataclass
class ItemOutcome:
    item_id: str
    text: str
    word: str | None
    gold: str
    system_pred: str | None
    votes: dict[str, int]
    answer_count: int
    majority: str | None
    error_class: str | None  # None for items outside the error study

    def to_json(self) -> dict:
        return {"item_id": self.item_id, "text": self.text, "word": self.word,
                "gold": self.gold, "system_pred": self.system_pred,
                "votes": self.votes, "answer_count": self.answer_count,
                "majority": self.majority, "error_class": self.error_class}


@dataclass
class StudyReport:
    outcomes: list[ItemOutcome]
    class_counts: dict[str, int]
    unscored: int           # error items with zero retained answers
    control_items: int      # items the system got right
    control_majority_correct: int
    qc: QcResult

    @property
    def scored(self) -> int:
        return sum(self.class_counts.values())

    def fractions(self) -> dict[str, float]:
        if self.scored == 0:
            return {name: 0.0 for name in self.class_counts}
        return {name: count / self.scored for name, count in self.class_counts.items()}

    def to_json(self) -> dict:
        return {"class_counts": self.class_counts, "fractions": self.fractions(),
                "unscored": self.unscored,
                "control": {"items": self.control_items,
                            "majority_correct": self.control_majority_correct},
                "qc": {"retained": sorted(self.qc.retained),
                       "dropped": sorted(self.qc.dropped),
                       "incomplete": sorted(self.qc.incomplete)},
                "items": [o.to_json() for o in self.outcomes]}

    def to_text(self) -> str:
        lines = []
        frac = self.fractions()
        lines.append(f"system-error items scored: {self.scored} "
                     f"(+{self.unscored} without retained answers)")
        for name in (CLASS_HUMAN_CORRECT, CLASS_MAJORITY_WRONG, CLASS_NO_MAJORITY):
            lines.append(f"  {name:<24s} {self.class_counts[name]:4d}  "
                         f"{100 * frac[name]:6.1f}%")
        if self.control_items:
            lines.append(f"control (system correct): majority matches gold on "
                         f"{self.control_majority_correct}/{self.control_items}")
        lines.append("")
        if self.outcomes:
            opts = list(self.outcomes[0].votes)
            head = f"{'word':<14s}{'gold':<6s}{'majority':<10s}" + \
                   "".join(f"{o:>6s}" for o in opts)
            lines.append(head)
            for o in self.outcomes:
                maj = "-" if o.majority is None else o.majority
                lines.append(f"{(o.word or '?'):<14s}{o.gold:<6s}{maj:<10s}"
                             + "".join(f"{o.votes[x]:>6d}" for x in opts)
                             + f"  | {o.text}")
        return "\n".join(lines)


def error_class_report(batches: Sequence[AnnotationBatch],
                       answers: Sequence[AnnotatorAnswer],
                       qc: QcResult | None = None) -> StudyReport:
    """Classify system-error items by what the retained human majority did:
    majority equals gold, majority differs, or no majority."""
    if qc is None:
        qc = qc_filter(batches, answers)
    by_item: dict[str, list[tuple[str, str, tuple[str, ...]]]] = {}
    for ans in answers:
        by_item.setdefault(ans.item_id, []).append(
            (ans.annotator_id, ans.item_id, ans.selected))

    outcomes: list[ItemOutcome] = []
    counts = {CLASS_HUMAN_CORRECT: 0, CLASS_MAJORITY_WRONG: 0, CLASS_NO_MAJORITY: 0}
    unscored = 0
    control_items = control_hits = 0
    for batch in batches:
        for item in batch.normal_items:
            if item.system_pred is None:
                continue
            selections = [sel for annot, _, sel in by_item.get(item.item_id, [])
                          if qc.keeps(annot, batch.batch_id)]
            votes = vote_counts(selections, item.options)
            majority = majority_label(selections) if selections else NO_MAJORITY
            if item.system_pred == item.gold:
                control_items += 1
                if selections and majority == item.gold:
                    control_hits += 1
                continue
            if not selections:
                unscored += 1
                outcome_class = None
            elif majority == item.gold:
                outcome_class = CLASS_HUMAN_CORRECT
            elif majority is NO_MAJORITY:
                outcome_class = CLASS_NO_MAJORITY
            else:
                outcome_class = CLASS_MAJORITY_WRONG
            if outcome_class is not None:
                counts[outcome_class] += 1
            outcomes.append(ItemOutcome(item.item_id, item.text, item.word,
                                        item.gold, item.system_pred, votes,
                                        len(selections), majority, outcome_class))
    return StudyReport(outcomes, counts, unscored, control_items, control_hits, qc)


def write_batches(batches: Sequence[AnnotationBatch], path: str | Path) -> None:
    """Persist full batch composition (including hidden fields) so reports
    can be computed offline from the answer log."""
    doc = [{"batch_id": b.batch_id,
            "items": [{"item_id": it.item_id, "text": it.text,
                       "options": list(it.options), "gold": it.gold,
                       "word": it.word, "role": it.role,
                       "partner_id": it.partner_id, "expected": it.expected,
                       "system_pred": it.system_pred}
                      for it in b.items]}
           for b in batches]
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=1),
                          encoding="utf-8")


def read_batches(path: str | Path) -> list[AnnotationBatch]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    batches = []
    for bdoc in doc:
        items = tuple(AnnotationItem(
            item_id=it["item_id"], text=it["text"], options=tuple(it["options"]),
            gold=it["gold"], word=it.get("word"), role=it.get("role", ROLE_NORMAL),
            partner_id=it.get("partner_id"), expected=it.get("expected"),
            system_pred=it.get("system_pred")) for it in bdoc["items"])
        batches.append(AnnotationBatch(bdoc["batch_id"], items))
    return batches


# ---------------------------------------------------------------------------
# Item JSONL interchange (the annotate-serve input format)
# ---------------------------------------------------------------------------

def write_items(items: Iterable[AnnotationItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            doc = {"item_id": it.item_id, "text": it.text,
                   "options": list(it.options), "gold": it.gold}
            if it.word is not None:
                doc["word"] = it.word
            if it.system_pred is not None:
                doc["system_pred"] = it.system_pred
            fh.write(json.dumps(doc, ensure_ascii=False) + "\n")


def read_items(path: str | Path) -> list[AnnotationItem]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                items.append(AnnotationItem(
                    item_id=str(doc["item_id"]), text=str(doc["text"]),
                    options=tuple(doc["options"]), gold=str(doc["gold"]),
                    word=doc.get("word"), system_pred=doc.get("system_pred")))
            except (json.JSONDecodeError, KeyError, TypeError) as err:
                raise AnnotationError(f"{path}: line {lineno}: {err}") from None
    return items
