"""Token-level evaluation: typed micro-P/R/F1, untyped recognition scores,
per-class breakdowns, confusion matrices, and corpus pattern detectors
(honorifics before person names, sports-score sentence shapes).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus, DEFAULT_LABELS, OUTSIDE
from .records import PredictionRecord, sentences_from_records

RECOGNIZED = "ENT"  # collapsed entity label for untyped recognition scoring


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass
class ClassScores:
    label: str
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[2]


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_class: dict[str, ClassScores]
    token_count: int
    include_o: bool = False
    collapsed: bool = False
    empty: bool = False

    def to_json(self) -> dict:
        return {
            "micro": {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                      "tp": self.tp, "fp": self.fp, "fn": self.fn},
            "per_class": {lab: {"precision": c.precision, "recall": c.recall,
                                "f1": c.f1, "tp": c.tp, "fp": c.fp, "fn": c.fn}
                          for lab, c in self.per_class.items()},
            "token_count": self.token_count,
            "include_o": self.include_o,
            "collapsed": self.collapsed,
            "empty": self.empty,
        }

    def to_text(self) -> str:
        head = "untyped recognition" if self.collapsed else "typed micro"
        lines = [f"{'class':<12s} {'P':>7s} {'R':>7s} {'F1':>7s}"]
        for lab, c in self.per_class.items():
            lines.append(f"{lab:<12s} {c.precision:7.3f} {c.recall:7.3f} {c.f1:7.3f}")
        lines.append(f"{head:<12s} {self.precision:7.3f} {self.recall:7.3f} {self.f1:7.3f}")
        if self.empty:
            lines.append("(no records: all counts zero)")
        return "\n".join(lines)


def _count(pairs: Iterable[tuple[str, str]], include_o: bool) -> EvalReport:
    per_class: dict[str, ClassScores] = {}
    tp = fp = fn = 0
    total = 0
    for gold, pred in pairs:
        total += 1
        for lab in (gold, pred):
            if lab not in per_class and (include_o or lab != OUTSIDE):
                per_class[lab] = ClassScores(lab)
        if pred == gold:
            if include_o or gold != OUTSIDE:
                tp += 1
                per_class[gold].tp += 1
            continue
        if include_o or pred != OUTSIDE:
            fp += 1
            per_class[pred].fp += 1
        if include_o or gold != OUTSIDE:
            fn += 1
            per_class[gold].fn += 1
    ordered = {lab: per_class[lab] for lab in _label_order(per_class)}
    p, r, f1 = _prf(tp, fp, fn)
    return EvalReport(p, r, f1, tp, fp, fn, ordered, total,
                      include_o=include_o, empty=(total == 0))


def _label_order(per_class: dict[str, ClassScores]) -> list[str]:
    known = [lab for lab in DEFAULT_LABELS if lab in per_class]
    extra = sorted(lab for lab in per_class if lab not in DEFAULT_LABELS)
    return [lab for lab in known if lab != OUTSIDE] + extra + \
           ([OUTSIDE] if OUTSIDE in per_class else [])


def micro_prf(records: Sequence[PredictionRecord], include_o: bool = False) -> EvalReport:
    """Token-level micro scores over entity classes.

    TP: pred == gold != O.  FP: pred != O and pred != gold.  FN: gold != O
    and pred != gold.  With include_o=True, O participates like any class.
    """
    return _count(((r.gold, r.pred) for r in records), include_o)


def recognition_prf(records: Sequence[PredictionRecord]) -> EvalReport:
    """Untyped scores: every entity class collapses to one label first, so a
    word counts as recognized even if the predicted type is wrong."""
    collapse = lambda t: OUTSIDE if t == OUTSIDE else RECOGNIZED
    report = _count(((collapse(r.gold), collapse(r.pred)) for r in records), False)
    report.collapsed = True
    return report


def token_accuracy(records: Sequence[PredictionRecord]) -> float:
    if not records:
        return 0.0
    return sum(r.pred == r.gold for r in records) / len(records)


@dataclass
class ConfusionMatrix:
    labels: tuple[str, ...]
    counts: list[list[int]]  # rows = gold, columns = predicted

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def cell(self, gold: str, pred: str) -> int:
        return self.counts[self.labels.index(gold)][self.labels.index(pred)]

    def to_text(self) -> str:
        width = max(7, max(len(lab) for lab in self.labels) + 1)
        header = " " * width + "".join(f"{lab:>{width}s}" for lab in self.labels)
        lines = [header]
        for lab, row in zip(self.labels, self.counts):
            lines.append(f"{lab:<{width}s}" + "".join(f"{c:>{width}d}" for c in row))
        return "\n".join(lines)


def confusion(records: Sequence[PredictionRecord],
              labels: Sequence[str] | None = None) -> ConfusionMatrix:
    """Gold-by-predicted token counts over the label set including O."""
    if labels is None:
        seen = {r.gold for r in records} | {r.pred for r in records} | {OUTSIDE}
        known = [lab for lab in DEFAULT_LABELS if lab in seen]
        extra = sorted(lab for lab in seen if lab not in DEFAULT_LABELS)
        labels = [lab for lab in known if lab != OUTSIDE] + extra + [OUTSIDE]
    labels = tuple(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for r in records:
        counts[index[r.gold]][index[r.pred]] += 1
    return ConfusionMatrix(labels, counts)


# ---------------------------------------------------------------------------
# Context-pattern detectors
# ---------------------------------------------------------------------------

# Title words that precede person names; dotted and undotted forms listed
# separately on purpose (matching is exact-surface).
HONORIFICS = frozenset((
    "Dr", "Mr", "Ms", "Mrs", "Mstr", "Miss", "Dr.", "Mr.", "Ms.", "Mrs.",
    "Mx.", "Mstr.", "Mister", "Professor", "Doctor", "President", "Senator",
    "Judge", "Governor", "Officer", "General", "Nurse", "Captain", "Coach",
    "Reverend", "Rabbi", "Ma'am", "Sir", "Father", "Maestro", "Madam",
    "Colonel", "Gentleman", "Sire", "Mistress", "Lord", "Lady", "Esq",
    "Excellency", "Chancellor", "Warden", "Principal", "Provost",
    "Headmaster", "Headmistress", "Director", "Regent", "Dean", "Chairman",
    "Chairwoman", "Chairperson", "Pastor",
))

# Sentence shapes of reported game scores ("France 0 Italy 1", standings
# rows, "TEAM AT TEAM" fixtures); searched unanchored over the
# space-joined sentence.  Keep these byte-exact: the engine must support
# lookahead, and the transcription is guarded by tests.
SPORTS_SCORE_REGEXES = (
    r"([0-9]+. )?([A-Za-z]+ ){1,3}([0-9]+ ){0,6}(([0-9]+)(?!\/))( 1\/2)?( -)?",
    r"([A-Za-z]+ ){1,3}([0-9]+ ){1,3}([A-Za-z]+ ){1,3}([0-9]+ ){0,2}[0-9]",
    r"([A-Z]+ ){1,3}AT ([A-Z]+ ){1,2}[A-Z]+",
)

_SPORTS_PATTERNS = tuple(re.compile(p) for p in SPORTS_SCORE_REGEXES)


def is_sports_score_sentence(text: str) -> bool:
    """Unanchored search of the score regexes over a space-joined sentence."""
    return any(p.search(text) for p in _SPORTS_PATTERNS)


@dataclass
class PatternStat:
    fraction: float
    matched: int
    total: int
    undefined: bool  # zero tokens of the target class

    def __str__(self) -> str:
        if self.undefined:
            return "undefined (0 qualifying tokens)"
        return f"{100 * self.fraction:.2f}% ({self.matched}/{self.total})"


def _as_sentences(data) -> Iterable:
    if isinstance(data, Corpus):
        return data.sentences
    return sentences_from_records(data)


def honorific_stat(data) -> PatternStat:
    """Fraction of gold-PER tokens whose immediately preceding token is an
    honorific (exact surface match).  Accepts a corpus or prediction records."""
    matched = total = 0
    for sent in _as_sentences(data):
        for i, tag in enumerate(sent.gold):
            if tag != "PER":
                continue
            total += 1
            if i > 0 and sent.tokens[i - 1].surface in HONORIFICS:
                matched += 1
    if total == 0:
        return PatternStat(0.0, 0, 0, undefined=True)
    return PatternStat(matched / total, matched, total, undefined=False)


def sports_score_stat(data) -> PatternStat:
    """Fraction of gold-ORG tokens whose sentence matches a score regex."""
    matched = total = 0
    for sent in _as_sentences(data):
        orgs = sum(tag == "ORG" for tag in sent.gold)
        if orgs == 0:
            continue
        total += orgs
        if is_sports_score_sentence(sent.text):
            matched += orgs
    if total == 0:
        return PatternStat(0.0, 0, 0, undefined=True)
    return PatternStat(matched / total, matched, total, undefined=False)
