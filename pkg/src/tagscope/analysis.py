"""Cross-system analyses: gate statistics, per-token oracle combination,
masked inference, and error-overlap sampling between two systems.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Corpus, OUTSIDE, Sentence
from .evalkit import micro_prf, token_accuracy
from .nn import RngState
from .records import Key, PredictionRecord, group_by_key


class AnalysisError(Exception):
    pass


class MissingGates(AnalysisError):
    pass


class KeyMismatch(AnalysisError):
    pass


class GoldDisagreement(AnalysisError):
    pass


class PositionOutOfRange(AnalysisError):
    pass


# ---------------------------------------------------------------------------
# Gate statistics (entity/O x correct/incorrect cell means)
# ---------------------------------------------------------------------------

GATE_CELLS = ("entity correct", "entity incorrect", "O correct", "O incorrect")


@dataclass
class GateCell:
    count: int = 0
    sum_g_c: float = 0.0
    sum_g_w: float = 0.0

    @property
    def mean_g_c(self) -> float | None:
        return self.sum_g_c / self.count if self.count else None

    @property
    def mean_g_w(self) -> float | None:
        return self.sum_g_w / self.count if self.count else None


@dataclass
class GateStatsReport:
    cells: dict[str, GateCell]
    total: int

    def to_json(self) -> dict:
        return {"total": self.total,
                "cells": {name: {"count": cell.count, "mean_g_c": cell.mean_g_c,
                                 "mean_g_w": cell.mean_g_w}
                          for name, cell in self.cells.items()}}

    def to_text(self) -> str:
        lines = [f"{'':<16s}{'Context':>9s}{'Word':>9s}{'n':>8s}"]
        for name in GATE_CELLS:
            cell = self.cells[name]
            if cell.count == 0:
                lines.append(f"{name:<16s}{'-':>9s}{'-':>9s}{0:>8d}  (empty cell)")
            else:
                lines.append(f"{name:<16s}{cell.mean_g_c:>9.3f}{cell.mean_g_w:>9.3f}"
                             f"{cell.count:>8d}")
        return "\n".join(lines)


def gate_stats(records: Sequence[PredictionRecord]) -> GateStatsReport:
    """Mean gate values grouped by (entity vs O) x (correct vs incorrect)."""
    cells = {name: GateCell() for name in GATE_CELLS}
    for rec in records:
        if not rec.has_gates:
            raise MissingGates(f"record {rec.key} has no gate values "
                               f"(system {rec.system})")
        kind = "entity" if rec.gold != OUTSIDE else "O"
        outcome = "correct" if rec.correct else "incorrect"
        cell = cells[f"{kind} {outcome}"]
        cell.count += 1
        cell.sum_g_c += rec.g_c
        cell.sum_g_w += rec.g_w
    return GateStatsReport(cells, total=len(records))


# ---------------------------------------------------------------------------
# Oracle combination
# ---------------------------------------------------------------------------

@dataclass
class OracleReport:
    systems: list[str]
    default_system: str
    component_f1: list[float]
    component_accuracy: list[float]
    oracle_f1: float
    oracle_accuracy: float
    combined: list[PredictionRecord]
    provenance: dict[Key, str]  # token -> system that supplied its tag

    def to_json(self) -> dict:
        return {"systems": self.systems, "default_system": self.default_system,
                "component_f1": self.component_f1,
                "component_accuracy": self.component_accuracy,
                "oracle_f1": self.oracle_f1, "oracle_accuracy": self.oracle_accuracy}

    def to_text(self) -> str:
        lines = [f"{'system':<28s}{'F1':>8s}{'acc':>8s}"]
        for name, f1, acc in zip(self.systems, self.component_f1, self.component_accuracy):
            mark = " (default)" if name == self.default_system else ""
            lines.append(f"{name + mark:<28s}{f1:>8.3f}{acc:>8.3f}")
        lines.append(f"{'oracle combination':<28s}{self.oracle_f1:>8.3f}"
                     f"{self.oracle_accuracy:>8.3f}")
        lo = min(self.component_f1)
        hi = max(self.component_f1)
        lines.append(f"min {lo:.3f}  max {hi:.3f}  comb {self.oracle_f1:.3f}")
        return "\n".join(lines)


def _align(record_sets: Sequence[Sequence[PredictionRecord]]
           ) -> tuple[list[Key], list[dict[Key, PredictionRecord]]]:
    if not record_sets:
        raise AnalysisError("need at least one record set")
    indexed = [group_by_key(rs) for rs in record_sets]
    base = set(indexed[0])
    for i, idx in enumerate(indexed[1:], start=1):
        if set(idx) != base:
            only_a = sorted(base - set(idx))[:3]
            only_b = sorted(set(idx) - base)[:3]
            raise KeyMismatch(f"set 0 and set {i} cover different tokens "
                              f"(e.g. {only_a} vs {only_b})")
    keys = sorted(base)
    for key in keys:
        golds = {idx[key].gold for idx in indexed}
        if len(golds) > 1:
            raise GoldDisagreement(f"token {key}: gold tags disagree: {sorted(golds)}")
    return keys, indexed


def oracle_combine(record_sets: Sequence[Sequence[PredictionRecord]],
                   default_index: int = 0) -> OracleReport:
    """Per-token upper-bound ensemble: output gold whenever any component is
    correct, else the default system's prediction."""
    keys, indexed = _align(record_sets)
    if not (0 <= default_index < len(record_sets)):
        raise AnalysisError(f"default index {default_index} out of range")
    systems = [rs[0].system if rs else f"set{n}" for n, rs in enumerate(record_sets)]
    oracle_name = "oracle(" + "+".join(systems) + ")"
    combined: list[PredictionRecord] = []
    provenance: dict[Key, str] = {}
    for key in keys:
        recs = [idx[key] for idx in indexed]
        winner = next((r for r in recs if r.correct), None)
        chosen = winner if winner is not None else recs[default_index]
        provenance[key] = chosen.system
        combined.append(PredictionRecord(
            dataset=key[0], sentence_id=key[1], token_index=key[2],
            surface=chosen.surface, gold=chosen.gold, pred=chosen.pred,
            system=oracle_name))
    return OracleReport(
        systems=systems,
        default_system=systems[default_index],
        component_f1=[micro_prf(rs).f1 for rs in record_sets],
        component_accuracy=[token_accuracy(list(rs)) for rs in record_sets],
        oracle_f1=micro_prf(combined).f1,
        oracle_accuracy=token_accuracy(combined),
        combined=combined,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Masked inference
# ---------------------------------------------------------------------------

def masked_predict(model, sentence: Sentence, position: int) -> str:
    """Predict the tag at `position` with that token's embedding replaced by
    the frozen average (mask) vector.  Inference only; no retraining."""
    if not (0 <= position < len(sentence)):
        raise PositionOutOfRange(f"position {position} not in [0, {len(sentence)})")
    tags, _ = model.predict_tags(sentence, mask_position=position)
    return tags[position]


def masked_predict_records(model, corpus: Corpus, dataset: str | None = None,
                           system: str | None = None) -> list[PredictionRecord]:
    """Context-only evaluation of any embedding-based tagger: mask one token
    at a time and keep the prediction at the masked position."""
    dataset = dataset if dataset is not None else corpus.name
    system = system if system is not None else f"{model.arch}+masked"
    out = []
    for sid, sent in enumerate(corpus):
        for pos in range(len(sent)):
            pred = masked_predict(model, sent, pos)
            out.append(PredictionRecord(dataset, sid, pos,
                                        sent.tokens[pos].surface,
                                        sent.gold[pos], pred, system))
    return out


# ---------------------------------------------------------------------------
# Error overlap (Sample-C / Sample-I)
# ---------------------------------------------------------------------------

@dataclass
class OverlapSample:
    size: int
    requested: int
    other_correct: int
    insufficient: bool

    @property
    def other_accuracy(self) -> float | None:
        return self.other_correct / self.size if self.size else None


@dataclass
class OverlapReport:
    system_a: str
    system_b: str
    sample_correct: OverlapSample    # drawn where A was correct
    sample_incorrect: OverlapSample  # drawn where A was incorrect

    def to_json(self) -> dict:
        def cell(s: OverlapSample) -> dict:
            return {"size": s.size, "requested": s.requested,
                    "other_correct": s.other_correct,
                    "other_accuracy": s.other_accuracy,
                    "insufficient": s.insufficient}
        return {"system_a": self.system_a, "system_b": self.system_b,
                "sample_correct": cell(self.sample_correct),
                "sample_incorrect": cell(self.sample_incorrect)}

    def to_text(self) -> str:
        def line(name: str, s: OverlapSample) -> str:
            acc = "-" if s.other_accuracy is None else f"{100 * s.other_accuracy:.2f}%"
            note = "  (population smaller than requested)" if s.insufficient else ""
            return (f"{name}: {self.system_b} correct on {acc} "
                    f"of {s.size} sampled tokens{note}")
        return "\n".join([line("Sample-C (A correct)", self.sample_correct),
                          line("Sample-I (A incorrect)", self.sample_incorrect)])


def error_overlap(set_a: Sequence[PredictionRecord],
                  set_b: Sequence[PredictionRecord],
                  sample_size: int, rng: RngState) -> OverlapReport:
    """Sample tokens where system A was correct / incorrect and report how
    often system B is correct on each sample."""
    keys, (idx_a, idx_b) = _align([set_a, set_b])
    pool_c = [k for k in keys if idx_a[k].correct]
    pool_i = [k for k in keys if not idx_a[k].correct]

    def draw(pool: list[Key]) -> OverlapSample:
        insufficient = len(pool) < sample_size
        if insufficient:
            chosen = list(pool)
        else:
            order = rng.permutation(len(pool))
            chosen = [pool[i] for i in order[:sample_size]]
        hits = sum(idx_b[k].correct for k in chosen)
        return OverlapSample(len(chosen), sample_size, hits, insufficient)

    return OverlapReport(
        system_a=set_a[0].system if set_a else "A",
        system_b=set_b[0].system if set_b else "B",
        sample_correct=draw(pool_c),
        sample_incorrect=draw(pool_i),
    )
