"""Per-token prediction records and their JSONL interchange format.

One JSON object per line with fields: dataset, sentence_id, token_index,
surface, gold, pred, system, and (gated model only) g_w, g_c.  Unknown
fields are ignored on import; export then import reproduces a record set
exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, Sentence, Token

Key = tuple[str, int, int]  # (dataset, sentence_id, token_index)

_REQUIRED = ("dataset", "sentence_id", "token_index", "surface", "gold", "pred", "system")


class RecordError(Exception):
    pass


class ParseError(RecordError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DuplicateKey(RecordError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    dataset: str
    sentence_id: int
    token_index: int
    surface: str
    gold: str
    pred: str
    system: str
    g_w: float | None = None
    g_c: float | None = None

    def __post_init__(self):
        if (self.g_w is None) != (self.g_c is None):
            raise ValueError("g_w and g_c must be present together")
        if self.g_w is not None and not (0.0 < self.g_w < 1.0 and 0.0 < self.g_c < 1.0):
            raise ValueError(f"gates must lie in (0,1): g_w={self.g_w}, g_c={self.g_c}")

    @property
    def key(self) -> Key:
        return (self.dataset, self.sentence_id, self.token_index)

    @property
    def correct(self) -> bool:
        return self.pred == self.gold

    @property
    def has_gates(self) -> bool:
        return self.g_w is not None

    def to_json(self) -> dict:
        doc = {"dataset": self.dataset, "sentence_id": self.sentence_id,
               "token_index": self.token_index, "surface": self.surface,
               "gold": self.gold, "pred": self.pred}
        if self.has_gates:
            doc["g_w"] = self.g_w
            doc["g_c"] = self.g_c
        doc["system"] = self.system
        return doc


def export_records(records: Iterable[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")


def import_records(path: str | Path) -> list[PredictionRecord]:
    """Load one record set; rejects malformed lines and duplicated tokens."""
    records: list[PredictionRecord] = []
    seen: set[tuple[str, Key]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as err:
                raise ParseError(lineno, f"invalid JSON: {err}") from None
            missing = [f for f in _REQUIRED if f not in doc]
            if missing:
                raise ParseError(lineno, f"missing fields: {', '.join(missing)}")
            try:
                rec = PredictionRecord(
                    dataset=str(doc["dataset"]),
                    sentence_id=int(doc["sentence_id"]),
                    token_index=int(doc["token_index"]),
                    surface=str(doc["surface"]),
                    gold=str(doc["gold"]),
                    pred=str(doc["pred"]),
                    system=str(doc["system"]),
                    g_w=None if doc.get("g_w") is None else float(doc["g_w"]),
                    g_c=None if doc.get("g_c") is None else float(doc["g_c"]),
                )
            except (TypeError, ValueError) as err:
                raise ParseError(lineno, str(err)) from None
            dup = (rec.system, rec.key)
            if dup in seen:
                raise DuplicateKey(f"line {lineno}: duplicate token {rec.key} "
                                   f"for system {rec.system}")
            seen.add(dup)
            records.append(rec)
    return records


def predict_records(model, corpus: Corpus, dataset: str | None = None,
                    system: str | None = None) -> list[PredictionRecord]:
    """Run a trained model over a corpus and collect per-token records."""
    dataset = dataset if dataset is not None else corpus.name
    system = system if system is not None else model.arch
    out: list[PredictionRecord] = []
    for sid, sent in enumerate(corpus):
        tags, gates = model.predict_tags(sent)
        for tok, gold, pred in zip(sent.tokens, sent.gold, tags):
            g_w = g_c = None
            if gates is not None:
                g_w = float(gates[0][tok.index])
                g_c = float(gates[1][tok.index])
            out.append(PredictionRecord(dataset, sid, tok.index, tok.surface,
                                        gold, pred, system, g_w=g_w, g_c=g_c))
    return out


def sentences_from_records(records: Sequence[PredictionRecord]) -> list[Sentence]:
    """Reassemble gold-tagged sentences from records (for pattern detectors)."""
    groups: dict[tuple[str, int], list[PredictionRecord]] = {}
    for rec in records:
        groups.setdefault((rec.dataset, rec.sentence_id), []).append(rec)
    sentences = []
    for key in sorted(groups):
        recs = sorted(groups[key], key=lambda r: r.token_index)
        indices = [r.token_index for r in recs]
        if indices != list(range(len(recs))):
            raise RecordError(f"sentence {key}: token indices not contiguous: {indices}")
        sentences.append(Sentence(
            tuple(Token(r.surface, r.token_index) for r in recs),
            tuple(r.gold for r in recs)))
    return sentences


def group_by_key(records: Sequence[PredictionRecord]) -> dict[Key, PredictionRecord]:
    """Index one system's record set by token key; duplicates are an error."""
    index: dict[Key, PredictionRecord] = {}
    for rec in records:
        if rec.key in index:
            raise DuplicateKey(f"duplicate token {rec.key}")
        index[rec.key] = rec
    return index
