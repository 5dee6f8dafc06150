"""Shared builders: hand corpora, synthetic templated corpora, random tables."""
from __future__ import annotations

import numpy as np

from tagscope.corpus import Corpus, LabelSet, Sentence, Token
from tagscope.embeddings import EmbeddingTable, table_from_arrays
from tagscope.records import PredictionRecord

LABELS = LabelSet()


def mk_sentence(surfaces, gold=None) -> Sentence:
    if isinstance(surfaces, str):
        surfaces = surfaces.split()
    gold = tuple(gold) if gold is not None else tuple("O" for _ in surfaces)
    return Sentence(tuple(Token(s, i) for i, s in enumerate(surfaces)), gold)


def mk_corpus(rows, name="test", label_set=LABELS) -> Corpus:
    """rows: list of (surfaces, gold) pairs."""
    return Corpus(name, tuple(mk_sentence(s, g) for s, g in rows), label_set)


def mk_record(gold, pred, *, idx=0, sid=0, dataset="d", surface="w",
              system="sys", g_w=None, g_c=None) -> PredictionRecord:
    return PredictionRecord(dataset, sid, idx, surface, gold, pred, system,
                            g_w=g_w, g_c=g_c)


def mk_records(gold_pred_pairs, system="sys", dataset="d") -> list[PredictionRecord]:
    """One single-token sentence per pair, so keys never collide."""
    return [mk_record(g, p, sid=i, idx=0, dataset=dataset, surface=f"w{i}",
                      system=system)
            for i, (g, p) in enumerate(gold_pred_pairs)]


# ---------------------------------------------------------------------------
# Synthetic templated corpus: the entity type is fully determined by the
# surrounding words, never by the name itself.
# ---------------------------------------------------------------------------

TEMPLATES = {
    "PER": ("My", "name", "is", None, "."),
    "LOC": ("The", "flight", "to", None, "leaves", "in", "two", "hours", "."),
    "ORG": ("The", "CEO", "of", None, "resigned", "."),
}

TRAIN_NAMES = {
    "PER": ["Alice", "Bakari", "Carmen", "Dmitri", "Elena", "Farid", "Greta"],
    "LOC": ["Avalon", "Brindle", "Calder", "Dorwich", "Eastmere", "Farholt", "Glimmer"],
    "ORG": ["Acmetek", "Brightline", "Coreworks", "Duxfield", "Emberly", "Fabrico"],
}

TEST_NAMES = {
    "PER": ["Hiroko", "Imani", "Jonas"],
    "LOC": ["Harbrook", "Ivoria", "Juniper"],
    "ORG": ["Hexacorp", "Ironvale", "Jovix"],
}


def template_corpus(names: dict[str, list[str]], name="synthetic",
                    label_set=LABELS) -> Corpus:
    sentences = []
    for ent_type, pool in names.items():
        template = TEMPLATES[ent_type]
        for entity in pool:
            surfaces, gold = [], []
            for slot in template:
                if slot is None:
                    surfaces.append(entity)
                    gold.append(ent_type)
                else:
                    surfaces.append(slot)
                    gold.append("O")
            sentences.append(mk_sentence(surfaces, gold))
    return Corpus(name, tuple(sentences), label_set)


def synthetic_table(corpora, dim=12, seed=123, exclude=()) -> EmbeddingTable:
    """Random unit-scale vectors for every word in `corpora` except `exclude`
    (excluded words stay out-of-vocabulary and fall back to the average)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    words = sorted({tok.surface for corpus in corpora for sent in corpus
                    for tok in sent.tokens} - set(exclude))
    return table_from_arrays({w: rng.normal(0.0, 1.0, dim) for w in words})


def train_test_split():
    """Disjoint-name train/test corpora plus a table that has never seen the
    test names (they are OOV by construction)."""
    train = template_corpus(TRAIN_NAMES, name="synthetic-train")
    test = template_corpus(TEST_NAMES, name="synthetic-test")
    exclude = [n for pool in TEST_NAMES.values() for n in pool]
    table = synthetic_table([train, test], exclude=exclude)
    return train, test, table
