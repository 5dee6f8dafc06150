"""Column-format corpus handling: parsing, IO tag normalization, overlap stats.

Corpora are immutable after construction. Sentences are independent units;
document boundaries ("-DOCSTART-" lines) are skipped at parse time.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

OUTSIDE = "O"
DEFAULT_LABELS = ("PER", "ORG", "LOC", "MISC", OUTSIDE)

DOCSTART = "-DOCSTART-"


class CorpusError(Exception):
    """Base class for corpus-format failures."""


class MalformedLine(CorpusError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UnknownType(CorpusError):
    """A tag's bare type is not a member of the corpus label set."""


@dataclass(frozen=True)
class LabelSet:
    """Ordered, immutable set of tag labels; O is always a member."""

    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        if OUTSIDE not in self.labels:
            raise ValueError("label set must contain O")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in label set")

    @classmethod
    def from_types(cls, types: Iterable[str]) -> "LabelSet":
        """Build a label set from entity type names, appending O if absent."""
        labels = tuple(types)
        if OUTSIDE not in labels:
            labels = labels + (OUTSIDE,)
        return cls(labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def entity_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.labels if lab != OUTSIDE)


@dataclass(frozen=True)
class Token:
    surface: str
    index: int

    def __post_init__(self):
        if not self.surface or any(ch.isspace() for ch in self.surface):
            raise ValueError(f"token surface must be non-empty and whitespace-free: {self.surface!r}")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    gold: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("sentence must contain at least one token")
        if len(self.gold) != len(self.tokens):
            raise ValueError("gold tags and tokens must have equal length")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(tok.surface for tok in self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.surfaces)


@dataclass(frozen=True)
class Corpus:
    """Parsed corpus.  label_set is None while tags are still raw (pre-IO)."""

    name: str
    sentences: tuple[Sentence, ...]
    label_set: LabelSet | None = None

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


def parse_conll(text: str, token_column: int = 0, tag_column: int = 1,
                name: str = "corpus") -> Corpus:
    """Parse whitespace-separated column text into a raw-tag corpus.

    Sentences are blank-line delimited; lines beginning with -DOCSTART- are
    skipped.  Tags are passed through raw; normalize with `normalize_io`.
    """
    sentences: list[Sentence] = []
    tokens: list[Token] = []
    tags: list[str] = []

    def flush():
        if tokens:
            sentences.append(Sentence(tuple(tokens), tuple(tags)))
            tokens.clear()
            tags.clear()

    width = max(token_column, tag_column) + 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        if line.startswith(DOCSTART):
            continue
        cols = line.split()
        if len(cols) < width:
            raise MalformedLine(lineno, f"expected at least {width} columns, got {len(cols)}")
        tokens.append(Token(cols[token_column], len(tokens)))
        tags.append(cols[tag_column])
    flush()
    return Corpus(name, tuple(sentences))


def to_io(raw_tag: str, label_set: LabelSet) -> str:
    """Map a raw tag to the IO scheme: strip any B-/I- prefix, keep the type."""
    bare = raw_tag
    if raw_tag.startswith(("B-", "I-")):
        bare = raw_tag[2:]
    if bare not in label_set:
        raise UnknownType(f"tag type {bare!r} not in label set {label_set.labels}")
    return bare


def normalize_io(corpus: Corpus, label_set: LabelSet | None = None) -> Corpus:
    """Return a corpus with all tags converted to the IO scheme."""
    label_set = label_set or LabelSet()
    sentences = tuple(
        Sentence(s.tokens, tuple(to_io(tag, label_set) for tag in s.gold))
        for s in corpus.sentences
    )
    return Corpus(corpus.name, sentences, label_set)


def to_conll(corpus: Corpus) -> str:
    """Serialize to two-column text (token, tag), single-space separated."""
    blocks = []
    for sent in corpus.sentences:
        blocks.append("\n".join(f"{tok.surface} {tag}" for tok, tag in zip(sent.tokens, sent.gold)))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def read_corpus(path: str | Path, label_set: LabelSet | None = None,
                token_column: int = 0, tag_column: int = 1) -> Corpus:
    """Parse a corpus file and normalize its tags to the IO scheme."""
    path = Path(path)
    raw = parse_conll(path.read_text(encoding="utf-8"), token_column, tag_column,
                      name=path.stem)
    return normalize_io(raw, label_set)


@dataclass(frozen=True)
class SeenStats:
    fraction: float
    seen: int
    entity_tokens: int
    undefined: bool  # no entity token in the test corpus

    def __str__(self) -> str:
        if self.undefined:
            return "seen-token rate: undefined (no entity tokens)"
        return f"seen-token rate: {self.fraction:.4f} ({self.seen}/{self.entity_tokens})"


def seen_token_stats(train: Corpus, test: Corpus, case_sensitive: bool = True) -> SeenStats:
    """Fraction of test entity tokens whose surface occurs anywhere in train.

    A surface counts as seen on exact match against any train token, entity
    or not.  With case_sensitive=False both sides are casefolded first.
    """
    fold = (lambda s: s) if case_sensitive else str.casefold
    train_vocab = {fold(tok.surface) for sent in train for tok in sent.tokens}
    seen = total = 0
    for sent in test:
        for tok, tag in zip(sent.tokens, sent.gold):
            if tag == OUTSIDE:
                continue
            total += 1
            if fold(tok.surface) in train_vocab:
                seen += 1
    if total == 0:
        return SeenStats(0.0, 0, 0, undefined=True)
    return SeenStats(seen / total, seen, total, undefined=False)
