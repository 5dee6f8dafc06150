"""Pretrained word-vector loading with an average-vector fallback for OOV words.

The text format is one entry per line: the surface form followed by `dim`
space-separated floats.  Gzip-compressed files are accepted.  Lookups are
case-sensitive; any surface without an entry maps to the average vector,
which is the arithmetic mean of every vector in the loaded file.
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

import numpy as np


class EmbeddingError(Exception):
    pass


class DimensionMismatch(EmbeddingError):
    def __init__(self, line_number: int, expected: int, got: int):
        super().__init__(f"line {line_number}: expected {expected} components, got {got}")
        self.line_number = line_number


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    average: np.ndarray

    def __contains__(self, surface: str) -> bool:
        return surface in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def _open_text(path: Path) -> IO[str]:
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def load_embeddings(path: str | Path, dim: int,
                    retain: Iterable[str] | None = None) -> EmbeddingTable:
    """Stream a word-vector file into an EmbeddingTable.

    Duplicate surfaces keep the first occurrence.  The average vector is the
    running mean over *all* file entries, so it is independent of `retain`;
    when `retain` is given, only those surfaces are kept in memory.
    """
    keep = None if retain is None else set(retain)
    vectors: dict[str, np.ndarray] = {}
    total = np.zeros(dim, dtype=np.float64)
    count = 0
    path = Path(path)
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) <= 1 and not line.strip():
                continue
            surface, comps = parts[0], parts[1:]
            if len(comps) != dim:
                raise DimensionMismatch(lineno, dim, len(comps))
            if surface in vectors:
                continue
            vec = np.asarray([float(c) for c in comps], dtype=np.float64)
            total += vec
            count += 1
            if keep is None or surface in keep:
                vectors[surface] = vec
    if count == 0:
        raise EmbeddingError(f"{path}: no vectors loaded; average undefined")
    return EmbeddingTable(dim=dim, vectors=vectors, average=total / count)


def lookup_vector(table: EmbeddingTable, surface: str) -> np.ndarray:
    """Return the vector for `surface`, or the table average when absent."""
    vec = table.vectors.get(surface)
    return table.average if vec is None else vec


def table_from_arrays(vectors: dict[str, np.ndarray]) -> EmbeddingTable:
    """Build a table directly from in-memory vectors (tests, synthetic runs)."""
    if not vectors:
        raise EmbeddingError("cannot build a table from zero vectors")
    mat = np.stack(list(vectors.values())).astype(np.float64)
    dims = {v.shape for v in vectors.values()}
    if len(dims) != 1 or mat.ndim != 2:
        raise EmbeddingError(f"inconsistent vector shapes: {sorted(dims)}")
    return EmbeddingTable(dim=mat.shape[1],
                          vectors={w: np.asarray(v, dtype=np.float64) for w, v in vectors.items()},
                          average=mat.mean(axis=0))


def write_embeddings(path: str | Path, table: EmbeddingTable) -> None:
    """Serialize a table back to the text format (used by synthetic runs)."""
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in table.vectors.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")
