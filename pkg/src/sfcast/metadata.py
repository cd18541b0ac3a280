"""TF-IDF metadata vectors and their replication across year-columns."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InsufficientCorpusError, MetadataMissingError
from .profile_matrix import SeriesYearIndex


@dataclass(frozen=True)
class MetadataMatrix:
    """m x C sparse column matrix; column c is the feature vector of ids[c]."""

    matrix: sp.csc_matrix
    vocab: tuple
    ids: tuple  # series id per column (repeats after replication)

    def __post_init__(self):
        object.__setattr__(self, "matrix", sp.csc_matrix(self.matrix, dtype=np.float64))
        if self.matrix.shape[1] != len(self.ids):
            raise MetadataMissingError("one id per column required")

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz_ratio(self) -> float:
        total = self.matrix.shape[0] * self.matrix.shape[1]
        return self.matrix.nnz / total if total else 0.0

    def column(self, c: int) -> sp.csc_matrix:
        return self.matrix[:, [c]]

    def column_for(self, series_id: str) -> sp.csc_matrix:
        try:
            c = self.ids.index(series_id)
        except ValueError:
            raise MetadataMissingError(f"no metadata for series {series_id!r}")
        return self.column(c)


def tfidf_featurize(docs: dict) -> MetadataMatrix:
    """Build per-series TF-IDF columns from pre-tokenized documents.

    tf is the raw in-document count, idf = ln(n_docs / df); terms appearing
    in fewer than two documents are dropped.  Vocabulary order is
    lexicographic so output is independent of document order.
    """
    if len(docs) < 2:
        raise InsufficientCorpusError(f"need >= 2 documents, got {len(docs)}")
    n_docs = len(docs)

    df: dict[str, int] = {}
    counts = {}
    for sid, tokens in docs.items():
        c: dict[str, int] = {}
        for tok in tokens:
            c[tok] = c.get(tok, 0) + 1
        counts[sid] = c
        for tok in c:
            df[tok] = df.get(tok, 0) + 1

    vocab = sorted(t for t, d in df.items() if d >= 2)
    term_index = {t: i for i, t in enumerate(vocab)}
    idf = {t: math.log(n_docs / df[t]) for t in vocab}

    rows, cols, vals = [], [], []
    ids = list(docs)
    for c, sid in enumerate(ids):
        for tok, tf in sorted(counts[sid].items()):
            i = term_index.get(tok)
            if i is None:
                continue
            rows.append(i)
            cols.append(c)
            vals.append(tf * idf[tok])
    matrix = sp.csc_matrix(
        (vals, (rows, cols)), shape=(len(vocab), len(ids)), dtype=np.float64
    )
    return MetadataMatrix(matrix, tuple(vocab), tuple(ids))


def replicate_for_years(per_series: MetadataMatrix, index: SeriesYearIndex) -> MetadataMatrix:
    """Copy each series' column once per year-column of the stacked matrix."""
    id_to_col = {sid: c for c, sid in enumerate(per_series.ids)}
    picks = []
    ids = []
    for sid, _, _ in sorted(index.entries, key=lambda e: e[2]):
        if sid not in id_to_col:
            raise MetadataMissingError(f"no metadata for series {sid!r}")
        picks.append(id_to_col[sid])
        ids.append(sid)
    return MetadataMatrix(per_series.matrix[:, picks], per_series.vocab, tuple(ids))


def read_jsonl(path) -> dict:
    """Read ``{"series_id": ..., "tokens": [...]}`` objects, one per line."""
    docs = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            docs[obj["series_id"]] = obj["tokens"]
    return docs


def write_vocab(path, meta: MetadataMatrix) -> None:
    with open(path, "w") as fh:
        for term in meta.vocab:
            fh.write(term + "\n")
