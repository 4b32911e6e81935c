"""Sparse CSR matrices, functionality-weighted adjacency, and symmetric normalization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

if TYPE_CHECKING:
    from .kg import KnowledgeGraph


class MatrixFormatError(ValueError):
    """A sparse or dense text file violates the documented layout."""


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable real matrix in compressed sparse row layout (float64).

    Column indices are strictly increasing within each row and explicit
    zeros are never stored, so the triplet representation is canonical.
    """

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative dimensions")
        if self.indptr.shape != (self.rows + 1,):
            raise ValueError("indptr length must be rows + 1")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("indptr does not span the entry arrays")
        if len(self.indices) != len(self.data):
            raise ValueError("indices/data length mismatch")
        if len(self.indices) > 0:
            if self.indices.min() < 0 or self.indices.max() >= self.cols:
                raise ValueError("column index out of range")
            # strictly increasing columns within every row
            gaps = np.diff(self.indices)
            row_starts = self.indptr[1:-1]
            inner = np.ones(len(gaps), dtype=bool)
            inner[row_starts[(row_starts > 0) & (row_starts < len(self.indices))] - 1] = False
            if np.any(gaps[inner] <= 0):
                raise ValueError("column indices not strictly increasing within a row")
            if np.any(self.data == 0.0):
                raise ValueError("explicit zero entry")
        for arr in (self.indptr, self.indices, self.data):
            arr.setflags(write=False)

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csr = sp.csr_matrix(mat, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(
            rows=csr.shape[0],
            cols=csr.shape[1],
            indptr=np.asarray(csr.indptr, dtype=np.int64),
            indices=np.asarray(csr.indices, dtype=np.int64),
            data=np.asarray(csr.data, dtype=np.float64),
        )

    @classmethod
    def from_triplets(cls, rows, cols, row_idx, col_idx, values) -> "SparseMatrix":
        """Build from COO triplets; duplicate positions are summed, zeros dropped."""
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if len(row_idx) and (row_idx.min() < 0 or row_idx.max() >= rows):
            raise ValueError("row index out of range")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= cols):
            raise ValueError("column index out of range")
        coo = sp.coo_matrix((values, (row_idx, col_idx)), shape=(rows, cols))
        return cls.from_scipy(coo)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(arr, dtype=np.float64)))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, dtype=np.float64, format="csr"))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "SparseMatrix":
        return cls(rows, cols, np.zeros(rows + 1, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64))

    @property
    def nnz(self) -> int:
        return len(self.data)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.rows, self.cols))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.to_scipy().transpose())

    def with_cols(self, cols: int) -> "SparseMatrix":
        """Same entries, wider column dimension (zero padding on the right)."""
        if cols < self.cols:
            raise ValueError("cannot shrink column dimension")
        return SparseMatrix(self.rows, cols, self.indptr, self.indices, self.data)

    def row_sums(self) -> np.ndarray:
        out = np.zeros(self.rows, dtype=np.float64)
        if self.nnz:
            nonempty = np.diff(self.indptr) > 0
            out[nonempty] = np.add.reduceat(self.data, self.indptr[:-1][nonempty])
        return out

    def spmm(self, dense: np.ndarray) -> np.ndarray:
        """self @ dense with a fixed per-row summation order (thread-count independent)."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != self.cols:
            raise ValueError(
                f"dimension mismatch: ({self.rows}x{self.cols}) @ {dense.shape}")
        return self.to_scipy() @ dense

    def spmm_t(self, dense: np.ndarray) -> np.ndarray:
        """self.T @ dense, same determinism contract as spmm."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != self.rows:
            raise ValueError(
                f"dimension mismatch: ({self.cols}x{self.rows}) @ {dense.shape}")
        return self.to_scipy().T @ dense


@dataclass(frozen=True)
class RelationStats:
    """Per-relation triple counts and head/tail diversity ratios.

    fun(r) = distinct_heads / triple_count, ifun(r) = distinct_tails / triple_count.
    Relations with zero triples carry no statistics and may not be queried.
    """

    triple_count: np.ndarray
    distinct_heads: np.ndarray
    distinct_tails: np.ndarray

    @property
    def n_relations(self) -> int:
        return len(self.triple_count)

    @property
    def present(self) -> np.ndarray:
        return self.triple_count > 0

    def _check(self, relation: int):
        if relation < 0 or relation >= self.n_relations:
            raise ValueError(f"unknown relation id {relation}")
        if self.triple_count[relation] == 0:
            raise ValueError(f"relation {relation} has no triples")

    def fun(self, relation: int) -> float:
        self._check(relation)
        return self.distinct_heads[relation] / self.triple_count[relation]

    def ifun(self, relation: int) -> float:
        self._check(relation)
        return self.distinct_tails[relation] / self.triple_count[relation]

    def fun_values(self) -> np.ndarray:
        """fun per relation; zero-triple relations hold 0 and must not be used."""
        out = np.zeros(self.n_relations)
        mask = self.present
        out[mask] = self.distinct_heads[mask] / self.triple_count[mask]
        return out

    def ifun_values(self) -> np.ndarray:
        out = np.zeros(self.n_relations)
        mask = self.present
        out[mask] = self.distinct_tails[mask] / self.triple_count[mask]
        return out


def relation_stats(kg: "KnowledgeGraph") -> RelationStats:
    """Exact head/tail diversity counts per relation of a knowledge graph."""
    triples = kg.relation_triples
    n_rel = kg.n_relations
    counts = np.bincount(triples[:, 1], minlength=n_rel).astype(np.int64)

    def _distinct(entity_col: np.ndarray) -> np.ndarray:
        if len(triples) == 0:
            return np.zeros(n_rel, dtype=np.int64)
        codes = triples[:, 1].astype(np.int64) * np.int64(kg.n_entities) + entity_col
        rel_of_unique = np.unique(codes) // np.int64(kg.n_entities)
        return np.bincount(rel_of_unique, minlength=n_rel).astype(np.int64)

    return RelationStats(
        triple_count=counts,
        distinct_heads=_distinct(triples[:, 0].astype(np.int64)),
        distinct_tails=_distinct(triples[:, 2].astype(np.int64)),
    )


def build_adjacency(kg: "KnowledgeGraph", stats: RelationStats,
                    floor: float = 0.3) -> SparseMatrix:
    """Functionality-weighted entity adjacency.

    Each triple (h, r, t) contributes max(ifun(r), floor) to P[h][t] and
    max(fun(r), floor) to P[t][h]; contributions accumulate over duplicate
    and multi-relation triples.  The floor keeps skewed relations from
    propagating near-zero weight.
    """
    n = kg.n_entities
    triples = kg.relation_triples
    if len(triples) == 0:
        return SparseMatrix.zeros(n, n)
    if stats.n_relations != kg.n_relations:
        raise ValueError("stats were not computed from this graph")
    rels = triples[:, 1]
    w_fwd = np.maximum(stats.ifun_values()[rels], floor)
    w_bwd = np.maximum(stats.fun_values()[rels], floor)
    rows = np.concatenate([triples[:, 0], triples[:, 2]])
    cols = np.concatenate([triples[:, 2], triples[:, 0]])
    vals = np.concatenate([w_fwd, w_bwd])
    return SparseMatrix.from_triplets(n, n, rows, cols, vals)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized propagation operator D^-1/2 (P+I) D^-1/2."""

    matrix: SparseMatrix

    @property
    def n(self) -> int:
        return self.matrix.rows

    def spmm(self, dense: np.ndarray) -> np.ndarray:
        return self.matrix.spmm(dense)


def normalize(adj: SparseMatrix) -> NormalizedAdjacency:
    """Add self-loops, symmetrize by entrywise max, and degree-normalize.

    The output is exactly symmetric (bitwise): symmetric entry pairs are
    computed as the same float expression p / sqrt(d_i * d_j).
    """
    if adj.rows != adj.cols:
        raise ValueError("adjacency must be square")
    if np.any(adj.data < 0):
        raise ValueError("negative entry in adjacency")
    phat = adj.to_scipy() + sp.identity(adj.rows, dtype=np.float64, format="csr")
    phat = phat.maximum(phat.T).tocsr()
    degrees = np.asarray(phat.sum(axis=1)).ravel()
    coo = phat.tocoo()
    scaled = coo.data / np.sqrt(degrees[coo.row] * degrees[coo.col])
    out = SparseMatrix.from_triplets(adj.rows, adj.cols, coo.row, coo.col, scaled)
    return NormalizedAdjacency(out)


def spmm(matrix: SparseMatrix, dense: np.ndarray) -> np.ndarray:
    """Sparse-times-dense product (functional spelling of SparseMatrix.spmm)."""
    return matrix.spmm(dense)


def write_sparse_text(matrix: SparseMatrix, path) -> None:
    """Text form: header `rows cols nnz`, then `row col value` sorted by (row, col)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{matrix.rows} {matrix.cols} {matrix.nnz}\n")
        for i in range(matrix.rows):
            for p in range(matrix.indptr[i], matrix.indptr[i + 1]):
                fh.write(f"{i} {matrix.indices[p]} {float(matrix.data[p])!r}\n")


def read_sparse_text(path) -> SparseMatrix:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise MatrixFormatError(f"{path}: header must be 'rows cols nnz'")
        rows, cols, nnz = (int(x) for x in header)
        r = np.empty(nnz, dtype=np.int64)
        c = np.empty(nnz, dtype=np.int64)
        v = np.empty(nnz, dtype=np.float64)
        for k in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise MatrixFormatError(f"{path}: entry {k} malformed")
            r[k], c[k], v[k] = int(parts[0]), int(parts[1]), float(parts[2])
        if fh.readline().strip():
            raise MatrixFormatError(f"{path}: trailing content beyond declared nnz")
    if nnz and not np.all(np.diff(r * np.int64(max(cols, 1)) + c) > 0):
        raise MatrixFormatError(f"{path}: entries not sorted by (row, col)")
    return SparseMatrix.from_triplets(rows, cols, r, c, v)


def write_dense_text(arr: np.ndarray, path) -> None:
    """Text form: header `rows cols`, then row-major whitespace-separated values."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("dense text format is for 2-D matrices")
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            fh.write(" ".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_dense_text(path) -> np.ndarray:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise MatrixFormatError(f"{path}: header must be 'rows cols'")
        rows, cols = int(header[0]), int(header[1])
        out = np.empty((rows, cols), dtype=np.float64)
        for i in range(rows):
            parts = fh.readline().split()
            if len(parts) != cols:
                raise MatrixFormatError(f"{path}: row {i} has {len(parts)} values, expected {cols}")
            out[i] = [float(x) for x in parts]
    return out
