"""Web-graph loading, transition matrices and dataset statistics.

Edges are stored as ``(source, destination)`` pairs: source ``j`` links to
destination ``i``, which is the entry ``G(i, j) = 1`` of the binary link
matrix. The transition matrix keeps one CSR row per destination so that
``y = P @ x`` streams rows.
"""

from __future__ import annotations

import gzip
import io
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GraphParseError",
    "UnsupportedFormatError",
    "Graph",
    "GraphStats",
    "TransitionMatrix",
    "parse_edge_list",
    "parse_matrix_market",
    "build_transition",
    "graph_stats",
    "format_edge_list",
    "write_cache",
    "read_cache",
    "load_graph",
]

CACHE_MAGIC = b"PRNK1"


class GraphParseError(ValueError):
    """Malformed graph input; ``lineno`` is 1-based when known."""

    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


class UnsupportedFormatError(GraphParseError):
    pass


@dataclass(frozen=True)
class Graph:
    """Directed graph with contiguous 0-based node indices.

    ``ids[k]`` is the original label of node ``k``.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    ids: np.ndarray
    out_degree: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n, src, dst, ids=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge index out of range")
        if src.size:
            key = src * n + dst
            _, first = np.unique(key, return_index=True)
            keep = np.sort(first)
            src, dst = src[keep], dst[keep]
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        out_degree = np.bincount(src, minlength=n).astype(np.int64)
        return cls(int(n), src, dst, np.asarray(ids, dtype=np.int64), out_degree)

    @property
    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist()))

    @property
    def nnz(self) -> int:
        return int(self.src.size)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.ids, other.ids)
        )

    __hash__ = None


@dataclass(frozen=True)
class GraphStats:
    n: int
    nnz: int
    zcol: int
    a_nz: float
    den: float

    def as_dict(self):
        return {"n": self.n, "nnz": self.nnz, "zcol": self.zcol, "a_nz": self.a_nz, "den": self.den}


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic link matrix ``P`` (CSR, rows are destinations)."""

    P: sp.csr_matrix
    dangling: np.ndarray

    @property
    def n(self) -> int:
        return self.P.shape[0]


def _lines(source) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    if isinstance(source, bytes):
        return source.decode("utf-8").splitlines()
    return source


def parse_edge_list(source) -> Graph:
    """Parse a SNAP-style edge list.

    ``source`` is the text itself or an iterable of lines. Original node
    labels are remapped to ``0..n-1`` in first-appearance order.
    """
    pairs = []
    for lineno, line in enumerate(_lines(source), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise GraphParseError(f"expected 'src dst', got {s!r}", lineno)
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphParseError(f"non-integer node id in {s!r}", lineno) from None
    if not pairs:
        raise GraphParseError("edge list is empty")
    flat = np.array(pairs, dtype=np.int64).ravel()
    labels, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    local = rank[inverse].reshape(-1, 2)
    return Graph.from_edges(labels.size, local[:, 0], local[:, 1], labels[order])


def parse_matrix_market(source) -> Graph:
    """Parse a Matrix Market coordinate file as a link matrix.

    Entry ``(i, j)`` means ``G(i, j) = 1``, i.e. node ``j-1`` links to
    node ``i-1``. Numeric values are binarized and explicit zeros dropped.
    """
    it = iter(_lines(source))
    try:
        header = next(it)
    except StopIteration:
        raise GraphParseError("empty Matrix Market input") from None
    tokens = header.strip().lower().split()
    if len(tokens) < 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise GraphParseError("missing %%MatrixMarket matrix header", 1)
    fmt, field_, symmetry = tokens[2], tokens[3], tokens[4]
    if fmt != "coordinate":
        raise UnsupportedFormatError(f"unsupported Matrix Market format {fmt!r}", 1)
    if field_ not in ("pattern", "real", "integer"):
        raise UnsupportedFormatError(f"unsupported field {field_!r}", 1)
    if symmetry not in ("general", "symmetric"):
        raise UnsupportedFormatError(f"unsupported symmetry {symmetry!r}", 1)

    size = None
    rows, cols = [], []
    lineno = 1
    for lineno, line in enumerate(it, 2):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if size is None:
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise GraphParseError(f"bad size line {s!r}", lineno) from None
            if len(size) != 3:
                raise GraphParseError(f"bad size line {s!r}", lineno)
            if size[0] != size[1]:
                raise GraphParseError(f"link matrix must be square, got {size[0]}x{size[1]}", lineno)
            continue
        want = 2 if field_ == "pattern" else 3
        if len(parts) != want:
            raise GraphParseError(f"expected {want} fields, got {s!r}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            value = 1.0 if field_ == "pattern" else float(parts[2])
        except ValueError:
            raise GraphParseError(f"malformed entry {s!r}", lineno) from None
        if not (1 <= i <= size[0] and 1 <= j <= size[1]):
            raise GraphParseError(f"index ({i}, {j}) outside declared {size[0]}x{size[1]}", lineno)
        if value == 0.0:
            continue
        rows.append(i - 1)
        cols.append(j - 1)
        if symmetry == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
    if size is None:
        raise GraphParseError("missing size line", lineno)
    n = size[0]
    # G(i, j) = 1 is the edge j -> i
    return Graph.from_edges(n, cols, rows, np.arange(1, n + 1))


def build_transition(graph: Graph) -> TransitionMatrix:
    n = graph.n
    deg = graph.out_degree
    data = 1.0 / deg[graph.src]
    P = sp.csr_matrix((data, (graph.dst, graph.src)), shape=(n, n))
    P.sort_indices()
    return TransitionMatrix(P, deg == 0)


def graph_stats(graph: Graph) -> GraphStats:
    n = graph.n
    if n == 0:
        raise ValueError("graph has no nodes")
    nnz = graph.nnz
    return GraphStats(
        n=n,
        nnz=nnz,
        zcol=int(np.count_nonzero(graph.out_degree == 0)),
        a_nz=nnz / n,
        den=nnz / (n * n) * 100,
    )


def format_edge_list(graph: Graph) -> str:
    """Edge-list text that reparses to ``graph`` (isolated nodes aside)."""
    out = io.StringIO()
    ids = graph.ids
    for s, d in zip(graph.src.tolist(), graph.dst.tolist()):
        out.write(f"{ids[s]}\t{ids[d]}\n")
    return out.getvalue()


def write_cache(graph: Graph, path) -> None:
    """Binary cache: magic, u64 n, u64 nnz, CSR by source (indptr, indices), i64 ids."""
    order = np.lexsort((np.arange(graph.nnz), graph.src))
    indptr = np.zeros(graph.n + 1, dtype="<u8")
    np.cumsum(graph.out_degree, out=indptr[1:])
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<QQ", graph.n, graph.nnz))
        f.write(indptr.tobytes())
        f.write(graph.dst[order].astype("<u8").tobytes())
        f.write(graph.ids.astype("<i8").tobytes())


def read_cache(path) -> Graph:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(CACHE_MAGIC)] != CACHE_MAGIC:
        raise UnsupportedFormatError(f"{path}: not a PRNK1 cache file")
    off = len(CACHE_MAGIC)
    n, nnz = struct.unpack_from("<QQ", blob, off)
    off += 16
    need = off + 8 * (n + 1) + 8 * nnz + 8 * n
    if len(blob) != need:
        raise GraphParseError(f"{path}: truncated cache ({len(blob)} of {need} bytes)")
    indptr = np.frombuffer(blob, "<u8", n + 1, off).astype(np.int64)
    off += 8 * (n + 1)
    dst = np.frombuffer(blob, "<u8", nnz, off).astype(np.int64)
    off += 8 * nnz
    ids = np.frombuffer(blob, "<i8", n, off).astype(np.int64)
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    return Graph.from_edges(n, src, dst, ids)


def _sniff_format(path):
    name = os.fspath(path).lower()
    if name.endswith(".gz"):
        name = name[:-3]
    if name.endswith(".mtx"):
        return "mtx"
    if name.endswith(".prnk"):
        return "cache"
    return "snap"


def load_graph(path, fmt="auto") -> Graph:
    """Load a graph file; ``fmt`` is one of ``auto``, ``snap``, ``mtx``, ``cache``."""
    if fmt == "auto":
        fmt = _sniff_format(path)
    if fmt == "cache":
        return read_cache(path)
    opener = gzip.open if os.fspath(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as f:
        if fmt == "snap":
            return parse_edge_list(f)
        if fmt == "mtx":
            return parse_matrix_market(f)
    raise ValueError(f"unknown graph format {fmt!r}")
