"""Screening-time search: cosine top-k over a ligand embedding index.

Embeddings are l2-normalized at index-build time so both the exact scan
and the IVF approximate search reduce to inner products.  Ties are
always broken by ascending molecule id, making every ranking
deterministic.  This module never touches the diffusion side.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "LibraryIndex",
    "ScreenQuery",
    "RankedScreen",
    "tie_break",
    "exact_topk",
    "IvfIndex",
    "build_ivf",
    "ann_topk",
    "save_index",
    "load_index",
]

_MAGIC = b"PSIX"
_VERSION = 1


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding row")
    return m / norms


@dataclass
class LibraryIndex:
    """l2-normalized embedding matrix with aligned molecule ids."""

    matrix: np.ndarray  # (M, d), unit rows
    ids: List[str]
    provenance: str = ""
    skipped: List[str] = field(default_factory=list)

    @classmethod
    def from_embeddings(cls, embeddings: np.ndarray, ids: Sequence[str],
                        provenance: str = "", skipped: Sequence[str] = ()) -> "LibraryIndex":
        m = np.asarray(embeddings, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != len(ids):
            raise ValueError(f"embeddings {m.shape} do not align with {len(ids)} ids")
        return cls(matrix=_normalize_rows(m), ids=list(ids),
                   provenance=provenance, skipped=list(skipped))

    def __len__(self):
        return len(self.ids)


@dataclass
class ScreenQuery:
    """A normalized pocket embedding plus the number of results wanted."""

    z: np.ndarray
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        z = np.asarray(self.z, dtype=np.float64).reshape(-1)
        n = np.linalg.norm(z)
        if n == 0.0:
            raise ValueError("zero query embedding")
        self.z = z / n


@dataclass
class RankedScreen:
    """Scored candidates in descending score order; ids unique."""

    entries: List[Tuple[str, float]]
    truncated: bool = False  # k exceeded the library size
    labels: Optional[List[int]] = None

    def ids(self) -> List[str]:
        return [e[0] for e in self.entries]

    def scores(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])


def tie_break(entries: Sequence[Tuple[str, float]]) -> List[Tuple[str, float]]:
    """Descending score; equal scores ordered by ascending molecule id."""
    return sorted(entries, key=lambda e: (-e[1], e[0]))


def exact_topk(query: ScreenQuery, index: LibraryIndex) -> RankedScreen:
    """Full-scan top-k by inner product (cosine on unit vectors)."""
    if len(index) == 0:
        raise ValueError("empty index")
    scores = index.matrix @ query.z
    k = min(query.k, len(index))
    if k < len(index):
        part = np.argpartition(-scores, k - 1)
        kth = scores[part[k - 1]]
        cand = np.flatnonzero(scores >= kth)  # keep every boundary tie for the id rule
    else:
        cand = np.arange(len(index))
    ranked = tie_break([(index.ids[i], float(scores[i])) for i in cand])[:k]
    return RankedScreen(entries=ranked, truncated=query.k > len(index))


# ---------------------------------------------------------------------------
# IVF approximate search
# ---------------------------------------------------------------------------

def _kmeans(x: np.ndarray, k: int, seed: int, iters: int = 30) -> Tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd's with fixed seeding; empty clusters keep their centroid."""
    rng = np.random.default_rng(seed)
    centroids = x[rng.choice(len(x), size=k, replace=False)].copy()
    assign = np.zeros(len(x), dtype=np.intp)
    for _ in range(iters):
        d2 = -2.0 * (x @ centroids.T) + np.sum(centroids * centroids, axis=1)
        new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return centroids, assign


@dataclass
class IvfIndex:
    """Clustered inverted lists over a LibraryIndex (coarse k-means)."""

    base: LibraryIndex
    centroids: np.ndarray  # (C, d)
    lists: List[np.ndarray]  # per-centroid row positions into base.matrix

    @property
    def n_clusters(self) -> int:
        return len(self.lists)


def build_ivf(index: LibraryIndex, n_clusters: int = 64, seed: int = 0) -> IvfIndex:
    if n_clusters < 1 or n_clusters > len(index):
        raise ValueError(f"n_clusters {n_clusters} out of range for M={len(index)}")
    centroids, assign = _kmeans(index.matrix, n_clusters, seed)
    lists = [np.flatnonzero(assign == c) for c in range(n_clusters)]
    return IvfIndex(base=index, centroids=centroids, lists=lists)


def ann_topk(query: ScreenQuery, ivf: IvfIndex, probes: int = 8) -> RankedScreen:
    """Scan only the `probes` nearest coarse clusters; empty lists skip."""
    if probes < 1 or probes > ivf.n_clusters:
        raise ValueError(f"probes {probes} out of range for {ivf.n_clusters} clusters")
    d2 = -2.0 * (ivf.centroids @ query.z) + np.sum(ivf.centroids * ivf.centroids, axis=1)
    order = np.argsort(d2, kind="stable")[:probes]
    rows = np.concatenate([ivf.lists[c] for c in order]) if len(order) else np.array([], dtype=np.intp)
    if rows.size == 0:
        return RankedScreen(entries=[], truncated=True)
    scores = ivf.base.matrix[rows] @ query.z
    k = min(query.k, rows.size)
    ranked = tie_break([(ivf.base.ids[i], float(s)) for i, s in zip(rows, scores)])[:k]
    return RankedScreen(entries=ranked, truncated=query.k > rows.size)


# ---------------------------------------------------------------------------
# persistence: little-endian binary with JSON trailer for ids
# ---------------------------------------------------------------------------

def save_index(path, index: LibraryIndex, ivf: Optional[IvfIndex] = None):
    meta = {
        "ids": index.ids,
        "provenance": index.provenance,
        "skipped": index.skipped,
        "lists": [l.tolist() for l in ivf.lists] if ivf is not None else None,
    }
    meta_blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    m = np.ascontiguousarray(index.matrix, dtype="<f8")
    cents = (np.ascontiguousarray(ivf.centroids, dtype="<f8")
             if ivf is not None else np.zeros((0, m.shape[1]), dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQQQ", _VERSION, m.shape[0], m.shape[1],
                             cents.shape[0], len(meta_blob)))
        fh.write(meta_blob)
        fh.write(cents.tobytes())
        fh.write(m.tobytes())


def load_index(path) -> Tuple[LibraryIndex, Optional[IvfIndex]]:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not an index file")
    version, m_rows, dim, n_cent, meta_len = struct.unpack("<IQQQQ", raw[4:40])
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported index version {version}")
    meta = json.loads(raw[40 : 40 + meta_len].decode("utf-8"))
    off = 40 + meta_len
    cents = np.frombuffer(raw, dtype="<f8", count=n_cent * dim, offset=off).reshape(n_cent, dim)
    off += cents.nbytes
    matrix = np.frombuffer(raw, dtype="<f8", count=m_rows * dim, offset=off).reshape(m_rows, dim)
    index = LibraryIndex(matrix=np.array(matrix), ids=meta["ids"],
                         provenance=meta["provenance"], skipped=meta["skipped"])
    ivf = None
    if meta["lists"] is not None:
        ivf = IvfIndex(base=index, centroids=np.array(cents),
                       lists=[np.asarray(l, dtype=np.intp) for l in meta["lists"]])
    return index, ivf
