"""Sparse lineup kernel: covariance between matches via shared players.

A match is a signed incidence vector over the player registry (+1 for
team1's eleven, -1 for team2's) plus one home feature.  The kernel is

    k(a, b) = sigma2 * <z_a, z_b> + sigma2_home * h_a * h_b

where the player inner product reduces to signed overlap counts between
two 22-sparse vectors, so it never touches the P-dimensional space.
Pairwise evaluation intersects the sorted index lists directly; Gram
matrices are assembled from the same counts via sparse integer matrix
products over row blocks (optionally threaded; the result is bit-identical
for any block split because every entry is computed independently).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .data import Dataset, MatchRecord
from .errors import DataError

__all__ = [
    "KernelParams",
    "MatchVector",
    "build_match_vector",
    "signed_overlap",
    "kernel_eval",
    "kernel_matrix",
    "export_heatmap",
]

PLAYERS_PER_SIDE = 11
# squared norm of the player part of any match vector
SELF_OVERLAP = 2 * PLAYERS_PER_SIDE

_DEFAULT_JITTER_SCALE = 1e-6
_MAX_JITTER_SCALE = 1e-2


@dataclass(frozen=True)
class KernelParams:
    """Kernel scales; ``jitter=None`` means the default 1e-6 * sigma2."""

    sigma2: float = 1.0
    sigma2_home: float = 1.0
    jitter: float | None = None

    def __post_init__(self) -> None:
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2!r}")
        if not (self.sigma2_home >= 0.0 and math.isfinite(self.sigma2_home)):
            raise ValueError(f"sigma2_home must be >= 0 and finite, got {self.sigma2_home!r}")
        if self.jitter is not None and not (self.jitter >= 0.0 and math.isfinite(self.jitter)):
            raise ValueError(f"jitter must be >= 0 and finite, got {self.jitter!r}")

    @property
    def effective_jitter(self) -> float:
        if self.jitter is None:
            return _DEFAULT_JITTER_SCALE * self.sigma2
        return self.jitter

    @property
    def max_jitter(self) -> float:
        return _MAX_JITTER_SCALE * self.sigma2


@dataclass(frozen=True)
class MatchVector:
    """Signed sparse incidence of one match over the player registry."""

    plus_indices: np.ndarray
    minus_indices: np.ndarray
    home: int

    def __post_init__(self) -> None:
        plus = np.asarray(self.plus_indices, dtype=np.int32)
        minus = np.asarray(self.minus_indices, dtype=np.int32)
        for name, idx in (("plus_indices", plus), ("minus_indices", minus)):
            if idx.shape != (PLAYERS_PER_SIDE,):
                raise ValueError(f"{name} must hold exactly {PLAYERS_PER_SIDE} indices")
            if np.any(idx < 0):
                raise ValueError(f"{name} contains a negative index")
            if np.any(np.diff(idx) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if np.intersect1d(plus, minus, assume_unique=True).size:
            raise ValueError("plus_indices and minus_indices overlap")
        if self.home not in (-1, 0, 1):
            raise ValueError(f"home must be -1, 0 or +1, got {self.home!r}")
        plus.setflags(write=False)
        minus.setflags(write=False)
        object.__setattr__(self, "plus_indices", plus)
        object.__setattr__(self, "minus_indices", minus)
        object.__setattr__(self, "home", int(self.home))


def build_match_vector(rec: MatchRecord, registry: Mapping[str, int]) -> MatchVector:
    """Map a record's lineups through the registry; errors on unknown ids."""
    try:
        plus = sorted(registry[p] for p in rec.lineup1)
        minus = sorted(registry[p] for p in rec.lineup2)
    except KeyError as exc:
        raise DataError(
            f"match {rec.match_id!r}: player {exc.args[0]!r} is not in the registry"
        ) from None
    return MatchVector(
        plus_indices=np.array(plus, dtype=np.int32),
        minus_indices=np.array(minus, dtype=np.int32),
        home=rec.home.sign,
    )


def _n_common(x: np.ndarray, y: np.ndarray) -> int:
    """|x ∩ y| for sorted unique index arrays (two-pointer merge)."""
    i = j = n = 0
    nx, ny = len(x), len(y)
    while i < nx and j < ny:
        xi, yj = x[i], y[j]
        if xi == yj:
            n += 1
            i += 1
            j += 1
        elif xi < yj:
            i += 1
        else:
            j += 1
    return n


def signed_overlap(a: MatchVector, b: MatchVector) -> int:
    """<z_a, z_b> over the player part alone; an integer in [-22, 22]."""
    return (
        _n_common(a.plus_indices, b.plus_indices)
        + _n_common(a.minus_indices, b.minus_indices)
        - _n_common(a.plus_indices, b.minus_indices)
        - _n_common(a.minus_indices, b.plus_indices)
    )


def kernel_eval(a: MatchVector, b: MatchVector, p: KernelParams) -> float:
    """k(a, b); no jitter is ever added here."""
    return p.sigma2 * float(signed_overlap(a, b)) + p.sigma2_home * float(a.home * b.home)


def _incidence(vectors: Sequence[MatchVector], dim: int) -> sp.csr_matrix:
    n = len(vectors)
    indptr = np.arange(0, n * SELF_OVERLAP + 1, SELF_OVERLAP, dtype=np.int64)
    indices = np.empty(n * SELF_OVERLAP, dtype=np.int64)
    data = np.empty(n * SELF_OVERLAP, dtype=np.int64)
    for i, v in enumerate(vectors):
        base = i * SELF_OVERLAP
        indices[base : base + PLAYERS_PER_SIDE] = v.plus_indices
        indices[base + PLAYERS_PER_SIDE : base + SELF_OVERLAP] = v.minus_indices
        data[base : base + PLAYERS_PER_SIDE] = 1
        data[base + PLAYERS_PER_SIDE : base + SELF_OVERLAP] = -1
    mat = sp.csr_matrix((data, indices, indptr), shape=(n, dim))
    mat.sort_indices()
    return mat


def _feature_dim(rows: Sequence[MatchVector], cols: Sequence[MatchVector]) -> int:
    top = 0
    for v in list(rows) + list(cols):
        top = max(top, int(v.plus_indices[-1]), int(v.minus_indices[-1]))
    return top + 1


def overlap_matrix(
    rows: Sequence[MatchVector],
    cols: Sequence[MatchVector],
    threads: int = 1,
) -> np.ndarray:
    """Integer signed-overlap counts, shape (len(rows), len(cols))."""
    if not rows or not cols:
        return np.zeros((len(rows), len(cols)), dtype=np.int64)
    dim = _feature_dim(rows, cols)
    zc_t = _incidence(cols, dim).T.tocsc()

    def block(vs: Sequence[MatchVector]) -> np.ndarray:
        return (_incidence(vs, dim) @ zc_t).toarray()

    if threads <= 1 or len(rows) < 2 * threads:
        return block(rows)
    bounds = np.linspace(0, len(rows), threads + 1).astype(int)
    chunks = [rows[bounds[i] : bounds[i + 1]] for i in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(block, chunks))
    return np.vstack(parts)


def _home_signs(vectors: Sequence[MatchVector]) -> np.ndarray:
    return np.array([v.home for v in vectors], dtype=np.int64)


def kernel_matrix(
    rows: Sequence[MatchVector],
    cols: Sequence[MatchVector],
    p: KernelParams,
    add_jitter: bool = False,
    threads: int = 1,
) -> np.ndarray:
    """Gram matrix K[i, j] = kernel_eval(rows[i], cols[j], p), bit-exactly.

    ``add_jitter`` adds ``p.effective_jitter`` to the diagonal and is only
    meaningful when ``rows`` and ``cols`` are the same sequence.
    """
    overlap = overlap_matrix(rows, cols, threads=threads)
    k = p.sigma2 * overlap.astype(np.float64) + p.sigma2_home * np.outer(
        _home_signs(rows), _home_signs(cols)
    ).astype(np.float64)
    if add_jitter:
        if len(rows) != len(cols):
            raise ValueError("add_jitter requires a square Gram (rows == cols)")
        k[np.diag_indices_from(k)] += p.effective_jitter
    return k


def export_heatmap(
    ds: Dataset,
    p: KernelParams,
    grid: str | Path | IO[str],
    blocks: str | Path | IO[str] | None = None,
) -> None:
    """Write |K| over the dataset as a labeled CSV grid plus a sidecar.

    Rows/columns are ordered by (competition, date, match_id); the sidecar
    lists one ``competition,start_row,end_row`` line per contiguous
    competition block (start inclusive, end exclusive, 0-based data rows).
    Values carry 6 significant digits; no jitter is added.
    """
    order = sorted(ds.records, key=lambda r: (r.competition, r.date, r.match_id))
    vectors = [build_match_vector(r, ds.registry) for r in order]
    if vectors:
        k = np.abs(kernel_matrix(vectors, vectors, p, add_jitter=False))
    else:
        k = np.zeros((0, 0))

    grid_buf = io.StringIO()
    writer = csv.writer(grid_buf, lineterminator="\n")
    writer.writerow(["match_id"] + [r.match_id for r in order])
    for rec, row in zip(order, k):
        writer.writerow([rec.match_id] + [f"{v:.6g}" for v in row])

    blocks_buf = io.StringIO()
    bwriter = csv.writer(blocks_buf, lineterminator="\n")
    bwriter.writerow(["competition", "start_row", "end_row"])
    start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or order[i].competition != order[start].competition:
            bwriter.writerow([order[start].competition, start, i])
            start = i

    _write_text(grid, grid_buf.getvalue())
    if blocks is not None:
        _write_text(blocks, blocks_buf.getvalue())


def _write_text(sink: str | Path | IO[str], text: str) -> None:
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)
