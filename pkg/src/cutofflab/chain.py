"""Validated stochastic matrices and their combinatorial metrics.

A :class:`Chain` wraps a row-stochastic matrix ``K`` whose support is
symmetric and connected.  Chains with at most ``dense_limit`` states are
stored as dense ``float64`` arrays; larger ones as CSR sparse matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (
    AsymmetricSupport,
    InvalidParams,
    NegativeEntry,
    NonFiniteEntry,
    NonFiniteValue,
    NotIrreducible,
    NotSquare,
    RowSumError,
)

DENSE_LIMIT = 4096
ROW_SUM_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Chain:
    """An irreducible stochastic matrix with symmetric support.

    Do not build directly; use :func:`validate_chain`.  ``meta`` carries
    generator hints (e.g. the hypercube product-form flag) and never affects
    the generic numerics.
    """

    matrix: Any
    labels: Optional[tuple] = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.matrix.toarray()
        return self.matrix

    @cached_property
    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.matrix)

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Off-diagonal support pairs ``(rows, cols)``, both orientations."""
        coo = self.csr.tocoo()
        keep = (coo.row != coo.col) & (coo.data > 0)
        return coo.row[keep].astype(np.int64), coo.col[keep].astype(np.int64)

    @cached_property
    def metrics(self) -> "ChainMetrics":
        return chain_metrics(self)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Chain(n={self.n}, {kind}, meta={dict(self.meta)})"


@dataclass(frozen=True, eq=False)
class ChainMetrics:
    delta: float
    dist: np.ndarray
    diameter: int
    lip_constant_c: float


def _as_matrix(raw, dense_limit):
    if sp.issparse(raw):
        mat = sp.csr_matrix(raw, dtype=np.float64)
        if mat.shape[0] <= dense_limit:
            return mat.toarray()
        mat.eliminate_zeros()
        mat.sort_indices()
        return mat
    arr = np.array(raw, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] > dense_limit:
        mat = sp.csr_matrix(arr)
        mat.eliminate_zeros()
        return mat
    return arr


def validate_chain(
    raw,
    *,
    labels: Optional[Sequence[str]] = None,
    renormalize: bool = False,
    dense_limit: int = DENSE_LIMIT,
    meta: Optional[Mapping[str, Any]] = None,
) -> Chain:
    """Check ``raw`` and return it as a :class:`Chain`.

    Checks run in this order, reporting the first failure: shape, finiteness,
    nonnegativity, row sums, symmetric support, connectivity.

    With ``renormalize=True`` rows whose sum is off by at most 1e-9 are
    rescaled; otherwise any row off by more than 1e-12 is rejected.
    """
    mat = _as_matrix(raw, dense_limit)
    n = mat.shape[0]
    if mat.shape[0] != mat.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {mat.shape}")
    if n < 2:
        raise InvalidParams("a chain needs at least 2 states")
    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != n:
            raise InvalidParams(f"{len(labels)} labels for {n} states")

    sparse = sp.issparse(mat)
    data = mat.data if sparse else mat
    if not np.all(np.isfinite(data)):
        if sparse:
            coo = mat.tocoo()
            k = int(np.flatnonzero(~np.isfinite(coo.data))[0])
            raise NonFiniteEntry(int(coo.row[k]), int(coo.col[k]))
        i, j = np.argwhere(~np.isfinite(mat))[0]
        raise NonFiniteEntry(int(i), int(j))
    if np.any(data < 0):
        if sparse:
            coo = mat.tocoo()
            order = np.lexsort((coo.col, coo.row))
            k = next(k for k in order if coo.data[k] < 0)
            raise NegativeEntry(int(coo.row[k]), int(coo.col[k]), float(coo.data[k]))
        i, j = np.argwhere(mat < 0)[0]
        raise NegativeEntry(int(i), int(j), float(mat[i, j]))

    sums = np.asarray(mat.sum(axis=1)).ravel()
    off = np.abs(sums - 1.0)
    bad = np.flatnonzero(off > ROW_SUM_TOL)
    if bad.size:
        if renormalize and np.all(off[bad] <= RENORMALIZE_TOL):
            scale = 1.0 / sums
            mat = sp.diags(scale) @ mat if sparse else mat * scale[:, None]
            if sparse:
                mat = sp.csr_matrix(mat)
        else:
            row = int(bad[0])
            raise RowSumError(row, float(sums[row]))

    support = sp.csr_matrix((mat > 0).astype(np.int8))
    asym = (support - support.T).tocoo()
    # entries equal to +1 are pairs present in K but absent in K^T
    forward = asym.data > 0
    if np.any(forward):
        rows, cols = asym.row[forward], asym.col[forward]
        k = np.lexsort((cols, rows))[0]
        raise AsymmetricSupport(int(rows[k]), int(cols[k]))

    ncomp, labels_cc = csgraph.connected_components(support, directed=False)
    if ncomp > 1:
        comps = [np.flatnonzero(labels_cc == c).tolist() for c in range(ncomp)]
        raise NotIrreducible(comps)

    if not sparse:
        mat = np.ascontiguousarray(mat)
        mat.setflags(write=False)
    return Chain(matrix=mat, labels=labels, meta=dict(meta or {}))


def smallest_nonzero(chain: Chain) -> float:
    data = chain.csr.data
    return float(data[data > 0].min())


def graph_distances(chain: Chain) -> np.ndarray:
    """All-pairs hop distances on the support graph (unweighted BFS)."""
    n = chain.n
    adj = chain.csr.copy()
    adj.data = np.ones_like(adj.data)
    out = np.empty((n, n), dtype=np.int32)
    block = max(1, min(n, (1 << 24) // n))
    for start in range(0, n, block):
        idx = np.arange(start, min(n, start + block))
        d = csgraph.shortest_path(adj, method="D", unweighted=True, indices=idx)
        out[idx] = d.astype(np.int32)
    out.setflags(write=False)
    return out


def chain_metrics(chain: Chain) -> ChainMetrics:
    delta = smallest_nonzero(chain)
    dist = graph_distances(chain)
    diameter = int(dist.max())
    c = 3.0 * math.log(math.e / delta)
    return ChainMetrics(delta=delta, dist=dist, diameter=diameter, lip_constant_c=c)


def lipschitz_norm(chain: Chain, f) -> float:
    """Lipschitz norm of ``f`` with respect to the graph distance.

    The supremum over all pairs is attained on adjacent pairs, since the
    distance is a path metric, so only support edges are scanned.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (chain.n,):
        raise InvalidParams(f"function has shape {f.shape}, expected ({chain.n},)")
    if not np.all(np.isfinite(f)):
        raise NonFiniteValue("function takes non-finite values")
    rows, cols = chain.edges
    if rows.size == 0:
        return 0.0
    return float(np.max(np.abs(f[rows] - f[cols])))
