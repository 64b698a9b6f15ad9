"""Chain generators.

Random families draw from ``numpy.random.Generator(PCG64(seed))``, the
128-bit-state permuted congruential generator (PCG-XSL-RR 128/64), so a
``FamilySpec`` determines its chain exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .chain import DENSE_LIMIT, Chain, validate_chain
from .errors import ChainFormatError, GenerationFailed, InvalidParams

FAMILIES = (
    "lazy-two-state",
    "cycle",
    "complete",
    "hypercube",
    "random-regular",
    "random-symmetric",
    "srw-from-edgelist",
)
RANDOM_FAMILIES = ("random-regular", "random-symmetric")
MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class FamilySpec:
    """What to generate.

    ``size`` is the number of states, except for ``hypercube`` where it is
    the dimension.  ``degree`` applies to ``random-regular``, ``density`` to
    ``random-symmetric``.  ``edges`` (or ``edgelist`` path) feeds
    ``srw-from-edgelist``.
    """

    family_id: str
    size: int = 2
    laziness: float = 0.0
    seed: int = 0
    degree: int = 3
    density: float = 0.3
    edges: Optional[tuple] = None
    edgelist: Optional[str] = None

    def with_size(self, size: int, index: int = 0) -> "FamilySpec":
        seed = self.seed + index if self.family_id in RANDOM_FAMILIES else self.seed
        return dataclasses.replace(self, size=size, seed=seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["edges"] is not None:
            d["edges"] = [list(e) for e in d["edges"]]
        return d


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def _lazify(K, alpha):
    if alpha == 0.0:
        return K
    n = K.shape[0]
    if sp.issparse(K):
        return sp.csr_matrix(alpha * sp.identity(n) + (1.0 - alpha) * K)
    return alpha * np.eye(n) + (1.0 - alpha) * K


def srw_matrix(n: int, edges, dense_limit: int = DENSE_LIMIT):
    """Simple random walk ``K(x, y) = 1/deg(x)`` on an undirected simple graph."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise InvalidParams("edge endpoint out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise InvalidParams("self-loops are not allowed in an edge list")
    key = np.sort(edges, axis=1)
    if len(np.unique(key, axis=0)) != len(key):
        raise InvalidParams("duplicate edge in edge list")
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    if np.any(deg == 0):
        raise InvalidParams(f"isolated vertex {int(np.flatnonzero(deg == 0)[0])}")
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    K = sp.csr_matrix(sp.diags(1.0 / deg) @ A)
    return K.toarray() if n <= dense_limit else K


def read_edgelist(path) -> tuple[int, list]:
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ChainFormatError("expected 'u v'", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ChainFormatError(f"non-integer vertex in {line!r}", lineno) from None
        edges.append((u, v))
    if not edges:
        raise ChainFormatError("edge list is empty")
    n = 1 + max(max(e) for e in edges)
    return n, edges


def cycle_matrix(n: int):
    K = np.zeros((n, n))
    idx = np.arange(n)
    np.add.at(K, (idx, (idx + 1) % n), 0.5)
    np.add.at(K, (idx, (idx - 1) % n), 0.5)
    return K


def complete_matrix(n: int):
    K = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(K, 0.0)
    return K


def hypercube_matrix(d: int, dense_limit: int = DENSE_LIMIT):
    n = 1 << d
    states = np.arange(n)
    rows = np.repeat(states, d)
    cols = (states[:, None] ^ (1 << np.arange(d))[None, :]).ravel()
    K = sp.csr_matrix((np.full(rows.size, 1.0 / d), (rows, cols)), shape=(n, n))
    return K.toarray() if n <= dense_limit else K


def random_regular_edges(n: int, d: int, rng) -> np.ndarray:
    """Configuration model: pair ``n*d`` half-edges uniformly, rejecting the
    whole pairing on any self-loop or multi-edge, or a disconnected result."""
    stubs = np.repeat(np.arange(n), d)
    for _ in range(MAX_REJECTIONS):
        perm = rng.permutation(stubs)
        pairs = np.sort(perm.reshape(-1, 2), axis=1)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        if len(np.unique(pairs, axis=0)) != len(pairs):
            continue
        A = sp.csr_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        if csgraph.connected_components(A, directed=False)[0] != 1:
            continue
        return pairs
    raise GenerationFailed(f"configuration model rejected {MAX_REJECTIONS} pairings (n={n}, d={d})")


def random_symmetric_matrix(n: int, density: float, rng):
    """Random connected symmetric support with independent positive weights.

    A random spanning tree guarantees connectivity; every other unordered
    pair, and every self-loop, is added with probability ``density``.
    Weights on ``(x, y)`` and ``(y, x)`` are drawn independently, so the
    chain is generally not reversible.
    """
    support = np.zeros((n, n), dtype=bool)
    order = rng.permutation(n)
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        support[order[k], parent] = support[parent, order[k]] = True
    extra = np.triu(rng.random((n, n)) < density, 1)
    support |= extra | extra.T
    support[np.diag_indices(n)] |= rng.random(n) < density
    weights = rng.uniform(0.05, 1.0, size=(n, n))
    K = np.where(support, weights, 0.0)
    return K / K.sum(axis=1, keepdims=True)


def generate(spec: FamilySpec, *, dense_limit: int = DENSE_LIMIT) -> Chain:
    fid = spec.family_id
    alpha = float(spec.laziness)
    if not 0.0 <= alpha < 1.0:
        raise InvalidParams(f"laziness must lie in [0, 1), got {alpha}")
    size = int(spec.size)
    meta = {"family": fid, "size": size, "laziness": alpha}

    if fid == "lazy-two-state":
        K = np.full((2, 2), 0.5)
    elif fid == "cycle":
        if size < 2:
            raise InvalidParams("cycle needs n >= 2")
        K = cycle_matrix(size)
    elif fid == "complete":
        if size < 2:
            raise InvalidParams("complete graph needs n >= 2")
        K = complete_matrix(size)
    elif fid == "hypercube":
        if size < 1:
            raise InvalidParams("hypercube needs dimension >= 1")
        K = hypercube_matrix(size, dense_limit)
        meta.update(product_form="hypercube", dim=size)
    elif fid == "random-regular":
        d = int(spec.degree)
        if size < 2 or d < 3 or (size * d) % 2 or d >= size:
            raise InvalidParams(f"random-regular needs d >= 3, d < n and n*d even (n={size}, d={d})")
        edges = random_regular_edges(size, d, _rng(spec.seed))
        K = srw_matrix(size, edges, dense_limit)
        meta.update(degree=d, seed=spec.seed)
    elif fid == "random-symmetric":
        if size < 2 or not 0.0 <= spec.density <= 1.0:
            raise InvalidParams("random-symmetric needs n >= 2 and density in [0, 1]")
        K = random_symmetric_matrix(size, float(spec.density), _rng(spec.seed))
        meta.update(density=spec.density, seed=spec.seed)
    elif fid == "srw-from-edgelist":
        if spec.edges is not None:
            edges = [tuple(e) for e in spec.edges]
            n = 1 + max(max(e) for e in edges)
        elif spec.edgelist is not None:
            n, edges = read_edgelist(spec.edgelist)
        else:
            raise InvalidParams("srw-from-edgelist needs edges or an edgelist path")
        K = srw_matrix(n, edges, dense_limit)
        meta["size"] = n
    else:
        raise InvalidParams(f"unknown family {fid!r}; expected one of {FAMILIES}")

    return validate_chain(_lazify(K, alpha), dense_limit=dense_limit, meta=meta)


def family_sequence(template: FamilySpec, sizes: Sequence[int], **kw) -> list[Chain]:
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidParams(f"sizes must be strictly increasing, got {sizes}")
    return [generate(template.with_size(s, i), **kw) for i, s in enumerate(sizes)]
