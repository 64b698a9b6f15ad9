"""Stationary distribution, Poincare constant and isoperimetric constant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import DENSE_LIMIT, Chain
from .errors import EigenFailed, SolveFailed, TooLargeForExact
from .heat_kernel import Distribution

STATIONARY_TOL = 1e-12
EIGEN_TOL = 1e-9
CHEEGER_EXACT_MAX = 22


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    pi: Distribution
    p_min: float
    gamma: float
    phi: float
    phi_exact: bool
    delta: float
    diameter: int
    c: float


def stationary_residual(chain: Chain, pi) -> float:
    pi = np.asarray(pi)
    return float(np.abs(np.asarray(pi @ chain.matrix).ravel() - pi).sum())


def _refine(chain, pi, sweeps):
    # lazy power steps share the stationary vector and are aperiodic
    K = chain.matrix
    for _ in range(sweeps):
        pi = 0.5 * (pi + np.asarray(pi @ K).ravel())
        pi /= pi.sum()
    return pi


def stationary_distribution(chain: Chain) -> Distribution:
    """Solve ``pi K = pi`` with ``sum(pi) = 1``.

    The transposed system has its last equation swapped for the
    normalization.  Dense LU for small chains, sparse LU above the dense
    limit; a few lazy power sweeps polish the residual if needed.
    """
    n = chain.n
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        if chain.is_sparse:
            A = sp.lil_matrix((chain.matrix.T - sp.identity(n)).tocsr())
            A[n - 1, :] = np.ones(n)
            pi = spla.spsolve(A.tocsc(), rhs)
        else:
            A = chain.matrix.T - np.eye(n)
            A[-1, :] = 1.0
            pi = np.linalg.solve(A, rhs)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise SolveFailed(f"stationarity system is singular: {exc}") from exc
    if not np.all(np.isfinite(pi)) or pi.min() <= 0:
        raise SolveFailed("stationary solve produced a non-positive vector")
    pi = pi / pi.sum()
    for _ in range(20):
        if stationary_residual(chain, pi) <= STATIONARY_TOL:
            break
        pi = _refine(chain, pi, 5)
    res = stationary_residual(chain, pi)
    if res > STATIONARY_TOL:
        raise SolveFailed(f"stationary residual {res:.3e} exceeds {STATIONARY_TOL}")
    return Distribution(pi, 0.0)


def _probs(pi):
    return np.asarray(pi.probs if isinstance(pi, Distribution) else pi, dtype=np.float64)


def pi_adjoint(chain: Chain, pi):
    """Time reversal ``K*(x, y) = pi(y) K(y, x) / pi(x)``."""
    pi = _probs(pi)
    if chain.is_sparse:
        return sp.csr_matrix(sp.diags(1.0 / pi) @ chain.matrix.T @ sp.diags(pi))
    return (chain.matrix.T * pi[None, :]) / pi[:, None]


def symmetrized_reversibilization(chain: Chain, pi):
    """``D^{1/2} (K + K*)/2 D^{-1/2}`` with ``D = diag(pi)``.

    Equal to the symmetric part of ``D^{1/2} K D^{-1/2}``, which is how it is
    formed, so the result is exactly symmetric in floating point.
    """
    root = np.sqrt(_probs(pi))
    if chain.is_sparse:
        B = sp.diags(root) @ chain.matrix @ sp.diags(1.0 / root)
        return sp.csr_matrix(0.5 * (B + B.T))
    B = root[:, None] * chain.matrix / root[None, :]
    return 0.5 * (B + B.T)


def _deflated_power(S, top, tol=EIGEN_TOL, max_iter=200_000, seed=0):
    """Second eigenpair of a symmetric ``S`` with top eigenvector ``top``.

    Iterates ``(S + I)/2``, whose spectrum lies in [0, 1], on the orthogonal
    complement of ``top``.
    """
    n = top.size
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v -= (top @ v) * top
    v /= np.linalg.norm(v)
    theta = 0.0
    res = np.inf
    for _ in range(max_iter):
        w = 0.5 * (np.asarray(S @ v).ravel() + v)
        w -= (top @ w) * top
        theta = float(v @ w)
        res = float(np.linalg.norm(w - theta * v))
        if res <= tol:
            return 2.0 * theta - 1.0, v
        v = w / np.linalg.norm(w)
    raise EigenFailed(f"deflated power iteration stalled, residual {res:.3e}", residual=res)


def second_eigenpair(chain: Chain, pi) -> tuple[float, np.ndarray]:
    """Second-largest eigenvalue of the symmetrized reversibilization and a
    unit eigenvector in the symmetrized coordinates."""
    S = symmetrized_reversibilization(chain, pi)
    if sp.issparse(S):
        return _deflated_power(S, np.sqrt(_probs(pi)))
    vals, vecs = np.linalg.eigh(S)
    return float(vals[-2]), vecs[:, -2]


def poincare_constant(chain: Chain, pi) -> float:
    """Spectral gap ``1 - lambda_2`` of ``(K + K*)/2``."""
    lam2, _ = second_eigenpair(chain, pi)
    return _gap(lam2)


def _gap(lam2):
    if lam2 < -1.0 - EIGEN_TOL or lam2 > 1.0 + EIGEN_TOL:
        raise EigenFailed(f"second eigenvalue {lam2!r} outside [-1, 1]")
    lam2 = min(max(lam2, -1.0), 1.0)
    return 1.0 - lam2


def _flow(chain, pi):
    return _probs(pi)[:, None] * chain.dense()


def _subset_table(block):
    """Rows ``(mass, inner)`` for every subset of the states in ``block``.

    ``block`` is a square flow matrix restricted to some states; subsets are
    indexed by bitmask over those states.
    """
    m = block.shape[0]
    bits = ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1).astype(np.float64)
    inner = np.einsum("ij,jk,ik->i", bits, block, bits)
    return bits, inner


def cheeger_exact(chain: Chain, pi) -> float:
    """Exact isoperimetric constant by enumerating all cuts.

    State ``n-1`` is pinned to the complement, so every unordered cut
    ``{A, A^c}`` is visited once.  The free states are split in two halves;
    per-half subset tables combine through one matrix product for the cross
    terms.  The flow out of ``A`` equals ``pi(A)`` minus the flow inside ``A``.
    """
    n = chain.n
    if n > CHEEGER_EXACT_MAX:
        raise TooLargeForExact(f"exact enumeration capped at {CHEEGER_EXACT_MAX} states, got {n}")
    p = _probs(pi)
    F = _flow(chain, p)
    free = n - 1
    lo_n = free // 2
    lo = np.arange(lo_n)
    hi = np.arange(lo_n, free)
    bits_lo, inner_lo = _subset_table(F[np.ix_(lo, lo)])
    bits_hi, inner_hi = _subset_table(F[np.ix_(hi, hi)])
    mass_lo = bits_lo @ p[lo]
    mass_hi = bits_hi @ p[hi]
    G = F[np.ix_(lo, hi)] + F[np.ix_(hi, lo)].T
    cross = bits_lo @ G @ bits_hi.T

    mass = mass_lo[:, None] + mass_hi[None, :]
    inner = inner_lo[:, None] + inner_hi[None, :] + cross
    cut = mass - inner
    rest = 1.0 - mass
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = cut / np.minimum(mass, rest)
    ratio[0, 0] = np.inf  # empty set
    return float(ratio.min())


def cheeger_sweep_bound(chain: Chain, pi, *, eigvec=None) -> float:
    """Upper bound on the isoperimetric constant from prefix cuts along the
    second eigenvector (in the ``pi``-weighted coordinates)."""
    p = _probs(pi)
    if eigvec is None:
        _, eigvec = second_eigenpair(chain, p)
    f = np.asarray(eigvec) / np.sqrt(p)
    order = np.argsort(f, kind="stable")
    pos = np.empty(chain.n, dtype=np.int64)
    pos[order] = np.arange(chain.n)

    F = sp.csr_matrix(sp.diags(p) @ chain.csr)
    G = sp.csr_matrix(F + F.T)
    G.setdiag(0)
    G.eliminate_zeros()
    diag = F.diagonal()
    mass = 0.0
    inner = 0.0
    best = np.inf
    for k, v in enumerate(order[:-1]):
        start, end = G.indptr[v], G.indptr[v + 1]
        nbrs = G.indices[start:end]
        earlier = pos[nbrs] < k
        inner += diag[v] + G.data[start:end][earlier].sum()
        mass += p[v]
        cut = mass - inner
        best = min(best, cut / min(mass, 1.0 - mass))
    return float(best)


def spectral_summary(chain: Chain, pi=None) -> SpectralSummary:
    if pi is None:
        pi = stationary_distribution(chain)
    if not isinstance(pi, Distribution):
        pi = Distribution(np.asarray(pi, dtype=np.float64))
    lam2, vec = second_eigenpair(chain, pi)
    gamma = _gap(lam2)
    if chain.n <= CHEEGER_EXACT_MAX:
        phi, exact = cheeger_exact(chain, pi), True
    else:
        phi, exact = cheeger_sweep_bound(chain, pi, eigvec=vec), False
    m = chain.metrics
    return SpectralSummary(
        pi=pi,
        p_min=float(pi.probs.min()),
        gamma=gamma,
        phi=phi,
        phi_exact=exact,
        delta=m.delta,
        diameter=m.diameter,
        c=m.lip_constant_c,
    )


__all__ = [
    "SpectralSummary",
    "stationary_distribution",
    "pi_adjoint",
    "symmetrized_reversibilization",
    "second_eigenpair",
    "poincare_constant",
    "cheeger_exact",
    "cheeger_sweep_bound",
    "spectral_summary",
    "DENSE_LIMIT",
]
