"""Continuous-time heat kernel ``P_t = exp(t(K - I))`` by uniformization.

``P_t(o, .) = sum_k Poisson(t; k) (delta_o K^k)``, truncated at the smallest
``N`` whose Poisson upper tail is at most ``tol``.  The dropped tail is
reported as ``mass_defect`` and never redistributed.

Summation order is fixed (ascending ``k``), and a time evaluated inside a
batch goes through exactly the same floating-point operations as when it is
evaluated alone, so results do not depend on how times are grouped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special

from .chain import DENSE_LIMIT, Chain
from .errors import InvalidParams, ToleranceUnreachable

MAX_TERMS = 1_000_000
MIN_TOL = 1e-300
# per-batch budget for the accumulators, in float64 entries
_BATCH_ENTRIES = 1 << 25


def default_tol(chain: Chain) -> float:
    return 1e-12 if chain.n <= DENSE_LIMIT else 1e-10


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector with a certified bound on its missing mass."""

    probs: np.ndarray
    mass_defect: float = 0.0

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class HeatKernel:
    """Rows ``P_t(o, .)`` for the origins in ``origins``."""

    t: float
    probs: np.ndarray
    origins: np.ndarray
    mass_defect: float

    def row(self, i: int) -> Distribution:
        return Distribution(self.probs[i], self.mass_defect)


def poisson_truncation(t: float, tol: float, max_terms: int = MAX_TERMS) -> tuple[int, float]:
    """Smallest ``N`` with ``P(Poisson(t) > N) <= tol``, and that tail mass."""
    if t == 0:
        return 0, 0.0
    hi = int(t + 12.0 * math.sqrt(t) + 40)
    while True:
        upper = min(hi, max_terms + 1)
        tails = special.pdtrc(np.arange(upper + 1), t)
        hit = np.flatnonzero(tails <= tol)
        if hit.size:
            n_terms = int(hit[0])
            if n_terms > max_terms:
                break
            return n_terms, float(tails[n_terms])
        if upper > max_terms:
            break
        hi *= 2
    raise ToleranceUnreachable(
        f"t={t}: Poisson tail stays above tol={tol} for {max_terms} terms"
    )


def poisson_weights(t: float, n_terms: int) -> np.ndarray:
    """Poisson(t) probabilities for ``k = 0..n_terms``.

    Log weights are anchored at the mode and extended outward by the ratio
    recurrence ``w(k+1)/w(k) = t/(k+1)``, whose increments are small near the
    bulk, so rounding does not accumulate where the mass is.  The anchor
    itself is a difference of large numbers when ``t`` is large; the common
    scale is corrected so the weights sum to ``P(Poisson(t) <= n_terms)``.
    """
    if t == 0:
        return np.ones(1)
    k = np.arange(n_terms + 1, dtype=np.float64)
    mode = min(int(math.floor(t)), n_terms)
    logw = np.empty(n_terms + 1)
    logw[mode] = -t + mode * math.log(t) - special.gammaln(mode + 1)
    if mode < n_terms:
        steps = math.log(t) - np.log(k[mode + 1:])
        logw[mode + 1:] = logw[mode] + np.cumsum(steps)
    if mode > 0:
        # w(k-1) = w(k) * k / t, walking down from the mode
        steps = np.log(k[mode:0:-1]) - math.log(t)
        logw[mode - 1::-1] = logw[mode] + np.cumsum(steps)
    w = np.exp(logw)
    return w * (special.pdtr(n_terms, t) / w.sum())


def _check_times(times):
    out = []
    for t in times:
        t = float(t)
        if not math.isfinite(t) or t < 0:
            raise InvalidParams(f"time must be finite and >= 0, got {t}")
        out.append(t)
    return out


def _hypercube_rows(chain: Chain, times, origins):
    d = int(chain.meta["dim"])
    rate = (1.0 - float(chain.meta.get("laziness", 0.0))) / d
    states = np.arange(chain.n, dtype=np.uint64)
    hamming = np.bitwise_count(states[None, :] ^ origins.astype(np.uint64)[:, None]).astype(np.int64)
    out = []
    for t in times:
        x = 2.0 * rate * t
        q_diff = -np.expm1(-x) / 2.0
        q_same = 1.0 - q_diff
        # 0**0 = 1 covers t = 0
        probs = np.power(q_same, d - hamming) * np.power(q_diff, hamming)
        out.append(HeatKernel(t, probs, origins, 0.0))
    return out


def heat_kernels(
    chain: Chain,
    times: Iterable[float],
    origins: Optional[Sequence[int]] = None,
    tol: Optional[float] = None,
    *,
    max_terms: int = MAX_TERMS,
    fast_path: bool = True,
) -> list[HeatKernel]:
    """Heat-kernel rows for every time in ``times`` with one pass over ``K^k``.

    ``origins`` defaults to all states.  With ``fast_path`` and a chain
    flagged as a hypercube, the closed product form is used instead.
    """
    times = _check_times(times)
    if tol is None:
        tol = default_tol(chain)
    if not 0 < tol <= 1e-6 or tol < MIN_TOL:
        raise InvalidParams(f"tol must lie in (0, 1e-6], got {tol}")
    n = chain.n
    if origins is None:
        origins = np.arange(n)
    origins = np.asarray(origins, dtype=np.int64).ravel()
    if origins.size and (origins.min() < 0 or origins.max() >= n):
        raise InvalidParams("origin out of range")
    if not times:
        return []
    if fast_path and chain.meta.get("product_form") == "hypercube":
        return _hypercube_rows(chain, times, origins)

    per_time = max(1, origins.size * n)
    group = max(1, _BATCH_ENTRIES // per_time)
    if len(times) > group:
        out = []
        for start in range(0, len(times), group):
            out.extend(
                heat_kernels(chain, times[start:start + group], origins, tol,
                             max_terms=max_terms, fast_path=fast_path)
            )
        return out

    plans = [poisson_truncation(t, tol, max_terms) for t in times]
    weights = [poisson_weights(t, n_terms) for t, (n_terms, _) in zip(times, plans)]
    top = max(n_terms for n_terms, _ in plans)

    K = chain.matrix
    cur = np.zeros((origins.size, n))
    cur[np.arange(origins.size), origins] = 1.0
    accs = [w[0] * cur for w in weights]
    for k in range(1, top + 1):
        cur = np.asarray(cur @ K)
        for acc, w in zip(accs, weights):
            if k < w.size and w[k] != 0.0:
                acc += w[k] * cur
    out = []
    for t, acc, (_, defect) in zip(times, accs, plans):
        assert defect <= tol
        out.append(HeatKernel(t, acc, origins, defect))
    return out


def heat_kernel_row(chain: Chain, origin: int, t: float, tol: Optional[float] = None, **kw) -> Distribution:
    hk = heat_kernels(chain, [t], [origin], tol, **kw)[0]
    return hk.row(0)


def heat_kernel_all(chain: Chain, t: float, tol: Optional[float] = None, **kw) -> HeatKernel:
    return heat_kernels(chain, [t], None, tol, **kw)[0]
