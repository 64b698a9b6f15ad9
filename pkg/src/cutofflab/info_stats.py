"""Total variation, relative entropy and varentropy, their worst-case
profiles over starting states, and the mixing-time solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .chain import Chain
from .errors import BracketFailed, InvalidParams, ZeroMassState
from .heat_kernel import Distribution, default_tol, heat_kernel_row, heat_kernels
from .spectral import poincare_constant

TIE_TOL = 1e-12


def _vec(x):
    return np.asarray(x.probs if isinstance(x, Distribution) else x, dtype=np.float64)


def _log_ratio(mu, pi):
    # log mu - log pi rather than log(mu/pi): the quotient can underflow
    with np.errstate(divide="ignore"):
        return np.where(mu > 0, np.log(np.where(mu > 0, mu, 1.0)) - np.log(pi), 0.0)


def tv_distance(mu, nu) -> float:
    mu, nu = _vec(mu), _vec(nu)
    if mu.shape != nu.shape:
        raise InvalidParams("distributions have different lengths")
    return float(0.5 * np.abs(mu - nu).sum())


def kl_divergence(mu, pi) -> float:
    """``sum mu log(mu/pi)`` in nats, with ``0 log 0 = 0``."""
    mu, pi = _vec(mu), _vec(pi)
    return float(np.sum(mu * _log_ratio(mu, pi)))


def varentropy(mu, pi) -> float:
    """Variance under ``mu`` of ``log(mu/pi)``; two-pass (mean, then centered)."""
    mu, pi = _vec(mu), _vec(pi)
    h = _log_ratio(mu, pi)
    mean = np.sum(mu * h)
    return float(np.sum(np.where(mu > 0, mu * (h - mean) ** 2, 0.0)))


def row_statistics(rows: np.ndarray, pi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """TV, KL and varentropy of every row of ``rows`` against ``pi``."""
    rows = np.asarray(rows, dtype=np.float64)
    pi = _vec(pi)
    tv = 0.5 * np.abs(rows - pi[None, :]).sum(axis=1)
    h = _log_ratio(rows, pi[None, :])
    kl = np.sum(rows * h, axis=1)
    vkl = np.sum(np.where(rows > 0, rows * (h - kl[:, None]) ** 2, 0.0), axis=1)
    return tv, kl, vkl


@dataclass(frozen=True)
class ProfilePoint:
    t: float
    dtv: float
    dkl: float
    vkl: float
    argmax_tv: int
    argmax_kl: int
    argmax_vkl: int
    mass_defect: float = 0.0


@dataclass(frozen=True)
class MixingTimeResult:
    epsilon: float
    t_mix: float
    bracket_width: float
    dtv_at_t: float
    t_upper_bound: float = 0.0
    profile: Optional[ProfilePoint] = field(default=None, compare=False)


def _first_max(v) -> int:
    """Smallest index whose value is within rounding (1e-12 relative) of the
    maximum, so symmetric origins tie the same way on every platform."""
    top = v.max()
    return int(np.flatnonzero(v >= top - TIE_TOL * max(1.0, abs(top)))[0])


def _point(hk, pi) -> ProfilePoint:
    tv, kl, vkl = row_statistics(hk.probs, pi)
    i, j, k = _first_max(tv), _first_max(kl), _first_max(vkl)
    return ProfilePoint(
        t=hk.t,
        dtv=float(min(max(tv.max(), 0.0), 1.0)),
        dkl=float(max(kl.max(), 0.0)),
        vkl=float(max(vkl.max(), 0.0)),
        argmax_tv=int(hk.origins[i]),
        argmax_kl=int(hk.origins[j]),
        argmax_vkl=int(hk.origins[k]),
        mass_defect=hk.mass_defect,
    )


def profile(
    chain: Chain,
    pi,
    times: Sequence[float],
    tol: Optional[float] = None,
    origins: Optional[Sequence[int]] = None,
) -> list[ProfilePoint]:
    """Worst-case statistics at each time, one heat-kernel pass for all."""
    pi = _vec(pi)
    return [_point(hk, pi) for hk in heat_kernels(chain, times, origins, tol)]


def worst_case_profile(chain: Chain, pi, t: float, tol=None, origins=None) -> ProfilePoint:
    return profile(chain, pi, [t], tol, origins)[0]


def mixing_time_upper_bound(gamma: float, p: float, epsilon: float) -> float:
    """Spectral upper bound ``log(1/(4 p eps^2)) / (2 gamma)`` on the mixing time."""
    return math.log(1.0 / (4.0 * p * epsilon * epsilon)) / (2.0 * gamma)


def mixing_times(
    chain: Chain,
    pi,
    epsilons: Sequence[float],
    t_tol: Optional[float] = None,
    *,
    gamma: Optional[float] = None,
    tol: Optional[float] = None,
    origins: Optional[Sequence[int]] = None,
    points_per_pass: int = 15,
    max_doublings: int = 60,
) -> list[MixingTimeResult]:
    """Solve ``t_mix(eps)`` for several thresholds at once.

    Each bracket starts as ``[0, T]`` with ``T`` the spectral upper bound
    (doubled if numerics disagree) and is cut into ``points_per_pass + 1``
    pieces per pass; all brackets share one batched heat-kernel evaluation per
    pass.  ``points_per_pass=1`` is plain bisection.  The reported time is the
    bracket midpoint, and ``dtv_at_t`` is measured there.
    """
    pi = _vec(pi)
    eps_list = [float(e) for e in epsilons]
    for e in eps_list:
        if not 0.0 < e < 1.0:
            raise InvalidParams(f"epsilon must lie in (0, 1), got {e}")
    if gamma is None:
        gamma = poincare_constant(chain, pi)
    p = float(pi.min())

    def dtv(times):
        return {pt.t: pt.dtv for pt in profile(chain, pi, times, tol, origins)}

    start = profile(chain, pi, [0.0], tol, origins)[0]
    brackets = {}
    done = {}
    for e in eps_list:
        if e in done or e in brackets:
            continue
        if start.dtv <= e:
            done[e] = MixingTimeResult(e, 0.0, 0.0, start.dtv, 0.0, start)
            continue
        upper = mixing_time_upper_bound(gamma, p, e)
        width_tol = t_tol if t_tol is not None else 1e-8 * max(1.0, upper)
        brackets[e] = [0.0, upper, width_tol, upper]

    for _ in range(max_doublings + 1):
        values = dtv(sorted({b[1] for b in brackets.values()}))
        unsettled = [e for e, b in brackets.items() if values[b[1]] > e]
        if not unsettled:
            break
        for e in unsettled:
            b = brackets[e]
            b[0], b[1] = b[1], 2.0 * b[1]
    else:
        raise BracketFailed(f"d_TV stays above epsilon after {max_doublings} doublings")

    while True:
        active = [e for e, b in brackets.items() if b[1] - b[0] > b[2]]
        if not active:
            break
        grids = {}
        for e in active:
            lo, hi = brackets[e][:2]
            step = (hi - lo) / (points_per_pass + 1)
            grids[e] = [lo + j * step for j in range(1, points_per_pass + 1)]
        values = dtv(sorted({t for g in grids.values() for t in g}))
        for e in active:
            b = brackets[e]
            prev = b[0]
            for t in grids[e]:
                if values[t] <= e:
                    b[1] = t
                    break
                prev = t
            b[0] = prev

    mids = {e: 0.5 * (b[0] + b[1]) for e, b in brackets.items()}
    points = {pt.t: pt for pt in profile(chain, pi, sorted(set(mids.values())), tol, origins)}
    for e, b in brackets.items():
        pt = points[mids[e]]
        done[e] = MixingTimeResult(e, mids[e], b[1] - b[0], pt.dtv, b[3], pt)
    return [done[e] for e in eps_list]


def mixing_time(chain: Chain, pi, epsilon: float, t_tol: Optional[float] = None, **kw) -> MixingTimeResult:
    return mixing_times(chain, pi, [epsilon], t_tol, **kw)[0]


def entropy_dissipation(chain: Chain, pi, origin: int, t: float, tol: Optional[float] = None) -> float:
    """``-d/dt d_KL(P_t(o, .), pi)``, evaluated as
    ``sum_{x,y} P_t(o,x) K(x,y) (h(x) - h(y))`` with ``h = log(P_t(o,.)/pi)``.

    Raises :class:`ZeroMassState` if some state carries less mass than the
    heat-kernel tolerance, where the log ratio is not certified.
    """
    if tol is None:
        tol = default_tol(chain)
    mu = heat_kernel_row(chain, origin, t, tol).probs
    pi = _vec(pi)
    low = int(np.argmin(mu))
    if mu[low] <= tol:
        raise ZeroMassState(origin, low, float(mu[low]))
    h = np.log(mu) - np.log(pi)
    if chain.is_sparse:
        K = chain.csr
        rows = np.repeat(np.arange(chain.n), np.diff(K.indptr))
        per_state = np.bincount(rows, weights=K.data * (h[rows] - h[K.indices]), minlength=chain.n)
    else:
        per_state = np.sum(chain.matrix * (h[:, None] - h[None, :]), axis=1)
    return float(mu @ per_state)
