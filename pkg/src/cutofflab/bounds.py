"""Quantitative mixing inequalities as mechanical checks on a concrete chain.

Every check returns :class:`BoundReport` objects oriented so that the
inequality reads ``lhs <= rhs``.  A check whose hypotheses fail is SKIPPED
with a machine-readable ``reason``, never FAILED.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import ChainAnalysis
from .chain import Chain, lipschitz_norm
from .errors import DegenerateThreshold, InvalidParams, ZeroMassState
from .info_stats import _log_ratio

SLACK_TOL = 1e-9

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"

# Fixed output order of a verification run.
BOUND_IDS = (
    "window_width",
    "mixing_time_lower",
    "mixing_time_upper",
    "p_control",
    "heat_kernel_lipschitz",
    "entropy_time_regularity",
    "heat_kernel_uniform_lower",
    "heat_kernel_uniform_upper",
    "reversed_pinsker",
    "cheeger_lower",
    "cheeger_upper",
    "density_tail_upper",
    "density_tail_lower",
)


@dataclass(frozen=True)
class BoundReport:
    bound_id: str
    lhs: float
    rhs: float
    slack: float
    status: str
    preconditions_met: bool
    note: str = ""
    reason: str = ""
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def to_dict(self) -> dict:
        return {
            "bound_id": self.bound_id,
            "inputs": dict(self.inputs),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "status": self.status,
            "pass": self.passed,
            "preconditions_met": self.preconditions_met,
            "reason": self.reason,
            "note": self.note,
        }


def make_report(bound_id, lhs, rhs, *, inputs=None, note="", slack_tol=SLACK_TOL) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    slack = rhs - lhs
    ok = slack >= -slack_tol * max(1.0, abs(rhs))
    return BoundReport(bound_id, lhs, rhs, slack, PASS if ok else FAIL, True, note, "", dict(inputs or {}))


def skipped(bound_id, reason, note, inputs=None) -> BoundReport:
    nan = float("nan")
    return BoundReport(bound_id, nan, nan, nan, SKIPPED, False, note, reason, dict(inputs or {}))


def _analysis(chain, pi, analysis) -> ChainAnalysis:
    if analysis is not None:
        return analysis
    return ChainAnalysis(chain, pi)


def entropy_tail_function(u):
    """``F(u) = log u + 1/u - 1``: zero at 1, decreasing on (0, 1], increasing after."""
    u = np.asarray(u, dtype=np.float64)
    return np.log(u) + 1.0 / u - 1.0


def pinsker_ratio(u):
    """``g(u) = u log u / (u - 1)``, extended by continuity (``g(1) = 1``)."""
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(u == 1.0, 1.0, u * np.log(u) / (u - 1.0))
    return out


def reversed_pinsker_coefficient(p: float) -> float:
    """``g(1/p) = log(1/p) / (1 - p)``."""
    return math.log(1.0 / p) / (1.0 - p)


# -- individual checks ---------------------------------------------------------

def window_report(epsilon, t_late, t_early, vkl_early, gamma, *, widths=None, inputs=None, slack_tol=SLACK_TOL):
    """Window width ``t_mix(eps) - t_mix(1-eps)`` against
    ``2 / (gamma eps^2) * (1 + sqrt(V_KL(t_mix(1-eps))))``."""
    inputs = {"epsilon": epsilon, **(inputs or {})}
    if not 0.0 < epsilon < 0.5:
        return skipped("window_width", "epsilon-range", "requires 0 < epsilon < 1/2", inputs)
    lhs = t_late - t_early
    rhs = 2.0 / (gamma * epsilon ** 2) * (1.0 + math.sqrt(vkl_early))
    note = f"V_KL={vkl_early:.6g}"
    if widths is not None:
        note += f"; t_mix brackets {widths[0]:.2e}/{widths[1]:.2e}"
    return make_report("window_width", lhs, rhs, inputs=inputs, note=note, slack_tol=slack_tol)


def check_window_bound(chain: Chain, pi, epsilon: float, *, analysis=None, slack_tol=SLACK_TOL):
    if not 0.0 < epsilon < 0.5:
        return window_report(epsilon, 0.0, 0.0, 0.0, 1.0)
    a = _analysis(chain, pi, analysis)
    mix = a.mixing([epsilon, 1.0 - epsilon])
    late, early = mix[epsilon], mix[1.0 - epsilon]
    return window_report(
        epsilon, late.t_mix, early.t_mix, early.profile.vkl, a.gamma,
        widths=(late.bracket_width, early.bracket_width), slack_tol=slack_tol,
    )


def check_mixing_time_bounds(chain: Chain, pi, epsilon: float, *, analysis=None, slack_tol=SLACK_TOL):
    """Diameter lower bound and spectral upper bound on ``t_mix(epsilon)``.

    The upper bound ``log(1/(4 p eps^2)) / (2 gamma)`` is negative once
    ``4 p eps^2 > 1``; then ``t_mix = 0`` and the stated form cannot hold, so
    that side is skipped with reason ``negative-log``.
    """
    inputs = {"epsilon": epsilon}
    if not 0.0 < epsilon < 1.0:
        raise InvalidParams(f"epsilon must lie in (0, 1), got {epsilon}")
    a = _analysis(chain, pi, analysis)
    t = a.mixing([epsilon])[epsilon].t_mix
    diam = a.metrics.diameter
    lower_lhs = 0.5 * diam - math.sqrt(2.0 * t / (1.0 - epsilon)) - math.sqrt(2.0 / (a.gamma * (1.0 - epsilon)))
    note = "vacuous (negative bound)" if lower_lhs <= 0 else ""
    lower = make_report("mixing_time_lower", lower_lhs, t, inputs=inputs, note=note, slack_tol=slack_tol)
    if 4.0 * a.p * epsilon ** 2 >= 1.0:
        upper = skipped(
            "mixing_time_upper", "negative-log",
            f"4 p eps^2 = {4.0 * a.p * epsilon ** 2:.6g} >= 1: bound is not positive", inputs,
        )
    else:
        rhs = math.log(1.0 / (4.0 * a.p * epsilon ** 2)) / (2.0 * a.gamma)
        upper = make_report("mixing_time_upper", t, rhs, inputs=inputs, slack_tol=slack_tol)
    return lower, upper


def check_p_control(chain: Chain, pi, *, analysis=None, slack_tol=SLACK_TOL):
    a = _analysis(chain, pi, analysis)
    delta = a.metrics.delta
    if delta > 0.5:
        return skipped("p_control", "delta-above-half", f"requires delta <= 1/2, got {delta:.6g}")
    lhs = math.log(1.0 / a.p)
    rhs = 3.0 * a.metrics.diameter * math.log(1.0 / delta)
    return make_report("p_control", lhs, rhs, slack_tol=slack_tol)


def _regime(a, t):
    return t >= a.metrics.diameter / 4.0


def _regime_skip(bound_id, a, inputs):
    return skipped(bound_id, "t-below-diam/4", f"requires t >= diam/4 = {a.metrics.diameter / 4.0:.6g}", inputs)


def _rows(a, hk, origin):
    if origin is None:
        return hk.probs, hk.origins
    idx = np.flatnonzero(hk.origins == origin)
    if idx.size == 0:
        raise InvalidParams(f"origin {origin} not in the analysed origin set")
    return hk.probs[idx], hk.origins[idx]


def check_lipschitz_regularity(chain: Chain, pi, origin: Optional[int], t: float, *, analysis=None, slack_tol=SLACK_TOL):
    """Lipschitz norm of ``log(P_t(o,.)/pi)`` against ``c = 3 log(e/delta)``.

    ``origin=None`` checks every origin and reports the worst one.
    """
    a = _analysis(chain, pi, analysis)
    inputs = {"t": t, "origin": origin}
    bid = "heat_kernel_lipschitz"
    if not _regime(a, t):
        return _regime_skip(bid, a, inputs)
    try:
        hk = a.certified_kernel(t)
    except ZeroMassState as exc:
        return skipped(bid, "zero-mass", str(exc), inputs)
    rows, origins = _rows(a, hk, origin)
    logpi = np.log(a.pi.probs)
    norms = [lipschitz_norm(chain, np.log(r) - logpi) for r in rows]
    worst = int(np.argmax(norms))
    inputs["origin"] = int(origins[worst])
    note = f"worst of {len(norms)} origins" if origin is None else ""
    return make_report(bid, norms[worst], a.metrics.lip_constant_c, inputs=inputs, note=note, slack_tol=slack_tol)


def check_entropy_time_regularity(chain: Chain, pi, t: float, s: float, *, analysis=None, slack_tol=SLACK_TOL):
    a = _analysis(chain, pi, analysis)
    inputs = {"t": t, "s": s}
    bid = "entropy_time_regularity"
    if s < 0:
        raise InvalidParams(f"s must be >= 0, got {s}")
    if not _regime(a, t):
        return _regime_skip(bid, a, inputs)
    now, later = a.points([t, t + s])
    rhs = later.dkl + a.metrics.lip_constant_c * s
    return make_report(bid, now.dkl, rhs, inputs=inputs, slack_tol=slack_tol)


def check_uniform_heat_kernel(chain: Chain, pi, t: float, *, analysis=None, slack_tol=SLACK_TOL):
    """Two-sided bound ``-c diam <= log(P_t(o,x)/pi(x)) <= log(1/p)`` over all pairs."""
    a = _analysis(chain, pi, analysis)
    inputs = {"t": t}
    ids = ("heat_kernel_uniform_lower", "heat_kernel_uniform_upper")
    if not _regime(a, t):
        return tuple(_regime_skip(b, a, inputs) for b in ids)
    try:
        hk = a.certified_kernel(t)
    except ZeroMassState as exc:
        return tuple(skipped(b, "zero-mass", str(exc), inputs) for b in ids)
    ratios = np.log(hk.probs) - np.log(a.pi.probs)[None, :]
    lo = np.unravel_index(int(np.argmin(ratios)), ratios.shape)
    hi = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    m = a.metrics
    lower = make_report(
        ids[0], -m.lip_constant_c * m.diameter, ratios[lo],
        inputs={**inputs, "origin": int(hk.origins[lo[0]]), "state": int(lo[1])}, slack_tol=slack_tol,
    )
    upper = make_report(
        ids[1], ratios[hi], math.log(1.0 / a.p),
        inputs={**inputs, "origin": int(hk.origins[hi[0]]), "state": int(hi[1])}, slack_tol=slack_tol,
    )
    return lower, upper


def check_reversed_pinsker(chain: Chain, pi, t: float, *, analysis=None, slack_tol=SLACK_TOL):
    a = _analysis(chain, pi, analysis)
    pt = a.point(t)
    rhs = reversed_pinsker_coefficient(a.p) * pt.dtv
    return make_report("reversed_pinsker", pt.dkl, rhs, inputs={"t": t}, slack_tol=slack_tol)


def check_cheeger(chain: Chain, pi, *, analysis=None, slack_tol=SLACK_TOL):
    a = _analysis(chain, pi, analysis)
    sp_ = a.spectral
    ids = ("cheeger_lower", "cheeger_upper")
    if not sp_.phi_exact:
        return tuple(skipped(b, "phi-not-exact", "isoperimetric constant is only a sweep-cut bound") for b in ids)
    note = f"phi={sp_.phi:.15g}, gamma={sp_.gamma:.15g}"
    lower = make_report(ids[0], sp_.phi ** 2 / 2.0, sp_.gamma, note=note, slack_tol=slack_tol)
    upper = make_report(ids[1], sp_.gamma, 2.0 * sp_.phi, note=note, slack_tol=slack_tol)
    return lower, upper


# Z is compared to its thresholds with this relative fuzz, counted inclusively,
# so the measured tail probabilities can only be overestimated.
_EVENT_FUZZ = 1e-12


def density_tails(mu, pi, p: float, theta: float):
    """``(P(Z >= p^-theta), P(Z <= p^theta), d_KL)`` for ``Z = mu(X)/pi(X)``, ``X ~ mu``."""
    mu = np.asarray(mu, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    h = _log_ratio(mu, pi)
    kl = float(np.sum(mu * h))
    support = mu > 0
    log_thr = theta * math.log(1.0 / p)
    up = float(mu[support & (h >= log_thr - _EVENT_FUZZ * log_thr)].sum())
    down = float(mu[support & (h <= -log_thr + _EVENT_FUZZ * log_thr)].sum())
    return up, down, kl


def check_density_tail_bounds(chain: Chain, pi, origin: Optional[int], t: float, theta: float, *, analysis=None, slack_tol=SLACK_TOL):
    """Markov-inequality tails of the density ``Z`` through ``F``.

    ``P(Z >= p^-theta) <= d_KL / F(p^-theta)`` and
    ``P(Z <= p^theta) <= d_KL / F(p^theta)``.  ``origin=None`` checks every
    origin and reports the worst slack on each side.
    """
    if theta <= 0:
        raise InvalidParams(f"theta must be > 0, got {theta}")
    a = _analysis(chain, pi, analysis)
    p = a.p
    low_thr = p ** theta
    if low_thr >= 1.0 - 1e-12:
        raise DegenerateThreshold(f"p^theta = {low_thr!r} is 1 within tolerance")
    f_up = float(entropy_tail_function(1.0 / low_thr))
    f_down = float(entropy_tail_function(low_thr))
    hk = a.kernel(t)
    rows, origins = _rows(a, hk, origin)
    best = [None, None]
    for row, o in zip(rows, origins):
        up, down, kl = density_tails(row, a.pi.probs, p, theta)
        for side, (lhs, f) in enumerate(((up, f_up), (down, f_down))):
            rhs = kl / f
            if best[side] is None or rhs - lhs < best[side][1] - best[side][0]:
                best[side] = (lhs, rhs, int(o))
    note = f"worst of {len(origins)} origins" if origin is None else ""
    out = []
    for bid, (lhs, rhs, o) in zip(("density_tail_upper", "density_tail_lower"), best):
        out.append(make_report(bid, lhs, rhs, inputs={"t": t, "theta": theta, "origin": o}, note=note, slack_tol=slack_tol))
    return tuple(out)


# -- verification run ------------------------------------------------------------

@dataclass(frozen=True)
class VerifyGrid:
    """Evaluation grid.  ``None`` entries are filled from the chain:
    ``t`` from diam/4 and the mixing times, ``s`` from ``t_mix(1/4)``."""

    epsilons: Sequence[float] = (0.25, 0.5, 0.75)
    times: Optional[Sequence[float]] = None
    shifts: Optional[Sequence[float]] = None
    thetas: Sequence[float] = (0.25, 0.5, 1.0)


def default_times(a: ChainAnalysis) -> tuple[list, list]:
    mix = a.mixing([0.75, 0.5, 0.25])
    t14 = mix[0.25].t_mix
    times = [a.metrics.diameter / 4.0, mix[0.75].t_mix, mix[0.5].t_mix, t14, 2.0 * t14]
    shifts = [0.0, 0.1, 1.0, t14]
    return times, shifts


def verify(chain: Chain, pi=None, grid: Optional[VerifyGrid] = None, *, analysis=None, slack_tol=SLACK_TOL) -> list[BoundReport]:
    """Run every check over the grid; reports come back in ``BOUND_IDS`` order."""
    a = analysis or ChainAnalysis(chain, pi)
    grid = grid or VerifyGrid()
    times, shifts = default_times(a)
    if grid.times is not None:
        times = list(grid.times)
    if grid.shifts is not None:
        shifts = list(grid.shifts)
    times = list(dict.fromkeys(float(t) for t in times))
    shifts = list(dict.fromkeys(float(s) for s in shifts))
    eps = list(dict.fromkeys(float(e) for e in grid.epsilons))
    # 1 - eps rounded to 15 digits so that 0.8 pairs with 0.2, not 0.19999999999999996
    pairs = sorted({e for e in eps if e < 0.5} | {float(f"{1.0 - e:.15g}") for e in eps if e > 0.5})
    a.mixing(eps + [1.0 - e for e in pairs])
    a.kernels(times + [t + s for t in times for s in shifts])

    kw = {"analysis": a, "slack_tol": slack_tol}
    out = []
    for e in pairs:
        out.append(check_window_bound(chain, a.pi, e, **kw))
    lowers, uppers = zip(*(check_mixing_time_bounds(chain, a.pi, e, **kw) for e in eps))
    out += lowers + uppers
    out.append(check_p_control(chain, a.pi, **kw))
    out += [check_lipschitz_regularity(chain, a.pi, None, t, **kw) for t in times]
    out += [check_entropy_time_regularity(chain, a.pi, t, s, **kw) for t in times for s in shifts]
    lo, hi = zip(*(check_uniform_heat_kernel(chain, a.pi, t, **kw) for t in times))
    out += lo + hi
    out += [check_reversed_pinsker(chain, a.pi, t, **kw) for t in times]
    out += check_cheeger(chain, a.pi, **kw)
    tails = [check_density_tail_bounds(chain, a.pi, None, t, th, **kw) for t in times for th in grid.thetas]
    out += [r[0] for r in tails] + [r[1] for r in tails]
    order = {b: i for i, b in enumerate(BOUND_IDS)}
    return sorted(out, key=lambda r: order[r.bound_id])
