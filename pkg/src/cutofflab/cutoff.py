"""Finite-size cutoff diagnostics along a chain family.

For every family member the sweep records the mixing times on an epsilon
grid, the mixing windows, the cutoff ratios ``t_mix(eps')/t_mix(eps)`` and the
varentropy-criterion statistic ``gamma t_mix(eps) / (1 + sqrt(V_KL(t_mix(eps))))``.
:func:`verdict` turns the trends of those numbers into a heuristic label; it
never claims anything about the limit itself.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import ChainAnalysis
from .bounds import BoundReport, skipped, window_report
from .errors import CutoffLabError, InvalidParams
from .families import FamilySpec, generate

DEFAULT_EPS = (0.25, 0.5, 0.75)


def eps_key(e: float) -> str:
    return f"{e:.15g}"


@dataclass
class SweepRecord:
    """One family member.  Per-epsilon maps are keyed by ``eps_key``."""

    size: int
    n: int
    seed: Optional[int] = None
    t_mix: dict = field(default_factory=dict)
    t_mix_width: dict = field(default_factory=dict)
    vkl_at_tmix: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    window_ratio: dict = field(default_factory=dict)
    cutoff_ratio: dict = field(default_factory=dict)
    vc_statistic: dict = field(default_factory=dict)
    gamma: float = float("nan")
    phi: float = float("nan")
    phi_exact: bool = False
    delta: float = float("nan")
    p: float = float("nan")
    diameter: int = 0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "n": self.n,
            "seed": self.seed,
            "t_mix": dict(self.t_mix),
            "t_mix_width": dict(self.t_mix_width),
            "vkl_at_tmix": dict(self.vkl_at_tmix),
            "window": dict(self.window),
            "window_ratio": dict(self.window_ratio),
            "cutoff_ratio": dict(self.cutoff_ratio),
            "vc_statistic": dict(self.vc_statistic),
            "gamma": self.gamma,
            "phi": self.phi,
            "phi_exact": self.phi_exact,
            "delta": self.delta,
            "p": self.p,
            "diameter": self.diameter,
            "error": self.error,
        }


def _check_grid(eps_grid):
    eps = sorted({float(e) for e in eps_grid})
    if not eps or any(not 0.0 < e < 1.0 for e in eps):
        raise InvalidParams(f"epsilon grid must lie in (0, 1), got {eps}")
    if not any(e < 0.5 and (1.0 - e) in eps for e in eps):
        raise InvalidParams("epsilon grid needs a pair (eps, 1 - eps) with eps < 1/2")
    return eps


def analyze_member(spec: FamilySpec, eps_grid: Sequence[float], tol=None, t_tol=None) -> SweepRecord:
    """Full record for one family member; failures are stored, not raised."""
    eps = _check_grid(eps_grid)
    seed = spec.seed if spec.family_id in ("random-regular", "random-symmetric") else None
    rec = SweepRecord(size=spec.size, n=0, seed=seed)
    try:
        chain = generate(spec)
        rec.n = chain.n
        a = ChainAnalysis(chain, tol=tol, t_tol=t_tol)
        s = a.spectral
        rec.gamma, rec.phi, rec.phi_exact = s.gamma, s.phi, s.phi_exact
        rec.delta, rec.p, rec.diameter = s.delta, s.p_min, s.diameter
        mix = a.mixing(eps)
        for e in eps:
            r = mix[e]
            k = eps_key(e)
            rec.t_mix[k] = r.t_mix
            rec.t_mix_width[k] = r.bracket_width
            rec.vkl_at_tmix[k] = r.profile.vkl
            rec.vc_statistic[k] = s.gamma * r.t_mix / (1.0 + math.sqrt(r.profile.vkl))
        half = mix.get(0.5)
        for e in eps:
            if e < 0.5 and (1.0 - e) in mix:
                w = mix[e].t_mix - mix[1.0 - e].t_mix
                rec.window[eps_key(e)] = w
                if half is not None and half.t_mix > 0:
                    rec.window_ratio[eps_key(e)] = w / half.t_mix
        for i, e in enumerate(eps):
            for e2 in eps[i + 1:]:
                base = mix[e].t_mix
                ratio = mix[e2].t_mix / base if base > 0 else float("nan")
                rec.cutoff_ratio[f"{eps_key(e)},{eps_key(e2)}"] = ratio
    except (CutoffLabError, np.linalg.LinAlgError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _member(args):
    return analyze_member(*args)


def sweep(
    family: FamilySpec,
    sizes: Sequence[int],
    eps_grid: Sequence[float] = DEFAULT_EPS,
    *,
    threads: int = 1,
    tol: Optional[float] = None,
    t_tol: Optional[float] = None,
) -> list[SweepRecord]:
    """Analyze every size of ``family``; records come back in size order.

    Each member is a pure function of its spec, so ``threads`` (worker
    processes) changes wall time only.
    """
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidParams(f"sizes must be strictly increasing, got {sizes}")
    eps = _check_grid(eps_grid)
    jobs = [(family.with_size(s, i), eps, tol, t_tol) for i, s in enumerate(sizes)]
    if threads <= 1 or len(jobs) == 1:
        return [_member(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(_member, jobs))


def window_consistency(records: Sequence[SweepRecord], epsilons: Optional[Sequence[float]] = None) -> list[BoundReport]:
    """Window-width bound checked per size from the recorded sweep data."""
    out = []
    for rec in records:
        if epsilons is not None:
            keys = [float(e) for e in epsilons]
        else:
            keys = [float(k) for k in rec.t_mix] or list(DEFAULT_EPS)
        for e in sorted(set(keys)):
            if epsilons is None and not e < 0.5:
                continue
            inputs = {"size": rec.size}
            if not 0.0 < e < 0.5:
                out.append(window_report(e, 0.0, 0.0, 0.0, 1.0, inputs=inputs))
                continue
            late, early = eps_key(e), eps_key(1.0 - e)
            if rec.error is not None or late not in rec.t_mix or early not in rec.t_mix:
                out.append(skipped("window_width", "missing-data",
                                   rec.error or "epsilon pair not in sweep grid", {"epsilon": e, **inputs}))
                continue
            out.append(window_report(
                e, rec.t_mix[late], rec.t_mix[early], rec.vkl_at_tmix[early], rec.gamma,
                widths=(rec.t_mix_width[late], rec.t_mix_width[early]), inputs=inputs,
            ))
    return out


@dataclass(frozen=True)
class Thresholds:
    """Verdict heuristics.

    ``band``: a series is flat when ``max/min <= 1 + band``.
    ``max_inversions``: upticks tolerated in a decreasing window-ratio series.
    ``delta_min`` / ``gamma_min``: levels for the sparsity and expansion flags.
    """

    band: float = 0.2
    max_inversions: int = 1
    delta_min: float = 0.05
    gamma_min: float = 0.01
    window_epsilon: float = 0.25
    vc_epsilon: float = 0.5


@dataclass(frozen=True)
class TrendVerdict:
    verdict: str
    sizes: tuple
    censored_sizes: tuple
    window_ratios: tuple
    vc_values: tuple
    window_slope: float
    vc_slope: float
    sparsity_holds: bool
    expansion_holds: bool
    inf_delta: float
    inf_gamma: float
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "sizes": list(self.sizes),
            "censored_sizes": list(self.censored_sizes),
            "window_ratios": list(self.window_ratios),
            "vc_values": list(self.vc_values),
            "window_slope": self.window_slope,
            "vc_slope": self.vc_slope,
            "sparsity_holds": self.sparsity_holds,
            "expansion_holds": self.expansion_holds,
            "inf_delta": self.inf_delta,
            "inf_gamma": self.inf_gamma,
            "note": self.note,
        }


def _loglog_slope(ns, values):
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2 or np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(ns, dtype=np.float64)), np.log(v), 1)[0])


def _flat(values, band):
    v = np.asarray(values)
    return bool(np.all(v > 0) and v.max() <= (1.0 + band) * v.min())


def _decreasing(values, max_inversions):
    ups = sum(b >= a for a, b in zip(values, values[1:]))
    return ups <= max_inversions and values[-1] < values[0]


def _increasing(values):
    return all(b > a for a, b in zip(values, values[1:]))


def verdict(records: Sequence[SweepRecord], thresholds: Thresholds = Thresholds()) -> TrendVerdict:
    """Label a sweep cutoff-consistent, no-cutoff-consistent or inconclusive.

    Sizes whose early mixing time ``t_mix(1 - eps)`` is zero are censored:
    the chain starts inside the window there, so the window is truncated and
    says nothing about its width.

    cutoff-consistent: window ratio decreasing (up to ``max_inversions``
    upticks) and the varentropy statistic strictly increasing.
    no-cutoff-consistent: both series flat within ``band``.
    The sparsity/expansion flags are reported but never gate the label.
    """
    if len(records) < 3:
        raise InvalidParams(f"a verdict needs at least 3 sizes, got {len(records)}")
    th = thresholds
    wkey, vkey = eps_key(th.window_epsilon), eps_key(th.vc_epsilon)
    early = eps_key(1.0 - th.window_epsilon)
    good = [r for r in records if r.error is None]
    deltas = [r.delta for r in good]
    gammas = [r.gamma for r in good]
    inf_delta = float(min(deltas)) if deltas else float("nan")
    inf_gamma = float(min(gammas)) if gammas else float("nan")

    used, censored, ratios, vcs = [], [], [], []
    for r in good:
        if wkey not in r.window_ratio or vkey not in r.vc_statistic:
            continue
        if r.t_mix.get(early, 0.0) <= 0.0:
            censored.append(r.size)
            continue
        used.append(r.n)
        ratios.append(r.window_ratio[wkey])
        vcs.append(r.vc_statistic[vkey])

    notes = []
    if len(good) < len(records):
        notes.append(f"{len(records) - len(good)} sizes failed")
    if len(used) < 3:
        label = "inconclusive"
        notes.append("fewer than 3 usable sizes")
    elif _decreasing(ratios, th.max_inversions) and _increasing(vcs):
        label = "cutoff-consistent"
    elif _flat(ratios, th.band) and _flat(vcs, th.band):
        label = "no-cutoff-consistent"
    else:
        label = "inconclusive"
    return TrendVerdict(
        verdict=label,
        sizes=tuple(used),
        censored_sizes=tuple(censored),
        window_ratios=tuple(ratios),
        vc_values=tuple(vcs),
        window_slope=_loglog_slope(used, ratios),
        vc_slope=_loglog_slope(used, vcs),
        sparsity_holds=bool(deltas) and inf_delta >= th.delta_min,
        expansion_holds=bool(gammas) and inf_gamma >= th.gamma_min,
        inf_delta=inf_delta,
        inf_gamma=inf_gamma,
        note="; ".join(notes),
    )
