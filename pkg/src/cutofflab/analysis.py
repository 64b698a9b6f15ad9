"""Per-chain cache shared by the bound checks and the sweep."""

from __future__ import annotations

from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .chain import Chain
from .errors import ZeroMassState
from .heat_kernel import Distribution, HeatKernel, default_tol, heat_kernels
from .info_stats import ProfilePoint, _point, mixing_times
from .spectral import SpectralSummary, spectral_summary, stationary_distribution

# smallest Poisson tail we ask for when certifying tiny kernel entries
_TINY_TOL = 1e-290


class ChainAnalysis:
    """Caches pi, spectral data, heat kernels and mixing times for one chain."""

    def __init__(
        self,
        chain: Chain,
        pi=None,
        *,
        tol: Optional[float] = None,
        t_tol: Optional[float] = None,
        origins: Optional[Sequence[int]] = None,
    ):
        self.chain = chain
        if pi is None:
            pi = stationary_distribution(chain)
        elif not isinstance(pi, Distribution):
            pi = Distribution(np.asarray(pi, dtype=np.float64))
        self.pi = pi
        self.tol = default_tol(chain) if tol is None else tol
        self.t_tol = t_tol
        self.origins = None if origins is None else np.asarray(origins, dtype=np.int64)
        self._kernels: dict[float, HeatKernel] = {}
        self._certified: dict[tuple, HeatKernel] = {}
        self._mixing: dict = {}

    @property
    def p(self) -> float:
        return float(self.pi.probs.min())

    @property
    def metrics(self):
        return self.chain.metrics

    @cached_property
    def spectral(self) -> SpectralSummary:
        return spectral_summary(self.chain, self.pi)

    @property
    def gamma(self) -> float:
        return self.spectral.gamma

    def kernels(self, times: Iterable[float]) -> list[HeatKernel]:
        times = [float(t) for t in times]
        missing = sorted({t for t in times if t not in self._kernels})
        for hk in heat_kernels(self.chain, missing, self.origins, self.tol):
            self._kernels[hk.t] = hk
        return [self._kernels[t] for t in times]

    def kernel(self, t: float) -> HeatKernel:
        return self.kernels([t])[0]

    def point(self, t: float) -> ProfilePoint:
        return _point(self.kernel(t), self.pi.probs)

    def points(self, times) -> list[ProfilePoint]:
        return [_point(hk, self.pi.probs) for hk in self.kernels(times)]

    def mixing(self, epsilons: Iterable[float]) -> dict:
        eps = [float(e) for e in epsilons]
        todo = [e for e in dict.fromkeys(eps) if e not in self._mixing]
        if todo:
            res = mixing_times(
                self.chain, self.pi, todo, self.t_tol,
                gamma=self.gamma, tol=self.tol, origins=self.origins,
            )
            for r in res:
                self._mixing[r.epsilon] = r
        return {e: self._mixing[e] for e in eps}

    def certified_kernel(self, t: float, rel: float = 1e-9) -> HeatKernel:
        """Heat kernel whose every entry carries relative error at most ``rel``.

        The truncation error of each entry is bounded by the Poisson tail,
        so the tolerance is lowered until it sits below ``rel`` times the
        smallest entry.  Raises :class:`ZeroMassState` if an entry is zero.
        """
        key = (float(t), rel)
        if key in self._certified:
            return self._certified[key]
        hk = self.kernel(t)
        for _ in range(4):
            low = float(hk.probs.min())
            if low > 0 and hk.mass_defect <= rel * low:
                break
            if low <= 0 or rel * low < _TINY_TOL:
                i, x = np.unravel_index(int(np.argmin(hk.probs)), hk.probs.shape)
                raise ZeroMassState(int(hk.origins[i]), int(x), low)
            tol = max(_TINY_TOL, 0.5 * rel * low)
            hk = heat_kernels(self.chain, [t], self.origins, tol)[0]
        else:
            low = float(hk.probs.min())
            i, x = np.unravel_index(int(np.argmin(hk.probs)), hk.probs.shape)
            raise ZeroMassState(int(hk.origins[i]), int(x), low)
        self._certified[key] = hk
        return hk
