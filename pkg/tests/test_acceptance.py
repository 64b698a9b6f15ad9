"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from cutofflab.analysis import ChainAnalysis
from cutofflab.bounds import FAIL, SKIPPED, verify
from cutofflab.cutoff import sweep, verdict
from cutofflab.errors import ZeroMassState
from cutofflab.families import FamilySpec, generate
from cutofflab.heat_kernel import heat_kernel_all, heat_kernel_row
from cutofflab.info_stats import entropy_dissipation, kl_divergence, mixing_time, profile
from cutofflab.spectral import poincare_constant, spectral_summary, stationary_distribution

from conftest import (
    charpoly_gap,
    complete,
    corpus_random,
    cycle,
    flip_chain,
    lazy_two_state,
    rational_chain,
)

LN2 = math.log(2)


@pytest.fixture
def announce(capsys):
    def _say(name, failures, seconds, limit):
        ok = not failures and seconds < limit
        with capsys.disabled():
            status = "PASS" if ok else "FAIL"
            print(f"\n[{status}] {name} ({seconds:.2f}s, limit {limit:g}s)")
            for f in failures[:10]:
                print(f"    {f}")
        assert not failures
        assert seconds < limit
    return _say


def _close(failures, label, value, expected, tol):
    if not abs(value - expected) <= tol:
        failures.append(f"{label}: got {value!r}, expected {expected!r} +- {tol:g}")


def test_closed_form_suite(announce):
    failures = []
    start = time.perf_counter()
    c = lazy_two_state()
    pi = np.array([0.5, 0.5])
    pt = profile(c, pi, [LN2])[0]
    _close(failures, "two-state d_TV(ln 2)", pt.dtv, 0.25, 1e-10)
    _close(failures, "two-state d_KL(ln 2)", pt.dkl, 0.1308123, 1e-6)
    _close(failures, "two-state V_KL(ln 2)", pt.vkl, 0.2263025, 1e-6)
    _close(failures, "two-state t_mix(1/4)", mixing_time(c, pi, 0.25).t_mix, LN2, 1e-8)
    s = spectral_summary(c)
    _close(failures, "two-state gamma", s.gamma, 1.0, 1e-10)
    if s.phi != 0.5:
        failures.append(f"two-state Phi = {s.phi!r}, expected exactly 1/2")
    _close(failures, "two-state dissipation", entropy_dissipation(c, pi, 0, LN2), 0.25 * math.log(3), 1e-9)

    k4 = complete(4)
    pi4 = np.full(4, 0.25)
    _close(failures, "K4 t_mix(1/4)", mixing_time(k4, pi4, 0.25).t_mix, 0.75 * math.log(3), 1e-8)
    s = spectral_summary(k4)
    _close(failures, "K4 gamma", s.gamma, 4 / 3, 1e-10)
    # 2/3 is not a double; the exact enumeration must land on the nearest one
    _close(failures, "K4 Phi", s.phi, 2 / 3, 1e-15)

    for n in range(3, 65):
        ch = cycle(n)
        _close(failures, f"{n}-cycle gamma", poincare_constant(ch, np.full(n, 1 / n)), 1 - math.cos(2 * math.pi / n), 1e-9)
    announce("closed-form chain suite", failures, time.perf_counter() - start, 1.0)


def test_random_chain_invariants(announce):
    failures = []
    start = time.perf_counter()
    tol = 1e-12
    checked_fd = 0
    for idx, c in enumerate(corpus_random(50)):
        pi = stationary_distribution(c).probs
        for t, s in ((0.3, 0.7), (1.0, 2.5), (4.0, 0.05)):
            err = np.max(np.abs(heat_kernel_all(c, t, tol).probs @ heat_kernel_all(c, s, tol).probs
                                - heat_kernel_all(c, t + s, tol).probs))
            if err > 10 * tol:
                failures.append(f"chain {idx}: semigroup error {err:.3e} at t={t}, s={s}")
        d = [pt.dtv for pt in profile(c, pi, np.linspace(0.0, 10.0, 32), tol)]
        if any(b > a + 1e-12 for a, b in zip(d, d[1:])):
            failures.append(f"chain {idx}: d_TV increases on the grid")
        h = 1e-5
        for t in (0.5, 1.0, 3.0):
            for o in range(c.n):
                try:
                    diss = entropy_dissipation(c, pi, o, t, tol)
                except ZeroMassState:
                    continue
                if diss < -1e-10:
                    failures.append(f"chain {idx}: dissipation {diss:.3e} < 0 at origin {o}, t={t}")
                kl = [kl_divergence(heat_kernel_row(c, o, x, tol).probs, pi) for x in (t - h, t + h)]
                fd = -(kl[1] - kl[0]) / (2 * h)
                checked_fd += 1
                if abs(fd - diss) > 1e-4:
                    failures.append(f"chain {idx}: finite difference {fd:.6g} vs {diss:.6g}")
    if checked_fd < 500:
        failures.append(f"only {checked_fd} finite-difference points were certified")
    announce("random-chain invariants (50 chains)", failures, time.perf_counter() - start, 30.0)


def test_bound_suite_corpus(announce):
    failures = []
    start = time.perf_counter()
    corpus = [("lazy two-state", lazy_two_state()), ("flip", flip_chain()),
              ("K4", complete(4)), ("K8", complete(8)),
              ("8-cycle", cycle(8)), ("64-cycle", cycle(64)),
              ("hypercube d=4", generate(FamilySpec("hypercube", size=4)))]
    corpus += [(f"random #{k}", c) for k, c in enumerate(corpus_random(50))]
    corpus += [(f"RR(64,3) seed {s}", generate(FamilySpec("random-regular", size=64, degree=3, seed=s)))
               for s in range(5)]
    skipped_delta = 0
    for name, c in corpus:
        reports = verify(c)
        for r in reports:
            if r.status == FAIL:
                failures.append(f"{name}: {r.bound_id} {r.inputs} lhs={r.lhs!r} rhs={r.rhs!r}")
        p = [r for r in reports if r.bound_id == "p_control"][0]
        if (p.status == SKIPPED) != (c.metrics.delta > 0.5):
            failures.append(f"{name}: p_control status {p.status} with delta={c.metrics.delta}")
        skipped_delta += p.status == SKIPPED
    if skipped_delta == 0:
        failures.append("corpus never exercised the delta > 1/2 skip")
    announce(f"bound suite on {len(corpus)} chains", failures, time.perf_counter() - start, 300.0)


def test_spectral_oracles(announce):
    failures = []
    start = time.perf_counter()
    for seed in range(30):
        rng = np.random.default_rng(seed)
        n = 2 + seed % 5
        base = generate(FamilySpec("random-symmetric", size=n, seed=seed, density=0.5))
        weights = np.where(base.dense() > 0, rng.integers(1, 10, size=(n, n)), 0)
        Kq, c = rational_chain(weights)
        got = poincare_constant(c, stationary_distribution(c))
        _close(failures, f"charpoly n={n} seed={seed}", got, charpoly_gap(Kq), 1e-9)
    c = flip_chain()
    gamma = poincare_constant(c, [0.5, 0.5])
    d1, d2 = (pt.dtv for pt in profile(c, [0.5, 0.5], [1.0, 3.0]))
    _close(failures, "flip gamma", gamma, 2.0, 1e-10)
    _close(failures, "flip TV decay rate", (math.log(d1) - math.log(d2)) / 2.0, gamma, 1e-6)
    announce("spectral gap oracles", failures, time.perf_counter() - start, 60.0)


def _flat(values, band=0.2):
    return max(values) <= (1 + band) * min(values)


def test_sweep_trends(announce):
    failures = []
    start = time.perf_counter()
    recs = sweep(FamilySpec("cycle"), [8, 16, 32, 64])
    v = verdict(recs)
    if v.verdict != "no-cutoff-consistent":
        failures.append(f"cycle verdict {v.verdict}")
    ratios = [r.window_ratio["0.25"] for r in recs]
    if not _flat(ratios):
        failures.append(f"cycle window ratios not flat: {ratios}")

    v = verdict(sweep(FamilySpec("complete"), [4, 8, 16, 32]))
    if v.verdict != "no-cutoff-consistent":
        failures.append(f"complete verdict {v.verdict}")

    recs = sweep(FamilySpec("random-regular", degree=3, seed=7), [64, 128, 256, 512])
    w = [r.window_ratio["0.25"] for r in recs][-3:]
    vc = [r.vc_statistic["0.5"] for r in recs]
    if not all(b < a for a, b in zip(w, w[1:])):
        failures.append(f"random-regular window ratio not decreasing: {w}")
    if not all(b > a for a, b in zip(vc, vc[1:])):
        failures.append(f"random-regular vc statistic not increasing: {vc}")
    announce("cutoff sweep trends", failures, time.perf_counter() - start, 600.0)


def test_sweep_json_is_thread_independent(announce, tmp_path):
    failures = []
    start = time.perf_counter()
    outputs = []
    for threads in (1, 8):
        args = [sys.executable, "-m", "cutofflab", "sweep", "--family", "random-regular",
                "--sizes", "32,64,128,256", "--seed", "7", "--json", "--threads", str(threads)]
        proc = subprocess.run(args, capture_output=True, env=dict(os.environ))
        if proc.returncode != 0:
            failures.append(f"threads={threads}: exit {proc.returncode}: {proc.stderr.decode()}")
        outputs.append(proc.stdout)
    if outputs[0] != outputs[1]:
        failures.append("sweep --json output differs between --threads 1 and --threads 8")
    if not outputs[0]:
        failures.append("sweep produced no output")
    announce("sweep --json reproducibility", failures, time.perf_counter() - start, 600.0)
