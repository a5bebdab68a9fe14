"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest -v -s tests/test_acceptance.py`` (the lines are also printed
without ``-s``) or directly with ``python3 tests/test_acceptance.py``.  The two
reference experiments (40 trials of 500 steps each) are computed once and
shared by criteria 1, 2, 3, 8 and 9.
"""

from __future__ import annotations

import filecmp
import math
import os
import sys
import time

import numpy as np
import pytest
from oracles import (
    ROOT3_2,
    containment_violations,
    gramian_errors,
    in_cell_pair_minimum,
    recovery_failures,
    unroll_errors,
)

from activeloc.config import ScenarioConfig, reference_template
from activeloc.experiment import certify_growth, random_feasible_system, run_experiment, write_outputs
from activeloc.svp import find_svp, max_alignment, vec_opt

# pinned tolerances
EPS_MEM = 1e-9
EPS_BOUND = 1e-6
EPS_MONO = 1e-9
EPS_UNROLL = 1e-9
EPS_GAMMA = 1e-6
RUNTIME_LIMIT = 60.0
TRIALS, STEPS = 40, 500
LANDMARK_STEPS, LANDMARK_TRIALS, LANDMARK_SCALE = 1000, 4, 0.2
MEMBERSHIP_TAGS = ("outside", "disagrees")


def _report(capsys, num: int, name: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def _setup_config(setup: int, **overrides) -> ScenarioConfig:
    lam = 1.014 if setup == 1 else 1.01
    cfg = random_feasible_system(0, 2, lam, reference_template(setup)).config
    if overrides:
        d = cfg.to_dict()
        d.update(overrides)
        cfg = ScenarioConfig.from_dict(d)
    return cfg


class _Runs:
    def __init__(self):
        self._cache = {}

    def get(self, setup: int):
        if setup not in self._cache:
            cfg = _setup_config(setup, trials=TRIALS, max_steps=STEPS)
            t0 = time.perf_counter()
            rep = run_experiment(cfg, workers=os.cpu_count() or 1)
            self._cache[setup] = (rep, time.perf_counter() - t0)
        return self._cache[setup]


@pytest.fixture(scope="session")
def runs():
    return _Runs()


def _zero_runs(y: np.ndarray) -> int:
    best = cur = 0
    for b in y:
        cur = 0 if b else cur + 1
        best = max(best, cur)
    return best


def test_criterion_1_membership(runs, capsys):
    bad, short, checked = [], 0, 0
    for setup in (1, 2):
        rep, _ = runs.get(setup)
        for i, t in enumerate(rep.traces):
            checked += int(t.y.sum())
            short += int(t.steps != STEPS)
            bad += [f"setup {setup} trial {i}: {v}" for v in t.violations if any(s in v for s in MEMBERSHIP_TAGS)]
    ok = not bad and short == 0
    detail = f"{checked} audited positive steps over 2 x {TRIALS} x {STEPS}, {len(bad)} violations, {short} short trials"
    _report(capsys, 1, "membership soundness", ok, detail + (f"; first: {bad[0]}" if bad else ""))


def test_criterion_2_contraction(runs, capsys):
    worst_gap, worst_rise, uncertified = -math.inf, -math.inf, 0
    for setup in (1, 2):
        rep, _ = runs.get(setup)
        _, cert = certify_growth(rep.config.sys, rep.config.c_growth, 1000)
        uncertified += int(not cert)
        for t in rep.traces:
            worst_gap = max(worst_gap, float(np.max(t.diam_x0_cloud - t.diam_x0_bound)))
            worst_rise = max(worst_rise, float(np.max(np.diff(t.diam_x0_cloud))))
    ok = worst_gap <= EPS_BOUND and worst_rise <= EPS_MONO and uncertified == 0
    detail = f"max(diam - bound) = {worst_gap:.3g}, max increase = {worst_rise:.3g}, uncertified K = {uncertified}"
    _report(capsys, 2, "exponential contraction", ok, detail)


def test_criterion_3_recovery_cadence(runs, capsys):
    worst, limit, mismatch = 0, None, 0
    for setup in (1, 2):
        rep, _ = runs.get(setup)
        limit = rep.N * rep.nbar if limit is None else min(limit, rep.N * rep.nbar)
        for t in rep.traces:
            g = _zero_runs(t.y)
            mismatch += int(g != t.last_gap)
            worst = max(worst, g)
    ok = worst <= limit and mismatch == 0
    _report(capsys, 3, "recovery cadence", ok, f"longest zero run {worst}, allowed N nbar = {limit}")


def test_criterion_4_unroll_identity(capsys):
    rng = np.random.default_rng(2024)
    full = max(unroll_errors(rng, 1000, under_actuated=False))
    under = max(unroll_errors(rng, 1000, under_actuated=True))
    gram = max(gramian_errors(rng, 1000))
    ok = max(full, under, gram) <= EPS_UNROLL
    detail = f"max rel. error B = I {full:.2e}, under-actuated {under:.2e}, Gramian {gram:.2e}"
    _report(capsys, 4, "recovery unroll identity", ok, detail)


def test_criterion_5_recovery_monte_carlo(capsys):
    rng = np.random.default_rng(2025)
    f_full, w_full = recovery_failures(rng, 1000, under_actuated=False)
    f_under, w_under = recovery_failures(rng, 1000, under_actuated=True)
    N = find_svp(ROOT3_2, 2).N
    ok = f_full == 0 and f_under == 0 and w_full <= N + 1 and w_under <= 2 * N + 1
    detail = f"failures {f_full} + {f_under} of 2 x 1000, latest hit step {w_full} (B = I), {w_under} (single input)"
    _report(capsys, 5, "recovery Monte-Carlo", ok, detail)


def test_criterion_6_partition_properties(capsys):
    rng = np.random.default_rng(2026)
    lo = in_cell_pair_minimum(rng, ROOT3_2, 2, 100_000)
    floor = 2 * ROOT3_2**2 - 1
    bad = containment_violations(rng, 1000, 10_000)
    g6 = max_alignment(vec_opt(6, 2))
    g12 = max_alignment(vec_opt(12, 3))
    ok = (
        lo >= floor - EPS_MEM
        and abs(floor - 0.5) < 1e-12
        and bad == 0
        and abs(g6 - 0.5) <= EPS_GAMMA
        and abs(g12 - 1 / math.sqrt(5.0)) <= EPS_GAMMA
    )
    detail = (
        f"min in-cell product {lo:.6f} >= {floor:.6f}, containment violations {bad}, "
        f"gamma(6,2) = {g6:.9f}, gamma(12,3) = {g12:.9f}"
    )
    _report(capsys, 6, "partition properties", ok, detail)


def test_criterion_7_growth_certificate(capsys):
    systems = []
    for setup, lam in ((1, 1.014), (2, 1.01)):
        for seed in range(10):
            systems.append(random_feasible_system(seed, 2, lam, reference_template(setup)).config.sys)
    results = [certify_growth(s, 0.5, 1000) for s in systems]
    failed = sum(not ok for _, ok in results)
    Ks = [K for K, _ in results]
    detail = f"{len(systems)} systems, k = 1..1000, failures {failed}, K in [{min(Ks):.4g}, {max(Ks):.4g}]"
    _report(capsys, 7, "growth certificate", failed == 0, detail)


def test_criterion_8_landmark_nonexpansion(runs, capsys):
    rise = -math.inf
    for setup in (1, 2):
        rep, _ = runs.get(setup)
        for t in rep.traces:
            rise = max(rise, float(np.max(np.diff(t.diam_m_cloud))))
    cfg = _setup_config(
        1,
        trials=LANDMARK_TRIALS,
        max_steps=LANDMARK_STEPS,
        arbitrary_control_policy={"kind": "bounded_random", "scale": LANDMARK_SCALE},
    )
    rep = run_experiment(cfg, workers=os.cpu_count() or 1)
    shrink = [(float(t.diam_m_cloud[0]), float(t.diam_m_cloud[-1])) for t in rep.traces]
    for t in rep.traces:
        rise = max(rise, float(np.max(np.diff(t.diam_m_cloud))))
    full = all(t.steps == LANDMARK_STEPS for t in rep.traces)
    ok = rise <= EPS_MONO and full and all(b < a for a, b in shrink) and rep.ok
    ratios = ", ".join(f"{b / a:.3f}" for a, b in shrink)
    detail = f"max increase {rise:.3g}; final/initial over {LANDMARK_STEPS} steps: {ratios}"
    _report(capsys, 8, "landmark nonexpansion", ok, detail)


def test_criterion_9_runtime_and_determinism(runs, capsys, tmp_path):
    rep, elapsed = runs.get(1)
    cfg = _setup_config(1, trials=4, max_steps=STEPS)
    write_outputs(run_experiment(cfg), tmp_path / "a")
    write_outputs(run_experiment(cfg), tmp_path / "b")
    same = all(filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False) for f in ("steps.csv", "aggregate.csv"))
    fast = elapsed < RUNTIME_LIMIT
    detail = (
        f"setup 1, {TRIALS} x {STEPS}, grid {rep.config.grid_resolution}^2 took {elapsed:.1f} s on "
        f"{os.cpu_count()} core(s) (limit {RUNTIME_LIMIT:.0f} s); repeated CSVs identical: {same}"
    )
    _report(capsys, 9, "runtime and determinism", fast and same, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
