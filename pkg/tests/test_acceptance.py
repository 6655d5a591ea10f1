"""Acceptance gate: one test per criterion, each printing a PASS line.

The heavy clean-event batch (50 seeds at the canonical constants, horizon
10^6) is computed once in a session fixture and shared by the criteria that
consume it.  Run with ``pytest tests/test_acceptance.py -v -s`` to watch the
per-criterion lines; the full module takes roughly 15-20 minutes on two
cores, dominated by the clean-event and scaling batches.
"""

import filecmp
import math
import os
import time

import numpy as np
import pytest

from bitbandit.codec import (
    QuantSchedule,
    ScalarSchedule,
    build_unit_net,
    capacity_check,
    scalar_q_envelope,
    scalar_schedule_step,
    schedule_step,
    vector_decode,
    vector_encode,
)
from bitbandit.config import RunConfig
from bitbandit.glm import GlmAgentState, glm_fit, run_ic_glmucb
from bitbandit.harness import run_many, run_sweep
from bitbandit.links import identity_link, logistic_link
from bitbandit.linucb import LsState, run_ic_linucb, run_linucb
from bitbandit.mab import run_ic_ucb, run_ucb
from conftest import ball_points

TRACE_FIELDS = (
    "t", "action_index", "reward", "inst_regret", "cum_regret",
    "bits_cum", "overflow_flag", "coverage_flag", "phase",
)

CLEAN_SEEDS = tuple(range(50))
CLEAN_T = 1_000_000
SCALE_T = 250_000  # criterion 7 base horizon; 4T is the clean-event horizon


def _announce(criterion: int, msg: str) -> None:
    print(f"\n[criterion {criterion}] PASS: {msg}")


@pytest.fixture(scope="session")
def clean_event_batch():
    """50 clean-event runs at the canonical constants (criteria 6, 7, 9, 10)."""
    cfg = RunConfig(algo="ic-linucb", d=2, T=CLEAN_T, B=12, K=16,
                    seeds=CLEAN_SEEDS, L=1.0, M=1.0, c_explore=10.0)
    t0 = time.time()
    diags = run_many(cfg)
    return {"cfg": cfg, "diags": diags, "elapsed": time.time() - t0}


@pytest.fixture(scope="session")
def scaling_batch():
    """Criterion 7 companions: IC at horizon T and the lossless baseline at 4T."""
    ic_small = RunConfig(algo="ic-linucb", d=2, T=SCALE_T, B=12, K=16,
                         seeds=tuple(range(20)), c_explore=10.0)
    base_big = RunConfig(algo="linucb", d=2, T=CLEAN_T, B=12, K=16,
                         seeds=tuple(range(20)), c_explore=10.0)
    return {
        "ic_small": run_many(ic_small),
        "base_big": run_many(base_big),
    }


def test_criterion_01_codec_roundtrip():
    t0 = time.time()
    rng = np.random.default_rng(20_240_817)
    for d in (1, 2, 3, 5):
        book = build_unit_net(d, 0.5, seed=0)
        for p in (0.1, 1.0, 50.0):
            pts = p * ball_points(10_000, d, rng)
            violations = 0
            for e in pts:
                sym = vector_encode(book, p, e)
                assert sym != book.overflow_symbol
                err = float(np.linalg.norm(vector_decode(book, p, sym) - e))
                if err > 0.5 * p * (1.0 + 1e-12):
                    violations += 1  # residual coverage gap: counted, never silent
            assert violations <= 10, f"d={d} p={p}: {violations} violations > 0.1%"
    elapsed = time.time() - t0
    assert elapsed < 10.0, f"round-trip suite took {elapsed:.1f}s"
    _announce(1, f"round-trip error <= eps*p with <= 0.1% gap rate in {elapsed:.1f}s")


def test_criterion_02_codebook_size_bound():
    sizes = {}
    for d in range(1, 7):
        stop = 2000 if d <= 5 else 500
        book = build_unit_net(d, 0.5, seed=0, stop_rejections=stop)
        assert book.size <= 5**d, f"d={d}: {book.size} > 5^{d}"
        capacity_check(book, 6 * d)
        again = build_unit_net(d, 0.5, seed=0, stop_rejections=stop)
        assert book.centers.tobytes() == again.centers.tobytes()
        sizes[d] = book.size
    _announce(2, f"net sizes {sizes} within 5^d, capacity ok at B=6d, deterministic")


def test_criterion_03_schedule_identities():
    import mpmath

    t0 = time.time()
    # Vector schedule vs closed form: q_tau = eps^tau q0 + f*eps*(1-eps^tau)/(1-eps)
    q0, f, eps = 10.0, 0.0013, 0.5
    s = QuantSchedule.start(q0, f, eps)
    for tau in range(1, 10_001):
        s = schedule_step(s)
        closed = eps**tau * q0 + f * eps * (1.0 - eps**tau) / (1.0 - eps)
        assert abs(s.q - closed) <= 1e-12
        assert abs(s.p - (closed + f)) <= 1e-12

    # Scalar schedule vs independently unrolled sum, plus the q_k envelope.
    m, T = 1.0, 10_000
    logT = math.log(T)
    for B in (1, 2, 4):
        gamma = 1.0 / 2**B
        f_vals = 2.0 * np.sqrt(logT / np.arange(1, 10_001))
        p1 = m + f_vals[0]

        def closed_p(k: int):
            # p_k = gamma^{k-1} p_1 + 2 sum_{s=1}^{k-1} gamma^{k-1-s} f_s;
            # lags beyond 120 are below 2^-120 and cannot move a double
            lo = max(1, k - 120)
            weights = gamma ** (k - 1 - np.arange(lo, k))
            return gamma ** (k - 1) * p1 + 2.0 * float(weights @ f_vals[lo - 1 : k - 1])

        s = ScalarSchedule.start(B, m, T)
        mp_p = mpmath.mpf(m) + 2 * mpmath.sqrt(mpmath.log(T))
        for k in range(1, 10_001):
            assert abs(s.p - closed_p(k)) <= 1e-12 * max(1.0, abs(s.p))
            if k <= 300:  # exact high-precision unroll as a second oracle
                assert abs(s.p - float(mp_p)) <= 1e-12 * max(1.0, float(mp_p))
                # p_{k+1} = gamma p_k + 2 f_k with f_k = 2 sqrt(log T / k)
                mp_p = gamma * mp_p + 4 * mpmath.sqrt(mpmath.log(T) / k)
            assert s.q <= scalar_q_envelope(s), f"envelope broken at k={k}, B={B}"
            s = scalar_schedule_step(s)
    elapsed = time.time() - t0
    assert elapsed < 1.0, f"schedule checks took {elapsed:.2f}s"
    _announce(3, f"recursions match closed forms to 1e-12 and envelope holds ({elapsed:.2f}s)")


def test_criterion_04_estimator_equivalence(rng):
    t0 = time.time()
    # Incremental least squares vs batch recomputation over 1e4 updates.
    d = 3
    s = LsState(d, 1.0)
    A = rng.standard_normal((10_000, d)) / math.sqrt(d)
    y = rng.standard_normal(10_000)
    for i in range(10_000):
        s.update(A[i], y[i])
        if (i + 1) % 2000 == 0:
            V = np.eye(d) + A[: i + 1].T @ A[: i + 1]
            theta = np.linalg.solve(V, A[: i + 1].T @ y[: i + 1])
            err = np.linalg.norm(s.theta - theta)
            assert err <= 1e-8 * (1.0 + np.linalg.norm(theta))

    # Identity-link moment solve equals ridge.
    ident = identity_link()
    for _ in range(10):
        n = int(rng.integers(5, 200))
        A_i = rng.standard_normal((n, 4)) / 2.0
        y_i = rng.standard_normal(n)
        st = GlmAgentState(4, 1.0, ident, capacity=n)
        st.add_batch(A_i, y_i)
        theta = glm_fit(st)
        ridge = np.linalg.solve(np.eye(4) + A_i.T @ A_i, A_i.T @ y_i)
        assert np.linalg.norm(theta - ridge) <= 1e-8 * (1.0 + np.linalg.norm(ridge))

    # Logistic solve vs the Picard fixed-point oracle on 100 instances.
    link = logistic_link()
    for _ in range(100):
        d_i = int(rng.integers(1, 6))
        n = int(rng.integers(5, 201))
        A_i = rng.standard_normal((n, d_i))
        A_i /= np.maximum(np.linalg.norm(A_i, axis=1, keepdims=True), 1.0)
        theta0 = rng.standard_normal(d_i) / 2.0
        y_i = np.asarray(link.mu(A_i @ theta0)) + 0.4 * rng.standard_normal(n)
        st = GlmAgentState(d_i, 1.0, link, capacity=n)
        st.add_batch(A_i, y_i)
        theta = glm_fit(st)

        b = A_i.T @ y_i
        lmax = float(np.linalg.eigvalsh(A_i.T @ A_i)[-1])
        step = 1.0 / (1.0 + 1.0 * lmax)
        ref = np.zeros(d_i)
        for _ in range(400_000):
            grad = 1.0 * ref + A_i.T @ np.asarray(link.mu(A_i @ ref), float) - b
            nxt = ref - step * grad
            if np.max(np.abs(nxt - ref)) < 1e-13:
                ref = nxt
                break
            ref = nxt
        assert np.linalg.norm(theta - ref) <= 1e-6
    elapsed = time.time() - t0
    assert elapsed < 30.0, f"estimator suite took {elapsed:.1f}s"
    _announce(4, f"incremental LS, ridge reduction, and Picard agreement ({elapsed:.1f}s)")


def test_criterion_05_lossless_reductions():
    lin_cfg = RunConfig(algo="ic-linucb", d=2, T=10_000, B=12, K=16,
                        seeds=tuple(range(20)), c_explore=0.2)
    glm_cfg = lin_cfg.with_(algo="ic-glmucb", link="identity")
    mab_cfg = RunConfig(algo="ic-ucb", d=2, T=10_000, B=1,
                        seeds=tuple(range(20)), arm_means=(0.5, 0.0))

    for seed in lin_cfg.seeds:
        ic = run_ic_linucb(lin_cfg, seed, lossless=True)
        base = run_linucb(lin_cfg, seed)
        for f in TRACE_FIELDS:
            assert np.array_equal(getattr(ic.trace, f), getattr(base.trace, f)), \
                f"linucb reduction differs in {f} at seed {seed}"

    for seed in glm_cfg.seeds:
        lin = run_ic_linucb(lin_cfg, seed)
        glm = run_ic_glmucb(glm_cfg, seed)
        for f in TRACE_FIELDS:
            assert np.array_equal(getattr(lin.trace, f), getattr(glm.trace, f)), \
                f"glm identity reduction differs in {f} at seed {seed}"

    for seed in mab_cfg.seeds:
        ic = run_ic_ucb(mab_cfg, seed, lossless=True)
        base = run_ucb(mab_cfg.with_(algo="ucb"), seed)
        for f in TRACE_FIELDS:
            assert np.array_equal(getattr(ic.trace, f), getattr(base.trace, f)), \
                f"ucb reduction differs in {f} at seed {seed}"
    _announce(5, "identity-codec, identity-link, and gamma=0 reductions are bit-identical")


def test_criterion_06_clean_event_rates(clean_event_batch):
    diags = clean_event_batch["diags"]
    n = len(diags)
    rates = {
        "no_overflow": sum(d["no_overflow"] for d in diags) / n,
        "coverage_ok": sum(d["coverage_ok"] for d in diags) / n,
        "gap_ok": sum(d["gap_ok"] for d in diags) / n,
        "eigen_ok": sum(d["eigen_ok"] for d in diags) / n,
    }
    for key, rate in rates.items():
        assert rate >= 0.90, f"{key} rate {rate:.2%} < 90%"
    elapsed = clean_event_batch["elapsed"]
    assert elapsed < 1800.0, f"clean-event batch took {elapsed:.0f}s"
    _announce(6, f"clean-event rates {rates} over {n} runs in {elapsed:.0f}s")


def test_criterion_07_sublinear_scaling(clean_event_batch, scaling_batch):
    ic_small = scaling_batch["ic_small"]
    ic_big = clean_event_batch["diags"][:20]
    base_big = scaling_batch["base_big"]

    r_T = np.mean([d["final_cum_regret"] for d in ic_small])
    r_4T = np.mean([d["final_cum_regret"] for d in ic_big])
    ratio = r_4T / r_T
    assert ratio <= 2.6, f"R(4T)/R(T) = {ratio:.2f} > 2.6"

    base = np.mean([d["final_cum_regret"] for d in base_big])
    rel = r_4T / base
    assert rel <= 3.0, f"IC regret {rel:.2f}x baseline > 3x"
    _announce(7, f"R(4T)/R(T) = {ratio:.2f} <= 2.6 and IC/baseline = {rel:.2f} <= 3")


def test_criterion_08_mab_log_scaling():
    means = (0.5, 0.0, 0.0, 0.0, 0.0)
    cfg_small = RunConfig(algo="ic-ucb", d=5, T=10_000, B=1,
                          seeds=tuple(range(50)), arm_means=means)
    cfg_big = cfg_small.with_(T=100_000)
    small = run_many(cfg_small)
    big = run_many(cfg_big)

    sub_small = np.mean([np.mean(d["pulls"][1:]) for d in small])
    sub_big = np.mean([np.mean(d["pulls"][1:]) for d in big])
    pull_ratio = sub_big / sub_small
    assert pull_ratio <= 2.0, f"suboptimal pulls grew {pull_ratio:.2f}x > 2x"

    reg_small = np.mean([d["final_cum_regret"] for d in small])
    reg_big = np.mean([d["final_cum_regret"] for d in big])
    reg_ratio = reg_big / reg_small
    assert reg_ratio <= 2.0, f"regret grew {reg_ratio:.2f}x > 2x"
    _announce(8, f"pulls ratio {pull_ratio:.2f} and regret ratio {reg_ratio:.2f} (10x horizon)")


def test_criterion_09_inflation_decay(clean_event_batch):
    diags = clean_event_batch["diags"]
    for d in diags:
        assert d["inflation_ok"], (
            f"inflation exceeded 4*sqrt(beta/log(dLT)): max {d['inflation_max']:.3f} "
            f"vs bound {d['inflation_bound']:.3f}"
        )
    worst = max(d["inflation_max"] for d in diags)
    bound = diags[0]["inflation_bound"]
    _announce(9, f"inflation after T_bar+T_tilde at most {worst:.3f} <= {bound:.3f} in all runs")


def test_criterion_10_determinism_and_protocol(clean_event_batch, tmp_path):
    cfg = RunConfig(algo="ic-linucb", d=2, T=2500, B=12, K=8,
                    seeds=(0, 1), c_explore=0.4)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    run_sweep(cfg, out_dir=str(d1), workers=1)
    run_sweep(cfg, out_dir=str(d2), workers=2)
    for name in sorted(os.listdir(d1)):
        assert filecmp.cmp(d1 / name, d2 / name, shallow=False), f"{name} differs"

    for d in clean_event_batch["diags"]:
        assert d["mirror_exact"], "agent/server mirrors diverged"
        expected_tx = CLEAN_T - d["T_bar"]
        assert d["transmissions"] == expected_tx
        assert d["bits_sent"] == 12 * expected_tx

    res = run_ic_linucb(cfg, 0)
    assert res.trace.bits_cum[-1] == res.internals.bits_sent
    _announce(10, "byte-identical sweeps, exact mirrors, exact bit accounting")
