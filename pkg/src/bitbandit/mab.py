"""One-bit-per-round multi-armed bandit and the classical index baseline.

Arms are basis vectors, so the agent encodes a *scalar* innovation per play:
the running mean of the arm just played minus the server's estimate of it.
The interval [-p_k, p_k] (k = play count of that arm, schedules independent
per arm) is split into 2**B uniform bins; an innovation outside the interval
means the agent stays silent and both sides keep their estimates frozen
while the k-indexed schedules advance (they depend on nothing random, so
both ends stay synchronized without extra signaling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Channel
from .codec import (
    ScalarSchedule,
    scalar_decode,
    scalar_encode,
    scalar_q_envelope,
    scalar_schedule_step,
)
from .config import RunConfig
from .env import MABEnv
from .trace import Trace, empty_trace

_DECODE_SLACK = 1e-12  # float headroom on the exact gamma*p decode bound


@dataclass
class ArmState:
    """Play count, running means on both ends, and the arm's own schedule."""

    n: int
    sum_y: float
    theta_a: float
    theta_s: float
    mirror: float
    schedule: ScalarSchedule


def ic_ucb_index(arm: ArmState) -> float:
    """Server-side optimistic index: theta_s + q_n + f_n."""
    if arm.n < 1:
        raise ValueError("arm must be played once before it has an index")
    return arm.theta_s + arm.schedule.q + arm.schedule.f


@dataclass
class MabInternals:
    T: int
    d: int
    m: float
    B: int | None
    gaps: np.ndarray
    pulls: np.ndarray
    no_transmissions: int = 0
    mirror_exact: bool = True
    decode_error_ok: bool = True
    envelope_ok: bool = True
    transmissions: int = 0
    bits_sent: int = 0
    final_cum_regret: float = 0.0


@dataclass
class MabRunResult:
    trace: Trace | None
    internals: MabInternals


def _mab_env(cfg: RunConfig, seed: int) -> MABEnv:
    return MABEnv(np.asarray(cfg.arm_means, dtype=float), seed, noise_scale=cfg.noise_scale)


def run_ic_ucb(
    cfg: RunConfig,
    seed: int,
    *,
    lossless: bool = False,
    want_trace: bool = True,
    env: MABEnv | None = None,
) -> MabRunResult:
    """Bit-constrained index policy; ``lossless=True`` models infinite capacity.

    The trace's overflow_flag marks no-transmission rounds and coverage_flag
    records the per-play clean-event pair for the arm just played:
    |theta_a - theta_i| <= f_k and |theta_a - theta_s| <= q_k.
    """
    env = env or _mab_env(cfg, seed)
    d, T = env.d, cfg.T
    if T < d:
        raise ValueError(f"need T >= number of arms, got T={T}, d={d}")
    B = None if lossless else cfg.B
    chan = None if lossless else Channel(cfg.B)

    arms = [
        ArmState(n=0, sum_y=0.0, theta_a=0.0, theta_s=0.0, mirror=0.0,
                 schedule=ScalarSchedule.start(B, env.m, T))
        for _ in range(d)
    ]
    index = np.full(d, np.inf)

    tr = empty_trace(cfg.run_id(seed), seed, T)
    internals = MabInternals(
        T=T, d=d, m=env.m, B=B, gaps=env.gaps.copy(), pulls=np.zeros(d, dtype=np.int64)
    )
    gaps = env.gaps
    cum = 0.0
    bits_now = 0

    for t in range(1, T + 1):
        i = t - 1
        arm_id = i if t <= d else int(np.argmax(index))
        arm = arms[arm_id]

        if arm.n >= 1:
            arm.schedule = scalar_schedule_step(arm.schedule)
            if arm.schedule.q > scalar_q_envelope(arm.schedule):
                internals.envelope_ok = False
        sched = arm.schedule

        y = env.pull(arm_id)
        arm.n += 1
        arm.sum_y += y
        arm.theta_a = arm.sum_y / arm.n

        if lossless:
            arm.theta_s = arm.theta_a
            arm.mirror = arm.theta_a
        else:
            e = arm.theta_a - arm.mirror
            sym = scalar_encode(e, sched.p, B)
            if sym is None:
                chan.no_transmission()
                internals.no_transmissions += 1
                tr.overflow_flag[i] = 1
            else:
                chan.transmit(sym)
                dec = scalar_decode(sym, sched.p, B)
                arm.theta_s += dec
                arm.mirror += dec
                if abs(arm.theta_a - arm.theta_s) > sched.q * (1.0 + _DECODE_SLACK) + 1e-15:
                    internals.decode_error_ok = False
            if arm.mirror != arm.theta_s:
                internals.mirror_exact = False
            bits_now = chan.bits_sent

        index[arm_id] = arm.theta_s + sched.q + sched.f

        covered = abs(arm.theta_a - env.means[arm_id]) <= sched.f and (
            abs(arm.theta_a - arm.theta_s) <= sched.q * (1.0 + _DECODE_SLACK) + 1e-15
        )
        cum += gaps[arm_id]
        tr.action_index[i] = arm_id
        tr.reward[i] = y
        tr.inst_regret[i] = gaps[arm_id]
        tr.cum_regret[i] = cum
        tr.bits_cum[i] = bits_now
        tr.coverage_flag[i] = 1 if covered else 0
        tr.phase[i] = 1 if t <= d else 2

    for a_id, arm in enumerate(arms):
        internals.pulls[a_id] = arm.n
    internals.final_cum_regret = cum
    if chan is not None:
        internals.transmissions = chan.transmissions
        internals.bits_sent = chan.bits_sent

    return MabRunResult(trace=tr if want_trace else None, internals=internals)


def run_ucb(
    cfg: RunConfig,
    seed: int,
    *,
    want_trace: bool = True,
    env: MABEnv | None = None,
) -> MabRunResult:
    """Classical index baseline (theta_a + f_n), no channel: independent code path."""
    env = env or _mab_env(cfg, seed)
    d, T = env.d, cfg.T
    if T < d:
        raise ValueError(f"need T >= number of arms, got T={T}, d={d}")
    log_T = math.log(T)

    counts = np.zeros(d, dtype=np.int64)
    sums = np.zeros(d)
    means = np.zeros(d)
    index = np.full(d, np.inf)

    tr = empty_trace(cfg.run_id(seed), seed, T)
    internals = MabInternals(
        T=T, d=d, m=env.m, B=None, gaps=env.gaps.copy(), pulls=np.zeros(d, dtype=np.int64)
    )
    gaps = env.gaps
    cum = 0.0

    for t in range(1, T + 1):
        i = t - 1
        arm = i if t <= d else int(np.argmax(index))
        y = env.pull(arm)
        counts[arm] += 1
        sums[arm] += y
        means[arm] = sums[arm] / counts[arm]
        f_n = 2.0 * math.sqrt(log_T / counts[arm])
        index[arm] = means[arm] + f_n

        cum += gaps[arm]
        tr.action_index[i] = arm
        tr.reward[i] = y
        tr.inst_regret[i] = gaps[arm]
        tr.cum_regret[i] = cum
        tr.coverage_flag[i] = 1 if abs(means[arm] - env.means[arm]) <= f_n else 0
        tr.phase[i] = 1 if t <= d else 2

    internals.pulls[:] = counts
    internals.final_cum_regret = cum
    return MabRunResult(trace=tr if want_trace else None, internals=internals)
