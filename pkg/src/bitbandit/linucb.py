"""Linear bandit over the bit-constrained channel, plus the lossless baseline.

The run is a lockstep loop: a pure-exploration phase of uniform sphere
actions with a single uplink transmission at its last round, then an
exploration-exploitation phase in which the server decodes the previous
innovation symbol, enlarges the classical confidence ellipsoid by the
quantization term, acts optimistically, and the agent encodes the fresh
innovation for the next round.

Agent and server each keep their own copy of everything the protocol says
they know (estimates, schedules, covariance built from the chosen actions);
nothing crosses the channel except symbols and actions.  The baseline run is
the same loop in lossless mode: the server estimate is the agent estimate,
the quantization radius is identically zero, and no channel is metered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import codec, seeding
from .channel import Channel
from .config import RunConfig
from .env import ActionSet, LinearEnv, make_action_set, sample_sphere, sample_sphere_batch
from .trace import Trace, empty_trace

REFRESH_EVERY = 1000  # full factorization refresh cadence for rank-one solves


def beta_sqrt(lam: float, M: float, delta: float, d: int, T: int, L: float) -> float:
    """Classical confidence radius sqrt(beta_T) (natural logs)."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return math.sqrt(lam) * M + math.sqrt(
        2.0 * math.log(1.0 / delta) + d * math.log((d * lam + T * L * L) / (d * lam))
    )


def conf_radius(beta_sq: float, lam: float, t: int, L: float, q_t: float) -> float:
    """Inflated radius: sqrt(beta_T) + sqrt(lambda + (t-1) L^2) * q_t."""
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    return beta_sq + math.sqrt(lam + (t - 1) * L * L) * q_t


def pure_exploration_length(d: int, T: int, L: float, c_explore: float = 10.0) -> int:
    """ceil(c * L^2 * d * sqrt(T) * log(dLT)); errors when Phase II would be empty."""
    if c_explore < 0.0:
        raise ValueError(f"c_explore must be nonnegative, got {c_explore}")
    t_bar = int(math.ceil(c_explore * L * L * d * math.sqrt(T) * math.log(d * L * T)))
    if t_bar + 2 > T:
        raise ValueError(
            f"horizon too short: exploration needs {t_bar} rounds + 2 but T = {T}; "
            "increase T or lower c_explore"
        )
    return t_bar


def tilde_T_linear(M: float, f_T: float) -> int:
    """Rounds after which the inflation term is provably a bounded multiple of sqrt(beta)."""
    return max(int(math.ceil(math.log(10.0 * M / f_T) / math.log(2.0))), 2)


class LsState:
    """Regularized least squares with rank-one updated solves.

    Keeps V, its inverse (Sherman-Morrison updates with a periodic full
    refresh to bound drift), the moment vector b, and theta = V^-1 b.
    """

    def __init__(self, d: int, lam: float):
        if lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.lam = float(lam)
        self.V = lam * np.eye(d)
        self.V_inv = np.eye(d) / lam
        self.b = np.zeros(d)
        self.theta = np.zeros(d)
        self._since_refresh = 0

    @classmethod
    def from_batch(cls, A: np.ndarray, y: np.ndarray, lam: float) -> "LsState":
        s = cls(A.shape[1], lam)
        s.V = lam * np.eye(A.shape[1]) + A.T @ A
        s.b = A.T @ y
        s.refresh()
        return s

    def update(self, a: np.ndarray, y: float) -> None:
        w = self.V_inv @ a
        self.V_inv -= (w[:, None] * w) / (1.0 + a @ w)
        self.V += a[:, None] * a
        self.b += y * a
        self.theta = self.V_inv @ self.b
        self._since_refresh += 1
        if self._since_refresh >= REFRESH_EVERY:
            self.refresh()

    def refresh(self) -> None:
        self.V_inv = np.linalg.inv(self.V)
        self.theta = self.V_inv @ self.b
        self._since_refresh = 0


@dataclass(frozen=True)
class ConfidenceEllipsoid:
    """{theta : ||theta - center||_shape <= radius}."""

    center: np.ndarray
    shape: np.ndarray  # SPD matrix defining the norm
    radius: float


def ucb_action(
    ell: ConfidenceEllipsoid,
    action_set: ActionSet,
    shape_inv: np.ndarray | None = None,
) -> tuple[int, np.ndarray]:
    """Optimistic argmax: <center, a> + radius * ||a||_{shape^-1}, ties to lowest index.

    The inner maximum over the ellipsoid is exact (Cauchy-Schwarz equality),
    so no sampling or inner optimization is involved.
    """
    C = action_set.candidates
    if C.shape[0] == 0:
        raise ValueError("empty action set")
    if shape_inv is None:
        shape_inv = np.linalg.inv(ell.shape)
    W = C @ shape_inv
    norms = np.sqrt(np.einsum("ij,ij->i", W, C))
    scores = C @ ell.center + ell.radius * norms
    idx = int(np.argmax(scores))
    return idx, C[idx]


@dataclass
class LinInternals:
    """Quantities recorded during a run for the lemma-level diagnostics."""

    T: int
    T_bar: int
    T_tilde: int
    d: int
    L: float
    M: float
    lam: float
    c_explore: float
    beta_sqrt: float
    f_T: float
    eigen_checkpoints: list = field(default_factory=list)  # (t, lambda_min)
    max_gap_from_Tbar: float = 0.0
    overflow_count: int = 0
    coverage_violations: int = 0
    mirror_exact: bool = True
    coverage_all_phase2: bool = True
    coverage_frac_phase2: float = 1.0
    inflation_max: float = 0.0
    inflation_bound: float = 0.0
    inflation_ok: bool = True
    transmissions: int = 0
    bits_sent: int = 0
    final_cum_regret: float = 0.0
    theta_star: np.ndarray | None = None


@dataclass
class RunResult:
    trace: Trace | None
    internals: LinInternals


@dataclass(frozen=True)
class LinDiagReport:
    """Per-run booleans for the clean-event structural checks."""

    eigen_ok: bool
    gap_ok: bool
    no_overflow: bool
    coverage_ok: bool
    inflation_ok: bool
    eigen_threshold: float
    eigen_min_observed: float
    gap_threshold: float
    gap_max_observed: float
    coverage_frac: float
    inflation_bound: float
    inflation_max: float

    def all_ok(self) -> bool:
        return (
            self.eigen_ok
            and self.gap_ok
            and self.no_overflow
            and self.coverage_ok
            and self.inflation_ok
        )


def diagnostics_linucb(trace: Trace | None, internals: LinInternals) -> LinDiagReport:
    """Check the structural lemmas a clean run must satisfy.

    The eigenvalue floor is (c_explore / 2) * L^2 * sqrt(T) * log(dLT), the
    Matrix-Bernstein floor T_bar / (2d); at the canonical c_explore = 10 this
    is exactly the 5 L^2 sqrt(T) log(dLT) threshold the analysis uses.  The
    minimum over t >= T_bar is attained at T_bar because rank-one updates can
    only raise the smallest eigenvalue.
    """
    it = internals
    eigen_threshold = (it.c_explore / 2.0) * it.L * it.L * math.sqrt(it.T) * math.log(
        it.d * it.L * it.T
    )
    eigen_min = min(v for _, v in it.eigen_checkpoints) if it.eigen_checkpoints else 0.0
    return LinDiagReport(
        eigen_ok=eigen_min >= eigen_threshold,
        gap_ok=it.max_gap_from_Tbar <= it.f_T,
        no_overflow=it.overflow_count == 0,
        coverage_ok=it.coverage_all_phase2,
        inflation_ok=it.inflation_ok,
        eigen_threshold=eigen_threshold,
        eigen_min_observed=eigen_min,
        gap_threshold=it.f_T,
        gap_max_observed=it.max_gap_from_Tbar,
        coverage_frac=it.coverage_frac_phase2,
        inflation_bound=it.inflation_bound,
        inflation_max=it.inflation_max,
    )


def _build_linear_env(cfg: RunConfig, seed: int) -> tuple[LinearEnv, ActionSet]:
    theta_rng = seeding.stream(seed, seeding.THETA)
    theta_star = cfg.M * sample_sphere(cfg.d, theta_rng)
    env = LinearEnv(
        theta_star,
        cfg.M,
        cfg.L,
        seeding.stream(seed, seeding.NOISE),
        noise_scale=cfg.noise_scale,
    )
    action_set = make_action_set(cfg.d, cfg.K, cfg.L, seeding.stream(seed, seeding.ACTIONS))
    return env, action_set


def run_ic_linucb(
    cfg: RunConfig,
    seed: int,
    *,
    lossless: bool = False,
    want_trace: bool = True,
    env: LinearEnv | None = None,
    action_set: ActionSet | None = None,
    action_refresh=None,
) -> RunResult:
    """One seeded run of the information-constrained linear bandit.

    ``lossless=True`` stubs the codec to the identity (server estimate equals
    agent estimate, q identically zero, channel unmetered), which is exactly
    the uncompressed baseline.  ``action_refresh(t, rng) -> ActionSet`` is an
    optional hook for per-round decision sets; default experiments keep the
    set fixed.
    """
    if env is None or action_set is None:
        built_env, built_set = _build_linear_env(cfg, seed)
        env = env or built_env
        action_set = action_set or built_set

    d, T, L, M, lam = cfg.d, cfg.T, cfg.L, cfg.M, cfg.lam
    bsq = beta_sqrt(lam, M, cfg.delta_eff, d, T, L)
    f_T = codec.f_of_T(L, T, d, bsq * bsq)
    T_bar = pure_exploration_length(d, T, L, cfg.c_explore)
    T_tilde = tilde_T_linear(M, f_T)

    if lossless:
        book = None
        chan = None
        sched = codec.QuantSchedule.start(0.0, 0.0, cfg.epsilon)
    else:
        book = codec.build_unit_net(d, cfg.epsilon, seed, cfg.codebook_stop_rejections)
        codec.capacity_check(book, cfg.B)
        chan = Channel(cfg.B)
        sched = codec.QuantSchedule.start(10.0 * M, f_T, cfg.epsilon)

    internals = LinInternals(
        T=T, T_bar=T_bar, T_tilde=T_tilde, d=d, L=L, M=M, lam=lam,
        c_explore=cfg.c_explore, beta_sqrt=bsq, f_T=f_T,
        inflation_bound=4.0 * math.sqrt((bsq * bsq) / math.log(d * L * T)),
        theta_star=env.theta_star.copy(),
    )

    run_id = cfg.run_id(seed, lossless=lossless)
    tr = empty_trace(run_id, seed, T)

    cand = action_set.candidates
    cand_means = env.mean_batch(cand)
    best_mean = float(cand_means.max())
    cand_regret = np.maximum(best_mean - cand_means, 0.0)

    # ---- Phase I: pure exploration -------------------------------------
    explore_rng = seeding.stream(seed, seeding.EXPLORE)
    A1 = sample_sphere_batch(T_bar + 1, d, explore_rng)
    y1 = env.observe_batch(A1)

    tr.reward[: T_bar + 1] = y1
    tr.inst_regret[: T_bar + 1] = np.maximum(best_mean - env.mean_batch(A1), 0.0)

    agent = LsState.from_batch(A1, y1, lam)
    # Boundary estimates for the successive-gap diagnostic (t = T_bar pair).
    V_prev = agent.V - np.outer(A1[-1], A1[-1])
    b_prev = agent.b - y1[-1] * A1[-1]
    theta_at_Tbar = np.linalg.solve(V_prev, b_prev)
    internals.eigen_checkpoints.append((T_bar, float(np.linalg.eigvalsh(V_prev)[0])))
    internals.max_gap_from_Tbar = float(np.linalg.norm(agent.theta - theta_at_Tbar))

    theta_s = np.zeros(d)          # server estimate, known-to-both init
    mirror = np.zeros(d)           # agent's copy of the server estimate

    # Schedules are stepped inline below with the exact schedule_step
    # arithmetic (q' = eps*(q + f); p' = q' + f); agent and server each
    # advance their own copy, mirroring the protocol.
    eps = sched.epsilon
    f_const = sched.f_const
    q_a = eps * (sched.q + f_const)
    p_a = q_a + f_const
    q_s, p_s = q_a, p_a

    # Round T_bar + 1: the only Phase-I transmission.
    if lossless:
        pending: object = agent.theta.copy()
        mirror = agent.theta.copy()
    else:
        sym = codec.vector_encode(book, p_a, agent.theta - mirror)
        if sym == book.overflow_symbol:
            internals.overflow_count += 1
            tr.overflow_flag[T_bar] = 1
        else:
            x = (agent.theta - mirror) / p_a
            _, dist = codec.nearest_center(book, x)
            if dist > book.epsilon:
                internals.coverage_violations += 1
        chan.transmit(sym)
        decoded = codec.vector_decode(book, p_a, sym)
        if decoded is not None:
            mirror = mirror + decoded
        pending = sym
        tr.bits_cum[T_bar] = chan.bits_sent

    theta_prev = agent.theta.copy()

    # ---- Phase II: information-constrained optimism --------------------
    server_V = agent.V.copy()      # rebuilt from chosen actions; same history
    server_V_inv = agent.V_inv.copy()
    since_refresh = 0

    theta_star = env.theta_star
    L_sq = L * L
    sqrt_ = math.sqrt
    tr.cum_regret[: T_bar + 1] = np.cumsum(tr.inst_regret[: T_bar + 1])
    cum = float(tr.cum_regret[T_bar])
    phase2_cov_fail = 0
    infl_max = 0.0
    infl_ok = True
    bits_now = 0 if chan is None else chan.bits_sent
    infl_bound = internals.inflation_bound
    t_infl = T_bar + T_tilde
    overflow_sym = None if lossless else book.overflow_symbol
    book_centers = None if lossless else book.centers
    eps_sq = None if lossless else book.epsilon * book.epsilon

    tr_action = tr.action_index
    tr_reward = tr.reward
    tr_inst = tr.inst_regret
    tr_cum = tr.cum_regret
    tr_bits = tr.bits_cum
    tr_cov = tr.coverage_flag
    tr_phase = tr.phase
    tr_over = tr.overflow_flag

    for t in range(T_bar + 2, T + 1):
        i = t - 1  # row index

        # Server: decode last symbol, refresh estimate and mirror check.
        if lossless:
            theta_s = pending.copy()
        else:
            if pending != overflow_sym:
                theta_s = theta_s + p_s * book_centers[pending]
            # overflow: estimate unchanged, schedule advances regardless
            if mirror.tobytes() != theta_s.tobytes():
                internals.mirror_exact = False

        q_s = eps * (q_s + f_const)
        p_s = q_s + f_const
        scale = sqrt_(lam + (t - 1) * L_sq)
        radius = bsq + scale * q_s

        if t >= t_infl:
            infl = scale * q_s
            if infl > infl_max:
                infl_max = infl
            if infl > infl_bound:
                infl_ok = False

        if action_refresh is not None:
            action_set = action_refresh(t, seeding.stream(seed, seeding.ACTIONS, t))
            cand = action_set.candidates
            cand_means = env.mean_batch(cand)
            best_mean = float(cand_means.max())
            cand_regret = np.maximum(best_mean - cand_means, 0.0)

        W = cand @ server_V_inv
        scores = cand @ theta_s + radius * np.sqrt(np.einsum("ij,ij->i", W, cand))
        a_idx = int(np.argmax(scores))
        a = cand[a_idx]

        diff = theta_star - theta_s
        if diff @ server_V @ diff > radius * radius:
            phase2_cov_fail += 1
            tr_cov[i] = 0

        # Server covariance tracks its own chosen action.
        w = server_V_inv @ a
        server_V_inv -= (w[:, None] * w) / (1.0 + a @ w)
        server_V += a[:, None] * a

        y = cand_means[a_idx] + env.noise()

        # Agent: estimate, innovation, encode.
        q_a = eps * (q_a + f_const)
        p_a = q_a + f_const
        agent.update(a, y)
        gap_vec = agent.theta - theta_prev
        gap = sqrt_(gap_vec @ gap_vec)
        if gap > internals.max_gap_from_Tbar:
            internals.max_gap_from_Tbar = gap
        theta_prev = agent.theta

        if lossless:
            pending = agent.theta.copy()
            mirror = agent.theta
        else:
            x = (agent.theta - mirror) / p_a
            if x @ x > 1.0:
                sym = overflow_sym
                internals.overflow_count += 1
                tr_over[i] = 1
            else:
                dv = book_centers - x
                d2 = np.einsum("ij,ij->i", dv, dv)
                sym = int(np.argmin(d2))
                if d2[sym] > eps_sq:
                    internals.coverage_violations += 1
                mirror = mirror + p_a * book_centers[sym]
            chan.transmit(sym)
            bits_now = chan.bits_sent
            pending = sym

        since_refresh += 1
        if since_refresh >= REFRESH_EVERY:
            server_V_inv = np.linalg.inv(server_V)
            internals.eigen_checkpoints.append((t, float(np.linalg.eigvalsh(server_V)[0])))
            since_refresh = 0

        cum += cand_regret[a_idx]
        tr_action[i] = a_idx
        tr_reward[i] = y
        tr_inst[i] = cand_regret[a_idx]
        tr_cum[i] = cum
        tr_bits[i] = bits_now
        tr_phase[i] = 2

    internals.eigen_checkpoints.append((T, float(np.linalg.eigvalsh(server_V)[0])))
    n_phase2 = T - (T_bar + 1)
    internals.coverage_all_phase2 = phase2_cov_fail == 0
    internals.coverage_frac_phase2 = 1.0 - (phase2_cov_fail / n_phase2 if n_phase2 else 0.0)
    internals.inflation_max = infl_max
    internals.inflation_ok = infl_ok
    internals.final_cum_regret = cum
    if chan is not None:
        internals.transmissions = chan.transmissions
        internals.bits_sent = chan.bits_sent

    return RunResult(trace=tr if want_trace else None, internals=internals)


def run_linucb(cfg: RunConfig, seed: int, **kwargs) -> RunResult:
    """Uncompressed baseline: the same loop with the channel stubbed away."""
    return run_ic_linucb(cfg, seed, lossless=True, **kwargs)
