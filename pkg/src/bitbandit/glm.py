"""Generalized-linear bandit over the bit-constrained channel.

Same protocol skeleton as the linear run, with three changes: the agent's
estimate solves a nonlinear moment equation instead of least squares, the
quantizer schedule uses the link-adjusted drift scale and starting radius,
and the server's confidence set is defined through the nonlinear map g, so
optimism runs over the ellipsoid that encloses it (radius divided by the
curvature floor k1).

The moment equation  g_t(theta) = sum_s y_s a_s,  with
g_t(theta) = lambda*theta + sum_s mu(<theta, a_s>) a_s,  is solved by
minimizing the strictly convex potential whose gradient is exactly that
residual; damped Newton with Armijo backtracking converges globally and the
previous round's solution is a warm start one observation away.
"""

from __future__ import annotations

import math

import numpy as np

from . import codec, seeding
from .channel import Channel
from .config import RunConfig
from .env import ActionSet, GLMEnv, make_action_set, sample_sphere, sample_sphere_batch
from .links import LinkFunction, link_by_name, link_constants
from .linucb import (
    ConfidenceEllipsoid,
    LinInternals,
    RunResult,
    beta_sqrt,
    pure_exploration_length,
    ucb_action,
)
from .trace import empty_trace

ARMIJO = 1e-4
REFRESH_EVERY = 1000


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(msg)
        self.residual = residual


def g_eval(theta: np.ndarray, A: np.ndarray, lam: float, link: LinkFunction) -> np.ndarray:
    """g(theta) = lambda*theta + sum_s mu(<theta, a_s>) a_s over the history A."""
    theta = np.asarray(theta, dtype=float)
    if A.shape[0] == 0:
        return lam * theta
    return lam * theta + A.T @ np.asarray(link.mu(A @ theta), dtype=float)


def h_metric(
    theta: np.ndarray,
    theta_ref: np.ndarray,
    A: np.ndarray,
    lam: float,
    link: LinkFunction,
    V_inv: np.ndarray,
) -> float:
    """||g(theta) - g(theta_ref)||_{V^-1}: exact membership metric of the set."""
    diff = g_eval(theta, A, lam, link) - g_eval(theta_ref, A, lam, link)
    return math.sqrt(max(float(diff @ V_inv @ diff), 0.0))


def glm_conf_radius(beta_sq: float, k2: float, lam: float, t: int, L: float, q_t: float) -> float:
    """sqrt(beta_T) + k2 * sqrt(lambda + (t-1) L^2) * q_t."""
    return beta_sq + k2 * math.sqrt(lam + (t - 1) * L * L) * q_t


def glm_exploration_length(
    d: int, T: int, L: float, k1: float, k2: float, c_explore: float = 10.0
) -> int:
    """Linear exploration length scaled by the curvature ratio k2/k1."""
    return pure_exploration_length(d, T, L, c_explore * (k2 / k1))


def tilde_T_glm(M: float, k1: float, k2: float, f_bar: float) -> int:
    num = (2.0 + 3.0 / math.sqrt(k1 * k2)) * M
    return max(int(math.ceil(math.log(num / f_bar) / math.log(2.0))), 2)


class GlmAgentState:
    """Observation history and the current root of the moment equation."""

    def __init__(self, d: int, lam: float, link: LinkFunction, capacity: int):
        if lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.lam = float(lam)
        self.link = link
        self._A = np.zeros((capacity, d))
        self._y = np.zeros(capacity)
        self.n = 0
        self.b = np.zeros(d)  # sum_s y_s a_s
        self.theta = np.zeros(d)

    @property
    def A(self) -> np.ndarray:
        return self._A[: self.n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self.n]

    def add(self, a: np.ndarray, y: float) -> None:
        if self.n >= self._A.shape[0]:
            raise ValueError("history capacity exceeded")
        self._A[self.n] = a
        self._y[self.n] = y
        self.n += 1
        self.b += y * a

    def add_batch(self, A: np.ndarray, y: np.ndarray) -> None:
        k = A.shape[0]
        self._A[self.n : self.n + k] = A
        self._y[self.n : self.n + k] = y
        self.n += k
        self.b = self.b + A.T @ y


def glm_fit(
    state: GlmAgentState,
    tol: float | None = None,
    max_iter: int = 50,
    warm_start: bool = True,
) -> np.ndarray:
    """Solve g(theta) = sum y_s a_s by damped Newton on the convex potential.

    The potential is Phi(theta) = (lambda/2)||theta||^2 + sum_s m(<theta,a_s>)
    - <theta, b> with m' = mu, so grad Phi is the moment residual and the
    Hessian lambda*I + sum_s mu_dot(<theta,a_s>) a_s a_s' is positive definite
    whenever mu is nondecreasing.  Updates state.theta in place on success.
    """
    A, b, lam, link = state.A, state.b, state.lam, state.link
    d = state._A.shape[1]
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.linalg.norm(b)))
    theta = state.theta.copy() if warm_start else np.zeros(d)

    def potential(th: np.ndarray, z: np.ndarray) -> float:
        return 0.5 * lam * float(th @ th) + float(np.sum(link.mu_int(z))) - float(th @ b)

    # Backtracking cannot resolve decrements below the float noise of the
    # potential, so inside the quadratic-convergence region the full Newton
    # step is taken directly (with a divergence safeguard).
    switch = 1e-4 * (1.0 + float(np.linalg.norm(b)))
    force_damping = False

    z = A @ theta
    residual = float("inf")
    for _ in range(max_iter):
        grad = lam * theta + (A.T @ np.asarray(link.mu(z), dtype=float) if A.size else 0.0) - b
        prev_residual = residual
        residual = float(np.linalg.norm(grad))
        if residual <= tol:
            state.theta = theta
            return theta
        if residual > prev_residual:
            force_damping = True
        weights = np.asarray(link.mu_dot(z), dtype=float)
        H = lam * np.eye(d) + (A.T * weights) @ A if A.size else lam * np.eye(d)
        step = np.linalg.solve(H, -grad)
        if residual <= switch and not force_damping:
            theta = theta + step
            z = A @ theta
            continue
        phi0 = potential(theta, z)
        slope = float(grad @ step)
        eta = 1.0
        while True:
            cand = theta + eta * step
            zc = A @ cand
            if potential(cand, zc) <= phi0 + ARMIJO * eta * slope or eta < 1e-12:
                break
            eta *= 0.5
        theta = cand
        z = zc

    raise ConvergenceError(
        f"moment solve did not reach tol={tol:.3g} in {max_iter} Newton steps "
        f"(residual {residual:.3g})",
        residual,
    )


def glm_ucb_action(
    center: np.ndarray,
    V: np.ndarray,
    radius: float,
    k1: float,
    action_set: ActionSet,
    shape_inv: np.ndarray | None = None,
) -> tuple[int, np.ndarray]:
    """Optimism over the ellipsoid enclosing the g-defined set.

    The sandwich k1*V <= G <= k2*V turns membership H(theta) <= r into
    ||theta - center||_V <= r/k1, so the exact linear-UCB argmax applies with
    the enlarged radius.  For increasing mu, maximizing <theta, a> and
    mu(<theta, a>) pick the same pair.
    """
    ell = ConfidenceEllipsoid(center=center, shape=V, radius=radius / k1)
    return ucb_action(ell, action_set, shape_inv=shape_inv)


def _build_glm_env(cfg: RunConfig, seed: int, link: LinkFunction) -> tuple[GLMEnv, ActionSet]:
    theta_rng = seeding.stream(seed, seeding.THETA)
    theta_star = cfg.M * sample_sphere(cfg.d, theta_rng)
    env = GLMEnv(
        theta_star,
        link,
        cfg.M,
        cfg.L,
        seeding.stream(seed, seeding.NOISE),
        noise_scale=cfg.noise_scale,
    )
    action_set = make_action_set(cfg.d, cfg.K, cfg.L, seeding.stream(seed, seeding.ACTIONS))
    return env, action_set


def run_ic_glmucb(
    cfg: RunConfig,
    seed: int,
    *,
    lossless: bool = False,
    want_trace: bool = True,
    env: GLMEnv | None = None,
    action_set: ActionSet | None = None,
) -> RunResult:
    """One seeded run of the information-constrained generalized-linear bandit."""
    link = link_by_name(cfg.link)
    if env is None or action_set is None:
        built_env, built_set = _build_glm_env(cfg, seed, link)
        env = env or built_env
        action_set = action_set or built_set
    k1, k2 = link_constants(link, cfg.L, cfg.M)

    d, T, L, M, lam = cfg.d, cfg.T, cfg.L, cfg.M, cfg.lam
    bsq = beta_sqrt(lam, M, cfg.delta_eff, d, T, L)
    f_bar = codec.f_of_T(L, T, d, (bsq * bsq) / (k1 * k2))
    T_bar = glm_exploration_length(d, T, L, k1, k2, cfg.c_explore)
    T_tilde = tilde_T_glm(M, k1, k2, f_bar)
    q0 = (4.0 + 6.0 / math.sqrt(k1 * k2)) * M

    if lossless:
        book = None
        chan = None
        sched = codec.QuantSchedule.start(0.0, 0.0, cfg.epsilon)
    else:
        book = codec.build_unit_net(d, cfg.epsilon, seed, cfg.codebook_stop_rejections)
        codec.capacity_check(book, cfg.B)
        chan = Channel(cfg.B)
        sched = codec.QuantSchedule.start(q0, f_bar, cfg.epsilon)

    internals = LinInternals(
        T=T, T_bar=T_bar, T_tilde=T_tilde, d=d, L=L, M=M, lam=lam,
        c_explore=cfg.c_explore * (k2 / k1), beta_sqrt=bsq, f_T=f_bar,
        inflation_bound=4.0 * math.sqrt((bsq * bsq) / (k1 * k2 * math.log(d * L * T))),
        theta_star=env.theta_star.copy(),
    )

    tr = empty_trace(cfg.run_id(seed, lossless=lossless), seed, T)

    cand = action_set.candidates
    cand_means = env.mean_batch(cand)
    best_mean = float(cand_means.max())
    cand_regret = np.maximum(best_mean - cand_means, 0.0)

    # ---- Phase I --------------------------------------------------------
    explore_rng = seeding.stream(seed, seeding.EXPLORE)
    A1 = sample_sphere_batch(T_bar + 1, d, explore_rng)
    y1 = env.observe_batch(A1)
    tr.reward[: T_bar + 1] = y1
    tr.inst_regret[: T_bar + 1] = np.maximum(best_mean - env.mean_batch(A1), 0.0)
    tr.cum_regret[: T_bar + 1] = np.cumsum(tr.inst_regret[: T_bar + 1])

    agent = GlmAgentState(d, lam, link, capacity=T)
    agent.add_batch(A1[:T_bar], y1[:T_bar])
    glm_fit(agent, warm_start=False)
    theta_at_Tbar = agent.theta.copy()
    V = lam * np.eye(d) + A1[:T_bar].T @ A1[:T_bar]
    internals.eigen_checkpoints.append((T_bar, float(np.linalg.eigvalsh(V)[0])))

    agent.add(A1[T_bar], y1[T_bar])
    glm_fit(agent)
    internals.max_gap_from_Tbar = float(np.linalg.norm(agent.theta - theta_at_Tbar))
    V = V + np.outer(A1[T_bar], A1[T_bar])

    theta_star = env.theta_star
    g_star = g_eval(theta_star, A1, lam, link)  # maintained incrementally below

    theta_s = np.zeros(d)
    mirror = np.zeros(d)

    sched = codec.schedule_step(sched)
    agent_sched = sched
    server_sched = sched
    if lossless:
        pending: object = agent.theta.copy()
        mirror = agent.theta.copy()
    else:
        sym = codec.vector_encode(book, agent_sched.p, agent.theta - mirror)
        if sym == book.overflow_symbol:
            internals.overflow_count += 1
            tr.overflow_flag[T_bar] = 1
        else:
            _, dist = codec.nearest_center(book, (agent.theta - mirror) / agent_sched.p)
            if dist > book.epsilon:
                internals.coverage_violations += 1
        chan.transmit(sym)
        decoded = codec.vector_decode(book, agent_sched.p, sym)
        if decoded is not None:
            mirror = mirror + decoded
        pending = sym
        tr.bits_cum[T_bar] = chan.bits_sent

    theta_prev = agent.theta.copy()

    # ---- Phase II -------------------------------------------------------
    server_V = V.copy()
    server_V_inv = np.linalg.inv(server_V)
    since_refresh = 0
    cum = float(tr.cum_regret[T_bar])
    phase2_cov_fail = 0
    infl_max = 0.0
    infl_ok = True
    bits_now = 0 if chan is None else chan.bits_sent
    mu = link.mu
    L_sq = L * L

    for t in range(T_bar + 2, T + 1):
        i = t - 1

        if lossless:
            theta_s = pending.copy()
        else:
            decoded = codec.vector_decode(book, server_sched.p, pending)
            if decoded is not None:
                theta_s = theta_s + decoded
            if not np.array_equal(mirror, theta_s):
                internals.mirror_exact = False

        server_sched = codec.schedule_step(server_sched)
        q_t = server_sched.q
        radius = bsq + k2 * math.sqrt(lam + (t - 1) * L_sq) * q_t

        if t >= T_bar + T_tilde:
            infl = math.sqrt(lam + (t - 1) * L_sq) * q_t
            if infl > infl_max:
                infl_max = infl
            if infl > internals.inflation_bound:
                infl_ok = False

        # Exact-membership coverage of the true parameter in the g-defined set.
        A_hist = agent.A
        g_srv = g_eval(theta_s, A_hist, lam, link)
        diff = g_star - g_srv
        if float(diff @ server_V_inv @ diff) > radius * radius:
            phase2_cov_fail += 1
            tr.coverage_flag[i] = 0

        W = cand @ server_V_inv
        norms = np.sqrt(np.einsum("ij,ij->i", W, cand))
        scores = cand @ theta_s + (radius / k1) * norms
        a_idx = int(np.argmax(scores))
        a = cand[a_idx]

        w = server_V_inv @ a
        server_V_inv -= (w[:, None] * w) / (1.0 + a @ w)
        server_V += a[:, None] * a

        # cand_means[a_idx] is the exact mean reward of the chosen candidate,
        # so only the noise draw is needed (same stream order as observe()).
        y = cand_means[a_idx] + env.noise()
        g_star = g_star + float(mu(theta_star @ a)) * a

        agent_sched = codec.schedule_step(agent_sched)
        agent.add(a, y)
        try:
            glm_fit(agent)
        except ConvergenceError as exc:
            raise ConvergenceError(f"round {t}: {exc}", exc.residual) from exc
        gap = float(np.linalg.norm(agent.theta - theta_prev))
        if gap > internals.max_gap_from_Tbar:
            internals.max_gap_from_Tbar = gap
        theta_prev = agent.theta.copy()

        if lossless:
            pending = agent.theta.copy()
            mirror = agent.theta.copy()
        else:
            e = agent.theta - mirror
            p_t = agent_sched.p
            x = e / p_t
            if x @ x > 1.0:
                sym = book.overflow_symbol
                internals.overflow_count += 1
                tr.overflow_flag[i] = 1
            else:
                sym, dist = codec.nearest_center(book, x)
                if dist > book.epsilon:
                    internals.coverage_violations += 1
            chan.transmit(sym)
            decoded = codec.vector_decode(book, p_t, sym)
            if decoded is not None:
                mirror = mirror + decoded
            pending = sym
            bits_now = chan.bits_sent

        since_refresh += 1
        if since_refresh >= REFRESH_EVERY:
            server_V_inv = np.linalg.inv(server_V)
            internals.eigen_checkpoints.append((t, float(np.linalg.eigvalsh(server_V)[0])))
            since_refresh = 0

        cum += cand_regret[a_idx]
        tr.action_index[i] = a_idx
        tr.reward[i] = y
        tr.inst_regret[i] = cand_regret[a_idx]
        tr.cum_regret[i] = cum
        tr.bits_cum[i] = bits_now
        tr.phase[i] = 2

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
