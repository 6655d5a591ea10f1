"""Bandit environments: linear, generalized-linear, and multi-armed.

Environments own a seeded noise stream and score regret against a finite
candidate action set.  They accept *any* action with norm <= L (the pure
exploration phase plays raw sphere samples that are not candidates), while
regret is always measured against the candidate maximum; a played action
that happens to beat every candidate scores zero regret, which keeps the
cumulative regret trace nondecreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .links import LinkFunction
from . import seeding

_NORM_SLACK = 1e-9  # tolerance on ||a|| <= L checks


def sample_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform draw from the unit sphere (normalized i.i.d. normals)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    while True:
        v = rng.standard_normal(d)
        n = np.linalg.norm(v)
        if n > 0.0:  # zero vector has probability zero; redraw if it happens
            return v / n


def sample_sphere_batch(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform sphere points as an (n, d) array, stream-equivalent to n single draws."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    v = rng.standard_normal((n, d))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        bad = np.nonzero(norms[:, 0] == 0.0)[0]
        for i in bad:
            v[i] = sample_sphere(d, rng)
            norms[i, 0] = 1.0
    return v / norms


@dataclass(frozen=True)
class ActionSet:
    """Finite candidate set: K row vectors, each with ||a||_2 <= L."""

    candidates: np.ndarray  # (K, d)
    L: float = 1.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.candidates, dtype=float))
        object.__setattr__(self, "candidates", c)
        if c.shape[0] < 2:
            raise ValueError(f"need at least 2 candidate actions, got {c.shape[0]}")
        norms = np.linalg.norm(c, axis=1)
        if np.any(norms > self.L + _NORM_SLACK):
            raise ValueError(f"candidate norm {norms.max():.6g} exceeds L = {self.L}")

    @property
    def K(self) -> int:
        return self.candidates.shape[0]

    @property
    def d(self) -> int:
        return self.candidates.shape[1]


def make_action_set(
    d: int,
    K: int,
    L: float,
    rng: np.random.Generator,
    norm: float = 1.0,
) -> ActionSet:
    """K uniformly random directions scaled to a common norm (default 1)."""
    if K < 2:
        raise ValueError(f"need K >= 2 candidates, got {K}")
    if not 0.0 < norm <= L + _NORM_SLACK:
        raise ValueError(f"candidate norm {norm} must lie in (0, L={L}]")
    pts = sample_sphere_batch(K, d, rng) * norm
    return ActionSet(pts, L=float(L))


class LinearEnv:
    """Linear reward model: y = <theta_star, a> + noise, noise ~ N(0, 1).

    The standard normal is the canonical 1-subgaussian noise law.  Set
    ``noise_scale=0`` to run the deterministic mean model (the stream still
    advances one draw per observation, so action sequences stay comparable).
    """

    def __init__(
        self,
        theta_star: np.ndarray,
        M: float,
        L: float,
        rng: np.random.Generator,
        noise_scale: float = 1.0,
    ):
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.M = float(M)
        self.L = float(L)
        if self.M < 1.0:
            raise ValueError(f"M must be >= 1, got {M}")
        if self.L < 1.0:
            raise ValueError(f"L must be >= 1, got {L}")
        nrm = float(np.linalg.norm(self.theta_star))
        if nrm > self.M + _NORM_SLACK:
            raise ValueError(f"||theta_star|| = {nrm:.6g} exceeds M = {M}")
        self.rng = rng
        self.noise_scale = float(noise_scale)

    @property
    def d(self) -> int:
        return self.theta_star.shape[0]

    def _check_action(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        n = float(np.linalg.norm(a))
        if n > self.L + _NORM_SLACK:
            raise ValueError(f"action norm {n:.6g} exceeds L = {self.L}")
        return a

    def mean(self, a: np.ndarray) -> float:
        return float(self.theta_star @ np.asarray(a, dtype=float))

    def mean_batch(self, A: np.ndarray) -> np.ndarray:
        return np.asarray(A, dtype=float) @ self.theta_star

    def observe(self, a: np.ndarray) -> float:
        a = self._check_action(a)
        return float(self.theta_star @ a) + self.noise_scale * float(self.rng.standard_normal())

    def noise(self) -> float:
        """One draw from the noise stream; lets callers that already know the
        mean reward (e.g. of a validated candidate) skip recomputing it."""
        return self.noise_scale * float(self.rng.standard_normal())

    def observe_batch(self, A: np.ndarray) -> np.ndarray:
        """Rewards for a block of actions; consumes len(A) noise draws in stream order."""
        A = np.asarray(A, dtype=float)
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms > self.L + _NORM_SLACK):
            raise ValueError(f"action norm {norms.max():.6g} exceeds L = {self.L}")
        return A @ self.theta_star + self.noise_scale * self.rng.standard_normal(A.shape[0])


class GLMEnv(LinearEnv):
    """Generalized-linear rewards: y = mu(<theta_star, a>) + noise."""

    def __init__(
        self,
        theta_star: np.ndarray,
        link: LinkFunction,
        M: float,
        L: float,
        rng: np.random.Generator,
        noise_scale: float = 1.0,
    ):
        super().__init__(theta_star, M, L, rng, noise_scale)
        self.link = link

    def mean(self, a: np.ndarray) -> float:
        return float(self.link.mu(self.theta_star @ np.asarray(a, dtype=float)))

    def mean_batch(self, A: np.ndarray) -> np.ndarray:
        return np.asarray(self.link.mu(np.asarray(A, dtype=float) @ self.theta_star), dtype=float)

    def observe(self, a: np.ndarray) -> float:
        a = self._check_action(a)
        return self.mean(a) + self.noise_scale * float(self.rng.standard_normal())

    def observe_batch(self, A: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms > self.L + _NORM_SLACK):
            raise ValueError(f"action norm {norms.max():.6g} exceeds L = {self.L}")
        return self.mean_batch(A) + self.noise_scale * self.rng.standard_normal(A.shape[0])


class MABEnv:
    """Unstructured multi-armed bandit (actions are the basis vectors).

    Arms are relabeled so that arm 0 is optimal; ``gaps[i]`` is then the
    suboptimality gap of relabeled arm i.  Noise is drawn from a per-arm
    substream indexed by play count, i.e. the k-th play of arm i sees the
    same noise value in every run with the same seed regardless of when the
    play happens.  This is the coupling the regret analysis uses and it makes
    seed-matched algorithm comparisons sharp.
    """

    def __init__(
        self,
        means: np.ndarray,
        seed: int,
        m: float | None = None,
        noise_scale: float = 1.0,
    ):
        means = np.asarray(means, dtype=float)
        if means.ndim != 1 or means.size < 2:
            raise ValueError("need a 1-d vector of >= 2 arm means")
        order = np.argsort(-means, kind="stable")
        self.means = means[order]
        self.relabeling = order  # relabeled index -> original index
        self.gaps = self.means[0] - self.means
        self.m = float(m) if m is not None else max(1.0, float(np.abs(means).max()))
        if self.m < 1.0:
            raise ValueError(f"m must be >= 1, got {m}")
        if float(np.abs(self.means).max()) > self.m + _NORM_SLACK:
            raise ValueError(f"max |mean| = {np.abs(self.means).max():.6g} exceeds m = {self.m}")
        self.noise_scale = float(noise_scale)
        self._arm_rngs = [seeding.stream(seed, seeding.NOISE, i) for i in range(means.size)]

    @property
    def d(self) -> int:
        return self.means.size

    def pull(self, arm: int) -> float:
        """Reward for one play of a (relabeled) arm."""
        if not 0 <= arm < self.d:
            raise ValueError(f"arm {arm} out of range [0, {self.d})")
        eta = float(self._arm_rngs[arm].standard_normal())
        return float(self.means[arm]) + self.noise_scale * eta


def instant_regret(env, action_set: ActionSet, a: np.ndarray) -> float:
    """Instantaneous regret of playing ``a`` against the candidate maximum.

    Clipped at zero: an off-candidate action (Phase-I sphere play) that beats
    every candidate contributes no regret, which is the ``max(candidates +
    {a})`` reading of the metric.
    """
    best = float(np.max(env.mean_batch(action_set.candidates)))
    return max(0.0, best - env.mean(a))
