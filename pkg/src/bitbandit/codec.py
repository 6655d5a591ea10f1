"""Vector and scalar innovation codecs plus the deterministic quantizer schedules.

The vector codec covers the unit ball with a finite set of centers built once
at startup; every round's codebook is that set scaled by the current radius
``p_t``, so agent and server stay synchronized by construction.  Encoding is
canonical in the scaled domain: the input is divided by ``p`` and matched
against the unit-ball centers, which makes ``encode(cb, p, e)`` equal to
``encode(cb, 1, e/p)`` symbol-for-symbol for every ``p``.

Symbols are plain integers.  A codebook of ``n`` centers uses the alphabet
``{0, .., n}`` where ``n`` itself is the reserved overflow symbol, hence the
capacity requirement ``n + 1 <= 2**B``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import seeding

_CHUNK = 256  # candidate/probe batch size; fixed so builds are reproducible


class CapacityError(ValueError):
    """Codebook does not fit the channel alphabet."""


class ProtocolError(RuntimeError):
    """A received symbol is outside the agreed alphabet."""


# ---------------------------------------------------------------------------
# Codebooks over the unit ball
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetCodebook:
    """Greedy random packing of the unit ball, repaired to cover its probes.

    Centers are pairwise more than ``epsilon`` apart, which bounds the size
    by ``(2/epsilon + 1)**d``.  A maximal separated set is automatically a
    covering; the finite greedy construction is near-maximal and the probe
    pass patches any residual gaps it can find.
    """

    centers: np.ndarray  # (n, d), inside the closed unit ball
    epsilon: float
    seed: int
    probes_drawn: int = 0
    probes_added: int = 0

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def overflow_symbol(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class GridCodebook:
    """Cubic-lattice covering of the unit ball (deterministic alternative).

    Lattice spacing ``2*epsilon/sqrt(d)`` makes every cell fit in an
    epsilon-ball, so coverage is exact; the price is a larger alphabet
    (roughly ``d*log2(sqrt(d)/epsilon)`` bits instead of ``O(d)``).
    """

    centers: np.ndarray
    epsilon: float
    seed: int = -1

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def overflow_symbol(self) -> int:
        return self.centers.shape[0]


def _ball_points(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform samples from the closed unit ball."""
    v = rng.standard_normal((n, d))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.random(n) ** (1.0 / d)
    return v / norms * radii[:, None]


def _min_dist_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Per-point squared distance to the nearest center."""
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2, vectorized over both sets.
    cross = points @ centers.T
    d2 = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * cross
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d2.min(axis=1), 0.0)


def build_unit_net(
    d: int,
    epsilon: float,
    seed: int,
    stop_rejections: int = 2000,
) -> NetCodebook:
    """Greedy epsilon-separated packing of the unit ball with probe repair.

    Uniform ball samples are accepted as centers while they keep pairwise
    separation > epsilon; sampling stops after ``stop_rejections`` consecutive
    rejections.  Then ``10 * (2/epsilon + 1)**d`` probe points are drawn and
    any probe farther than epsilon from all centers is added as a center
    (this preserves separation while repairing the gap the probe exposed).
    Fully deterministic in (d, epsilon, seed, stop_rejections).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if stop_rejections < 1:
        raise ValueError(f"stop_rejections must be >= 1, got {stop_rejections}")

    rng = seeding.stream(seed, seeding.CODEBOOK)
    eps_sq = epsilon * epsilon
    centers: list[np.ndarray] = []
    rejections = 0

    while rejections < stop_rejections:
        batch = _ball_points(_CHUNK, d, rng)
        if centers:
            base = _min_dist_sq(batch, np.asarray(centers))
        else:
            base = np.full(_CHUNK, np.inf)
        fresh_start = len(centers)
        for i in range(_CHUNK):
            ok = base[i] > eps_sq
            if ok and len(centers) > fresh_start:
                fresh = np.asarray(centers[fresh_start:])
                diff = fresh - batch[i]
                ok = float(np.min(np.sum(diff * diff, axis=1))) > eps_sq
            if ok:
                centers.append(batch[i])
                rejections = 0
            else:
                rejections += 1
                if rejections >= stop_rejections:
                    break

    n_probes = 10 * int(math.ceil((2.0 / epsilon + 1.0) ** d))
    added = 0
    drawn = 0
    while drawn < n_probes:
        take = min(_CHUNK, n_probes - drawn)
        batch = _ball_points(take, d, rng)
        drawn += take
        base = _min_dist_sq(batch, np.asarray(centers))
        fresh_start = len(centers)
        for i in range(take):
            uncovered = base[i] > eps_sq
            if uncovered and len(centers) > fresh_start:
                fresh = np.asarray(centers[fresh_start:])
                diff = fresh - batch[i]
                uncovered = float(np.min(np.sum(diff * diff, axis=1))) > eps_sq
            if uncovered:
                centers.append(batch[i])
                added += 1

    book = np.asarray(centers, dtype=float)
    return NetCodebook(
        centers=book,
        epsilon=float(epsilon),
        seed=int(seed),
        probes_drawn=n_probes,
        probes_added=added,
    )


def build_grid_net(d: int, epsilon: float) -> GridCodebook:
    """Cubic-grid covering of the unit ball with covering radius epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    spacing = 2.0 * epsilon / math.sqrt(d)
    half = int(math.ceil((1.0 + epsilon) / spacing))
    axis = spacing * np.arange(-half, half + 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    # Keep cells whose center can serve points of the unit ball; then clip
    # the centers themselves into the ball so the codebook stays inside it.
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms <= 1.0 + epsilon]
    norms = np.linalg.norm(pts, axis=1)
    outside = norms > 1.0
    pts[outside] /= norms[outside, None]
    pts = np.unique(np.round(pts, 12), axis=0)
    return GridCodebook(centers=pts, epsilon=float(epsilon))


# ---------------------------------------------------------------------------
# Vector encode / decode
# ---------------------------------------------------------------------------

def nearest_center(cb, x: np.ndarray) -> tuple[int, float]:
    """Index of and distance to the center nearest to a unit-domain point."""
    diff = cb.centers - x
    d2 = np.einsum("ij,ij->i", diff, diff)
    idx = int(np.argmin(d2))  # first minimum: the fixed tie priority rule
    return idx, math.sqrt(float(d2[idx]))


def vector_encode(cb, p: float, e: np.ndarray) -> int:
    """Symbol for an innovation vector against the p-scaled codebook.

    Returns the overflow symbol when ||e/p|| > 1; otherwise the index of the
    nearest scaled center (ties to the lowest index).
    """
    if p <= 0.0:
        raise ValueError(f"codebook scale p must be positive, got {p}")
    x = np.asarray(e, dtype=float) / p
    if float(x @ x) > 1.0:
        return cb.overflow_symbol
    idx, _ = nearest_center(cb, x)
    return idx


def vector_decode(cb, p: float, sym: int) -> np.ndarray | None:
    """Center of the ball a symbol names, scaled by p; None marks overflow."""
    if sym == cb.overflow_symbol:
        return None
    if not 0 <= sym < cb.size:
        raise ProtocolError(f"symbol {sym} outside alphabet of size {cb.size} + overflow")
    return p * cb.centers[sym]


def capacity_check(cb, B: int) -> None:
    """Fail loudly if the codebook plus overflow does not fit 2**B symbols."""
    need = cb.size + 1
    if need > 2**B:
        required = math.ceil(math.log2(need))
        raise CapacityError(
            f"codebook needs {need} symbols but B={B} gives {2**B}; require B >= {required}"
        )


# ---------------------------------------------------------------------------
# Codebook serialization (agent and server can load identical books)
# ---------------------------------------------------------------------------

_MAGIC = b"BBNET01\n"
_HEADER = struct.Struct("<qdqq")  # d, epsilon, seed, n_centers


def save_codebook(cb: NetCodebook, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(cb.d, cb.epsilon, cb.seed, cb.size))
        fh.write(np.ascontiguousarray(cb.centers, dtype="<f8").tobytes())


def load_codebook(path) -> NetCodebook:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a codebook file")
        d, epsilon, seed, n = _HEADER.unpack(fh.read(_HEADER.size))
        raw = fh.read(8 * d * n)
        centers = np.frombuffer(raw, dtype="<f8").reshape(n, d).copy()
    return NetCodebook(centers=centers, epsilon=epsilon, seed=seed)


# ---------------------------------------------------------------------------
# Quantizer schedules
# ---------------------------------------------------------------------------

def f_of_T(L: float, T: int, d: int, beta_T: float) -> float:
    """Innovation drift scale: (3 / 5L) * sqrt(beta_T / (T log(dLT)))."""
    if beta_T < 0.0:
        raise ValueError(f"beta_T must be nonnegative, got {beta_T}")
    dlt = d * L * T
    if dlt <= 1.0:
        raise ValueError(f"need d*L*T > 1 for a positive log, got {dlt}")
    return (3.0 / (5.0 * L)) * math.sqrt(beta_T / (T * math.log(dlt)))


@dataclass(frozen=True)
class QuantSchedule:
    """Vector-codec radius recursion: q' = eps*(q + f), p' = q' + f."""

    q: float
    p: float
    f_const: float
    epsilon: float

    @classmethod
    def start(cls, q0: float, f_const: float, epsilon: float) -> "QuantSchedule":
        return cls(q=q0, p=q0 + f_const, f_const=f_const, epsilon=epsilon)


def schedule_step(s: QuantSchedule) -> QuantSchedule:
    q = s.epsilon * (s.q + s.f_const)
    return replace(s, q=q, p=q + s.f_const)


@dataclass(frozen=True)
class ScalarSchedule:
    """Scalar-codec radius recursion (per-arm, indexed by play count k).

    f_k = 2*sqrt(log T / k); p_1 = m + f_1; q_k = gamma*p_k;
    p_{k+1} = gamma*p_k + 2*f_k, where gamma = 1/2**B (gamma = 0 models an
    infinite-capacity channel and collapses q to zero).
    """

    gamma: float
    m: float
    log_T: float
    k: int
    p: float
    q: float
    f: float
    bits: int | None = None

    @classmethod
    def start(cls, B: int | None, m: float, T: int) -> "ScalarSchedule":
        if B is not None and B < 1:
            raise ValueError(f"channel capacity must be >= 1 bit, got {B}")
        gamma = 0.0 if B is None else 1.0 / (2**B)
        log_T = math.log(T)
        if log_T < 0.0:
            raise ValueError(f"need T >= 1, got {T}")
        f1 = 2.0 * math.sqrt(log_T)
        p1 = m + f1
        return cls(gamma=gamma, m=m, log_T=log_T, k=1, p=p1, q=gamma * p1, f=f1, bits=B)


def scalar_schedule_step(s: ScalarSchedule) -> ScalarSchedule:
    k = s.k + 1
    p = s.gamma * s.p + 2.0 * s.f
    f = 2.0 * math.sqrt(s.log_T / k)
    return replace(s, k=k, p=p, q=s.gamma * p, f=f)


def scalar_q_envelope(s: ScalarSchedule) -> float:
    """Deterministic envelope for q_k: gamma^k (m + f_1) + (12/B) sqrt(log T / k)."""
    if s.bits is None:
        return 0.0
    f1 = 2.0 * math.sqrt(s.log_T)
    return s.gamma**s.k * (s.m + f1) + (12.0 / s.bits) * math.sqrt(s.log_T / s.k)


# ---------------------------------------------------------------------------
# Scalar bin codec
# ---------------------------------------------------------------------------

def scalar_encode(e: float, p: float, B: int) -> int | None:
    """Bin index of e in the uniform 2**B-bin partition of [-p, p].

    Bins are half-open [left, right) with the last bin closed; |e| > p means
    no transmission (None).  The decode center is off by at most p / 2**B.
    """
    if B < 1:
        raise ValueError(f"need B >= 1, got {B}")
    if p <= 0.0:
        raise ValueError(f"need p > 0, got {p}")
    if abs(e) > p:
        return None
    n_bins = 2**B
    idx = int(math.floor((e + p) / (2.0 * p) * n_bins))
    return min(idx, n_bins - 1)


def scalar_decode(sym: int, p: float, B: int) -> float:
    """Center of a scalar bin."""
    n_bins = 2**B
    if not 0 <= sym < n_bins:
        raise ProtocolError(f"scalar symbol {sym} outside alphabet of size {n_bins}")
    width = 2.0 * p / n_bins
    return -p + (sym + 0.5) * width
