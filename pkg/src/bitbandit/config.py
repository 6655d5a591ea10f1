"""Run configuration shared by all runners and the CLI harness."""

from __future__ import annotations

from dataclasses import dataclass, replace

ALGOS = ("ic-linucb", "linucb", "ic-glmucb", "ic-ucb", "ucb")


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one experiment (possibly many seeds).

    Defaults follow the canonical choices: delta = 1/T, epsilon = 1/2,
    lambda = 1, exploration constant 10.  ``c_explore`` rescales the pure
    exploration length and is a non-theoretical knob: the canonical constant
    makes small horizons infeasible, so desk-scale runs shrink it.
    """

    algo: str
    d: int
    T: int
    B: int = 1
    K: int = 16
    seeds: tuple[int, ...] = (0,)
    L: float = 1.0
    M: float = 1.0
    lam: float = 1.0
    epsilon: float = 0.5
    delta: float | None = None  # None means 1/T
    c_explore: float = 10.0
    link: str = "logistic"
    arm_means: tuple[float, ...] | None = None
    out: str | None = None
    noise_scale: float = 1.0
    codebook_stop_rejections: int = 2000

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.T < self.d * self.d:
            raise ValueError(f"horizon too short: need T >= d^2 = {self.d**2}, got {self.T}")
        if self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.L < 1.0 or self.M < 1.0:
            raise ValueError(f"need L >= 1 and M >= 1, got L={self.L}, M={self.M}")
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.algo in ("ic-ucb", "ucb"):
            if self.arm_means is None:
                raise ValueError(f"{self.algo} needs arm_means")
            if len(self.arm_means) != self.d:
                raise ValueError(
                    f"arm_means has {len(self.arm_means)} entries but d = {self.d}"
                )
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.arm_means is not None:
            object.__setattr__(self, "arm_means", tuple(float(v) for v in self.arm_means))

    @property
    def delta_eff(self) -> float:
        return self.delta if self.delta is not None else 1.0 / self.T

    def run_id(self, seed: int, lossless: bool = False) -> str:
        algo = self.algo
        if lossless and algo == "ic-linucb":
            algo = "linucb"
        return f"{algo}-d{self.d}-T{self.T}-B{self.B}-s{seed}"

    def with_(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)
