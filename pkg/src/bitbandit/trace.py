"""Per-round run traces and their CSV persistence.

A trace is stored column-wise (one numpy array per field) because runs reach
millions of rows; ``TraceRow`` is the row-level view used for small traces
and for reading files back.  The CSV contract is fixed:

    run_id,seed,t,action_index,reward,inst_regret,cum_regret,bits_cum,overflow_flag,coverage_flag,phase

with floats rendered at 10 significant digits and newline-terminated rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

CSV_HEADER = (
    "run_id,seed,t,action_index,reward,inst_regret,cum_regret,"
    "bits_cum,overflow_flag,coverage_flag,phase"
)

_WRITE_CHUNK = 65536


@dataclass(frozen=True)
class TraceRow:
    run_id: str
    seed: int
    t: int
    action_index: int
    reward: float
    inst_regret: float
    cum_regret: float
    bits_cum: int
    overflow_flag: int
    coverage_flag: int
    phase: int


@dataclass
class Trace:
    """Column-wise log of one run; all arrays share length T."""

    run_id: str
    seed: int
    t: np.ndarray             # 1..T
    action_index: np.ndarray  # candidate index, -1 for off-candidate actions
    reward: np.ndarray
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    bits_cum: np.ndarray
    overflow_flag: np.ndarray
    coverage_flag: np.ndarray
    phase: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    def rows(self) -> Iterator[TraceRow]:
        for i in range(len(self)):
            yield TraceRow(
                run_id=self.run_id,
                seed=self.seed,
                t=int(self.t[i]),
                action_index=int(self.action_index[i]),
                reward=float(self.reward[i]),
                inst_regret=float(self.inst_regret[i]),
                cum_regret=float(self.cum_regret[i]),
                bits_cum=int(self.bits_cum[i]),
                overflow_flag=int(self.overflow_flag[i]),
                coverage_flag=int(self.coverage_flag[i]),
                phase=int(self.phase[i]),
            )


def empty_trace(run_id: str, seed: int, T: int) -> Trace:
    return Trace(
        run_id=run_id,
        seed=seed,
        t=np.arange(1, T + 1, dtype=np.int64),
        action_index=np.full(T, -1, dtype=np.int64),
        reward=np.zeros(T),
        inst_regret=np.zeros(T),
        cum_regret=np.zeros(T),
        bits_cum=np.zeros(T, dtype=np.int64),
        overflow_flag=np.zeros(T, dtype=np.int64),
        coverage_flag=np.ones(T, dtype=np.int64),
        phase=np.ones(T, dtype=np.int64),
    )


def write_csv(trace, path) -> None:
    """Write a Trace (or iterable of TraceRows) to the fixed CSV schema."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            if isinstance(trace, Trace):
                _write_columns(trace, fh)
            else:
                for r in trace:
                    fh.write(
                        f"{r.run_id},{r.seed},{r.t},{r.action_index},{r.reward:.10g},"
                        f"{r.inst_regret:.10g},{r.cum_regret:.10g},{r.bits_cum},"
                        f"{r.overflow_flag},{r.coverage_flag},{r.phase}\n"
                    )
    except OSError as exc:
        raise OSError(f"failed writing trace CSV to {path}: {exc}") from exc


def _write_columns(tr: Trace, fh) -> None:
    prefix = f"{tr.run_id},{tr.seed},"
    n = len(tr)
    t = tr.t
    ai = tr.action_index
    rw = tr.reward
    ir = tr.inst_regret
    cr = tr.cum_regret
    bc = tr.bits_cum
    ov = tr.overflow_flag
    cv = tr.coverage_flag
    ph = tr.phase
    for lo in range(0, n, _WRITE_CHUNK):
        hi = min(lo + _WRITE_CHUNK, n)
        lines = [
            f"{prefix}{t[i]},{ai[i]},{rw[i]:.10g},{ir[i]:.10g},{cr[i]:.10g},"
            f"{bc[i]},{ov[i]},{cv[i]},{ph[i]}\n"
            for i in range(lo, hi)
        ]
        fh.writelines(lines)


def read_csv(path) -> list[TraceRow]:
    """Parse a trace CSV back into rows (used by the diag command and tests)."""
    rows: list[TraceRow] = []
    with open(path, "r") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            f = line.rstrip("\n").split(",")
            if len(f) != 11:
                raise ValueError(f"{path}: malformed row {line!r}")
            rows.append(
                TraceRow(
                    run_id=f[0],
                    seed=int(f[1]),
                    t=int(f[2]),
                    action_index=int(f[3]),
                    reward=float(f[4]),
                    inst_regret=float(f[5]),
                    cum_regret=float(f[6]),
                    bits_cum=int(f[7]),
                    overflow_flag=int(f[8]),
                    coverage_flag=int(f[9]),
                    phase=int(f[10]),
                )
            )
    return rows
