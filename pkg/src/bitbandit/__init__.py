"""Stochastic bandit simulation over a bit-constrained agent/server channel."""

from .channel import CapacityViolation, Channel
from .codec import (
    CapacityError,
    GridCodebook,
    NetCodebook,
    ProtocolError,
    QuantSchedule,
    ScalarSchedule,
    build_grid_net,
    build_unit_net,
    capacity_check,
    f_of_T,
    load_codebook,
    save_codebook,
    scalar_decode,
    scalar_encode,
    scalar_q_envelope,
    scalar_schedule_step,
    schedule_step,
    vector_decode,
    vector_encode,
)
from .config import RunConfig
from .env import (
    ActionSet,
    GLMEnv,
    LinearEnv,
    MABEnv,
    instant_regret,
    make_action_set,
    sample_sphere,
)
from .glm import (
    ConvergenceError,
    GlmAgentState,
    g_eval,
    glm_conf_radius,
    glm_exploration_length,
    glm_fit,
    glm_ucb_action,
    h_metric,
    run_ic_glmucb,
)
from .harness import parse_config, run_many, run_one, run_sweep
from .links import LinkFunction, link_by_name, link_constants
from .linucb import (
    ConfidenceEllipsoid,
    LsState,
    beta_sqrt,
    conf_radius,
    diagnostics_linucb,
    pure_exploration_length,
    run_ic_linucb,
    run_linucb,
    ucb_action,
)
from .mab import ArmState, ic_ucb_index, run_ic_ucb, run_ucb
from .trace import CSV_HEADER, Trace, TraceRow, read_csv, write_csv

__version__ = "0.1.0"
