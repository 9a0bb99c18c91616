"""Planning agent for repeated constant-sum games, with a Lemonade Stand arena."""

from .abstraction import (
    LEAD,
    OTHER,
    S0,
    AbstractionParams,
    Feature,
    InsufficientHistory,
    build_state,
    classify,
    feature_floor,
    follow,
    follow_index,
    index_report,
    lead_index,
    state_space,
)
from .arena import (
    MatchConfig,
    MatchResult,
    TournamentTable,
    read_trace,
    replay_trace,
    run_match,
    run_tournament,
    state_visit_summary,
    write_table_csv,
    write_trace,
)
from .games import (
    GameError,
    LemonadeStandGame,
    NormalFormGame,
    best_response_set,
    considered_best_response,
    distance_to_set,
    load_game,
    pure_nash_equilibria,
    reciprocal_best_response,
)
from .planner import TeamUpAgent, TeamUpConfig, state_class, value_iteration
from .zoo import AgentSpec, default_roster

__version__ = "0.1.0"
