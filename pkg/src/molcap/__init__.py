"""Discrete-time simulator for atomic capture of molecules on many nodes."""

from .adapt import SuccessTracker, choose_protocol
from .capture import (
    AttemptState,
    HolderRecord,
    Mode,
    MsgKind,
    Node,
    Phase,
    ProtocolMessage,
    resolve_coexistence,
    sort_requesters,
)
from .chemistry import (
    AGGREGATE,
    CONSUME2,
    COUNT,
    AlreadyConsumed,
    IdAllocator,
    Molecule,
    Multiset,
    ReactionRule,
    SCENARIOS,
    apply_reaction,
    is_inert,
    match_combination,
)
from .harness import (
    AggregateResult,
    ReactionRecord,
    Registry,
    RunMetrics,
    SimConfig,
    aggregate,
    classify_messages,
    duplicate_consumptions,
    run_many,
    run_one,
    theoretic_optimum,
)
from .netsim import Envelope, Transport, disseminate

__version__ = "0.1.0"
