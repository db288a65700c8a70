"""Deterministic lab for concurrency mastered via sequential specifications.

Protocol automata (mutual exclusion, quorum registers, consensus,
total-order broadcast, universal constructions, ledgers) run inside a
seeded step-interleaving kernel; every run yields an event log whose
operation histories are checked for linearizability against the matching
sequential object spec.
"""

from .kernel import EventLog, Kernel, Protocol, ProtocolError, ThreadSpec
from .lincheck import History, Verdict, check, extract_history
from .objects import (
    LedgerBlock,
    LedgerSpec,
    RegisterSpec,
    StackSpec,
    make_spec,
    replay_ledger,
    verify_chain,
)
from .protocols import PROTOCOLS, run_scenario
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "EventLog",
    "Kernel",
    "Protocol",
    "ProtocolError",
    "ThreadSpec",
    "History",
    "Verdict",
    "check",
    "extract_history",
    "LedgerBlock",
    "LedgerSpec",
    "RegisterSpec",
    "StackSpec",
    "make_spec",
    "replay_ledger",
    "verify_chain",
    "PROTOCOLS",
    "run_scenario",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "parse_scenario",
    "__version__",
]
