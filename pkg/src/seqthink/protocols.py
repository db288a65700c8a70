"""Registry of runnable protocol stacks and the top-level run entry point.

Each entry knows how to build the kernel protocol from a scenario, its
crash tolerance (enforced at validation unless the scenario is marked
violating), which log predicates apply to its runs, and which histories
to check for linearizability.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from . import abd, agreement, mutex, universal
from .kernel import Kernel, Note, Protocol, ThreadSpec, EventLog
from .objects import ConsensusSpec, make_spec
from .scenario import Scenario, ScenarioError


def _trivial_client(pid: int, steps: int):
    for i in range(steps):
        yield Note("tick", {"i": i})


def build_trivial(scenario) -> Protocol:
    steps = scenario.param_int("steps", 3)
    return Protocol(
        threads=[
            ThreadSpec(pid, "main", _trivial_client(pid, steps))
            for pid in range(1, scenario.n + 1)
        ]
    )


@dataclass
class ProtocolInfo:
    name: str
    build: Callable[[Scenario], Protocol]
    tolerance: Callable[[int], int]
    checks: list[str] = field(default_factory=list)
    objects: Callable[[Scenario], list] = lambda s: []


def _universal_objects(scenario):
    name = scenario.params.get("object", "stack").strip()
    return [(name, make_spec(name))]


PROTOCOLS: dict[str, ProtocolInfo] = {
    "trivial": ProtocolInfo(
        "trivial",
        build_trivial,
        tolerance=lambda n: n,
        checks=["crash-finality"],
    ),
    "peterson2": ProtocolInfo(
        "peterson2",
        mutex.build_mutex,
        tolerance=lambda n: 0,
        checks=["crash-finality", "register-replay", "mutual-exclusion", "mutex-liveness"],
    ),
    "tournament": ProtocolInfo(
        "tournament",
        mutex.build_mutex,
        tolerance=lambda n: 0,
        checks=["crash-finality", "register-replay", "mutual-exclusion", "mutex-liveness"],
    ),
    "abd": ProtocolInfo(
        "abd",
        abd.build_abd,
        tolerance=lambda n: (n - 1) // 2,
        checks=["crash-finality", "reliable-broadcast", "fairness-window", "abd-quorums"],
        objects=lambda s: abd.abd_objects(),
    ),
    "consensus": ProtocolInfo(
        "consensus",
        agreement.build_consensus,
        tolerance=lambda n: n - 1,
        checks=["crash-finality", "register-replay"],
        objects=lambda s: [("consensus", ConsensusSpec())],
    ),
    "to": ProtocolInfo(
        "to",
        agreement.build_to,
        tolerance=lambda n: n - 1,
        checks=["crash-finality", "register-replay", "to-properties"],
    ),
    "universal-to": ProtocolInfo(
        "universal-to",
        universal.build_to_universal,
        tolerance=lambda n: n - 1,
        checks=[
            "crash-finality",
            "register-replay",
            "to-properties",
            "alg4-convergence",
        ],
        objects=_universal_objects,
    ),
    "universal-llsc": ProtocolInfo(
        "universal-llsc",
        universal.build_llsc_universal,
        tolerance=lambda n: n - 1,
        checks=["crash-finality", "register-replay", "llsc-exactly-once"],
        objects=_universal_objects,
    ),
}


def protocol_info(name: str) -> ProtocolInfo:
    info = PROTOCOLS.get(name)
    if info is None:
        raise ScenarioError(
            f"protocol: unknown protocol {name!r}; available: {', '.join(sorted(PROTOCOLS))}"
        )
    return info


def materialize_crashes(scenario: Scenario) -> Scenario:
    """Derive a concrete crash plan from `params.auto_crashes` (a maximum
    count); choices are a pure function of the run seed."""
    limit = scenario.param_int("auto_crashes", 0)
    if limit <= 0 or scenario.crash_plan:
        return scenario
    rng = random.Random(f"{scenario.seed}|crashplan")
    count = rng.randint(0, limit)
    pids = rng.sample(range(1, scenario.n + 1), count)
    steps = rng.sample(range(10, max(400, scenario.n * 80)), count)
    out = scenario.with_seed(scenario.seed)
    out.crash_plan = dict(zip(pids, sorted(steps)))
    return out


def run_scenario(scenario: Scenario) -> EventLog:
    info = protocol_info(scenario.protocol)
    scenario = materialize_crashes(scenario)
    scenario.validate(crash_tolerance=info.tolerance(scenario.n))
    protocol = info.build(scenario)
    return Kernel(scenario, protocol).run()
