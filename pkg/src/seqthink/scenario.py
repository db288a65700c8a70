"""Scenario files: what to run, under which adversary, with which faults.

A scenario is an INI-style text file with a `[scenario]` section and
optional `[params]` and `[script]` sections::

    [scenario]
    n = 3
    protocol = abd
    adversary = seeded-random      ; round-robin | seeded-random | scripted
    fairness = fair                ; fair | unfair
    seed = 7
    step_budget = 100000
    crash_plan = 3:120, 2:300      ; pid:step pairs, omit for no crashes
    violating = false              ; allow crash plans beyond the protocol's tolerance
    demo = false                   ; unlock demo-only debug toggles

    [params]
    ops_per_process = 2            ; protocol-specific knobs, all strings

    [script]
    steps =
        p3
        deliver p1<-p3 WRITE_REQ
        p1.main

Script selectors name one step each: `pN` (any enabled step of process N,
threads first), `pN.<thread>` (a named thread), or
`deliver pA<-pB [KIND]` / `deliver pA [KIND]` (oldest matching pending
message).  Unmatched selectors are skipped; after the script runs out the
kernel falls back to round-robin.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace

ADVERSARIES = ("round-robin", "seeded-random", "scripted")
FAIRNESS = ("fair", "unfair")

DEFAULT_STEP_BUDGET = 100_000


class ScenarioError(Exception):
    """Invalid scenario; the message names the offending field."""


_SEL_DELIVER = re.compile(
    r"^deliver\s+p(\d+)\s*(?:<-\s*p(\d+))?\s*([A-Za-z_][\w]*)?$"
)
_SEL_THREAD = re.compile(r"^p(\d+)\.([\w-]+)$")
_SEL_PID = re.compile(r"^p(\d+)$")


def parse_selector(text: str) -> tuple:
    text = text.strip()
    m = _SEL_PID.match(text)
    if m:
        return ("pid", int(m.group(1)))
    m = _SEL_THREAD.match(text)
    if m:
        return ("thread", int(m.group(1)), m.group(2))
    m = _SEL_DELIVER.match(text)
    if m:
        dst = int(m.group(1))
        src = int(m.group(2)) if m.group(2) else None
        mkind = m.group(3) or None
        return ("deliver", dst, src, mkind)
    raise ScenarioError(f"script: cannot parse selector {text!r}")


@dataclass
class Scenario:
    n: int
    protocol: str
    seed: int = 0
    adversary: str = "seeded-random"
    fairness: str = "fair"
    step_budget: int = DEFAULT_STEP_BUDGET
    crash_plan: dict[int, int] = field(default_factory=dict)
    violating: bool = False
    demo: bool = False
    script: list[tuple] = field(default_factory=list)
    params: dict[str, str] = field(default_factory=dict)
    name: str = ""

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed, crash_plan=dict(self.crash_plan))

    def param_int(self, key: str, default: int) -> int:
        raw = self.params.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"params.{key}: expected integer, got {raw!r}") from None

    def param_bool(self, key: str, default: bool = False) -> bool:
        raw = self.params.get(key)
        if raw is None:
            return default
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ScenarioError(f"params.{key}: expected boolean, got {raw!r}")

    def validate(self, crash_tolerance: int | None = None) -> None:
        if self.n < 1:
            raise ScenarioError(f"n: must be >= 1, got {self.n}")
        if self.step_budget <= 0:
            raise ScenarioError(f"step_budget: must be > 0, got {self.step_budget}")
        if self.adversary not in ADVERSARIES:
            raise ScenarioError(
                f"adversary: {self.adversary!r} not one of {', '.join(ADVERSARIES)}"
            )
        if self.fairness not in FAIRNESS:
            raise ScenarioError(
                f"fairness: {self.fairness!r} not one of {', '.join(FAIRNESS)}"
            )
        if self.adversary == "scripted" and not self.script:
            raise ScenarioError("script: scripted adversary needs a [script] section")
        seen_steps = set()
        for pid, step in self.crash_plan.items():
            if not 1 <= pid <= self.n:
                raise ScenarioError(f"crash_plan: pid {pid} outside 1..{self.n}")
            if step < 1:
                raise ScenarioError(f"crash_plan: step {step} for p{pid} must be >= 1")
            if step in seen_steps:
                raise ScenarioError(
                    f"crash_plan: two crashes at step {step}; steps must be distinct"
                )
            seen_steps.add(step)
        if (
            crash_tolerance is not None
            and not self.violating
            and len(self.crash_plan) > crash_tolerance
        ):
            raise ScenarioError(
                f"crash_plan: {len(self.crash_plan)} crashes exceed the protocol's "
                f"tolerance of {crash_tolerance}; set violating = true to force it"
            )


def _parse_crash_plan(raw: str) -> dict[int, int]:
    plan: dict[int, int] = {}
    raw = raw.strip()
    if not raw or raw == "none":
        return plan
    for part in raw.split(","):
        part = part.strip()
        m = re.match(r"^(?:p)?(\d+)\s*[:@]\s*(\d+)$", part)
        if not m:
            raise ScenarioError(f"crash_plan: cannot parse entry {part!r} (want pid:step)")
        pid, step = int(m.group(1)), int(m.group(2))
        if pid in plan:
            raise ScenarioError(f"crash_plan: process {pid} listed twice")
        plan[pid] = step
    return plan


def _parse_bool(section: str, key: str, raw: str) -> bool:
    if raw.lower() in ("true", "yes", "1", "on"):
        return True
    if raw.lower() in ("false", "no", "0", "off"):
        return False
    raise ScenarioError(f"{section}.{key}: expected boolean, got {raw!r}")


def parse_scenario(text: str, name: str = "") -> Scenario:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario file: {exc}") from None
    if "scenario" not in cp:
        raise ScenarioError("scenario: missing [scenario] section")
    sec = cp["scenario"]
    known = {
        "n", "protocol", "seed", "adversary", "fairness",
        "step_budget", "crash_plan", "violating", "demo",
    }
    for key in sec:
        if key not in known:
            raise ScenarioError(f"scenario.{key}: unknown field")
    try:
        n = int(sec.get("n", ""))
    except ValueError:
        raise ScenarioError(f"n: expected integer, got {sec.get('n')!r}") from None
    protocol = sec.get("protocol", "").strip()
    if not protocol:
        raise ScenarioError("protocol: required")

    def _int(key, default):
        raw = sec.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"{key}: expected integer, got {raw!r}") from None

    script = []
    if "script" in cp:
        raw_steps = cp["script"].get("steps", "")
        for line in raw_steps.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                script.append(parse_selector(line))
    params = dict(cp["params"]) if "params" in cp else {}
    return Scenario(
        n=n,
        protocol=protocol,
        seed=_int("seed", 0),
        adversary=sec.get("adversary", "seeded-random").strip(),
        fairness=sec.get("fairness", "fair").strip(),
        step_budget=_int("step_budget", DEFAULT_STEP_BUDGET),
        crash_plan=_parse_crash_plan(sec.get("crash_plan", "")),
        violating=_parse_bool("scenario", "violating", sec.get("violating", "false")),
        demo=_parse_bool("scenario", "demo", sec.get("demo", "false")),
        script=script,
        params=params,
        name=name,
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    import os

    return parse_scenario(text, name=os.path.splitext(os.path.basename(path))[0])
