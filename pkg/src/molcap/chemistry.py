"""Molecules, rewrite rules, and the solution multiset they act on.

A molecule is an immutable (id, payload) pair; payloads are ints or strings.
Rules consume a fixed number of molecules and produce fresh ones. Consumed
ids are retired forever, which is what makes duplicate consumption
detectable after the fact: a correct run never consumes the same id twice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Callable, Iterable

Payload = int | str


class AlreadyConsumed(Exception):
    """A reaction touched a molecule that was already consumed."""


@dataclass(frozen=True, slots=True)
class Molecule:
    id: int
    payload: Payload


class IdAllocator:
    """Monotonic molecule-id source for a single run. Ids are never reused."""

    __slots__ = ("_next",)

    def __init__(self, start: int = 0):
        self._next = start

    def take(self) -> int:
        nid = self._next
        self._next += 1
        return nid


@dataclass(frozen=True)
class ReactionRule:
    """A consume/produce rewrite rule over payloads.

    ``takes`` screens one payload against the rule's pattern, ``condition``
    judges the whole argument tuple, and ``eligible`` is the per-molecule
    filter used by discovery and inertia checks. ``pointwise`` marks rules
    whose condition is already implied by per-molecule eligibility, letting
    feasibility reduce to counting eligible molecules.
    """

    name: str
    arity: int
    takes: Callable[[Payload], bool]
    condition: Callable[[tuple[Payload, ...]], bool]
    produce: Callable[[tuple[Payload, ...]], list[Payload]]
    eligible: Callable[[Payload], bool]
    pointwise: bool = True


def _is_int(p: Payload) -> bool:
    return type(p) is int


def _is_str(p: Payload) -> bool:
    return type(p) is str


COUNT = ReactionRule(
    name="count",
    arity=1,
    takes=_is_str,
    condition=lambda ps: len(ps[0]) >= 2,
    produce=lambda ps: [len(ps[0])],
    eligible=lambda p: type(p) is str and len(p) >= 2,
)

AGGREGATE = ReactionRule(
    name="aggregate",
    arity=2,
    takes=_is_int,
    condition=lambda ps: True,
    produce=lambda ps: [ps[0] + ps[1]],
    eligible=_is_int,
)

CONSUME2 = ReactionRule(
    name="consume2",
    arity=2,
    takes=lambda p: True,
    condition=lambda ps: True,
    produce=lambda ps: [],
    eligible=lambda p: True,
)

RULES_BY_NAME = {r.name: r for r in (COUNT, AGGREGATE, CONSUME2)}

# Ten-word input for the count/aggregate scenario. The expected terminal
# multiset is {"a", S} where S is the summed length of the nine words of two
# or more characters ("a" matches neither rule).
WORD_SOLUTION = (
    "maecenas",
    "ligula",
    "massa",
    "varius",
    "a",
    "semper",
    "congue",
    "euismod",
    "non",
    "mi",
)


@dataclass(frozen=True)
class Scenario:
    """Named bundle of rules plus an initial-payload builder."""

    name: str
    rules: tuple[ReactionRule, ...]
    payloads: Callable[[int], list[Payload]]

    def initial_payloads(self, molecule_count: int) -> list[Payload]:
        return self.payloads(molecule_count)


SCENARIOS = {
    "benchmark-consume2": Scenario(
        name="benchmark-consume2",
        rules=(CONSUME2,),
        payloads=lambda m: list(range(m)),
    ),
    # Fixed ten-molecule input; the molecule-count knob does not apply here.
    "count-aggregate": Scenario(
        name="count-aggregate",
        rules=(COUNT, AGGREGATE),
        payloads=lambda m: list(WORD_SOLUTION),
    ),
}


class Multiset:
    """Global ledger of live and consumed molecules.

    Tracks insertion/production/consumption counts so conservation can be
    audited at any point: inserted + produced - consumed == len(live).
    """

    def __init__(self):
        self.live: dict[int, Molecule] = {}
        self.consumed_ids: set[int] = set()
        self.inserted = 0
        self.produced = 0
        self.consumed = 0

    def insert(self, molecule: Molecule, produced: bool = False) -> None:
        if molecule.id in self.live or molecule.id in self.consumed_ids:
            raise ValueError(f"molecule id {molecule.id} reused")
        self.live[molecule.id] = molecule
        if produced:
            self.produced += 1
        else:
            self.inserted += 1

    def live_payloads(self) -> list[Payload]:
        return [m.payload for m in self.live.values()]

    def balanced(self) -> bool:
        return self.inserted + self.produced - self.consumed == len(self.live)


def match_combination(rule: ReactionRule, molecules: list[Molecule]) -> bool:
    """Whether these molecules fit the rule's pattern and condition."""
    if len(molecules) != rule.arity:
        raise ValueError(
            f"rule {rule.name} takes {rule.arity} molecules, got {len(molecules)}"
        )
    if len({m.id for m in molecules}) != rule.arity:
        raise ValueError("combination repeats a molecule id")
    payloads = tuple(m.payload for m in molecules)
    return all(rule.takes(p) for p in payloads) and rule.condition(payloads)


def apply_reaction(
    multiset: Multiset,
    rule: ReactionRule,
    molecules: list[Molecule],
    alloc: IdAllocator,
) -> list[Molecule]:
    """Consume the given molecules and insert the rule's products.

    Raises AlreadyConsumed if any input molecule is no longer live; that
    signals a broken capture, never a normal outcome.
    """
    if not match_combination(rule, molecules):
        raise ValueError(f"combination does not match rule {rule.name}")
    for m in molecules:
        if m.id not in multiset.live:
            raise AlreadyConsumed(f"molecule {m.id} consumed twice")
    payloads = tuple(m.payload for m in molecules)
    for m in molecules:
        del multiset.live[m.id]
        multiset.consumed_ids.add(m.id)
    multiset.consumed += len(molecules)
    products = [Molecule(alloc.take(), p) for p in rule.produce(payloads)]
    for p in products:
        multiset.insert(p, produced=True)
    return products


def is_inert(multiset: Multiset, rules: Iterable[ReactionRule]) -> bool:
    """True when no combination of live molecules satisfies any rule.

    Pointwise rules reduce to counting eligible molecules. Anything else
    falls back to exhaustive enumeration, which is only meant for the small
    multisets a global observer looks at.
    """
    for rule in rules:
        pool = [m for m in multiset.live.values() if rule.eligible(m.payload)]
        if len(pool) < rule.arity:
            continue
        if rule.pointwise:
            return False
        for combo in combinations(pool, rule.arity):
            for perm in permutations(combo):
                payloads = tuple(m.payload for m in perm)
                if all(rule.takes(p) for p in payloads) and rule.condition(payloads):
                    return False
    return True
