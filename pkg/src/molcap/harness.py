"""Whole-run orchestration: scenario setup, the step loop, and metrics.

A run wires molecules, nodes all acting as holder plus requester, and the
one-step-latency transport together, then drives steps until the multiset
goes inert or the step budget runs out. Idle nodes draw a fresh random
combination from the registry every step; reservations are invisible to
the registry, which is exactly what generates conflicts.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass

from . import chemistry
from .adapt import SuccessTracker, choose_protocol
from .capture import Mode, MsgKind, Node, REQUEST_KINDS, resolve_coexistence
from .chemistry import IdAllocator, Molecule, Multiset, ReactionRule
from .netsim import Transport, disseminate

MODES = ("optimistic-only", "pessimistic-only", "mixed")


@dataclass
class SimConfig:
    """One run's worth of knobs. Defaults match the benchmark setup:
    250 nodes, 15000 molecules, threshold 0.7, 50 runs of at most 500
    steps, message accounting in 12-step cycles."""

    nodes: int = 250
    molecules: int = 15000
    rule_set: str = "benchmark-consume2"
    mode: str = "mixed"
    threshold: float = 0.7
    w_local: int = 20
    w_remote: int = 20
    local_weight: float = 0.3
    seed: int | str = 1
    runs: int = 50
    max_steps: int = 500
    cycle_len: int = 12

    def validate(self) -> None:
        if self.nodes < 1:
            raise ValueError("nodes must be at least 1")
        if self.molecules < 0:
            raise ValueError("molecules must not be negative")
        if self.rule_set not in chemistry.SCENARIOS:
            raise ValueError(f"unknown rule set: {self.rule_set}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
        if self.max_steps < 1 or self.runs < 1 or self.cycle_len < 1:
            raise ValueError("max_steps, runs and cycle_len must be at least 1")
        if self.w_local < 1 or self.w_remote < 1:
            raise ValueError("window sizes must be at least 1")
        if not 0.0 <= self.local_weight <= 1.0:
            raise ValueError("local_weight must lie in [0, 1]")


@dataclass(frozen=True)
class ReactionRecord:
    step: int
    requester: int
    rule_name: str
    consumed_ids: tuple[int, ...]
    produced_ids: tuple[int, ...]
    attempt_id: int


# One row per sent message:
# (sent_at, src, dst, kind, molecule_id, attempt_owner, attempt_id, request_type)
TraceRow = tuple[int, int, int, MsgKind, int, int, int, Mode]


@dataclass
class RunMetrics:
    """Everything a single run reports, indexed by step or cycle."""

    reactions_left: list[int]
    optimistic_nodes: list[int]
    pessimistic_nodes: list[int]
    messages_useful: list[int]
    messages_useless: list[int]
    steps_to_inertia: int | None
    total_reactions: int
    total_messages: int
    final_switch_steps: list[int | None]
    reaction_log: list[ReactionRecord]
    final_payloads: list
    trace: list[TraceRow] | None = None

    @property
    def last_step(self) -> int:
        return len(self.reactions_left) - 1


class _Pool:
    """Insertion-ordered id set with O(1) add, discard and uniform sampling."""

    __slots__ = ("items", "pos")

    def __init__(self):
        self.items: list[int] = []
        self.pos: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, mid: int) -> bool:
        return mid in self.pos

    def add(self, mid: int) -> None:
        if mid not in self.pos:
            self.pos[mid] = len(self.items)
            self.items.append(mid)

    def discard(self, mid: int) -> None:
        i = self.pos.pop(mid, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def sample(self, k: int, rng: random.Random) -> list[int]:
        n = len(self.items)
        if k == 1:
            return [self.items[rng.randrange(n)]]
        if k == 2:
            i = rng.randrange(n)
            j = rng.randrange(n - 1)
            if j >= i:
                j += 1
            return [self.items[i], self.items[j]]
        return [self.items[i] for i in rng.sample(range(n), k)]


class Registry:
    """Simulator-level stand-in for molecule discovery.

    Knows where every live molecule sits and hands idle nodes random
    combinations that satisfy some rule. It ignores in-flight reservations
    on purpose; colliding draws are the conflict source under study.
    """

    def __init__(self, rules: tuple[ReactionRule, ...]):
        self.rules = rules
        self.holder: dict[int, int] = {}
        self._pools = {rule.name: _Pool() for rule in rules}

    def add(self, molecule: Molecule, holder: int) -> None:
        self.holder[molecule.id] = holder
        for rule in self.rules:
            if rule.eligible(molecule.payload):
                self._pools[rule.name].add(molecule.id)

    def remove(self, molecule_id: int) -> None:
        self.holder.pop(molecule_id, None)
        for pool in self._pools.values():
            pool.discard(molecule_id)

    def draw(self, rng: random.Random):
        """A random (rule, combination) pair, or None when nothing fires."""
        feasible = [r for r in self.rules if len(self._pools[r.name]) >= r.arity]
        if not feasible:
            return None
        rule = feasible[0] if len(feasible) == 1 else rng.choice(feasible)
        mids = self._pools[rule.name].sample(rule.arity, rng)
        return rule, [(mid, self.holder[mid]) for mid in mids]

    def inert(self) -> bool:
        # Valid for pointwise rules, where eligibility counting is exact.
        return all(len(self._pools[r.name]) < r.arity for r in self.rules)


class _Run:
    """Mutable state of one simulation run; also the world the nodes see."""

    def __init__(self, config: SimConfig, seed):
        config.validate()
        self.config = config
        self.rng = random.Random(seed)
        self.scenario = chemistry.SCENARIOS[config.rule_set]
        self.alloc = IdAllocator()
        self.multiset = Multiset()
        self.transport = Transport()
        self.step = 0
        if config.mode == "mixed":
            self.forced = None
        else:
            self.forced = Mode.OPTIMISTIC if config.mode == "optimistic-only" else Mode.PESSIMISTIC
        self.nodes = [
            Node(i, SuccessTracker(config.w_local, config.w_remote, config.local_weight), self)
            for i in range(config.nodes)
        ]
        molecules = [
            Molecule(self.alloc.take(), p)
            for p in self.scenario.initial_payloads(config.molecules)
        ]
        for m in molecules:
            self.multiset.insert(m)
        placement = disseminate(molecules, config.nodes, self.rng)
        self.registry = Registry(self.scenario.rules)
        for m in molecules:
            holder = placement[m.id]
            self.registry.add(m, holder)
            self.nodes[holder].add_molecule(m)
        self.trace: list[TraceRow] = []
        self.reaction_log: list[ReactionRecord] = []
        self.switch_step: list[int | None] = [None] * config.nodes
        self.reactions_left: list[int] = []
        self.optimistic_nodes: list[int] = []
        self.pessimistic_nodes: list[int] = []

    # world interface ---------------------------------------------------

    def send(self, src: int, dst: int, msg) -> None:
        env = self.transport.send(src, dst, msg)
        owner = src if msg.kind in REQUEST_KINDS else dst
        self.trace.append(
            (env.sent_at, src, dst, msg.kind, msg.molecule_id, owner, msg.attempt_id, msg.request_type)
        )

    def apply_reaction(self, requester: int, attempt_id: int, rule: ReactionRule, mids: list[int]) -> None:
        molecules = []
        for mid in mids:
            mol = self.multiset.live.get(mid)
            if mol is None:
                raise chemistry.AlreadyConsumed(f"molecule {mid} consumed twice")
            molecules.append(mol)
        products = chemistry.apply_reaction(self.multiset, rule, molecules, self.alloc)
        for mid in mids:
            self.registry.remove(mid)
        for p in products:
            holder = self.rng.randrange(self.config.nodes)
            self.registry.add(p, holder)
            self.nodes[holder].add_molecule(p)
        self.reaction_log.append(
            ReactionRecord(self.step, requester, rule.name, tuple(mids), tuple(p.id for p in products), attempt_id)
        )

    # step loop ---------------------------------------------------------

    def _start_idle(self) -> None:
        for node in self.nodes:
            if node.attempt is not None:
                continue
            drawn = self.registry.draw(self.rng)
            if drawn is None:
                continue
            rule, combination = drawn
            if self.forced is not None:
                mode = self.forced
            else:
                mode = Mode(
                    choose_protocol(node.tracker.sigma_overall(), rule.arity, self.config.threshold)
                )
            if mode is not node.last_mode:
                self.switch_step[node.node_id] = self.step if mode is Mode.PESSIMISTIC else None
            node.start_attempt(rule, combination, mode)

    def _record(self) -> None:
        self.reactions_left.append(len(self.multiset.live) // 2)
        opt = sum(1 for node in self.nodes if node.last_mode is Mode.OPTIMISTIC)
        self.optimistic_nodes.append(opt)
        self.pessimistic_nodes.append(len(self.nodes) - opt)

    def execute(self, keep_trace: bool = False) -> RunMetrics:
        self._start_idle()
        self._record()
        if not self.registry.inert():
            for _ in range(self.config.max_steps):
                batches = self.transport.tick()
                self.step = self.transport.step
                for dst in sorted(batches):
                    node = self.nodes[dst]
                    for env in resolve_coexistence(batches[dst]):
                        node.handle(env.src, env.msg)
                self._start_idle()
                self._record()
                if self.registry.inert():
                    break
        inert = self.registry.inert()
        useful, useless = classify_messages(
            self.trace, self.reaction_log, self.config.cycle_len, self.step
        )
        assert self.multiset.balanced(), "conservation ledger out of balance"
        return RunMetrics(
            reactions_left=self.reactions_left,
            optimistic_nodes=self.optimistic_nodes,
            pessimistic_nodes=self.pessimistic_nodes,
            messages_useful=useful,
            messages_useless=useless,
            steps_to_inertia=self.step if inert else None,
            total_reactions=len(self.reaction_log),
            total_messages=self.transport.sent_total,
            final_switch_steps=list(self.switch_step),
            reaction_log=self.reaction_log,
            final_payloads=self.multiset.live_payloads(),
            trace=self.trace if keep_trace else None,
        )


def run_one(config: SimConfig, seed=None, keep_trace: bool = False) -> RunMetrics:
    """Execute a single run; the whole trajectory is a pure function of
    (config, seed)."""
    return _Run(config, config.seed if seed is None else seed).execute(keep_trace)


def run_many(config: SimConfig) -> list[RunMetrics]:
    """Execute config.runs independent repetitions with derived seeds."""
    return [run_one(config, f"{config.seed}/{i}") for i in range(config.runs)]


def classify_messages(
    trace: list[TraceRow],
    reaction_log: list[ReactionRecord],
    cycle_len: int,
    last_step: int,
) -> tuple[list[int], list[int]]:
    """Split per-cycle message counts into useful and useless.

    A message is useful when the attempt it belongs to ended in a reaction;
    everything else, including give-ups and any row whose attempt cannot be
    matched, counts as useless.
    """
    succeeded = {(r.requester, r.attempt_id) for r in reaction_log}
    cycles = last_step // cycle_len + 1
    useful = [0] * cycles
    useless = [0] * cycles
    for sent_at, _src, _dst, _kind, _mid, owner, attempt_id, _rtype in trace:
        if (owner, attempt_id) in succeeded:
            useful[sent_at // cycle_len] += 1
        else:
            useless[sent_at // cycle_len] += 1
    return useful, useless


def theoretic_optimum(config: SimConfig) -> list[int]:
    """Baseline curve for a perfect central coordinator.

    Every node finishes one reaction per two-step request/response round
    trip, so R(t) = max(0, M // 2 - (n * t) // 2), reported until it hits
    zero or the step budget ends.
    """
    curve = []
    for t in range(config.max_steps + 1):
        left = max(0, config.molecules // 2 - (config.nodes * t) // 2)
        curve.append(left)
        if left == 0:
            break
    return curve


@dataclass
class AggregateResult:
    """Pointwise means over a batch of runs."""

    reactions_left: list[float]
    optimistic_nodes: list[float]
    pessimistic_nodes: list[float]
    messages_useful: list[float]
    messages_useless: list[float]
    steps_to_inertia: list[int | None]
    inertia_fraction: float
    mean_steps_to_inertia: float
    total_messages: int
    total_reactions: int


def aggregate(runs: list[RunMetrics]) -> AggregateResult:
    """Average run curves pointwise.

    Runs that went inert early contribute zero reactions-left (and zero
    messages) beyond their end; node counts are padded with their final
    value, since nodes keep their last protocol choice once the run is over.
    """
    if not runs:
        raise ValueError("nothing to aggregate")
    n = len(runs)
    horizon = max(len(m.reactions_left) for m in runs)
    cycles = max(len(m.messages_useful) for m in runs)

    def mean_padded(series, pad_last: bool) -> list[float]:
        out = []
        for t in range(max(len(s) for s in series)):
            total = 0.0
            for s in series:
                if t < len(s):
                    total += s[t]
                elif pad_last:
                    total += s[-1]
            out.append(total / n)
        return out

    steps = [m.steps_to_inertia for m in runs]
    effective = [s if s is not None else m.last_step for s, m in zip(steps, runs)]
    return AggregateResult(
        reactions_left=mean_padded([m.reactions_left for m in runs], pad_last=False),
        optimistic_nodes=mean_padded([m.optimistic_nodes for m in runs], pad_last=True),
        pessimistic_nodes=mean_padded([m.pessimistic_nodes for m in runs], pad_last=True),
        messages_useful=mean_padded([m.messages_useful for m in runs], pad_last=False),
        messages_useless=mean_padded([m.messages_useless for m in runs], pad_last=False),
        steps_to_inertia=steps,
        inertia_fraction=sum(1 for s in steps if s is not None) / n,
        mean_steps_to_inertia=sum(effective) / n,
        total_messages=sum(m.total_messages for m in runs),
        total_reactions=sum(m.total_reactions for m in runs),
    )


def duplicate_consumptions(reaction_log: list[ReactionRecord]) -> list[int]:
    """Molecule ids consumed by more than one logged reaction; must be empty."""
    seen: set[int] = set()
    dupes: list[int] = []
    for record in reaction_log:
        for mid in record.consumed_ids:
            if mid in seen:
                dupes.append(mid)
            seen.add(mid)
    return dupes


def config_as_dict(config: SimConfig) -> dict:
    return asdict(config)
