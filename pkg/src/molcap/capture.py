"""Requester and holder state machines for atomic molecule capture.

Two sub-protocols share a single holder-side record per molecule:

* pessimistic, a three-phase exchange (query, commitment, fetch) whose
  conflicts are settled by a global total order over requesters, so at
  least one contender always gets through;
* optimistic, a two-phase exchange (fetch, then a reaction or give-up
  notice) where the first request to reach a holder wins the molecule and
  crossed grabs simply abort.

The two coexist. Inside one delivery batch, pessimistic-typed requests are
served before optimistic ones, but a reservation or commitment that was
already granted is never revoked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .chemistry import Payload, ReactionRule
from .netsim import Envelope


class MsgKind(Enum):
    QUERY = "QUERY"
    COMMITMENT = "COMMITMENT"
    FETCH = "FETCH"
    GIVE_UP = "GIVE_UP"
    REACTION = "REACTION"
    RESP_OK = "RESP_OK"
    RESP_TAKEN = "RESP_TAKEN"
    RESP_REMOVED = "RESP_REMOVED"
    RESP_MOLECULE = "RESP_MOLECULE"


# Holder-side kinds; everything else is a response consumed by a requester.
REQUEST_KINDS = frozenset(
    {MsgKind.QUERY, MsgKind.COMMITMENT, MsgKind.FETCH, MsgKind.GIVE_UP, MsgKind.REACTION}
)


class Mode(Enum):
    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"


class Phase(Enum):
    NONE = "none"
    OPT_FETCH = "opt_fetch"
    QUERY = "query"
    COMMITMENT = "commitment"
    FETCH = "fetch"


@dataclass(slots=True)
class ProtocolMessage:
    """Envelope payload for every exchange between requesters and holders.

    Every message, request or reply, carries the sender's completed-reaction
    count and its current local success rate; receivers feed both into the
    conflict order and the protocol-switch gossip.
    """

    kind: MsgKind
    molecule_id: int
    attempt_id: int
    request_type: Mode
    sender_reactions: int
    sender_sigma: float
    molecule_payload: Payload | None = None


@dataclass(slots=True)
class HolderRecord:
    """Holder-side state for one stored molecule.

    waiters maps queued requester ids to their last reported reaction count.
    locker is the requester holding the pessimistic commitment, reserver the
    one holding an optimistic reservation; at most one of the two is ever
    set. A removed molecule has no record at all.
    """

    payload: Payload
    waiters: dict[int, int] = field(default_factory=dict)
    locker: int | None = None
    reserver: int | None = None

    def state(self) -> str:
        if self.reserver is not None:
            return "taken_opt"
        if self.locker is not None:
            return "committed"
        if self.waiters:
            return "queried"
        return "available"


@dataclass(slots=True)
class AttemptState:
    """Requester-side state of one in-flight capture attempt."""

    attempt_id: int
    rule: ReactionRule
    combination: tuple[tuple[int, int], ...]  # (molecule id, holder node)
    mode: Mode
    phase: Phase
    pending: set[int]
    gathered: dict[int, Payload]


def sort_requesters(waiters: dict[int, int]) -> list[int]:
    """Waiter ids ordered by (completed reactions, node id), both ascending.

    The head of the list is the one a commitment goes to; fewer completed
    reactions win, node id breaks ties.
    """
    return sorted(waiters, key=lambda nid: (waiters[nid], nid))


def resolve_coexistence(envelopes: list[Envelope]) -> list[Envelope]:
    """Order one step's deliveries so pessimistic-typed traffic goes first.

    The sort is stable, so the transport's (sender id, send order) sequence
    is preserved inside each class.
    """
    return sorted(
        envelopes, key=lambda e: 0 if e.msg.request_type is Mode.PESSIMISTIC else 1
    )


class Node:
    """One simulated participant, acting as holder and requester at once.

    All state changes happen inside message handling or attempt starts;
    nodes share nothing and talk only through the transport the enclosing
    world provides. The world must offer ``send(src, dst, msg)``, an
    ``apply_reaction(requester, attempt_id, rule, molecule_ids)`` callback,
    and expose the molecules this node stores via ``add_molecule``.
    """

    __slots__ = (
        "node_id",
        "world",
        "tracker",
        "store",
        "attempt",
        "reactions_done",
        "last_mode",
        "_attempt_counter",
    )

    def __init__(self, node_id: int, tracker, world):
        self.node_id = node_id
        self.world = world
        self.tracker = tracker
        self.store: dict[int, HolderRecord] = {}
        self.attempt: AttemptState | None = None
        self.reactions_done = 0
        self.last_mode = Mode.OPTIMISTIC
        self._attempt_counter = 0

    # ------------------------------------------------------------------
    # requester side

    @property
    def idle(self) -> bool:
        return self.attempt is None

    @property
    def phase(self) -> Phase:
        return Phase.NONE if self.attempt is None else self.attempt.phase

    def add_molecule(self, molecule) -> None:
        self.store[molecule.id] = HolderRecord(payload=molecule.payload)

    def start_attempt(
        self, rule: ReactionRule, combination: list[tuple[int, int]], mode: Mode
    ) -> None:
        """Kick off one capture attempt for a freshly discovered combination."""
        assert self.attempt is None, "a node runs one attempt at a time"
        mids = [mid for mid, _ in combination]
        assert len(mids) == rule.arity and len(set(mids)) == rule.arity
        self._attempt_counter += 1
        self.attempt = AttemptState(
            attempt_id=self._attempt_counter,
            rule=rule,
            combination=tuple(combination),
            mode=mode,
            phase=Phase.OPT_FETCH if mode is Mode.OPTIMISTIC else Phase.QUERY,
            pending=set(mids),
            gathered={},
        )
        self.last_mode = mode
        kind = MsgKind.FETCH if mode is Mode.OPTIMISTIC else MsgKind.QUERY
        for mid, holder in combination:
            self._send(holder, kind, mid, self.attempt.attempt_id, mode)

    def handle(self, src: int, msg: ProtocolMessage) -> None:
        """Process one delivered message, holder or requester side."""
        self.tracker.record_remote_sigma(msg.sender_sigma)
        if msg.kind in REQUEST_KINDS:
            if msg.request_type is Mode.PESSIMISTIC:
                self._serve_pessimistic(src, msg)
            else:
                self._serve_optimistic(src, msg)
        else:
            self._on_response(msg)

    def _on_response(self, msg: ProtocolMessage) -> None:
        a = self.attempt
        if a is None or msg.attempt_id != a.attempt_id or msg.molecule_id not in a.pending:
            return  # late echo of an attempt that is already over
        a.pending.discard(msg.molecule_id)
        if a.mode is Mode.OPTIMISTIC:
            if msg.kind is not MsgKind.RESP_MOLECULE:
                self._abandon()
                return
            a.gathered[msg.molecule_id] = msg.molecule_payload
            if not a.pending:
                for mid, holder in a.combination:
                    self._send(holder, MsgKind.REACTION, mid, a.attempt_id, a.mode)
                self._finish_reaction()
            return
        if a.phase is Phase.QUERY:
            if msg.kind is not MsgKind.RESP_OK:
                self._abandon()
            elif not a.pending:
                self._advance(MsgKind.COMMITMENT, Phase.COMMITMENT)
        elif a.phase is Phase.COMMITMENT:
            if msg.kind is not MsgKind.RESP_OK:
                self._abandon()
            elif not a.pending:
                self._advance(MsgKind.FETCH, Phase.FETCH)
        elif a.phase is Phase.FETCH:
            # Holders never renege on a commitment, so the fetch phase only
            # ever sees molecules.
            assert msg.kind is MsgKind.RESP_MOLECULE, msg.kind
            a.gathered[msg.molecule_id] = msg.molecule_payload
            if not a.pending:
                self._finish_reaction()

    def _advance(self, kind: MsgKind, phase: Phase) -> None:
        a = self.attempt
        a.phase = phase
        a.pending = {mid for mid, _ in a.combination}
        for mid, holder in a.combination:
            self._send(holder, kind, mid, a.attempt_id, Mode.PESSIMISTIC)

    def _abandon(self) -> None:
        # Give up every molecule of the combination, including ones that
        # answered RESP_OK or already shipped; holders sort out the rest.
        a = self.attempt
        for mid, holder in a.combination:
            self._send(holder, MsgKind.GIVE_UP, mid, a.attempt_id, a.mode)
        self.attempt = None
        self.tracker.record_outcome(False)

    def _finish_reaction(self) -> None:
        a = self.attempt
        self.world.apply_reaction(
            self.node_id, a.attempt_id, a.rule, [mid for mid, _ in a.combination]
        )
        self.attempt = None
        self.reactions_done += 1
        self.tracker.record_outcome(True)

    # ------------------------------------------------------------------
    # holder side

    def _serve_pessimistic(self, src: int, msg: ProtocolMessage) -> None:
        mid = msg.molecule_id
        rec = self.store.get(mid)
        kind = msg.kind
        if kind is MsgKind.GIVE_UP:
            if rec is not None:
                rec.waiters.pop(src, None)
                if rec.locker == src:
                    # The commitment holder walked away; the cheapest
                    # remaining waiter inherits the commitment silently and
                    # finds out when its own commitment message lands.
                    rec.locker = sort_requesters(rec.waiters)[0] if rec.waiters else None
            return
        if rec is None:
            self._reply(src, msg, MsgKind.RESP_REMOVED)
        elif kind is MsgKind.FETCH:
            # Only the commitment holder ever issues a pessimistic fetch.
            assert rec.locker == src and rec.reserver is None
            payload = rec.payload
            del self.store[mid]
            self._reply(src, msg, MsgKind.RESP_MOLECULE, payload=payload)
        elif (rec.locker is not None and rec.locker != src) or rec.reserver is not None:
            self._reply(src, msg, MsgKind.RESP_TAKEN)
        elif kind is MsgKind.QUERY:
            assert rec.locker is None
            rec.waiters[src] = msg.sender_reactions
            self._reply(src, msg, MsgKind.RESP_OK)
        elif kind is MsgKind.COMMITMENT:
            # A commitment from a node missing from the waiter list (its
            # give-up crossed our earlier reply) counts as an implicit
            # query-then-commit.
            rec.waiters[src] = msg.sender_reactions
            if sort_requesters(rec.waiters)[0] == src:
                rec.locker = src
                self._reply(src, msg, MsgKind.RESP_OK)
            else:
                self._reply(src, msg, MsgKind.RESP_TAKEN)
        else:
            raise AssertionError(f"unexpected pessimistic request: {kind}")

    def _serve_optimistic(self, src: int, msg: ProtocolMessage) -> None:
        mid = msg.molecule_id
        rec = self.store.get(mid)
        kind = msg.kind
        if kind is MsgKind.GIVE_UP:
            # Only the current reserver may free the molecule; anything else
            # is a stale echo.
            if rec is not None and rec.reserver == src:
                rec.reserver = None
            return
        if kind is MsgKind.REACTION:
            if rec is not None and rec.reserver == src:
                del self.store[mid]
            return
        if rec is None:
            self._reply(src, msg, MsgKind.RESP_REMOVED)
        elif rec.reserver is not None or rec.locker is not None or rec.waiters:
            # Taken covers a standing optimistic reservation as well as any
            # pessimistic interest: conservative requesters arrived first or
            # outrank us outright.
            self._reply(src, msg, MsgKind.RESP_TAKEN)
        else:
            rec.reserver = src
            self._reply(src, msg, MsgKind.RESP_MOLECULE, payload=rec.payload)

    # ------------------------------------------------------------------

    def _reply(
        self, dst: int, req: ProtocolMessage, kind: MsgKind, payload: Payload | None = None
    ) -> None:
        self._send(dst, kind, req.molecule_id, req.attempt_id, req.request_type, payload)

    def _send(
        self,
        dst: int,
        kind: MsgKind,
        molecule_id: int,
        attempt_id: int,
        request_type: Mode,
        payload: Payload | None = None,
    ) -> None:
        msg = ProtocolMessage(
            kind=kind,
            molecule_id=molecule_id,
            attempt_id=attempt_id,
            request_type=request_type,
            sender_reactions=self.reactions_done,
            sender_sigma=self.tracker.sigma_local(),
            molecule_payload=payload,
        )
        self.world.send(self.node_id, dst, msg)
