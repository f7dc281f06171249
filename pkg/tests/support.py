"""Scripted micro-worlds for driving capture state machines in isolation."""

from molcap.adapt import SuccessTracker
from molcap.capture import Mode, MsgKind, Node, ProtocolMessage, resolve_coexistence
from molcap.chemistry import Molecule
from molcap.netsim import Transport


def msg(
    kind,
    molecule_id,
    attempt_id=1,
    request_type=Mode.PESSIMISTIC,
    reactions=0,
    sigma=1.0,
    payload=None,
):
    return ProtocolMessage(
        kind=kind,
        molecule_id=molecule_id,
        attempt_id=attempt_id,
        request_type=request_type,
        sender_reactions=reactions,
        sender_sigma=sigma,
        molecule_payload=payload,
    )


class FakeWorld:
    """Collects outgoing traffic and reaction callbacks, nothing more."""

    def __init__(self):
        self.sent = []
        self.reactions = []
        self.step = 0

    def send(self, src, dst, message):
        self.sent.append((src, dst, message))

    def apply_reaction(self, requester, attempt_id, rule, molecule_ids):
        self.reactions.append((requester, attempt_id, rule.name, tuple(molecule_ids)))

    def outgoing(self, kind=None):
        if kind is None:
            return list(self.sent)
        return [(s, d, m) for s, d, m in self.sent if m.kind is kind]

    def clear(self):
        self.sent.clear()


def make_node(node_id=0, world=None, molecules=()):
    world = world or FakeWorld()
    node = Node(node_id, SuccessTracker(), world)
    for mid, payload in molecules:
        node.add_molecule(Molecule(mid, payload))
    return node, world


class MiniWorld:
    """A handful of real nodes on a real transport, stepped by hand.

    Reactions are recorded, not applied to any multiset; capture-level
    tests only care about the message choreography.
    """

    def __init__(self, node_count):
        self.transport = Transport()
        self.reactions = []
        self.step = 0
        self.nodes = [Node(i, SuccessTracker(), self) for i in range(node_count)]

    def send(self, src, dst, message):
        self.transport.send(src, dst, message)

    def apply_reaction(self, requester, attempt_id, rule, molecule_ids):
        self.reactions.append((requester, attempt_id, rule.name, tuple(molecule_ids)))

    def add_molecule(self, node_id, molecule):
        self.nodes[node_id].add_molecule(molecule)

    def run_steps(self, n=1):
        for _ in range(n):
            batches = self.transport.tick()
            self.step = self.transport.step
            for dst in sorted(batches):
                for env in resolve_coexistence(batches[dst]):
                    self.nodes[dst].handle(env.src, env.msg)

    def run_until_quiet(self, limit=50):
        for _ in range(limit):
            if self.transport.in_flight() == 0:
                return
            self.run_steps()
        raise AssertionError("traffic never settled")
