"""Mixed traffic on one molecule: conservative requests go first."""

from molcap.capture import Mode, MsgKind, Phase, resolve_coexistence
from molcap.chemistry import CONSUME2, Molecule
from molcap.netsim import Envelope

from support import MiniWorld, make_node, msg


def envelope(src, message, seq):
    return Envelope(src=src, dst=0, sent_at=0, seq=seq, msg=message)


def test_pessimistic_requests_sort_first_and_stay_stable():
    fetch_a = envelope(1, msg(MsgKind.FETCH, 10, request_type=Mode.OPTIMISTIC), seq=1)
    query_b = envelope(2, msg(MsgKind.QUERY, 10), seq=2)
    fetch_c = envelope(3, msg(MsgKind.FETCH, 10, request_type=Mode.OPTIMISTIC), seq=3)
    query_d = envelope(4, msg(MsgKind.QUERY, 10), seq=4)
    ordered = resolve_coexistence([fetch_a, query_b, fetch_c, query_d])
    assert ordered == [query_b, query_d, fetch_a, fetch_c]


def test_same_step_query_beats_fetch():
    # Both requests land in the same batch; the holder serves the query
    # first, so the optimistic fetch finds the molecule spoken for.
    world = MiniWorld(3)
    world.add_molecule(0, Molecule(42, "x"))
    world.add_molecule(2, Molecule(43, "y"))
    world.add_molecule(2, Molecule(44, "z"))
    world.nodes[1].start_attempt(CONSUME2, [(42, 0), (43, 2)], Mode.PESSIMISTIC)
    world.nodes[2].start_attempt(CONSUME2, [(42, 0), (44, 2)], Mode.OPTIMISTIC)
    world.run_steps(1)  # both requests land at the holder in one batch
    holder = world.nodes[0]
    assert holder.store[42].waiters == {1: 0}
    assert holder.store[42].reserver is None
    world.run_steps(1)  # replies come back
    # The pessimistic requester got RESP_OK everywhere and moved on; the
    # optimistic one got RESP_TAKEN for 42 and abandoned on the spot.
    assert world.nodes[1].attempt.phase is Phase.COMMITMENT
    assert world.nodes[2].attempt is None


def test_granted_reservation_outlives_later_pessimistic_interest():
    node, world = make_node(0, molecules=[(42, "x")])
    node.handle(7, msg(MsgKind.FETCH, 42, request_type=Mode.OPTIMISTIC))
    assert node.store[42].reserver == 7
    world.clear()
    node.handle(3, msg(MsgKind.QUERY, 42))
    ((_, _, reply),) = world.sent
    assert reply.kind is MsgKind.RESP_TAKEN
    assert node.store[42].reserver == 7  # never preempted
    world.clear()
    node.handle(3, msg(MsgKind.COMMITMENT, 42))
    ((_, _, reply),) = world.sent
    assert reply.kind is MsgKind.RESP_TAKEN


def test_pessimistic_waiters_block_optimistic_fetch_across_steps():
    node, world = make_node(0, molecules=[(42, "x")])
    node.handle(3, msg(MsgKind.QUERY, 42))
    world.clear()
    node.handle(7, msg(MsgKind.FETCH, 42, request_type=Mode.OPTIMISTIC))
    ((_, _, reply),) = world.sent
    assert reply.kind is MsgKind.RESP_TAKEN
    assert node.store[42].reserver is None


def test_two_pessimistic_queries_in_one_batch_both_pass():
    node, world = make_node(0, molecules=[(42, "x")])
    node.handle(3, msg(MsgKind.QUERY, 42))
    node.handle(5, msg(MsgKind.QUERY, 42))
    kinds = [m.kind for _, _, m in world.sent]
    assert kinds == [MsgKind.RESP_OK, MsgKind.RESP_OK]
    assert set(node.store[42].waiters) == {3, 5}
