"""Decentralised balanced clustering.

Every dUAV runs the same local state machine.  Leader election follows the
k-hop KHOPCA weight rules; once a node is cluster head (CH) it grows up to
``n_B`` branches, each a parent->child chain of dUAVs, and keeps their
lengths within one of each other:

* BM-A (CH -> leaves): start accepting one more child.
* BM-D (CH -> branch): release the addressed member and everything below it.
* CM (leaf -> CH): a branch grew, or (with a length payload) shrank.
* ROT (CH -> members): formation frame for the capture hemisphere.
* JOIN / REJECT: a parent-less UAV asking the nearest accepting node to
  adopt it, and the refusal.

Functions in this module mutate :class:`NodeState` objects in place and
return the messages they emit.  :class:`ClusterProtocol` drives all of them
through one synchronous tick.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from . import geometry as g
from .geometry import Vec3
from .pursuit import PursuitPhase


class Role(enum.Enum):
    FREE_UAV = "FREE_UAV"
    D_UAV = "D_UAV"
    CLUSTER_HEAD = "CLUSTER_HEAD"
    MALICIOUS = "MALICIOUS"


class MsgKind(enum.IntEnum):
    BM_A = 0
    BM_D = 1
    CM = 2
    ROT = 3
    JOIN = 4
    REJECT = 5


CONTROL_KINDS = frozenset(k for k in MsgKind if k is not MsgKind.ROT)


@dataclass(frozen=True)
class Message:
    kind: MsgKind
    sender: int
    recipient: int
    payload: Any = None


@dataclass
class NodeState:
    id: int
    role: Role = Role.FREE_UAV
    w_K: int = 0
    w_B: int = 0
    parent: Optional[int] = None
    child: Optional[int] = None
    accept: bool = False
    n_B: int = 3
    # CH only: branch root id -> recorded branch length, in branch order
    branches: Dict[int, int] = field(default_factory=dict)
    pos: Vec3 = g.ZERO
    phase: PursuitPhase = PursuitPhase.CHASE
    frame: Any = None

    def snapshot(self) -> tuple:
        return (self.id, self.role.value, self.w_K, self.w_B, self.parent, self.child,
                self.accept, tuple(self.branches.items()))


# -- leader election --------------------------------------------------------

def khopca_step(node: NodeState, neighbor_weights: Mapping[int, int], max_k: int) -> int:
    """Next KHOPCA weight of *node* given ``{neighbor id: w_K}``.

    Rules, first match wins: adopt ``max - 1`` below a heavier neighbor;
    promote to ``max_k`` when everything around is at zero; of two adjacent
    ``max_k`` nodes the higher id steps down; otherwise decay by one.
    Cluster members never self-promote.
    """
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    w = node.w_K
    m = max(neighbor_weights.values()) if neighbor_weights else None
    if m is not None and m > w:
        return m - 1
    if w == 0 and (m is None or m == 0):
        return 0 if node.role is Role.D_UAV else max_k
    if w == max_k:
        if any(v == max_k and j < node.id for j, v in neighbor_weights.items()):
            return max_k - 1
        return w
    if 0 < w < max_k:
        return w - 1
    return w


def promote(node: NodeState, max_k: int) -> None:
    node.role = Role.CLUSTER_HEAD
    node.w_K = max_k
    node.w_B = 0
    node.parent = None
    node.child = None
    node.branches = {}
    node.accept = node.n_B > 0
    node.phase = PursuitPhase.CHASE
    node.frame = None


# -- parent-less behaviour --------------------------------------------------

def flocking_target(neighbors: Iterable[Vec3]) -> Optional[Vec3]:
    pts = list(neighbors)
    if not pts:
        return None
    return g.mean(pts)


def select_parent(self_pos: Vec3, candidates: Sequence[Tuple[int, Vec3, bool]]) -> Optional[int]:
    """Nearest accepting candidate, lowest id on ties."""
    best = None
    for cid, pos, accept in candidates:
        if not accept:
            continue
        key = (g.distance(self_pos, pos), cid)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


# -- joining ----------------------------------------------------------------

def can_accept(parent: NodeState) -> bool:
    if not parent.accept:
        return False
    if parent.role is Role.CLUSTER_HEAD:
        return len(parent.branches) < parent.n_B
    return parent.role is Role.D_UAV and parent.child is None


def accept_child(parent: NodeState, child: NodeState) -> List[Message]:
    """Adopt *child*; both states change atomically.

    A refused request yields a REJECT and leaves both nodes untouched.
    """
    if child.role is not Role.FREE_UAV or not can_accept(parent):
        return [Message(MsgKind.REJECT, parent.id, child.id)]
    child.role = Role.D_UAV
    child.parent = parent.id
    child.child = None
    child.w_B = parent.w_B + 1
    child.accept = False
    child.branches = {}
    child.frame = None
    if parent.role is Role.CLUSTER_HEAD:
        parent.branches[child.id] = 1
        if len(parent.branches) >= parent.n_B:
            parent.accept = False
            return [Message(MsgKind.BM_A, parent.id, root) for root in parent.branches]
        return []
    parent.child = child.id
    parent.accept = False
    return [Message(MsgKind.CM, parent.id, parent.parent)]


# -- message handlers -------------------------------------------------------

def on_control_message(ch: NodeState, cm: Message) -> List[Message]:
    """CH bookkeeping for a CM arriving through branch root ``cm.sender``.

    A CM without payload means the branch grew by one; an integer payload is
    a corrected absolute length.  With all branches present, every branch of
    minimal length is told to accept again.
    """
    if ch.role is not Role.CLUSTER_HEAD or cm.sender not in ch.branches:
        return []
    if cm.payload is None:
        ch.branches[cm.sender] += 1
    else:
        ch.branches[cm.sender] = int(cm.payload)
    if len(ch.branches) != ch.n_B:
        return []
    shortest = min(ch.branches.values())
    return [Message(MsgKind.BM_A, ch.id, root)
            for root, length in ch.branches.items() if length == shortest]


def release(nodes: Mapping[int, NodeState], node_id: int, detach_parent: bool = True) -> List[int]:
    """Turn *node_id* and all its descendants into parent-less UAVs.

    Returns the released ids, top first.  With *detach_parent* the former
    parent forgets the link in the same step.
    """
    top = nodes[node_id]
    if detach_parent and top.parent is not None and top.parent in nodes:
        p = nodes[top.parent]
        if p.role is Role.CLUSTER_HEAD:
            if p.branches.pop(node_id, None) is not None:
                p.accept = len(p.branches) < p.n_B
        elif p.child == node_id:
            p.child = None
    freed = []
    cur: Optional[int] = node_id
    while cur is not None and cur in nodes:
        n = nodes[cur]
        nxt = n.child
        n.role = Role.FREE_UAV
        n.parent = None
        n.child = None
        n.w_B = 0
        n.w_K = 0
        n.accept = False
        n.branches = {}
        n.frame = None
        n.phase = PursuitPhase.CHASE
        freed.append(cur)
        cur = nxt
    return freed


def on_basic_message(duav: NodeState, msg: Message,
                     nodes: Optional[Mapping[int, NodeState]] = None) -> List[Message]:
    """Handle BM-A, BM-D, ROT from the parent or a CM from the child.

    BM-D carries the depth of the member to cut (``None`` cuts here); nodes
    above that depth pass it on.  The cut itself is atomic, and the member
    left as the new leaf reports its depth as an absolute CM.
    """
    if duav.role is not Role.D_UAV:
        return []
    kind = msg.kind
    if kind is MsgKind.CM:
        if msg.sender != duav.child or duav.parent is None:
            return []
        return [Message(MsgKind.CM, duav.id, duav.parent, msg.payload)]
    if msg.sender != duav.parent:
        return []
    if kind is MsgKind.BM_A:
        if duav.child is None:
            duav.accept = True
            return []
        duav.accept = False
        return [Message(MsgKind.BM_A, duav.id, duav.child)]
    if kind is MsgKind.BM_D:
        target = msg.payload
        if target is None or duav.w_B >= target:
            pool = nodes if nodes is not None else {duav.id: duav}
            parent = pool.get(duav.parent)
            release(pool, duav.id)
            if parent is not None and parent.role is Role.D_UAV and parent.parent is not None:
                # the new leaf confirms its depth; this overtakes nothing and
                # so supersedes increments still travelling up the branch
                return [Message(MsgKind.CM, parent.id, parent.parent, parent.w_B)]
            return []
        if duav.child is None:
            return []
        return [Message(MsgKind.BM_D, duav.id, duav.child, target)]
    if kind is MsgKind.ROT:
        duav.frame = msg.payload
        if duav.child is None:
            return []
        return [Message(MsgKind.ROT, duav.id, duav.child, msg.payload)]
    return []


def rebalance(ch: NodeState) -> List[Message]:
    """Trim every branch longer than ``shortest + 1`` back to that length."""
    if ch.role is not Role.CLUSTER_HEAD or not ch.branches:
        return []
    shortest = min(ch.branches.values())
    out = []
    for root, length in ch.branches.items():
        if length > shortest + 1:
            out.append(Message(MsgKind.BM_D, ch.id, root, shortest + 2))
            ch.branches[root] = shortest + 1
    return out


def cluster_size(ch: NodeState) -> int:
    return sum(ch.branches.values())


def dominates(a: NodeState, b: NodeState) -> bool:
    """True when CH *a* survives a merge with CH *b*: bigger wins, then lower id."""
    return (cluster_size(a), -a.id) > (cluster_size(b), -b.id)


def dissolve(nodes: Mapping[int, NodeState], ch: NodeState, max_k: int) -> List[int]:
    freed = []
    for root in list(ch.branches):
        if root in nodes and nodes[root].parent == ch.id:
            freed.extend(release(nodes, root, detach_parent=False))
    ch.branches = {}
    ch.role = Role.FREE_UAV
    ch.w_K = max_k - 1
    ch.w_B = 0
    ch.accept = False
    ch.frame = None
    ch.phase = PursuitPhase.CHASE
    return freed


def merge_clusters(ch_a: NodeState, ch_b: NodeState, nodes: Mapping[int, NodeState],
                   max_k: int) -> Tuple[int, List[int]]:
    """Resolve two CHs in range: the dominated one dissolves its whole cluster.

    Returns ``(survivor id, released ids)``.
    """
    winner, loser = (ch_a, ch_b) if dominates(ch_a, ch_b) else (ch_b, ch_a)
    return winner.id, [loser.id] + dissolve(nodes, loser, max_k)


def link_maintenance(node: NodeState, neighbor_ids: Set[int],
                     nodes: Mapping[int, NodeState]) -> Tuple[List[Message], List[int]]:
    """React to lost links of *node*.

    Losing the parent releases the node and its descendants (the parent sees
    the same loss and repairs its own side).  A D_UAV that loses its child
    becomes an accepting leaf and reports its new branch length; a CH drops
    branches whose root went out of range.  Returns ``(messages, released)``.
    """
    if node.role is Role.D_UAV and node.parent not in neighbor_ids:
        return [], release(nodes, node.id, detach_parent=False)
    out: List[Message] = []
    if node.role is Role.D_UAV and node.child is not None and node.child not in neighbor_ids:
        node.child = None
        node.accept = True
        out.append(Message(MsgKind.CM, node.id, node.parent, node.w_B))
    elif node.role is Role.CLUSTER_HEAD:
        lost = [r for r in node.branches if r not in neighbor_ids]
        for r in lost:
            del node.branches[r]
        if lost:
            node.accept = len(node.branches) < node.n_B
    return out, []


# -- network tick -----------------------------------------------------------

@dataclass
class TickReport:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    joins: int = 0
    released: int = 0
    link_losses: int = 0
    promotions: int = 0
    dissolved: int = 0
    control_in_flight: int = 0

    @property
    def quiescent(self) -> bool:
        return (self.control_in_flight == 0 and self.joins == 0 and self.released == 0
                and self.link_losses == 0 and self.promotions == 0 and self.dissolved == 0)


def _sort_key(m: Message) -> Tuple[int, int]:
    return (m.sender, int(m.kind))


class ClusterProtocol:
    """All dUAV state machines advanced in one deterministic synchronous tick.

    Messages emitted during a tick are delivered at the start of the next one,
    in ``(sender id, kind)`` order; a message whose endpoints are no longer
    in range is dropped.
    """

    def __init__(self, nodes: Mapping[int, NodeState], max_k: int = 3):
        self.nodes: Dict[int, NodeState] = dict(nodes)
        self.max_k = max_k
        self.outbox: List[Message] = []
        self.flock_targets: Dict[int, Optional[Vec3]] = {}
        self.sent_total = 0
        self.delivered_total = 0
        self.dropped_total = 0

    def send(self, msgs: Iterable[Message]) -> None:
        for m in msgs:
            if m.recipient is None:
                continue
            self.outbox.append(m)
            self.sent_total += 1

    def step(self, neighbors: Mapping[int, Set[int]]) -> TickReport:
        nodes = self.nodes
        ids = sorted(nodes)
        rep = TickReport()
        sent_before = self.sent_total
        # last tick's messages; anything sent from here on waits a tick
        inbox = sorted(self.outbox, key=_sort_key)
        self.outbox = []

        # link maintenance: releases first so the outcome is order-free
        lost_parent = [i for i in ids
                       if nodes[i].role is Role.D_UAV and nodes[i].parent not in neighbors[i]]
        for i in lost_parent:
            if nodes[i].role is Role.D_UAV:
                _, freed = link_maintenance(nodes[i], neighbors[i], nodes)
                rep.released += len(freed)
                rep.link_losses += 1
        for i in ids:
            n = nodes[i]
            before = (n.child, len(n.branches))
            msgs, _ = link_maintenance(n, neighbors[i], nodes)
            if (n.child, len(n.branches)) != before:
                rep.link_losses += 1
            self.send(msgs)

        for m in inbox:
            if m.recipient not in nodes or m.sender not in neighbors.get(m.recipient, ()):
                rep.dropped += 1
                continue
            rep.delivered += 1
            self._handle(m, rep)

        # leader election on a synchronous weight snapshot
        weights = {i: nodes[i].w_K for i in ids}
        for i in ids:
            n = nodes[i]
            if n.role is Role.CLUSTER_HEAD:
                continue
            nw = khopca_step(n, {j: weights[j] for j in neighbors[i]}, self.max_k)
            n.w_K = nw
            if n.role is Role.FREE_UAV and nw == self.max_k:
                promote(n, self.max_k)
                rep.promotions += 1

        # merging of adjacent CHs, judged on the pre-merge state
        heads = [nodes[i] for i in ids if nodes[i].role is Role.CLUSTER_HEAD]
        losers = [h for h in heads
                  if any(nodes[j].role is Role.CLUSTER_HEAD and dominates(nodes[j], h)
                         for j in neighbors[h.id])]
        for h in losers:
            freed = dissolve(nodes, h, self.max_k)
            rep.dissolved += 1
            rep.released += len(freed)

        for i in ids:
            if nodes[i].role is Role.CLUSTER_HEAD:
                self.send(rebalance(nodes[i]))

        # parent-less UAVs flock and ask the nearest accepting neighbor
        self.flock_targets = {}
        for i in ids:
            n = nodes[i]
            if n.role is not Role.FREE_UAV:
                continue
            nb = sorted(neighbors[i])
            self.flock_targets[i] = flocking_target(nodes[j].pos for j in nb)
            p = select_parent(n.pos, [(j, nodes[j].pos, nodes[j].accept) for j in nb])
            if p is not None:
                self.send([Message(MsgKind.JOIN, i, p)])

        self.delivered_total += rep.delivered
        self.dropped_total += rep.dropped
        rep.sent = self.sent_total - sent_before
        rep.control_in_flight = sum(1 for m in self.outbox if m.kind in CONTROL_KINDS)
        return rep

    def _handle(self, m: Message, rep: TickReport) -> None:
        nodes = self.nodes
        node = nodes[m.recipient]
        if m.kind is MsgKind.JOIN:
            child = nodes.get(m.sender)
            if child is None:
                return
            out = accept_child(node, child)
            if not (out and out[0].kind is MsgKind.REJECT):
                rep.joins += 1
            self.send(out)
        elif m.kind is MsgKind.REJECT:
            return
        elif node.role is Role.CLUSTER_HEAD:
            if m.kind is MsgKind.CM:
                self.send(on_control_message(node, m))
        else:
            before = node.role
            out = on_basic_message(node, m, nodes)
            if before is Role.D_UAV and node.role is Role.FREE_UAV:
                rep.released += 1
            self.send(out)

    def trace(self) -> List[tuple]:
        return [self.nodes[i].snapshot() for i in sorted(self.nodes)]


def branch_members(nodes: Mapping[int, NodeState], root: int) -> List[int]:
    """Actual member chain of the branch starting at *root*."""
    chain = []
    cur: Optional[int] = root
    seen = set()
    while cur is not None and cur in nodes and cur not in seen:
        seen.add(cur)
        chain.append(cur)
        cur = nodes[cur].child
    return chain


def actual_branch_lengths(nodes: Mapping[int, NodeState], ch: NodeState) -> List[int]:
    return [len(branch_members(nodes, r)) for r in ch.branches
            if r in nodes and nodes[r].parent == ch.id]
