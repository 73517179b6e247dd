"""Proposal algorithm for laminar instances with upper and lower class bounds.

Applicants propose down their lists; an institute keeps a deficiency number
per class recording how many more hires its subtree still needs to meet lower
bounds. A proposal climbs the proposer's leaf-to-root path: the deficiency is
decremented where it exceeds the children's total, and when a class would
exceed count + deficiency > upper the lowest-ranking applicant whose chain of
subclasses can afford the loss is rejected. The outcome is applicant-optimal
and institute-pessimal among all stable matchings, or a proof that none
exists (positive root deficiency at termination).

Two state invariants hold at the end of every proposal round and are asserted
along the touched paths (a full sweep is available via check_invariants):

  A: deficiency(C) >= sum of children's deficiencies, for every class C;
  B: lower(C) <= |assigned & C| + deficiency(C) <= upper(C).
"""

from __future__ import annotations

import heapq
from bisect import insort
from dataclasses import dataclass, field
from typing import Callable

from .model import ClassForest, ClassNode, ClassTree, Instance, preprocess
from .stability import Matching


@dataclass(frozen=True)
class RejectionEvent:
    applicant: str
    institute: str
    causing_class: tuple[str, ...]


@dataclass(frozen=True)
class InvariantViolation:
    institute: str
    members: tuple[str, ...]
    which: str  # "A" or "B"


class SolverState:
    """Mutable state of one solve run; confined to that run."""

    def __init__(self, instance: Instance, forest: ClassForest):
        self.instance = instance
        self.forest = forest
        self.assigned: dict[str, list[str]] = {
            i.id: [] for i in instance.institutes
        }  # sorted by institute rank
        self.assigned_to: dict[str, str] = {}
        self.count: dict[int, int] = {}
        self.delta: dict[int, int] = {}
        self.child_delta: dict[int, int] = {}
        self.node_of: dict[int, ClassNode] = {}
        for tree in forest.values():
            for node in tree.nodes():
                key = id(node)
                self.node_of[key] = node
                self.count[key] = 0
                self.delta[key] = node.lower
                self.child_delta[key] = sum(c.lower for c in node.children)
        self.next_index: dict[str, int] = {a.id: 0 for a in instance.applicants}
        self.rejections: list[RejectionEvent] = []
        self.proposals = 0

    def deficiency(self, node: ClassNode) -> int:
        return self.delta[id(node)]

    def assigned_count(self, node: ClassNode) -> int:
        return self.count[id(node)]

    def is_surplus(self, node: ClassNode) -> bool:
        return self.count[id(node)] + self.delta[id(node)] > node.lower

    def matching(self) -> Matching:
        return Matching(dict(self.assigned_to))


def affluent_set(state: SolverState, institute: str, node: ClassNode) -> tuple[str, ...]:
    """Assigned applicants in `node` whose strict subclasses are all surplus.

    Ordered by the institute's preference. These are the applicants the class
    can reject without endangering any lower bound beneath it.
    """
    tree = state.forest[institute]
    out = []
    for a in state.assigned[institute]:
        if a not in node.members:
            continue
        ok = True
        for sub in tree.paths[a]:
            if sub is node:
                break
            if not state.is_surplus(sub):
                ok = False
                break
        if ok:
            out.append(a)
    return tuple(out)


def check_invariants(state: SolverState) -> InvariantViolation | None:
    """Full sweep of Invariants A and B over every class of every institute."""
    for inst in state.instance.institutes:
        tree = state.forest[inst.id]
        for node in tree.nodes():
            key = id(node)
            if node.children and state.delta[key] < sum(
                state.delta[id(c)] for c in node.children
            ):
                return InvariantViolation(inst.id, tree.label(node, inst), "A")
            held = state.count[key] + state.delta[key]
            if not (node.lower <= held <= node.upper):
                return InvariantViolation(inst.id, tree.label(node, inst), "B")
    return None


@dataclass(frozen=True)
class SolveResult:
    matching: Matching | None
    witness: str | None
    rejections: tuple[RejectionEvent, ...]
    proposals: int

    @property
    def stable(self) -> bool:
        return self.matching is not None


Observer = Callable[[SolverState, str, str], None]


def solve(
    instance: Instance,
    *,
    observer: Observer | None = None,
    full_invariant_checks: bool = False,
) -> SolveResult:
    """Run the proposal algorithm; raises NotLaminar on non-laminar input.

    `observer(state, applicant, institute)` fires before each proposal is
    processed. `full_invariant_checks` sweeps every class after every round
    instead of only the touched paths (replay/debug use).
    """
    forest = preprocess(instance)
    state = SolverState(instance, forest)

    # A lifted lower bound above its upper bound leaves no feasible tuple at
    # all (Invariant B could not even initialise), hence no stable matching.
    for inst in instance.institutes:
        for node in forest[inst.id].nodes():
            if node.lower > node.upper:
                return SolveResult(None, inst.id, (), 0)

    order = {a.id: k for k, a in enumerate(instance.applicants)}
    acceptable = instance.acceptable_institutes
    inst_rank = {i.id: i.rank for i in instance.institutes}

    heap = [(order[a.id], a.id) for a in instance.applicants]
    heapq.heapify(heap)

    while heap:
        _, a = heapq.heappop(heap)
        if a in state.assigned_to:
            continue  # stale entry
        choices = acceptable[a]
        if state.next_index[a] >= len(choices):
            continue  # exhausted their list
        i = choices[state.next_index[a]]
        state.next_index[a] += 1
        if observer is not None:
            observer(state, a, i)
        state.proposals += 1

        tree = forest[i]
        path = tree.paths[a]
        # provisional acceptance: a enters every class on its path
        insort(state.assigned[i], a, key=inst_rank[i].__getitem__)
        state.assigned_to[a] = i
        for node in path:
            state.count[id(node)] += 1

        rejected: str | None = None
        for node in path[1:]:
            key = id(node)
            if state.delta[key] > state.child_delta[key]:
                state.delta[key] -= 1
                if node.parent is not None:
                    state.child_delta[id(node.parent)] -= 1
            if state.count[key] + state.delta[key] > node.upper:
                pool = affluent_set(state, i, node)
                if not pool:
                    raise RuntimeError(
                        f"internal error: empty rejection pool at institute {i!r}"
                    )
                rejected = pool[-1]  # lowest-ranking affluent applicant
                state.assigned[i].remove(rejected)
                del state.assigned_to[rejected]
                for sub in tree.paths[rejected]:
                    state.count[id(sub)] -= 1
                state.rejections.append(
                    RejectionEvent(rejected, i, tree.label(node, instance.institute_by_id[i]))
                )
                heapq.heappush(heap, (order[rejected], rejected))
                break

        if a != rejected and a not in state.assigned_to:
            raise RuntimeError("internal error: proposer lost without rejection")
        _assert_round_invariants(state, i, a, rejected, full_invariant_checks)

    if any(
        state.delta[id(forest[inst.id].root)] > 0 for inst in instance.institutes
    ):
        witness = next(
            inst.id
            for inst in instance.institutes
            if state.delta[id(forest[inst.id].root)] > 0
        )
        return SolveResult(None, witness, tuple(state.rejections), state.proposals)
    return SolveResult(
        state.matching(), None, tuple(state.rejections), state.proposals
    )


def _assert_round_invariants(
    state: SolverState,
    institute: str,
    proposer: str,
    rejected: str | None,
    full: bool,
) -> None:
    if full:
        violation = check_invariants(state)
        if violation is not None:
            raise RuntimeError(f"internal error: invariant {violation} violated")
        return
    tree = state.forest[institute]
    touched = list(tree.paths[proposer])
    if rejected is not None:
        touched += list(tree.paths[rejected])
    for node in touched:
        key = id(node)
        if node.children and state.delta[key] < state.child_delta[key]:
            raise RuntimeError(
                f"internal error: Invariant A violated at {sorted(node.members)}"
            )
        held = state.count[key] + state.delta[key]
        if not (node.lower <= held <= node.upper):
            raise RuntimeError(
                f"internal error: Invariant B violated at {sorted(node.members)}"
            )
