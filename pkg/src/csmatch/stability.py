"""Feasibility and stability checking, exhaustive enumeration, rural hospitals report.

Stability follows the group definition: a feasible tuple g for institute i
blocks a matching when every member weakly prefers i to their assignment, g
weakly improves on i's current tuple position by position, and either some
position strictly improves with a strictly willing applicant or g is strictly
larger. With no lower bounds on a laminar instance this is equivalent to the
absence of ordinary blocking pairs, which find_blocking_pair checks directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import SizeCapExceeded
from .model import (
    ClassTree,
    Instance,
    Institute,
    absorb,
    preprocess,
)

DEFAULT_CAP = 10**7


@dataclass(frozen=True, eq=False)
class Matching:
    """Partial assignment applicant -> institute."""

    assignment: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    def institute_of(self, applicant: str) -> str | None:
        return self.assignment.get(applicant)

    def members(self, institute: str) -> set[str]:
        return {a for a, i in self.assignment.items() if i == institute}

    def tuple_for(self, instance: Instance, institute: str) -> tuple[str, ...]:
        """mu(i): assigned applicants in the institute's preference order."""
        rank = instance.institute_by_id[institute].rank
        return tuple(sorted(self.members(institute), key=rank.__getitem__))

    def size(self) -> int:
        return len(self.assignment)

    def as_vector(self, instance: Instance) -> tuple[int, ...]:
        """Canonical form: per applicant (input order), institute index or -1."""
        idx = {inst.id: k for k, inst in enumerate(instance.institutes)}
        return tuple(
            idx[self.assignment[a.id]] if a.id in self.assignment else -1
            for a in instance.applicants
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, Matching) and self.assignment == other.assignment

    def __hash__(self) -> int:
        return hash(frozenset(self.assignment.items()))


@dataclass(frozen=True)
class ClassViolation:
    institute: str
    members: tuple[str, ...]  # () means the capacity itself
    count: int
    lower: int
    upper: int


@dataclass(frozen=True)
class BlockingPair:
    institute: str
    applicant: str


@dataclass(frozen=True)
class BlockingGroup:
    institute: str
    group: tuple[str, ...]  # in the institute's preference order


def check_matching(instance: Instance, matching: Matching) -> None:
    """Assert the Matching invariants: acceptable pairs and capacities."""
    for a, i in matching.assignment.items():
        if not instance.is_acceptable(i, a):
            raise ValueError(f"pair ({i!r}, {a!r}) is not acceptable")
    for inst in instance.institutes:
        if len(matching.members(inst.id)) > inst.capacity:
            raise ValueError(f"institute {inst.id!r} over capacity")


def is_feasible(instance: Instance, matching: Matching) -> ClassViolation | None:
    """First class or capacity violation, or None when the matching is feasible.

    Checks the declared classes directly, so it also applies to non-laminar
    instances.
    """
    for inst in instance.institutes:
        assigned = matching.members(inst.id)
        if len(assigned) > inst.capacity:
            return ClassViolation(inst.id, (), len(assigned), 0, inst.capacity)
        for cls in inst.classes:
            count = len(assigned & cls.member_set)
            if not (cls.lower <= count <= cls.upper):
                return ClassViolation(
                    inst.id, cls.members, count, cls.lower, cls.upper
                )
    return None


def _prefers(instance: Instance, applicant: str, institute: str, over: str | None) -> bool:
    """Strictly prefers `institute` to `over` (None = unmatched)."""
    rank = instance.applicant_by_id[applicant].rank
    if institute not in rank:
        return False
    if over is None:
        return True
    return rank[institute] < rank[over]


def find_blocking_pair(instance: Instance, matching: Matching) -> BlockingPair | None:
    """First blocking pair in input order, for instances without lower bounds.

    A pair (i, a) blocks when a strictly prefers i to their assignment and no
    class containing a (nor the capacity) is already filled by assigned
    applicants that i ranks above a.
    """
    if instance.has_lower_bounds:
        raise ValueError("blocking pairs require an instance without lower bounds")
    for inst in instance.institutes:
        assigned = matching.members(inst.id)
        rank = inst.rank
        for a in instance.acceptable_applicants[inst.id]:
            if not _prefers(instance, a, inst.id, matching.institute_of(a)):
                continue
            better = {b for b in assigned if rank[b] < rank[a]}
            if len(better) >= inst.capacity:
                continue
            if all(
                len(better & cls.member_set) < cls.upper
                for cls in inst.classes
                if a in cls.member_set
            ):
                return BlockingPair(inst.id, a)
    return None


def find_blocking_group(
    instance: Instance,
    matching: Matching,
    cap: int = DEFAULT_CAP,
) -> BlockingGroup | None:
    """Exact search for a blocking group; None certifies stability.

    Branch-and-bound over each institute's preference order. The search state
    counter is bounded by `cap`; exceeding it raises SizeCapExceeded.
    """
    budget = [cap]
    for inst in instance.institutes:
        group = _blocking_group_for(instance, matching, inst, budget)
        if group is not None:
            return group
    return None


def _blocking_group_for(
    instance: Instance,
    matching: Matching,
    inst: Institute,
    budget: list[int],
) -> BlockingGroup | None:
    current = matching.tuple_for(instance, inst.id)
    k = len(current)
    rank = inst.rank
    current_ranks = [rank[a] for a in current]

    # Candidates: acceptable applicants willing to stay with or switch to i.
    candidates = []
    for a in instance.acceptable_applicants[inst.id]:
        holds = matching.institute_of(a)
        if holds == inst.id or _prefers(instance, a, inst.id, holds):
            candidates.append(a)
    classes = [(cls.member_set, cls.lower, cls.upper) for cls in inst.classes]

    n = len(candidates)
    chosen: list[str] = []
    counts = [0] * len(classes)

    def lowers_ok_final() -> bool:
        return all(c >= lo for c, (_, lo, _) in zip(counts, classes))

    def is_blocking_complete(strict: bool) -> bool:
        size = len(chosen)
        if size < k or size > inst.capacity:
            return False
        if not lowers_ok_final():
            return False
        return size > k or strict

    def dfs(start: int, strict: bool) -> tuple[str, ...] | None:
        budget[0] -= 1
        if budget[0] < 0:
            raise SizeCapExceeded("blocking-group search", "states", budget[0])
        size = len(chosen)
        if size >= k and is_blocking_complete(strict):
            return tuple(chosen)
        if size == inst.capacity:
            return None
        for idx in range(start, n):
            a = candidates[idx]
            pos = size  # position this member takes, 0-based
            if pos < k and rank[a] > current_ranks[pos]:
                # positions 1..k must weakly improve; candidates come in
                # preference order, so later ones only rank worse
                break
            ok = True
            for ci, (members, _, up) in enumerate(classes):
                if a in members and counts[ci] + 1 > up:
                    ok = False
                    break
            if not ok:
                continue
            new_strict = strict
            if pos < k and rank[a] < current_ranks[pos] and matching.institute_of(a) != inst.id:
                new_strict = True
            chosen.append(a)
            for ci, (members, _, _) in enumerate(classes):
                if a in members:
                    counts[ci] += 1
            found = dfs(idx + 1, new_strict)
            chosen.pop()
            for ci, (members, _, _) in enumerate(classes):
                if a in members:
                    counts[ci] -= 1
            if found is not None:
                return found
        return None

    found = dfs(0, False)
    if found is None:
        return None
    return BlockingGroup(inst.id, found)


def enumerate_stable(
    instance: Instance,
    cap: int = DEFAULT_CAP,
) -> list[Matching]:
    """All stable matchings, in canonical order.

    Exhaustive: walks every assignment of applicants to acceptable institutes
    (or none), prunes on capacity and class upper bounds, checks lower bounds
    on completion and then the blocking-group condition. The product of
    per-applicant option counts must stay within `cap`.
    """
    space = 1
    for app in instance.applicants:
        space *= len(instance.acceptable_institutes[app.id]) + 1
        if space > cap:
            raise SizeCapExceeded("stable-matching enumeration", space, cap)

    inst_list = list(instance.institutes)
    inst_index = {inst.id: k for k, inst in enumerate(inst_list)}
    app_ids = [a.id for a in instance.applicants]
    options = [
        [inst_index[i] for i in instance.acceptable_institutes[a]] for a in app_ids
    ]
    capacities = [inst.capacity for inst in inst_list]
    # (class index per institute) -> (member set, lower, upper)
    classes: list[list[tuple[frozenset[str], int, int]]] = [
        [(c.member_set, c.lower, c.upper) for c in inst.classes] for inst in inst_list
    ]

    loads = [0] * len(inst_list)
    class_counts = [[0] * len(cs) for cs in classes]
    assignment: dict[str, str] = {}
    results: list[Matching] = []

    def feasible_lowers() -> bool:
        return all(
            count >= lo
            for per_inst, cs in zip(class_counts, classes)
            for count, (_, lo, _) in zip(per_inst, cs)
        )

    def rec(pos: int) -> None:
        if pos == len(app_ids):
            if feasible_lowers():
                m = Matching(dict(assignment))
                if find_blocking_group(instance, m, cap) is None:
                    results.append(m)
            return
        a = app_ids[pos]
        rec(pos + 1)  # unmatched
        for ii in options[pos]:
            if loads[ii] + 1 > capacities[ii]:
                continue
            touched = []
            ok = True
            for ci, (members, _, up) in enumerate(classes[ii]):
                if a in members:
                    if class_counts[ii][ci] + 1 > up:
                        ok = False
                        break
                    touched.append(ci)
            if not ok:
                continue
            loads[ii] += 1
            for ci in touched:
                class_counts[ii][ci] += 1
            assignment[a] = inst_list[ii].id
            rec(pos + 1)
            del assignment[a]
            loads[ii] -= 1
            for ci in touched:
                class_counts[ii][ci] -= 1

    rec(0)
    results.sort(key=lambda m: m.as_vector(instance))
    return results


@dataclass(frozen=True)
class RuralCheck:
    name: str
    passed: bool | None  # None = skipped
    detail: str = ""


@dataclass(frozen=True)
class RuralReport:
    checks: tuple[RuralCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.passed is not None)


def rural_report(instance: Instance, matchings: Sequence[Matching]) -> RuralReport:
    """Check the size/area invariance properties over a complete enumeration.

    For non-laminar instances only the cardinality and assigned-set checks
    run; the bottleneck-decomposition checks need the class tree and are
    reported as skipped.
    """
    checks: list[RuralCheck] = []
    if not matchings:
        return RuralReport((RuralCheck("nonempty", False, "no stable matchings"),))

    sizes = {m.size() for m in matchings}
    per_inst_ok = True
    detail = ""
    for inst in instance.institutes:
        counts = {len(m.members(inst.id)) for m in matchings}
        if len(counts) > 1:
            per_inst_ok = False
            detail = f"institute {inst.id!r} sizes {sorted(counts)}"
            break
    checks.append(
        RuralCheck(
            "equal cardinality",
            per_inst_ok and len(sizes) == 1,
            detail or (f"overall sizes {sorted(sizes)}" if len(sizes) > 1 else ""),
        )
    )

    assigned_sets = {frozenset(m.assignment) for m in matchings}
    checks.append(
        RuralCheck(
            "identical assigned applicants",
            len(assigned_sets) == 1,
            "" if len(assigned_sets) == 1 else f"{len(assigned_sets)} distinct sets",
        )
    )

    try:
        forest = preprocess(instance)
    except Exception as exc:  # non-laminar: tree checks cannot run
        checks.append(RuralCheck("decomposition class counts", None, str(exc)))
        checks.append(RuralCheck("fixed-class applicant sets", None, str(exc)))
        checks.append(RuralCheck("varying classes touch bottlenecks", None, str(exc)))
        return RuralReport(tuple(checks))

    decomposition_ok = True
    fixed_sets_ok = True
    varying_ok = True
    decomposition_detail = fixed_detail = varying_detail = ""
    for base in matchings:
        for inst in instance.institutes:
            tree = forest[inst.id]
            assigned = base.members(inst.id)
            bottleneck = {
                id(n): n
                for n in tree.nodes()
                if len(assigned & n.members) == n.upper
            }
            # N(B) u D partition of the list: walk down, stop at the first
            # bottleneck, else take maximal bottleneck-free subtrees into D.
            maximal_b: list = []
            d_classes: list = []

            def walk(node) -> None:
                if id(node) in bottleneck:
                    maximal_b.append(node)
                    return
                if not any(id(x) in bottleneck for x in _subtree(node)):
                    d_classes.append(node)
                    return
                for c in node.children:
                    walk(c)

            def _subtree(node):
                stack = [node]
                while stack:
                    x = stack.pop()
                    yield x
                    stack.extend(x.children)

            walk(tree.root)
            for node in maximal_b + d_classes:
                counts = {len(m.members(inst.id) & node.members) for m in matchings}
                if len(counts) > 1:
                    decomposition_ok = False
                    decomposition_detail = (
                        f"institute {inst.id!r} class {sorted(node.members)} "
                        f"counts {sorted(counts)}"
                    )
            for node in d_classes:
                groups = {frozenset(m.members(inst.id) & node.members) for m in matchings}
                if len(groups) > 1:
                    fixed_sets_ok = False
                    fixed_detail = (
                        f"institute {inst.id!r} class {sorted(node.members)}"
                    )
            # classes with varying assigned sets must compare with some maximal
            # bottleneck under containment
            maximal_sets = [n.members for n in maximal_b]
            for node in tree.nodes():
                groups = {frozenset(m.members(inst.id) & node.members) for m in matchings}
                if len(groups) > 1 and not any(
                    node.members <= b or b <= node.members for b in maximal_sets
                ):
                    varying_ok = False
                    varying_detail = (
                        f"institute {inst.id!r} class {sorted(node.members)}"
                    )

    checks.append(
        RuralCheck("decomposition class counts", decomposition_ok, decomposition_detail)
    )
    checks.append(RuralCheck("fixed-class applicant sets", fixed_sets_ok, fixed_detail))
    checks.append(
        RuralCheck("varying classes touch bottlenecks", varying_ok, varying_detail)
    )
    return RuralReport(tuple(checks))
