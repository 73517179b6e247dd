"""Instance data model, validation, classification preprocessing and order types.

An instance pairs institutes (capacity, strict preference list, classified
quota constraints) with applicants (strict preference list). A pair (i, a) is
acceptable exactly when each side lists the other. Classifications are
preprocessed into one rooted tree per institute: a synthetic root carries the
capacity, synthetic singleton leaves carry one applicant each, declared
classes sit in between, and lower bounds are lifted so every node's lower
bound is at least the sum of its children's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from .errors import NotLaminar, ValidationError


@dataclass(frozen=True)
class RawClass:
    """A declared class: member set with an upper and lower hiring bound."""

    members: tuple[str, ...]
    upper: int
    lower: int = 0

    @cached_property
    def member_set(self) -> frozenset[str]:
        return frozenset(self.members)


@dataclass(frozen=True)
class Institute:
    id: str
    capacity: int
    preference: tuple[str, ...]
    classes: tuple[RawClass, ...] = ()

    @cached_property
    def rank(self) -> dict[str, int]:
        """Rank of each listed applicant; 0 is most preferred."""
        return {a: r for r, a in enumerate(self.preference)}


@dataclass(frozen=True)
class Applicant:
    id: str
    preference: tuple[str, ...]

    @cached_property
    def rank(self) -> dict[str, int]:
        return {i: r for r, i in enumerate(self.preference)}


@dataclass(frozen=True)
class Instance:
    institutes: tuple[Institute, ...]
    applicants: tuple[Applicant, ...]

    @cached_property
    def institute_by_id(self) -> dict[str, Institute]:
        return {i.id: i for i in self.institutes}

    @cached_property
    def applicant_by_id(self) -> dict[str, Applicant]:
        return {a.id: a for a in self.applicants}

    @cached_property
    def acceptable_pairs(self) -> frozenset[tuple[str, str]]:
        """(institute id, applicant id) pairs listed by both sides."""
        pairs = set()
        for inst in self.institutes:
            for a in inst.preference:
                app = self.applicant_by_id.get(a)
                if app is not None and inst.id in app.rank:
                    pairs.add((inst.id, a))
        return frozenset(pairs)

    def is_acceptable(self, institute: str, applicant: str) -> bool:
        return (institute, applicant) in self.acceptable_pairs

    @cached_property
    def acceptable_applicants(self) -> dict[str, tuple[str, ...]]:
        """Per institute, its listed applicants that list it back, in preference order."""
        return {
            inst.id: tuple(
                a for a in inst.preference if (inst.id, a) in self.acceptable_pairs
            )
            for inst in self.institutes
        }

    @cached_property
    def acceptable_institutes(self) -> dict[str, tuple[str, ...]]:
        """Per applicant, the mutual institutes in the applicant's preference order."""
        return {
            app.id: tuple(
                i for i in app.preference if (i, app.id) in self.acceptable_pairs
            )
            for app in self.applicants
        }

    @cached_property
    def has_lower_bounds(self) -> bool:
        return any(
            c.lower > 0 for inst in self.institutes for c in inst.classes
        )

    @cached_property
    def total_preference_length(self) -> int:
        return sum(len(i.preference) for i in self.institutes) + sum(
            len(a.preference) for a in self.applicants
        )


def validate(instance: Instance) -> list[str]:
    """Collect every violation of the instance invariants.

    Returns an empty list for a valid instance. Violations name the offending
    entity; nothing fails fast, so one pass reports all problems.
    """
    problems: list[str] = []
    seen_inst: set[str] = set()
    for inst in instance.institutes:
        if inst.id in seen_inst:
            problems.append(f"institute {inst.id!r}: duplicate id")
        seen_inst.add(inst.id)
    seen_app: set[str] = set()
    for app in instance.applicants:
        if app.id in seen_app:
            problems.append(f"applicant {app.id!r}: duplicate id")
        seen_app.add(app.id)

    app_ids = set(instance.applicant_by_id)
    inst_ids = set(instance.institute_by_id)

    for inst in instance.institutes:
        if inst.capacity < 1:
            problems.append(f"institute {inst.id!r}: capacity {inst.capacity} < 1")
        if len(set(inst.preference)) != len(inst.preference):
            problems.append(f"institute {inst.id!r}: preference list has duplicates")
        for a in inst.preference:
            if a not in app_ids:
                problems.append(
                    f"institute {inst.id!r}: preference lists unknown applicant {a!r}"
                )
            elif inst.id not in instance.applicant_by_id[a].rank:
                problems.append(
                    f"institute {inst.id!r}: non-mutual pair with applicant {a!r}"
                )
        listed = set(inst.preference)
        for k, cls in enumerate(inst.classes):
            off = sorted(cls.member_set - listed)
            if off:
                problems.append(
                    f"institute {inst.id!r}: class #{k} members {off} not on its list"
                )
            if len(set(cls.members)) != len(cls.members):
                problems.append(f"institute {inst.id!r}: class #{k} repeats members")
            if not cls.members:
                problems.append(f"institute {inst.id!r}: class #{k} is empty")
            if cls.upper < 1:
                problems.append(
                    f"institute {inst.id!r}: class #{k} upper bound {cls.upper} < 1"
                )
            if cls.lower < 0:
                problems.append(
                    f"institute {inst.id!r}: class #{k} lower bound {cls.lower} < 0"
                )
            if cls.lower > cls.upper:
                problems.append(
                    f"institute {inst.id!r}: class #{k} lower {cls.lower} > upper {cls.upper}"
                )

    for app in instance.applicants:
        if len(set(app.preference)) != len(app.preference):
            problems.append(f"applicant {app.id!r}: preference list has duplicates")
        for i in app.preference:
            if i not in inst_ids:
                problems.append(
                    f"applicant {app.id!r}: preference lists unknown institute {i!r}"
                )
            elif app.id not in instance.institute_by_id[i].rank:
                problems.append(
                    f"applicant {app.id!r}: non-mutual pair with institute {i!r}"
                )
    return problems


def validated(instance: Instance) -> Instance:
    """Return the instance unchanged, or raise ValidationError with all violations."""
    problems = validate(instance)
    if problems:
        raise ValidationError(problems)
    return instance


class ClassNode:
    """One class in a preprocessed tree. Compared by identity."""

    __slots__ = ("members", "upper", "lower", "children", "parent", "synthetic")

    def __init__(
        self,
        members: frozenset[str],
        upper: int,
        lower: int,
        *,
        synthetic: bool = False,
    ):
        self.members = members
        self.upper = upper
        self.lower = lower
        self.children: list[ClassNode] = []
        self.parent: ClassNode | None = None
        self.synthetic = synthetic

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"ClassNode({sorted(self.members)}, upper={self.upper}, lower={self.lower})"
        )


@dataclass
class ClassTree:
    """Preprocessed classification of one institute."""

    institute: str
    root: ClassNode
    paths: dict[str, tuple[ClassNode, ...]]  # applicant -> leaf-to-root path

    def nodes(self) -> Iterator[ClassNode]:
        """All nodes, parents before children, children in preference order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def label(self, node: ClassNode, institute: Institute) -> tuple[str, ...]:
        """Stable label: members in the institute's preference order."""
        return tuple(sorted(node.members, key=institute.rank.__getitem__))


ClassForest = dict[str, ClassTree]


def _check_laminar(institute: Institute, families: list[frozenset[str]]) -> None:
    for j in range(len(families)):
        for k in range(j + 1, len(families)):
            a, b = families[j], families[k]
            common = a & b
            if common and not (a <= b or b <= a):
                raise NotLaminar(institute.id, a, b)


def _dedupe_classes(classes: Iterable[RawClass]) -> dict[frozenset[str], tuple[int, int]]:
    """Merge identical member sets: min upper, max lower."""
    merged: dict[frozenset[str], tuple[int, int]] = {}
    for cls in classes:
        key = cls.member_set
        if key in merged:
            up, low = merged[key]
            merged[key] = (min(up, cls.upper), max(low, cls.lower))
        else:
            merged[key] = (cls.upper, cls.lower)
    return merged


def preprocess_institute(institute: Institute) -> ClassTree:
    """Build the rooted class tree for one institute.

    Raises NotLaminar if the declared classification is not laminar. The root
    absorbs a declared full-list class only when that class's upper bound is
    at least the capacity, and a leaf absorbs a declared singleton only when
    its lower bound is zero; otherwise the declared class stays as an internal
    node so the root/leaf invariants hold and preprocessing is idempotent.
    """
    listed = frozenset(institute.preference)
    merged = _dedupe_classes(institute.classes)
    _check_laminar(institute, list(merged))

    root = ClassNode(listed, institute.capacity, 0, synthetic=True)
    if listed in merged:
        up, low = merged.pop(listed)
        if up >= institute.capacity:
            root.lower = low
        else:
            inner = ClassNode(listed, up, low)
            inner.parent = root
            root.children.append(inner)

    # Insert declared classes in decreasing size; laminarity makes the parent
    # (smallest strict superset inserted so far) unique.
    best_rank = lambda m: min(institute.rank[x] for x in m)
    for members in sorted(merged, key=lambda m: (-len(m), best_rank(m))):
        up, low = merged[members]
        node = ClassNode(members, up, low)
        parent = root
        while True:
            nxt = next(
                (c for c in parent.children if members <= c.members), None
            )
            if nxt is None:
                break
            parent = nxt
        node.parent = parent
        parent.children.append(node)

    # Singleton leaves, one per listed applicant; a declared singleton class
    # with lower 0 collapses onto the leaf (upper is then forced to 1).
    paths: dict[str, tuple[ClassNode, ...]] = {}
    for a in institute.preference:
        parent = root
        while True:
            nxt = next((c for c in parent.children if a in c.members), None)
            if nxt is None:
                break
            parent = nxt
        if parent.members == frozenset((a,)) and parent.lower == 0 and parent.is_leaf:
            parent.upper = 1
            parent.synthetic = True
            leaf = parent
        else:
            leaf = ClassNode(frozenset((a,)), 1, 0, synthetic=True)
            leaf.parent = parent
            parent.children.append(leaf)
        path = [leaf]
        node = leaf.parent
        while node is not None:
            path.append(node)
            node = node.parent
        paths[a] = tuple(path)

    # Children in preference order of their best member, for deterministic walks.
    def _order(node: ClassNode) -> None:
        node.children.sort(key=lambda c: min(institute.rank[m] for m in c.members))
        for c in node.children:
            _order(c)

    if institute.preference:
        _order(root)

    # Lift lower bounds bottom-up: a parent must admit its children's minima.
    def _lift(node: ClassNode) -> None:
        for c in node.children:
            _lift(c)
        if node.children:
            node.lower = max(node.lower, sum(c.lower for c in node.children))

    _lift(root)
    return ClassTree(institute.id, root, paths)


def preprocess(instance: Instance) -> ClassForest:
    """Preprocess every institute's classification; raises NotLaminar on failure."""
    return {inst.id: preprocess_institute(inst) for inst in instance.institutes}


def serialize_tree_classes(tree: ClassTree, institute: Institute) -> tuple[RawClass, ...]:
    """Re-serialize every tree node as a raw class (used by the idempotence check)."""
    out = []
    for node in tree.nodes():
        out.append(
            RawClass(tree.label(node, institute), node.upper, node.lower)
        )
    return tuple(out)


@dataclass(frozen=True)
class InclusionPoset:
    """All non-empty pairwise intersections of declared classes, under strict containment."""

    institute: str
    elements: tuple[frozenset[str], ...]

    def successors(self, element: frozenset[str]) -> tuple[frozenset[str], ...]:
        """Elements strictly containing the given one."""
        return tuple(e for e in self.elements if element < e)


@dataclass(frozen=True)
class DownwardForest:
    """Every element's strict supersets form a chain."""


@dataclass(frozen=True)
class HasV:
    """Witness of a V: an element with two incomparable strict supersets."""

    element: frozenset[str]
    above: tuple[frozenset[str], frozenset[str]]


def inclusion_poset(institute: Institute) -> InclusionPoset:
    """Pairwise intersections (including self-intersections), empty ones dropped.

    Works on non-laminar classifications; element order is deterministic in
    the declaration order of the generating class pairs.
    """
    sets = [c.member_set for c in institute.classes]
    elements: list[frozenset[str]] = []
    seen: set[frozenset[str]] = set()
    for j in range(len(sets)):
        for k in range(j, len(sets)):
            common = sets[j] & sets[k]
            if common and common not in seen:
                seen.add(common)
                elements.append(common)
    return InclusionPoset(institute.id, tuple(elements))


def classify_order_type(poset: InclusionPoset) -> DownwardForest | HasV:
    """Decide whether the poset is a downward forest, else return a V witness."""
    for element in poset.elements:
        sups = poset.successors(element)
        for j in range(len(sups)):
            for k in range(j + 1, len(sups)):
                a, b = sups[j], sups[k]
                if not (a <= b or b <= a):
                    return HasV(element, (a, b))
    return DownwardForest()


def absorb(classes: Iterable[frozenset[str]]) -> list[frozenset[str]]:
    """Keep the maximal classes: drop any class strictly contained in another.

    Equal member sets are collapsed to one representative first, so the result
    never contains a containment-related pair and its union of members equals
    the input's.
    """
    unique: list[frozenset[str]] = []
    seen: set[frozenset[str]] = set()
    for c in classes:
        c = frozenset(c)
        if c not in seen:
            seen.add(c)
            unique.append(c)
    return [
        c
        for c in unique
        if not any(c < other for other in unique)
    ]
