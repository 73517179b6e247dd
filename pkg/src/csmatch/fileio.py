"""JSON document formats: instances, fractional points, matchings, two-sided quota markets.

Rational values in point files are given as strings ("1/5" or "0.2") or JSON
integers and are parsed exactly; JSON floats are intercepted before binary
conversion so decimal literals stay exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .errors import ParseError
from .model import Applicant, Instance, Institute, RawClass, validated
from .reductions import M2MEntity, ManyToManyInstance
from .stability import Matching


def _expect(cond: bool, where: str, message: str) -> None:
    if not cond:
        raise ParseError(f"{where}: {message}")


def _load(path: str) -> Any:
    try:
        with open(path) as handle:
            return json.load(handle, parse_float=Fraction)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def instance_from_dict(doc: Any, where: str = "instance") -> Instance:
    _expect(isinstance(doc, dict), where, "top level must be an object")
    _expect("institutes" in doc, where, "missing key 'institutes'")
    _expect("applicants" in doc, where, "missing key 'applicants'")
    institutes = []
    for k, entry in enumerate(doc["institutes"]):
        ctx = f"{where}.institutes[{k}]"
        _expect(isinstance(entry, dict), ctx, "must be an object")
        for req in ("id", "capacity", "preferences"):
            _expect(req in entry, ctx, f"missing key {req!r}")
        _expect(isinstance(entry["id"], str), ctx, "'id' must be a string")
        _expect(
            isinstance(entry["capacity"], int) and not isinstance(entry["capacity"], bool),
            ctx,
            "'capacity' must be an integer",
        )
        prefs = entry["preferences"]
        _expect(
            isinstance(prefs, list) and all(isinstance(p, str) for p in prefs),
            ctx,
            "'preferences' must be a list of ids",
        )
        classes = []
        for j, cls in enumerate(entry.get("classes", [])):
            cctx = f"{ctx}.classes[{j}]"
            _expect(isinstance(cls, dict), cctx, "must be an object")
            _expect("members" in cls and "upper" in cls, cctx, "needs 'members' and 'upper'")
            members = cls["members"]
            _expect(
                isinstance(members, list) and all(isinstance(m, str) for m in members),
                cctx,
                "'members' must be a list of ids",
            )
            upper = cls["upper"]
            lower = cls.get("lower", 0)
            _expect(isinstance(upper, int) and not isinstance(upper, bool), cctx, "'upper' must be an integer")
            _expect(isinstance(lower, int) and not isinstance(lower, bool), cctx, "'lower' must be an integer")
            classes.append(RawClass(tuple(members), upper, lower))
        institutes.append(
            Institute(entry["id"], entry["capacity"], tuple(prefs), tuple(classes))
        )
    applicants = []
    for k, entry in enumerate(doc["applicants"]):
        ctx = f"{where}.applicants[{k}]"
        _expect(isinstance(entry, dict), ctx, "must be an object")
        for req in ("id", "preferences"):
            _expect(req in entry, ctx, f"missing key {req!r}")
        prefs = entry["preferences"]
        _expect(
            isinstance(prefs, list) and all(isinstance(p, str) for p in prefs),
            ctx,
            "'preferences' must be a list of ids",
        )
        applicants.append(Applicant(entry["id"], tuple(prefs)))
    return Instance(tuple(institutes), tuple(applicants))


def parse_instance(path: str) -> Instance:
    """Parse and validate an instance file; raises ParseError / ValidationError."""
    return validated(instance_from_dict(_load(path), path))


def instance_to_dict(instance: Instance) -> dict:
    return {
        "institutes": [
            {
                "id": inst.id,
                "capacity": inst.capacity,
                "preferences": list(inst.preference),
                "classes": [
                    {"members": list(c.members), "upper": c.upper, "lower": c.lower}
                    for c in inst.classes
                ],
            }
            for inst in instance.institutes
        ],
        "applicants": [
            {"id": app.id, "preferences": list(app.preference)}
            for app in instance.applicants
        ],
    }


def serialize_instance(instance: Instance, path: str) -> None:
    with open(path, "w") as handle:
        json.dump(instance_to_dict(instance), handle, indent=2)
        handle.write("\n")


def parse_rational(value: Any, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ParseError(f"{where}: booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{where}: bad rational literal {value!r}") from exc
    raise ParseError(f"{where}: cannot read a rational from {value!r}")


def parse_point(path: str, instance: Instance) -> dict[tuple[str, str], Fraction]:
    """Parse a fractional point; entries must name acceptable pairs."""
    doc = _load(path)
    _expect(isinstance(doc, list), path, "top level must be a list of entries")
    values: dict[tuple[str, str], Fraction] = {}
    for k, entry in enumerate(doc):
        ctx = f"{path}[{k}]"
        _expect(isinstance(entry, dict), ctx, "must be an object")
        for req in ("institute", "applicant", "value"):
            _expect(req in entry, ctx, f"missing key {req!r}")
        pair = (entry["institute"], entry["applicant"])
        _expect(
            instance.is_acceptable(*pair),
            ctx,
            f"pair {pair} is not acceptable in the instance",
        )
        _expect(pair not in values, ctx, f"duplicate entry for pair {pair}")
        values[pair] = parse_rational(entry["value"], ctx)
    return values


def serialize_point(values: dict[tuple[str, str], Fraction], path: str) -> None:
    doc = [
        {"institute": i, "applicant": a, "value": str(v)}
        for (i, a), v in values.items()
    ]
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2)
        handle.write("\n")


def parse_matching(path: str, instance: Instance) -> Matching:
    doc = _load(path)
    _expect(isinstance(doc, dict), path, "top level must be an object applicant -> institute")
    for a, i in doc.items():
        _expect(isinstance(i, str), f"{path}[{a!r}]", "value must be an institute id")
        _expect(
            instance.is_acceptable(i, a),
            f"{path}[{a!r}]",
            f"pair ({i!r}, {a!r}) is not acceptable",
        )
    return Matching(dict(doc))


def parse_matchings(path: str, instance: Instance) -> list[Matching]:
    doc = _load(path)
    _expect(isinstance(doc, list), path, "top level must be a list of matchings")
    out = []
    for k, entry in enumerate(doc):
        ctx = f"{path}[{k}]"
        _expect(isinstance(entry, dict), ctx, "each matching must be an object")
        for a, i in entry.items():
            _expect(
                instance.is_acceptable(i, a),
                ctx,
                f"pair ({i!r}, {a!r}) is not acceptable",
            )
        out.append(Matching(dict(entry)))
    return out


def matching_to_dict(matching: Matching) -> dict[str, str]:
    return dict(sorted(matching.assignment.items()))


def parse_m2m(path: str) -> ManyToManyInstance:
    doc = _load(path)
    _expect(isinstance(doc, dict), path, "top level must be an object")
    sides = {}
    for side in ("institutes", "applicants"):
        _expect(side in doc, path, f"missing key {side!r}")
        entities = []
        for k, entry in enumerate(doc[side]):
            ctx = f"{path}.{side}[{k}]"
            _expect(isinstance(entry, dict), ctx, "must be an object")
            for req in ("id", "quota", "preferences"):
                _expect(req in entry, ctx, f"missing key {req!r}")
            entities.append(
                M2MEntity(entry["id"], entry["quota"], tuple(entry["preferences"]))
            )
        sides[side] = tuple(entities)
    return ManyToManyInstance(sides["institutes"], sides["applicants"])


def parse_sat_formula(path: str) -> list[tuple[str, str, str]]:
    """One clause per line: three variable names separated by whitespace.

    Blank lines and '#' comments are skipped.
    """
    clauses = []
    try:
        with open(path) as handle:
            for lineno, line in enumerate(handle, 1):
                body = line.split("#", 1)[0].strip()
                if not body:
                    continue
                names = body.split()
                if len(names) != 3:
                    raise ParseError(
                        f"{path}:{lineno}: expected three variables, got {len(names)}"
                    )
                clauses.append((names[0], names[1], names[2]))
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return clauses
