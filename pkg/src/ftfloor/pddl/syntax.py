"""Reader and checker for the PDDL subset the exporters emit.

Supported: ``:strips :typing :negative-preconditions
:existential-preconditions``. Preconditions are conjunctions of literals,
effects are conjunctions of literals, goals are conjunctions of atoms
optionally wrapped in one ``exists``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

REQUIREMENTS = (":strips", ":typing", ":negative-preconditions", ":existential-preconditions")

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


class PddlSyntaxError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    lines = [ln.split(";", 1)[0] for ln in text.splitlines()]
    return _TOKEN.findall("\n".join(lines))


def read_sexp(text: str):
    tokens = tokenize(text)
    if not tokens:
        raise PddlSyntaxError("empty document")
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise PddlSyntaxError("unexpected end of input")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            out = []
            while True:
                if pos >= len(tokens):
                    raise PddlSyntaxError("unbalanced parentheses")
                if tokens[pos] == ")":
                    pos += 1
                    return out
                out.append(read())
        if tok == ")":
            raise PddlSyntaxError("unexpected ')'")
        if tok != tok.lower():
            raise PddlSyntaxError(f"symbols must be lowercase: {tok!r}")
        return tok

    expr = read()
    if pos != len(tokens):
        raise PddlSyntaxError("trailing tokens after top-level form")
    return expr


def _typed_list(items: list, what: str) -> list[tuple[str, str]]:
    """Parse ``a b - t c - u`` into [(a, t), (b, t), (c, u)]."""
    out, pending = [], []
    i = 0
    while i < len(items):
        tok = items[i]
        if not isinstance(tok, str):
            raise PddlSyntaxError(f"nested list in {what}")
        if tok == "-":
            if i + 1 >= len(items) or not pending:
                raise PddlSyntaxError(f"dangling '-' in {what}")
            out += [(p, items[i + 1]) for p in pending]
            pending = []
            i += 2
            continue
        pending.append(tok)
        i += 1
    out += [(p, "object") for p in pending]
    return out


Atom = tuple  # (predicate, arg, ...)


@dataclass
class Schema:
    name: str
    parameters: list[tuple[str, str]]
    pre_pos: list[Atom]
    pre_neg: list[Atom]
    add: list[Atom]
    delete: list[Atom]


@dataclass
class Domain:
    name: str
    requirements: list[str]
    types: dict[str, str]  # type -> parent
    predicates: dict[str, list[tuple[str, str]]]
    actions: list[Schema] = field(default_factory=list)

    def is_subtype(self, t: str, ancestor: str) -> bool:
        while True:
            if t == ancestor:
                return True
            if t not in self.types or t == "object":
                return ancestor == "object"
            t = self.types[t]


@dataclass
class Problem:
    name: str
    domain: str
    objects: dict[str, str]
    init: set
    goal: list[Atom]
    goal_vars: list[tuple[str, str]]


def _atom(expr, where: str) -> Atom:
    if not isinstance(expr, list) or not expr or not all(isinstance(x, str) for x in expr):
        raise PddlSyntaxError(f"malformed atom in {where}: {expr!r}")
    return tuple(expr)


def _literals(expr, where: str, allow_neg: bool) -> tuple[list[Atom], list[Atom]]:
    if expr == []:
        return [], []
    parts = expr[1:] if isinstance(expr, list) and expr and expr[0] == "and" else [expr]
    pos, neg = [], []
    for p in parts:
        if isinstance(p, list) and p and p[0] == "not":
            if not allow_neg or len(p) != 2:
                raise PddlSyntaxError(f"negation not allowed here in {where}")
            neg.append(_atom(p[1], where))
        else:
            pos.append(_atom(p, where))
    return pos, neg


def _check_atom(atom: Atom, predicates, scope: dict[str, str] | None, where: str):
    name, args = atom[0], atom[1:]
    if name not in predicates:
        raise PddlSyntaxError(f"undeclared predicate {name!r} in {where}")
    if len(args) != len(predicates[name]):
        raise PddlSyntaxError(f"arity mismatch for {name!r} in {where}")
    for a in args:
        if a.startswith("?") and (scope is None or a not in scope):
            raise PddlSyntaxError(f"unbound variable {a} in {where}")


def parse_domain(text: str) -> Domain:
    expr = read_sexp(text)
    if not (isinstance(expr, list) and len(expr) >= 2 and expr[0] == "define"):
        raise PddlSyntaxError("domain must start with (define ...)")
    head = expr[1]
    if not (isinstance(head, list) and len(head) == 2 and head[0] == "domain"):
        raise PddlSyntaxError("expected (domain <name>)")
    dom = Domain(head[1], [], {}, {})
    for section in expr[2:]:
        if not isinstance(section, list) or not section:
            raise PddlSyntaxError(f"malformed section {section!r}")
        key = section[0]
        if key == ":requirements":
            for r in section[1:]:
                if r not in REQUIREMENTS:
                    raise PddlSyntaxError(f"unsupported requirement {r}")
            dom.requirements = list(section[1:])
        elif key == ":types":
            for t, parent in _typed_list(section[1:], ":types"):
                dom.types[t] = parent
        elif key == ":predicates":
            for p in section[1:]:
                if not isinstance(p, list) or not p:
                    raise PddlSyntaxError(f"malformed predicate {p!r}")
                dom.predicates[p[0]] = _typed_list(p[1:], f"predicate {p[0]}")
        elif key == ":action":
            dom.actions.append(_parse_action(section, dom))
        else:
            raise PddlSyntaxError(f"unknown domain section {key}")
    declared = set(dom.types) | {"object"}
    for parent in dom.types.values():
        if parent not in declared:
            raise PddlSyntaxError(f"undeclared parent type {parent}")
    for name, params in dom.predicates.items():
        for _, t in params:
            if t not in declared:
                raise PddlSyntaxError(f"undeclared type {t} in predicate {name}")
    for a in dom.actions:
        scope = dict(a.parameters)
        for _, t in a.parameters:
            if t not in declared:
                raise PddlSyntaxError(f"undeclared type {t} in action {a.name}")
        for atom in a.pre_pos + a.pre_neg + a.add + a.delete:
            _check_atom(atom, dom.predicates, scope, f"action {a.name}")
    if (any(a.pre_neg for a in dom.actions)) and ":negative-preconditions" not in dom.requirements:
        raise PddlSyntaxError("negative preconditions used but not declared")
    return dom


def _parse_action(section: list, dom: Domain) -> Schema:
    if len(section) < 2 or not isinstance(section[1], str):
        raise PddlSyntaxError("action needs a name")
    name = section[1]
    fields = dict(zip(section[2::2], section[3::2]))
    unknown = set(fields) - {":parameters", ":precondition", ":effect"}
    if unknown or len(section[2:]) % 2:
        raise PddlSyntaxError(f"malformed action {name}")
    params = _typed_list(fields.get(":parameters", []), f"action {name}")
    pre_pos, pre_neg = _literals(fields.get(":precondition", []), f"action {name}", allow_neg=True)
    add, delete = _literals(fields.get(":effect", []), f"action {name}", allow_neg=True)
    return Schema(name, params, pre_pos, pre_neg, add, delete)


def parse_problem(text: str, domain: Domain | None = None) -> Problem:
    expr = read_sexp(text)
    if not (isinstance(expr, list) and len(expr) >= 2 and expr[0] == "define"):
        raise PddlSyntaxError("problem must start with (define ...)")
    head = expr[1]
    if not (isinstance(head, list) and len(head) == 2 and head[0] == "problem"):
        raise PddlSyntaxError("expected (problem <name>)")
    prob = Problem(head[1], "", {}, set(), [], [])
    seen_goal = False
    for section in expr[2:]:
        if not isinstance(section, list) or not section:
            raise PddlSyntaxError(f"malformed section {section!r}")
        key = section[0]
        if key == ":domain":
            prob.domain = section[1]
        elif key == ":objects":
            prob.objects.update(_typed_list(section[1:], ":objects"))
        elif key == ":init":
            for a in section[1:]:
                atom = _atom(a, ":init")
                if any(x.startswith("?") for x in atom[1:]):
                    raise PddlSyntaxError("variables not allowed in :init")
                prob.init.add(atom)
        elif key == ":goal":
            seen_goal = True
            prob.goal, prob.goal_vars = _parse_goal(section[1] if len(section) == 2 else None)
        else:
            raise PddlSyntaxError(f"unknown problem section {key}")
    if not seen_goal or not prob.goal:
        raise PddlSyntaxError("problem has no goal")
    if domain is not None:
        if prob.domain != domain.name:
            raise PddlSyntaxError(f"problem is for domain {prob.domain!r}, not {domain.name!r}")
        for obj, t in prob.objects.items():
            if t not in domain.types and t != "object":
                raise PddlSyntaxError(f"object {obj} has undeclared type {t}")
        scope = dict(prob.goal_vars)
        for atom in prob.init:
            _check_atom(atom, domain.predicates, None, ":init")
            _check_objects(atom, prob.objects, ":init")
        for atom in prob.goal:
            _check_atom(atom, domain.predicates, scope, ":goal")
            _check_objects(atom, prob.objects, ":goal")
    return prob


def _check_objects(atom, objects, where):
    for a in atom[1:]:
        if not a.startswith("?") and a not in objects:
            raise PddlSyntaxError(f"unknown object {a} in {where}")


def _parse_goal(expr):
    if expr is None:
        raise PddlSyntaxError("malformed :goal")
    goal_vars = []
    atoms = []

    def walk(e, inside_exists):
        if isinstance(e, list) and e and e[0] == "and":
            for x in e[1:]:
                walk(x, inside_exists)
        elif isinstance(e, list) and e and e[0] == "exists":
            if inside_exists or len(e) != 3 or not isinstance(e[1], list):
                raise PddlSyntaxError("malformed or nested exists in goal")
            goal_vars.extend(_typed_list(e[1], "exists"))
            walk(e[2], True)
        else:
            atom = _atom(e, ":goal")
            if not inside_exists and any(x.startswith("?") for x in atom[1:]):
                raise PddlSyntaxError("free variable in goal")
            atoms.append(atom)

    walk(expr, False)
    return atoms, goal_vars


def check_grammar(text: str) -> bool:
    """True if ``text`` is a domain or a problem in the supported subset."""
    expr = read_sexp(text)
    if isinstance(expr, list) and len(expr) >= 2 and isinstance(expr[1], list) and expr[1][:1] == ["domain"]:
        parse_domain(text)
    else:
        parse_problem(text)
    return True


def atom_text(atom: Atom) -> str:
    return "(" + " ".join(atom) + ")"
