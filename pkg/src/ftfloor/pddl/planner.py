"""Grounding and breadth-first search over the STRIPS subset.

Plans are shortest in action count; among plans of equal length the one
whose action sequence is lexicographically smallest is returned.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .syntax import Atom, Domain, Problem, parse_domain, parse_problem


class SearchLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre_pos: frozenset
    pre_neg: frozenset
    add: frozenset
    delete: frozenset

    @property
    def text(self) -> str:
        return "(" + " ".join((self.name, *self.args)) + ")"

    def applicable(self, state: frozenset) -> bool:
        return self.pre_pos <= state and not (self.pre_neg & state)

    def apply(self, state: frozenset) -> frozenset:
        return (state - self.delete) | self.add


def _subst(atom: Atom, binding: dict) -> Atom:
    return (atom[0], *(binding.get(a, a) for a in atom[1:]))


def ground(domain: Domain, problem: Problem) -> list[GroundAction]:
    fluent = {a[0] for s in domain.actions for a in s.add + s.delete}
    init = frozenset(problem.init)
    out = []
    for schema in domain.actions:
        candidates = [
            sorted(o for o, t in problem.objects.items() if domain.is_subtype(t, typ)) for _, typ in schema.parameters
        ]
        names = [v for v, _ in schema.parameters]
        static_pos = [a for a in schema.pre_pos if a[0] not in fluent]
        static_neg = [a for a in schema.pre_neg if a[0] not in fluent]
        # check each static literal as soon as its last variable is bound
        ready_at: dict[int, list] = {}
        for atom, positive in [(a, True) for a in static_pos] + [(a, False) for a in static_neg]:
            idx = max((names.index(x) for x in atom[1:] if x in names), default=-1)
            ready_at.setdefault(idx, []).append((atom, positive))
        if any((_subst(a, {}) in init) != pos for a, pos in ready_at.get(-1, [])):
            continue

        def rec(i: int, binding: dict):
            if i == len(names):
                args = tuple(binding[n] for n in names)
                out.append(
                    GroundAction(
                        schema.name,
                        args,
                        frozenset(_subst(a, binding) for a in schema.pre_pos if a[0] in fluent),
                        frozenset(_subst(a, binding) for a in schema.pre_neg if a[0] in fluent),
                        frozenset(_subst(a, binding) for a in schema.add),
                        frozenset(_subst(a, binding) for a in schema.delete),
                    )
                )
                return
            for obj in candidates[i]:
                binding[names[i]] = obj
                if all((_subst(a, binding) in init) == pos for a, pos in ready_at.get(i, [])):
                    rec(i + 1, binding)
            binding.pop(names[i], None)

        rec(0, {})
    out.sort(key=lambda g: (g.name, g.args))
    return out


def goal_holds(goal: list[Atom], goal_vars: dict[str, str], state: frozenset, objects: dict, domain: Domain) -> bool:
    """Existential match of ``goal`` against ``state``."""

    def rec(i: int, binding: dict) -> bool:
        if i == len(goal):
            return True
        atom = goal[i]
        unbound = [a for a in atom[1:] if a.startswith("?") and a not in binding]
        if not unbound:
            return _subst(atom, binding) in state and rec(i + 1, binding)
        for fact in state:
            if fact[0] != atom[0] or len(fact) != len(atom):
                continue
            trial = dict(binding)
            ok = True
            for pat, val in zip(atom[1:], fact[1:]):
                if pat.startswith("?"):
                    if trial.setdefault(pat, val) != val or not domain.is_subtype(objects.get(val, ""), goal_vars[pat]):
                        ok = False
                        break
                elif pat != val:
                    ok = False
                    break
            if ok and rec(i + 1, trial):
                return True
        return False

    return rec(0, {})


def search(
    domain: Domain, problem: Problem, depth_bound: int, max_states: int = 500_000
) -> list[GroundAction] | None:
    actions = ground(domain, problem)
    goal_vars = dict(problem.goal_vars)
    start = frozenset(problem.init)

    def done(s):
        return goal_holds(problem.goal, goal_vars, s, problem.objects, domain)

    if done(start):
        return []
    parent: dict[frozenset, tuple[frozenset, GroundAction] | None] = {start: None}
    frontier = deque([(start, 0)])
    while frontier:
        state, depth = frontier.popleft()
        if depth >= depth_bound:
            continue
        for act in actions:
            if not act.applicable(state):
                continue
            nxt = act.apply(state)
            if nxt in parent:
                continue
            parent[nxt] = (state, act)
            if done(nxt):
                plan = []
                cur = nxt
                while parent[cur] is not None:
                    prev, a = parent[cur]
                    plan.append(a)
                    cur = prev
                return plan[::-1]
            if len(parent) > max_states:
                raise SearchLimitExceeded(f"more than {max_states} states explored")
            frontier.append((nxt, depth + 1))
    return None


def solve(domain_text: str, problem_text: str, depth_bound: int = 12, max_states: int = 500_000) -> list[str] | None:
    """Shortest plan as action texts, or None if none exists within ``depth_bound``."""
    domain = parse_domain(domain_text)
    problem = parse_problem(problem_text, domain)
    plan = search(domain, problem, depth_bound, max_states)
    return None if plan is None else [a.text for a in plan]


def simulate(domain_text: str, problem_text: str, plan: list[str]) -> tuple[bool, frozenset]:
    """Apply ``plan`` symbolically; returns (goal reached, final state)."""
    domain = parse_domain(domain_text)
    problem = parse_problem(problem_text, domain)
    index = {a.text: a for a in ground(domain, problem)}
    state = frozenset(problem.init)
    for step in plan:
        act = index.get(step)
        if act is None or not act.applicable(state):
            return False, state
        state = act.apply(state)
    return goal_holds(problem.goal, dict(problem.goal_vars), state, problem.objects, domain), state
