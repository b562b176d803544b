"""Brute-force reference implementations used as test oracles.

Everything here is written directly from the definitions, with no caching,
pruning or search: runs are every sequence of choices, knowledge and belief
scan the whole run list, and close sets are filtered from the universe.
"""
from __future__ import annotations

import itertools

from hypothesis import strategies as st

from cbbcheck.logic import (
    And,
    Always,
    Believe,
    Const,
    Counterfactual,
    DoAtom,
    Eventually,
    Implies,
    Know,
    Last,
    Next,
    Not,
    Or,
    Prop,
)
from cbbcheck.model import Run

HORIZON = "horizon"


def brute_runs(ctx, choose):
    """Every admissible run where each agent's action at ``g`` is in ``choose(agent, local)``."""
    out = set()
    T = ctx.horizon

    def extend(states):
        if len(states) == T + 1:
            if ctx.admissible is None or ctx.admissible(states):
                out.add(Run(tuple(states)))
            return
        g = states[-1]
        per_agent = [sorted(choose(a, g.local(a))) for a in ctx.agents]
        for acts in itertools.product(*per_agent):
            for ea in ctx.env_protocol(g.env):
                extend(states + [ctx.transition(ea, acts, g)])

    for g0 in ctx.initial_states:
        extend([g0])
    return out


def protocol_runs(ctx, protocol):
    return brute_runs(ctx, protocol.actions)


def universe(ctx):
    return brute_runs(ctx, lambda a, loc: ctx.action_sets[a])


def deviation_count(run, protocol, ctx):
    n = 0
    for m in range(len(run) - 1):
        for a in ctx.agents:
            if run[m + 1].env.last.action(a) not in protocol.actions(a, run[m].local(a)):
                n += 1
    return n


class Oracle:
    """Direct semantics over explicit run lists.

    ``knowledge_runs`` are the runs knowledge ranges over, ``runs`` the
    universe belief and counterfactuals range over.  ``saturate`` caps the
    deviation count (1 gives the characteristic ranking).
    """

    def __init__(self, ctx, protocol, interp, runs, knowledge_runs=None, saturate=1):
        self.ctx = ctx
        self.protocol = protocol
        self.interp = interp
        self.runs = list(runs)
        self.knowledge_runs = self.runs if knowledge_runs is None else list(knowledge_runs)
        self.saturate = saturate

    def rank(self, run):
        d = deviation_count(run, self.protocol, self.ctx)
        return d if self.saturate is None else min(d, self.saturate)

    def same_local(self, runs, agent, local):
        return [(r, k) for r in runs for k in range(len(r)) if r[k].local(agent) == local]

    def close(self, agent, action, run, m):
        if run[m + 1].env.last.action(agent) == action:
            return [(run, m)]
        out = []
        for r in self.runs:
            if r.states[: m + 1] != run.states[: m + 1]:
                continue
            if r[m + 1].env.last.action(agent) != action:
                continue
            follows = all(
                r[k + 1].env.last.action(a) in self.protocol.actions(a, r[k].local(a))
                for k in range(m, self.ctx.horizon)
                for a in self.ctx.agents
                if not (k == m and a == agent)
            )
            if follows:
                out.append((r, m))
        return out

    def holds(self, phi, run, m):
        """True/False, or raises ``HorizonReached`` where the formula needs a later state."""
        T = self.ctx.horizon
        if isinstance(phi, Const):
            return phi.value
        if isinstance(phi, Prop):
            return self.interp.holds(phi.name, run[m])
        if isinstance(phi, Not):
            return not self.holds(phi.sub, run, m)
        if isinstance(phi, And):
            a = self.holds(phi.left, run, m)
            b = self.holds(phi.right, run, m)
            return a and b
        if isinstance(phi, Or):
            a = self.holds(phi.left, run, m)
            b = self.holds(phi.right, run, m)
            return a or b
        if isinstance(phi, Implies):
            a = self.holds(phi.left, run, m)
            b = self.holds(phi.right, run, m)
            return (not a) or b
        if isinstance(phi, Next):
            if m >= T:
                raise HorizonReached
            return self.holds(phi.sub, run, m + 1)
        if isinstance(phi, Eventually):
            vals = [self.holds(phi.sub, run, k) for k in range(m, T + 1)]
            return any(vals)
        if isinstance(phi, Always):
            vals = [self.holds(phi.sub, run, k) for k in range(m, T + 1)]
            return all(vals)
        if isinstance(phi, Last):
            last = run[m].env.last
            return last is not None and last.action(phi.agent) == phi.action
        if isinstance(phi, DoAtom):
            if m >= T:
                raise HorizonReached
            return run[m + 1].env.last.action(phi.agent) == phi.action
        if isinstance(phi, Know):
            pts = self.same_local(self.knowledge_runs, phi.agent, run[m].local(phi.agent))
            vals = [self.holds(phi.sub, r, k) for r, k in pts]
            return all(vals)
        if isinstance(phi, Believe):
            pts = self.same_local(self.runs, phi.agent, run[m].local(phi.agent))
            best = min((self.rank(r) for r, _ in pts), default=None)
            vals = [self.holds(phi.sub, r, k) for r, k in pts if self.rank(r) == best]
            return all(vals)
        if isinstance(phi, Counterfactual):
            if m >= T:
                raise HorizonReached
            ante = phi.antecedent
            vals = [self.holds(phi.consequent, r, k) for r, k in self.close(ante.agent, ante.action, run, m)]
            return all(vals)
        raise TypeError(phi)

    def value(self, phi, run, m):
        try:
            return self.holds(phi, run, m)
        except HorizonReached:
            return HORIZON


class HorizonReached(Exception):
    pass


def formulas(agents, props, actions, *, belief=True, counterfactual=True, temporal=True, max_leaves=8):
    """Hypothesis strategy for formulas over the given vocabulary."""
    agents = sorted(agents)
    leaves = [st.sampled_from([Const(True), Const(False)]), st.sampled_from([Prop(p) for p in sorted(props)])]
    pairs = [(a, x) for a in agents for x in sorted(actions[a])]
    leaves.append(st.sampled_from([Last(a, x) for a, x in pairs]))
    if temporal:
        leaves.append(st.sampled_from([DoAtom(a, x) for a, x in pairs]))
    base = st.one_of(leaves)

    def extend(inner):
        options = [
            inner.map(Not),
            st.tuples(inner, inner).map(lambda t: And(*t)),
            st.tuples(inner, inner).map(lambda t: Or(*t)),
            st.tuples(inner, inner).map(lambda t: Implies(*t)),
            st.tuples(st.sampled_from(agents), inner).map(lambda t: Know(*t)),
        ]
        if belief:
            options.append(st.tuples(st.sampled_from(agents), inner).map(lambda t: Believe(*t)))
        if temporal:
            options += [inner.map(Next), inner.map(Eventually), inner.map(Always)]
        if counterfactual:
            options.append(
                st.tuples(st.sampled_from(pairs), inner).map(
                    lambda t: Counterfactual(DoAtom(*t[0]), t[1])
                )
            )
        return st.one_of(options)

    return st.recursive(base, extend, max_leaves=max_leaves)
