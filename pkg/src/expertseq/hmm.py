"""Lazy leveled HMMs with silent states.

A model is exposed as a successor-enumeration interface, never as an
explicit graph: state sets are countably infinite because every state
carries the index of the outcome stratum it belongs to. States are tuples
``(tag, level, *rest)`` where ``tag`` is a short string and ``level`` is
the number of outcomes produced on any run reaching the state (silent
states carry the level of the preceding productive stratum). Successors
never decrease the level; productive successors increase it by exactly 1.

The one graph primitive everything else is built on is
:func:`propagate_frontier`, which pushes a weight map across the silent
region between two strata in a deterministic topological (Kahn) order.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Sequence

from .logprob import NEG_INF, LogMass, log_sum, log_sum_iter

StateId = tuple

NORMALIZATION_TOL = 1e-9


class HmmModel(ABC):
    """Prior on expert sequences, given by initial states and lazy successors.

    Implementations must be immutable after construction; successor
    enumeration must be reentrant. Arcs of probability zero are omitted.
    The state layout ``(tag, level, *rest)`` is load-bearing: a state is
    productive iff its tag is in ``productive_tags`` and its level is its
    second element. The propagation core indexes tuples directly, so
    ``is_productive`` and ``level`` must not be overridden with different
    semantics.
    """

    num_experts: int
    silent_depth_bound: int
    unambiguous: bool = False
    productive_tags: frozenset[str] = frozenset()

    @abstractmethod
    def initial(self) -> list[tuple[StateId, LogMass]]:
        """Support of the initial distribution with log masses."""

    @abstractmethod
    def successors(self, state: StateId) -> list[tuple[StateId, LogMass]]:
        """Direct successors of a state with log transition masses."""

    @abstractmethod
    def label(self, state: StateId) -> int:
        """Expert index produced by a productive state."""

    def is_productive(self, state: StateId) -> bool:
        return state[0] in self.productive_tags

    def level(self, state: StateId) -> int:
        return state[1]


class StateBudgetExceeded(RuntimeError):
    """A model with a configurable state budget enumerated too many states."""


def propagate_frontier(
    model: HmmModel,
    frontier: dict[StateId, LogMass],
    target_level: int,
    record: list | None = None,
) -> tuple[dict[StateId, LogMass], int, int]:
    """Push a weight map forward until it sits on the productive stratum
    ``target_level``.

    The frontier may contain silent states of level ``target_level - 1``
    and productive states of levels ``target_level - 1`` (post loss
    update) or ``target_level`` (initial mass injected directly at the
    stratum). Silent states are processed in a topological order of the
    silent DAG discovered by Kahn-style readiness; states whose mass is
    zero are dropped eagerly and their outgoing arcs are not touched.

    If ``record`` is a list, each processed live node is appended as
    ``(state, successor_list)`` in processing order; a backward sweep can
    replay the region in reverse.

    Returns ``(new_frontier, transitions_touched, peak_weights)``.
    """
    successors = model.successors
    prod_tags = model.productive_tags
    log1p, exp = math.log1p, math.exp

    sinks: dict[StateId, LogMass] = {}
    acc: dict[StateId, LogMass] = {}
    for q, v in frontier.items():
        tgt = sinks if (q[0] in prod_tags and q[1] == target_level) else acc
        tgt[q] = log_sum(tgt[q], v) if q in tgt else v

    # Discover the silent region reachable from the live sources and count
    # in-edges so each node is processed only once all its feeders are done.
    adj: dict[StateId, list[tuple[StateId, LogMass]]] = {}
    indeg: dict[StateId, int] = {}
    stack = list(acc.keys())
    while stack:
        u = stack.pop()
        if u in adj:
            continue
        succ = successors(u)
        adj[u] = succ
        for v, _ in succ:
            if v[0] in prod_tags and v[1] == target_level:
                continue
            indeg[v] = indeg.get(v, 0) + 1
            if v not in adj:
                stack.append(v)

    ready = [u for u in acc if indeg.get(u, 0) == 0]
    transitions = 0
    peak = len(acc) + len(sinks)
    done = 0
    while ready:
        u = ready.pop()
        mass = acc.pop(u, NEG_INF)
        live = mass != NEG_INF
        if live:
            transitions += len(adj[u])
            if record is not None:
                record.append((u, adj[u]))
        for v, w in adj[u]:
            if v[0] in prod_tags and v[1] == target_level:
                if live:
                    m = mass + w
                    old = sinks.get(v)
                    if old is None:
                        sinks[v] = m
                    elif old <= m:
                        sinks[v] = m + log1p(exp(old - m)) if old != NEG_INF else m
                    else:
                        sinks[v] = old + log1p(exp(m - old))
            else:
                if live:
                    m = mass + w
                    old = acc.get(v)
                    if old is None:
                        acc[v] = m
                    elif old <= m:
                        acc[v] = m + log1p(exp(old - m)) if old != NEG_INF else m
                    else:
                        acc[v] = old + log1p(exp(m - old))
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        done += 1
        size = len(acc) + len(sinks)
        if size > peak:
            peak = size
    if done != len(adj):
        leftover = [u for u in adj if indeg.get(u, 0) > 0][:3]
        raise ValueError(f"silent region is not a DAG near states {leftover}")
    return sinks, transitions, peak


def expert_sequence_prior(model: HmmModel, labels: Sequence[int]) -> LogMass:
    """Prior mass of the event that the first n produced experts are ``labels``.

    Runs the forward algorithm over the prior with deterministic per-state
    observations: at each stratum only the states carrying the required
    label survive.
    """
    frontier = dict(model.initial())
    for n, want in enumerate(labels, start=1):
        frontier, _, _ = propagate_frontier(model, frontier, n)
        frontier = {q: v for q, v in frontier.items() if model.label(q) == want}
        if not frontier:
            return NEG_INF
    return log_sum_iter(frontier.values())


def iter_sequence_priors(model: HmmModel, n: int) -> Iterator[tuple[tuple[int, ...], LogMass]]:
    """Yield (label sequence, log prior) for every length-n sequence of
    positive prior mass, sharing prefix work across the k^n sequences."""

    def rec(frontier: dict[StateId, LogMass], depth: int, prefix: tuple[int, ...]):
        stratum, _, _ = propagate_frontier(model, frontier, depth + 1)
        by_label: dict[int, dict[StateId, LogMass]] = {}
        for q, v in stratum.items():
            by_label.setdefault(model.label(q), {})[q] = v
        for lab in sorted(by_label):
            sub = by_label[lab]
            if depth + 1 == n:
                yield prefix + (lab,), log_sum_iter(sub.values())
            else:
                yield from rec(sub, depth + 1, prefix + (lab,))

    if n == 0:
        yield (), 0.0
        return
    yield from rec(dict(model.initial()), 0, ())


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    state: StateId | None
    detail: str


def validate(model: HmmModel, levels: int) -> list[ValidationIssue]:
    """Exhaustively explore the model up to the given stratum and report
    normalization, silent-depth and level-monotonicity violations.

    An empty report means the explored portion is a well-formed continuous
    leveled HMM.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    issues: list[ValidationIssue] = []
    initial = model.initial()
    total = log_sum_iter(w for _, w in initial)
    if abs(total) > NORMALIZATION_TOL:
        issues.append(ValidationIssue("initial-normalization", None,
                                      f"initial masses log-sum to {total:.3e}"))
    bound = model.silent_depth_bound
    # Nodes are (state, consecutive silent run ending at it); runs are capped
    # at bound+1 so validation terminates even on silent cycles.
    seen: set[tuple[StateId, int]] = set()
    flagged_depth: set[StateId] = set()
    stack: list[tuple[StateId, int]] = []
    for q, _ in initial:
        run = 0 if model.is_productive(q) else 1
        if run > bound and q not in flagged_depth:
            flagged_depth.add(q)
            issues.append(ValidationIssue("silent-depth", q, "initial silent run exceeds bound"))
        stack.append((q, min(run, bound + 1)))
    checked_norm: set[StateId] = set()
    while stack:
        q, run = stack.pop()
        if (q, run) in seen:
            continue
        seen.add((q, run))
        lvl = model.level(q)
        if lvl >= levels:
            continue
        succ = model.successors(q)
        if q not in checked_norm:
            checked_norm.add(q)
            s = log_sum_iter(w for _, w in succ)
            if abs(s) > NORMALIZATION_TOL:
                issues.append(ValidationIssue("successor-normalization", q,
                                              f"successor masses log-sum to {s:.3e}"))
        for v, _ in succ:
            vlvl = model.level(v)
            if model.is_productive(v):
                if vlvl != lvl + 1:
                    issues.append(ValidationIssue("level-step", v,
                                                  f"productive successor of level-{lvl} state has level {vlvl}"))
                stack.append((v, 0))
            else:
                if vlvl != lvl:
                    issues.append(ValidationIssue("level-step", v,
                                                  f"silent successor of level-{lvl} state has level {vlvl}"))
                nrun = run + 1
                if nrun > bound:
                    if v not in flagged_depth:
                        flagged_depth.add(v)
                        issues.append(ValidationIssue("silent-depth", v,
                                                      f"silent run longer than declared bound {bound}"))
                    continue
                stack.append((v, nrun))
    return issues


class _SilentElimination(HmmModel):
    """View of a model with one silent state spliced out.

    Every predecessor arc into the removed state is replaced by composed
    arcs to the removed state's successors; parallel arcs are merged. The
    induced distribution on expert sequences is unchanged.
    """

    def __init__(self, base: HmmModel, state: StateId):
        self._base = base
        self._gone = state
        self._bridge = base.successors(state)
        self.num_experts = base.num_experts
        self.silent_depth_bound = base.silent_depth_bound
        self.unambiguous = base.unambiguous
        self.productive_tags = base.productive_tags

    def initial(self):
        return self._base.initial()

    def successors(self, state):
        succ = self._base.successors(state)
        if all(v != self._gone for v, _ in succ):
            return succ
        merged: dict[StateId, LogMass] = {}
        for v, w in succ:
            if v == self._gone:
                for v2, w2 in self._bridge:
                    m = w + w2
                    merged[v2] = log_sum(merged[v2], m) if v2 in merged else m
            else:
                merged[v] = log_sum(merged[v], w) if v in merged else w
        return list(merged.items())

    def label(self, state):
        return self._base.label(state)

    def is_productive(self, state):
        return self._base.is_productive(state)

    def level(self, state):
        return self._base.level(state)


def eliminate_silent(model: HmmModel, state: StateId) -> HmmModel:
    """Remove a non-initial silent state, rewiring predecessors to its
    successors with composed masses."""
    if model.is_productive(state):
        raise ValueError(f"state {state!r} is productive and cannot be eliminated")
    if any(q == state for q, _ in model.initial()):
        raise ValueError(f"state {state!r} is initial and cannot be eliminated")
    return _SilentElimination(model, state)
