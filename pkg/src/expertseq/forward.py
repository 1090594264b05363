"""The generalized forward algorithm, backward posteriors and Viterbi.

The forward pass is strictly online: each outcome is consumed once, the
retained state is one weight map over a single level interval, and the
marginal so far is available after every step. Work and space counters
are exposed so the complexity contracts of the models can be checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .experts import ForecastingSystem
from .hmm import HmmModel, StateId, propagate_frontier
from .logprob import NEG_INF, LogMass, log_sum, log_sum_iter, logsumexp


@dataclass
class WeightMap:
    """The forward frontier: a partial map from states to log mass."""

    entries: dict[StateId, LogMass]
    level: int

    def total(self) -> LogMass:
        return log_sum_iter(self.entries.values())


class ZeroMarginalError(RuntimeError):
    """The running marginal hit probability zero; carries the 1-based step."""

    def __init__(self, step: int):
        super().__init__(f"marginal is zero at step {step}")
        self.step = step


class AmbiguousModelError(ValueError):
    """Viterbi over expert sequences is only sound for unambiguous models."""


@dataclass
class StepRecord:
    log_cond: LogMass                 # log P(x_i | x^{i-1})
    pre_update_total: LogMass         # frontier log-sum before the loss update
    expert_dist: np.ndarray           # log P(xi_i = . | x^{i-1})
    outcome_dist: np.ndarray | None   # log P(x_i = . | x^{i-1}), experts mode only


class ForwardPass:
    """Incremental forward evaluation of one (model, experts, data) triple.

    Expert predictions come either from a list of forecasting systems or,
    for evaluation-only runs, from a precomputed (n, k) matrix of log
    probabilities assigned to the realized outcomes.
    """

    def __init__(
        self,
        model: HmmModel,
        experts: Sequence[ForecastingSystem] | None = None,
        *,
        logpred_matrix: np.ndarray | None = None,
        frontier_hook: Callable[[WeightMap], WeightMap] | None = None,
        record_regions: bool = False,
        want_outcome_dists: bool = False,
        keep_steps: bool = True,
    ):
        if (experts is None) == (logpred_matrix is None):
            raise ValueError("provide either experts or a logpred matrix")
        if experts is not None and len(experts) != model.num_experts:
            raise ValueError(
                f"model labels {model.num_experts} experts, got {len(experts)}")
        self.model = model
        self.experts = list(experts) if experts is not None else None
        self._matrix = None if logpred_matrix is None else np.asarray(logpred_matrix, dtype=float)
        self._hook = frontier_hook
        self._record_regions = record_regions
        self._want_outcome = want_outcome_dists and experts is not None
        # keep_steps=False keeps memory bounded by the frontier on long
        # streams; per-step records are then discarded after advance().
        self._keep_steps = keep_steps

        self.history: list[int] = []
        self.steps: list[StepRecord] = []
        self.last_step: StepRecord | None = None
        self.transitions_per_level: list[int] = []
        self.peak_weights = 0
        self.log_marginal: LogMass = 0.0
        self.regions: list[list] = []            # per level, (state, succs) in topo order
        self.stratum_weights: list[dict] = []    # per level, post-update frontier copies

        self._frontier: dict[StateId, LogMass] = dict(model.initial())
        self._t = 0
        self._pre: dict[StateId, LogMass] | None = None
        self._pre_total: LogMass = NEG_INF
        self._preds: list[np.ndarray] | None = None

    # -- propagation and per-step predictions -----------------------------

    def _ensure_propagated(self) -> None:
        if self._pre is not None:
            return
        record = [] if self._record_regions else None
        pre, transitions, peak = propagate_frontier(
            self.model, self._frontier, self._t + 1, record=record)
        self._pre = pre
        self._pre_total = log_sum_iter(pre.values())
        self.transitions_per_level.append(transitions)
        if self._record_regions:
            self.regions.append(record)
        if peak > self.peak_weights:
            self.peak_weights = peak

    def _expert_preds(self) -> list[np.ndarray]:
        if self._preds is None:
            hist = self.history
            self._preds = [e.predict(hist) for e in self.experts]
        return self._preds

    def predict_expert(self) -> np.ndarray:
        """log P(xi_{t+1} = . | x^t) from the propagated frontier."""
        self._ensure_propagated()
        k = self.model.num_experts
        by_label = np.full(k, NEG_INF)
        label = self.model.label
        acc: dict[int, list[float]] = {}
        for q, v in self._pre.items():
            acc.setdefault(label(q), []).append(v)
        for lab, vals in acc.items():
            by_label[lab] = log_sum_iter(vals)
        if self._pre_total == NEG_INF:
            raise ZeroMarginalError(self._t + 1)
        return by_label - self._pre_total

    def predict_outcome(self) -> np.ndarray:
        """log P(x_{t+1} = . | x^t), averaging expert forecasts by weight."""
        if self.experts is None:
            raise ValueError("outcome prediction requires full expert forecasts")
        return self._mix_outcome(self.predict_expert())

    def _mix_outcome(self, expert_dist: np.ndarray) -> np.ndarray:
        stacked = np.stack(self._expert_preds()) + expert_dist[:, None]  # (k, alphabet)
        with np.errstate(divide="ignore"):
            m = np.max(stacked, axis=0)
            safe = np.where(m == NEG_INF, 0.0, m)
            out = safe + np.log(np.sum(np.exp(stacked - safe[None, :]), axis=0))
        return np.where(m == NEG_INF, NEG_INF, out)

    # -- consuming data ----------------------------------------------------

    def advance(self, symbol: int) -> LogMass:
        """Consume one outcome; returns log P(x_{t+1} | x^t)."""
        self._ensure_propagated()
        pre, pre_total = self._pre, self._pre_total
        step = self._t + 1

        expert_dist = self.predict_expert()
        outcome_dist = self._mix_outcome(expert_dist) if self._want_outcome else None

        if self.experts is not None:
            preds = self._expert_preds()
            symbol = int(symbol)
            if not 0 <= symbol < self.experts[0].size:
                raise ValueError(f"symbol {symbol!r} at step {step} is outside the alphabet")
            lp = np.array([p[symbol] for p in preds])
        else:
            if self._t >= len(self._matrix):
                raise ValueError(f"logpred matrix exhausted at step {step}")
            lp = self._matrix[self._t]

        label = self.model.label
        post: dict[StateId, LogMass] = {}
        for q, v in pre.items():
            m = v + lp[label(q)]
            if m != NEG_INF:
                post[q] = m
        if not post:
            raise ZeroMarginalError(step)

        new_marginal = log_sum_iter(post.values())
        log_cond = new_marginal - self.log_marginal

        if self._hook is not None:
            wm = self._hook(WeightMap(post, step))
            post = wm.entries
        if self._record_regions:
            self.stratum_weights.append(dict(post))
        if len(post) > self.peak_weights:
            self.peak_weights = len(post)

        if self._keep_steps:
            self.steps.append(StepRecord(log_cond, pre_total, expert_dist, outcome_dist))
        self.last_step = StepRecord(log_cond, pre_total, expert_dist, outcome_dist)
        self.log_marginal = new_marginal
        self._frontier = post
        self.history.append(symbol if self.experts is not None else int(symbol))
        self._t += 1
        self._pre = None
        self._preds = None
        return log_cond

    @property
    def weight_map(self) -> WeightMap:
        return WeightMap(dict(self._frontier), self._t)


@dataclass
class ForwardResult:
    log_marginal: LogMass
    steps: list[StepRecord]
    transitions_per_level: list[int]
    peak_weights: int
    n: int

    @property
    def step_log_conds(self) -> list[LogMass]:
        return [s.log_cond for s in self.steps]

    @property
    def expert_dists(self) -> list[np.ndarray]:
        return [s.expert_dist for s in self.steps]

    @property
    def outcome_dists(self) -> list[np.ndarray | None]:
        return [s.outcome_dist for s in self.steps]


def forward_marginal(
    model: HmmModel,
    experts: Sequence[ForecastingSystem] | None,
    data: Sequence[int],
    *,
    logpred_matrix: np.ndarray | None = None,
    frontier_hook: Callable[[WeightMap], WeightMap] | None = None,
    want_outcome_dists: bool | None = None,
) -> ForwardResult:
    """Run the forward algorithm over a whole sequence.

    Returns the marginal log mass of the data plus the per-step next-expert
    and (in experts mode) next-outcome predictive distributions. Aborts
    with ZeroMarginalError if the marginal hits zero mid-stream.
    """
    if want_outcome_dists is None:
        want_outcome_dists = experts is not None
    fp = ForwardPass(
        model, experts, logpred_matrix=logpred_matrix,
        frontier_hook=frontier_hook, want_outcome_dists=want_outcome_dists)
    for x in data:
        fp.advance(x)
    return ForwardResult(
        fp.log_marginal, fp.steps, fp.transitions_per_level, fp.peak_weights, len(fp.history))


def posterior_experts(
    model: HmmModel,
    experts: Sequence[ForecastingSystem] | None,
    data: Sequence[int],
    *,
    logpred_matrix: np.ndarray | None = None,
) -> np.ndarray:
    """Smoothed per-step expert posterior P(xi_i = . | x^n) as an (n, k)
    grid of log masses, each row log-summing to 0.

    Computed as forward times backward over productive states, projected
    down to expert labels.
    """
    n = len(data)
    fp = ForwardPass(model, experts, logpred_matrix=logpred_matrix, record_regions=True)
    lp_rows: list[np.ndarray] = []
    for i, x in enumerate(data):
        if experts is not None:
            preds = [e.predict(data[:i]) for e in experts]
            lp_rows.append(np.array([p[int(x)] for p in preds]))
        else:
            lp_rows.append(np.asarray(logpred_matrix[i], dtype=float))
        fp.advance(x)

    k = model.num_experts
    label, is_prod, level = model.label, model.is_productive, model.level
    grid = np.full((n, k), NEG_INF)
    if n == 0:
        return grid

    # beta[q] = log P(x_{i+1..n} | q, x^i) for q in stratum i.
    beta: dict[StateId, LogMass] = {q: 0.0 for q in fp.stratum_weights[n - 1]}
    for i in range(n, 0, -1):
        fwd = fp.stratum_weights[i - 1]
        row = np.full(k, NEG_INF)
        acc: dict[int, LogMass] = {}
        for q, f in fwd.items():
            b = beta.get(q, NEG_INF)
            if b == NEG_INF:
                continue
            lab = label(q)
            m = f + b
            acc[lab] = log_sum(acc[lab], m) if lab in acc else m
        for lab, v in acc.items():
            row[lab] = v
        total = logsumexp(row)
        if total == NEG_INF:
            raise ZeroMarginalError(i)
        grid[i - 1] = row - total

        if i == 1:
            break
        # Replay the silent region between strata i-1 and i in reverse
        # topological order to pull beta back one stratum.
        lp = lp_rows[i - 1]
        node_beta: dict[StateId, LogMass] = {}
        for q, b in beta.items():
            node_beta[q] = b + lp[label(q)]
        prev_beta: dict[StateId, LogMass] = {}
        for u, succ in reversed(fp.regions[i - 1]):
            vals = []
            for v, w in succ:
                bv = node_beta.get(v, NEG_INF)
                if bv != NEG_INF:
                    vals.append(w + bv)
            b = log_sum_iter(vals)
            node_beta[u] = b
            if is_prod(u) and level(u) == i - 1:
                prev_beta[u] = b
        beta = prev_beta
    return grid


def viterbi_unambiguous(
    model: HmmModel,
    experts: Sequence[ForecastingSystem] | None,
    data: Sequence[int],
    *,
    logpred_matrix: np.ndarray | None = None,
) -> tuple[list[int], LogMass]:
    """Most probable expert sequence and its joint log mass.

    Sound only for models declaring themselves unambiguous: one expert
    sequence corresponds to one productive-state path, so silent detours
    between consecutive productive states are aggregated by summation and
    the maximization runs over productive choices. Ties go to the lowest
    expert index at each maximization.
    """
    if not model.unambiguous:
        raise AmbiguousModelError(
            "model is declared ambiguous; use the switch MAP decoder or brute force")
    n = len(data)
    if n == 0:
        return [], 0.0
    if experts is not None and len(experts) != model.num_experts:
        raise ValueError(f"model labels {model.num_experts} experts, got {len(experts)}")

    label = model.label

    def lp_row(i: int) -> np.ndarray:
        if experts is not None:
            preds = [e.predict(data[:i]) for e in experts]
            return np.array([p[int(data[i])] for p in preds])
        return np.asarray(logpred_matrix[i], dtype=float)

    # values[q] = best joint log mass over expert prefixes reaching q;
    # parents[i][q] = predecessor productive state on that best path.
    sinks, _, _ = propagate_frontier(model, dict(model.initial()), 1)
    lp = lp_row(0)
    values: dict[StateId, LogMass] = {}
    parents: list[dict[StateId, StateId | None]] = [{}]
    for q, v in sinks.items():
        m = v + lp[label(q)]
        if m != NEG_INF:
            values[q] = m
            parents[0][q] = None
    if not values:
        raise ZeroMarginalError(1)

    for i in range(1, n):
        lp = lp_row(i)
        best: dict[StateId, tuple[LogMass, StateId]] = {}
        for q in sorted(values, key=lambda s: (label(s), s)):
            arrivals, _, _ = propagate_frontier(model, {q: values[q]}, i + 1)
            for v, m in arrivals.items():
                if v not in best or m > best[v][0]:
                    best[v] = (m, q)
        values = {}
        parent_row: dict[StateId, StateId | None] = {}
        for v, (m, q) in best.items():
            m2 = m + lp[label(v)]
            if m2 != NEG_INF:
                values[v] = m2
                parent_row[v] = q
        if not values:
            raise ZeroMarginalError(i + 1)
        parents.append(parent_row)

    final = None
    for q in sorted(values, key=lambda s: (label(s), s)):
        if final is None or values[q] > values[final]:
            final = q
    seq_states = [final]
    for i in range(n - 1, 0, -1):
        seq_states.append(parents[i][seq_states[-1]])
    seq_states.reverse()
    return [label(q) for q in seq_states], values[final]
