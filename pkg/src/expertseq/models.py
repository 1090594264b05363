"""The expert-combination model zoo.

Every constructor returns a lazy leveled HMM over expert labels. A model
does not hold the experts themselves; the forward pass pairs labels with a
list of forecasting systems. Masses are precomputed in log scale where
fixed and derived lazily where they depend on the level; arcs of
probability zero are omitted so frontiers stay tight.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .hmm import HmmModel, StateBudgetExceeded
from .logprob import NEG_INF, LogMass, from_linear


# ---------------------------------------------------------------------------
# Switch-time / run-length laws
# ---------------------------------------------------------------------------

class SwitchTimeLaw(ABC):
    """Distribution on the positive integers, accessed through pmf, tail
    P(Z >= d) and hazard P(Z = d | Z >= d).

    ``span`` is the last support point for finite-support laws (None means
    infinite support). For a declared truncation the hazard is defined as 1
    from the span onward, which forces a switch and keeps frontiers finite.
    """

    name: str = "law"
    span: int | None = None
    declared_truncation: bool = True

    @abstractmethod
    def pmf(self, d: int) -> float: ...

    @abstractmethod
    def tail(self, d: int) -> float: ...

    def hazard(self, d: int) -> float:
        if d < 1:
            raise ValueError("run lengths start at 1")
        if self.span is not None and d >= self.span:
            return 1.0
        t = self.tail(d)
        if t <= 0.0:
            raise ValueError(f"{self.name}: conditioning on zero tail at {d}")
        return min(self.pmf(d) / t, 1.0)


class InversePolyLaw(SwitchTimeLaw):
    """pi(d) = 1 / (d (d+1)); tail 1/d, hazard 1/(d+1)."""

    name = "inv-poly"

    def pmf(self, d: int) -> float:
        return 1.0 / (d * (d + 1.0))

    def tail(self, d: int) -> float:
        return 1.0 / d

    def hazard(self, d: int) -> float:
        return 1.0 / (d + 1.0)


class GeometricLaw(SwitchTimeLaw):
    """pi(d) = (1-r)^(d-1) r; constant hazard r."""

    def __init__(self, rate: float):
        if not 0.0 < rate <= 1.0:
            raise ValueError("geometric rate must be in (0, 1]")
        self.rate = float(rate)
        self.name = f"geometric({rate})"

    def pmf(self, d: int) -> float:
        return (1.0 - self.rate) ** (d - 1) * self.rate

    def tail(self, d: int) -> float:
        return (1.0 - self.rate) ** (d - 1)

    def hazard(self, d: int) -> float:
        return self.rate


class EliasDeltaLaw(SwitchTimeLaw):
    """Complete prefix-code lengths of the Elias delta code as a distribution:
    pi(d) = 2^-len(d) with len(d) = floor(log2 d) + 2 floor(log2(floor(log2 d)+1)) + 1.

    Satisfies -log2 pi(d) <= log2 d + 2 log2 log2 (d+1) + 3 for every d >= 1.
    """

    name = "elias"

    def __init__(self):
        self._pmf: list[float] = [1.0 / 2.0]   # d = 1
        self._tail: list[float] = [1.0]        # tail(1) = 1

    @staticmethod
    def code_length(d: int) -> int:
        if d < 1:
            raise ValueError("support starts at 1")
        low = d.bit_length() - 1
        return low + 2 * ((low + 1).bit_length() - 1) + 1

    def _extend(self, d: int) -> None:
        while len(self._pmf) < d:
            j = len(self._pmf)  # current max supported d
            self._tail.append(self._tail[j - 1] - self._pmf[j - 1])
            self._pmf.append(2.0 ** (-self.code_length(j + 1)))

    def pmf(self, d: int) -> float:
        return 2.0 ** (-self.code_length(d))

    def tail(self, d: int) -> float:
        self._extend(d)
        return self._tail[d - 1]


class FinitePmfLaw(SwitchTimeLaw):
    """Explicit finite-support law with masses for d = 1..span."""

    def __init__(self, probs: Sequence[float], *, renormalize: bool = False,
                 declared_truncation: bool = True, name: str = "finite"):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or len(p) < 1 or np.any(p < 0) or p[-1] == 0.0:
            raise ValueError("finite law needs masses for d = 1..span with mass at the span")
        s = p.sum()
        if abs(s - 1.0) > 1e-9:
            if not renormalize:
                raise ValueError(f"finite law masses sum to {s}, not 1 (pass renormalize=True)")
            p = p / s
        self._pmf = p
        self._tail = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])
        self.span = len(p)
        self.declared_truncation = declared_truncation
        self.name = name

    def pmf(self, d: int) -> float:
        return float(self._pmf[d - 1]) if 1 <= d <= self.span else 0.0

    def tail(self, d: int) -> float:
        if d < 1:
            raise ValueError("run lengths start at 1")
        return float(self._tail[min(d, self.span + 1) - 1])


def inv_poly() -> InversePolyLaw:
    return InversePolyLaw()


def geometric(rate: float) -> GeometricLaw:
    return GeometricLaw(rate)


def elias_delta() -> EliasDeltaLaw:
    return EliasDeltaLaw()


def uniform_span(a: int, b: int) -> FinitePmfLaw:
    """Uniform law on run lengths {a, ..., b}."""
    if not 1 <= a <= b:
        raise ValueError("need 1 <= a <= b")
    probs = [0.0] * (a - 1) + [1.0 / (b - a + 1)] * (b - a + 1)
    return FinitePmfLaw(probs, name=f"uniform({a},{b})")


def truncate(law: SwitchTimeLaw, span: int) -> FinitePmfLaw:
    """Declared finite-support truncation of a law, renormalized."""
    return FinitePmfLaw([law.pmf(d) for d in range(1, span + 1)],
                        renormalize=True, name=f"{law.name}|{span}")


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------

def _log_dist(w, k: int | None = None, what: str = "weights") -> list[float]:
    p = np.asarray(w, dtype=float)
    if p.ndim != 1 or len(p) < 1:
        raise ValueError(f"{what} must be a flat vector")
    if k is not None and len(p) != k:
        raise ValueError(f"{what} must have length {k}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{what} must be a normalized distribution")
    return [from_linear(float(x)) for x in p]


@dataclass(frozen=True)
class SwitchParams:
    """One switch parameter: strictly increasing switch times starting at 0
    and the expert chosen in each block."""

    times: tuple[int, ...]
    experts: tuple[int, ...]

    def __post_init__(self):
        m = len(self.times)
        if m < 1 or len(self.experts) != m:
            raise ValueError("times and experts must be equally long and nonempty")
        if self.times[0] != 0 or any(a >= b for a, b in zip(self.times, self.times[1:])):
            raise ValueError("switch times must satisfy 0 = t1 < t2 < ...")

    @property
    def m(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class SwitchConfig:
    """Parameters of the switch prior: geometric rate of the block-count law,
    the switch-time law, and the expert-choice distribution.

    theta = 1 removes the stable band entirely (the block count never
    stops growing); it falls outside the prior interpretation but realizes
    the reduction to a fixed switching rate.
    """

    theta: float
    pi_t: SwitchTimeLaw
    pi_k: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")
        _log_dist(self.pi_k, what="pi_k")

    @property
    def num_experts(self) -> int:
        return len(self.pi_k)


def _next_switch_conditional(law: SwitchTimeLaw, t: int, t_prev: int) -> float:
    """P(Z = t | Z > t_prev): survive the hazards strictly between, then
    switch at t. Telescopes to pmf(t)/tail(t_prev+1) for infinite-support
    laws and honors the declared continuation of truncated ones."""
    mass = 1.0
    for j in range(t_prev + 1, t):
        mass *= 1.0 - law.hazard(j)
        if mass == 0.0:
            return 0.0
    return mass * law.hazard(t)


def _no_switch_before(law: SwitchTimeLaw, n: int, t_prev: int) -> float:
    """P(Z >= n | Z > t_prev): survive every hazard strictly before n."""
    mass = 1.0
    for j in range(t_prev + 1, n):
        mass *= 1.0 - law.hazard(j)
    return mass


def switch_param_mass(cfg: SwitchConfig, params: SwitchParams) -> LogMass:
    """Log mass of one switch parameter under the switch prior."""
    m = params.m
    pi_m = (cfg.theta ** (m - 1)) * (1.0 - cfg.theta)
    total = from_linear(pi_m) + from_linear(cfg.pi_k[params.experts[0]])
    for i in range(1, m):
        cond = _next_switch_conditional(cfg.pi_t, params.times[i], params.times[i - 1])
        total += from_linear(cond) + from_linear(cfg.pi_k[params.experts[i]])
    return total


# ---------------------------------------------------------------------------
# Model classes
# ---------------------------------------------------------------------------

class BayesMixture(HmmModel):
    """One self-chain per expert; no switching arcs."""

    productive_tags = frozenset({"e"})
    unambiguous = True
    silent_depth_bound = 0

    def __init__(self, w):
        self._log_w = _log_dist(w)
        self.num_experts = len(self._log_w)

    def initial(self):
        return [(("e", 1, x), lw) for x, lw in enumerate(self._log_w) if lw != NEG_INF]

    def successors(self, q):
        _, n, x = q
        return [(("e", n + 1, x), 0.0)]

    def label(self, q):
        return q[2]


class FixedElementwiseMixture(HmmModel):
    """Per-level silent hub redrawing the expert i.i.d. from fixed weights."""

    productive_tags = frozenset({"e"})
    unambiguous = True
    silent_depth_bound = 1

    def __init__(self, alpha):
        self._log_a = _log_dist(alpha, what="mixture weights")
        self.num_experts = len(self._log_a)

    def initial(self):
        return [(("draw", 0), 0.0)]

    def successors(self, q):
        if q[0] == "draw":
            n = q[1]
            return [(("e", n + 1, x), la) for x, la in enumerate(self._log_a) if la != NEG_INF]
        _, n, x = q
        return [(("draw", n), 0.0)]

    def label(self, q):
        return q[2]


class FixedShare(HmmModel):
    """Stay with the current expert with mass 1 - alpha, otherwise forget
    everything and redraw from w through the per-level hub."""

    productive_tags = frozenset({"e"})
    unambiguous = True
    silent_depth_bound = 1

    def __init__(self, w, alpha: float):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        self._log_w = _log_dist(w)
        self._log_stay = math.log1p(-alpha) if alpha < 1.0 else NEG_INF
        self._log_switch = from_linear(alpha)
        self.num_experts = len(self._log_w)

    def initial(self):
        return [(("draw", 0), 0.0)]

    def successors(self, q):
        if q[0] == "draw":
            n = q[1]
            return [(("e", n + 1, x), lw) for x, lw in enumerate(self._log_w) if lw != NEG_INF]
        _, n, x = q
        out = []
        if self._log_stay != NEG_INF:
            out.append((("e", n + 1, x), self._log_stay))
        if self._log_switch != NEG_INF:
            out.append((("draw", n), self._log_switch))
        return out

    def label(self, q):
        return q[2]


class UniversalElementwiseMixture(HmmModel):
    """Elementwise mixture with the mixture weights learned online under a
    Jeffreys prior; silent states are count vectors, so the frontier at
    sample size n has C(n+k-1, k-1) states. A state budget guards the
    blowup for k >= 3.
    """

    productive_tags = frozenset({"e"})
    unambiguous = True
    silent_depth_bound = 1

    def __init__(self, k: int, state_budget: int = 200_000):
        if k < 1:
            raise ValueError("need at least one expert")
        self.num_experts = k
        self._budget = state_budget
        self._seen: set[tuple[int, ...]] = set()

    def _charge(self, counts: tuple[int, ...]) -> None:
        if counts not in self._seen:
            self._seen.add(counts)
            if len(self._seen) > self._budget:
                raise StateBudgetExceeded(
                    f"universal elementwise mixture exceeded {self._budget} count states")

    def initial(self):
        zero = (0,) * self.num_experts
        self._charge(zero)
        return [(("cnt", 0, zero), 0.0)]

    def successors(self, q):
        if q[0] == "cnt":
            _, n, counts = q
            denom = 0.5 * self.num_experts + n
            return [(("e", n + 1, counts, x), math.log((0.5 + counts[x]) / denom))
                    for x in range(self.num_experts)]
        _, n, counts, x = q
        bumped = counts[:x] + (counts[x] + 1,) + counts[x + 1:]
        self._charge(bumped)
        return [(("cnt", n, bumped), 0.0)]

    def label(self, q):
        return q[3]


class UniversalShare(HmmModel):
    """Fixed share with the switching rate integrated out under a Jeffreys
    prior; the switch count rides in the state, so levels grow linearly."""

    productive_tags = frozenset({"e"})
    unambiguous = False
    silent_depth_bound = 2

    def __init__(self, w):
        self._log_w = _log_dist(w)
        self.num_experts = len(self._log_w)

    def initial(self):
        return [(("draw", 0, 0), 0.0)]

    def successors(self, q):
        tag = q[0]
        if tag == "draw":
            _, n, m = q
            return [(("e", n + 1, x, m), lw) for x, lw in enumerate(self._log_w) if lw != NEG_INF]
        if tag == "bump":
            _, n, m = q
            return [(("draw", n, m + 1), 0.0)]
        _, n, x, m = q
        return [(("bump", n, m), math.log((m + 0.5) / n)),
                (("e", n + 1, x, m), math.log((n - m - 0.5) / n))]

    def label(self, q):
        return q[2]


class OverconfidentExperts(HmmModel):
    """Per-expert two-lane gadget: the normal lane emits the expert itself,
    the wild lane emits the uniform safe expert, whose label is the extra
    index ``k``. The expert list must carry the safe expert appended."""

    productive_tags = frozenset({"e"})
    unambiguous = False
    silent_depth_bound = 1

    def __init__(self, w, alpha: float):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        self._log_w = _log_dist(w)
        self._k = len(self._log_w)
        self._log_normal = math.log1p(-alpha) if alpha < 1.0 else NEG_INF
        self._log_wild = from_linear(alpha)
        self.num_experts = self._k + 1

    def initial(self):
        return [(("g", 0, x), lw) for x, lw in enumerate(self._log_w) if lw != NEG_INF]

    def successors(self, q):
        if q[0] == "g":
            _, n, x = q
            out = []
            if self._log_normal != NEG_INF:
                out.append((("e", n + 1, x, 0), self._log_normal))
            if self._log_wild != NEG_INF:
                out.append((("e", n + 1, x, 1), self._log_wild))
            return out
        _, n, x, _lane = q
        return [(("g", n, x), 0.0)]

    def label(self, q):
        return q[2] if q[3] == 0 else self._k


class SwitchHmm(HmmModel):
    """Two expert bands. The unstable band escapes with the hazard of the
    switch-time law at the current sample size; an escape re-enters the
    unstable band with mass theta or stabilizes forever with 1 - theta."""

    productive_tags = frozenset({"u", "s"})
    unambiguous = False
    silent_depth_bound = 2

    def __init__(self, cfg: SwitchConfig, k: int):
        if cfg.num_experts != k:
            raise ValueError(f"pi_k has {cfg.num_experts} entries, expected {k}")
        self._log_w = _log_dist(cfg.pi_k, k, what="pi_k")
        if any(lw == NEG_INF for lw in self._log_w):
            raise ValueError("pi_k must give positive mass to every expert")
        law = cfg.pi_t
        if law.span is not None and not law.declared_truncation:
            raise ValueError(
                "switch-time law has finite support without a declared truncation; "
                "the hazard would condition on a zero tail")
        self._law = law
        self._log_theta = from_linear(cfg.theta)
        self._log_stab = from_linear(1.0 - cfg.theta)
        self.num_experts = k

    def initial(self):
        return [(("p", 0), 0.0)]

    def successors(self, q):
        tag = q[0]
        if tag == "u":
            _, n, x = q
            h = self._law.hazard(n)
            out = []
            if h < 1.0:
                out.append((("u", n + 1, x), math.log1p(-h)))
            if h > 0.0:
                out.append((("p", n), math.log(h)))
            return out
        if tag == "s":
            _, n, x = q
            return [(("s", n + 1, x), 0.0)]
        n = q[1]
        if tag == "p":
            out = [(("pu", n), self._log_theta)]
            if self._log_stab != NEG_INF:
                out.append((("ps", n), self._log_stab))
            return out
        band = "u" if tag == "pu" else "s"
        return [((band, n + 1, x), lw) for x, lw in enumerate(self._log_w)]

    def label(self, q):
        return q[2]


class RunLengthHmm(HmmModel):
    """Switching model with arbitrary inter-switch distances: each expert
    block carries the time of its last switch, and the continue/stop masses
    are the law's hazard at the current run length."""

    productive_tags = frozenset({"e"})
    unambiguous = False
    silent_depth_bound = 2

    def __init__(self, pi_t: SwitchTimeLaw, w):
        if pi_t.span is not None and not pi_t.declared_truncation:
            raise ValueError(
                "run-length law has finite support without a declared truncation; "
                "the hazard would condition on a zero tail")
        self._law = pi_t
        self._log_w = _log_dist(w)
        self.num_experts = len(self._log_w)

    def initial(self):
        return [(("p", 0), 0.0)]

    def successors(self, q):
        tag = q[0]
        if tag == "p":
            t = q[1]
            return [(("e", t + 1, x, t), lw) for x, lw in enumerate(self._log_w) if lw != NEG_INF]
        if tag == "q":
            _, n, m = q
            return [(("p", n), 0.0)]
        _, n, x, m = q
        h = self._law.hazard(n - m)
        out = []
        if h < 1.0:
            out.append((("e", n + 1, x, m), math.log1p(-h)))
        if h > 0.0:
            out.append((("q", n, m), math.log(h)))
        return out

    def label(self, q):
        return q[2]


# ---------------------------------------------------------------------------
# Constructors (the public zoo surface)
# ---------------------------------------------------------------------------

def bayes(w) -> BayesMixture:
    return BayesMixture(w)


def fixed_elementwise(alpha) -> FixedElementwiseMixture:
    return FixedElementwiseMixture(alpha)


def universal_elementwise(k: int, state_budget: int = 200_000) -> UniversalElementwiseMixture:
    return UniversalElementwiseMixture(k, state_budget)


def fixed_share(w, alpha: float) -> FixedShare:
    return FixedShare(w, alpha)


def universal_share(w) -> UniversalShare:
    return UniversalShare(w)


def overconfident(w, alpha: float) -> OverconfidentExperts:
    return OverconfidentExperts(w, alpha)


def switch(cfg: SwitchConfig, k: int) -> SwitchHmm:
    return SwitchHmm(cfg, k)


def run_length(pi_t: SwitchTimeLaw, w) -> RunLengthHmm:
    return RunLengthHmm(pi_t, w)


def default_switch_config(k: int, theta: float = 0.5,
                          pi_t: SwitchTimeLaw | None = None) -> SwitchConfig:
    """Uniform expert-choice law, theta = 1/2, pi_t(d) = 1/(d(d+1))."""
    return SwitchConfig(theta, pi_t or inv_poly(), tuple([1.0 / k] * k))


# ---------------------------------------------------------------------------
# Parametric switch-prior oracle
# ---------------------------------------------------------------------------

def switch_prior_prefix(cfg: SwitchConfig, labels: Sequence[int]) -> LogMass:
    """Prefix mass of an expert sequence under the parametric switch prior.

    Exact enumeration over the visible block structures: every switch-time
    set containing the forced change points contributes its parameter mass,
    closed over the invisible future (parameters whose next switch falls at
    or beyond the horizon aggregate into a geometric tail times the
    switch-time tail).
    """
    n = len(labels)
    if n < 1:
        raise ValueError("need a nonempty prefix")
    k = cfg.num_experts
    labels = [int(x) for x in labels]
    if any(not 0 <= x < k for x in labels):
        raise ValueError("expert index outside pi_k support")
    pk = np.asarray(cfg.pi_k, dtype=float)
    law, theta = cfg.pi_t, cfg.theta

    forced = [t for t in range(1, n) if labels[t] != labels[t - 1]]
    optional = [t for t in range(1, n) if labels[t] == labels[t - 1]]

    total = 0.0
    for r in range(len(optional) + 1):
        for extra in combinations(optional, r):
            ts = sorted([0, *forced, *extra])
            mass = pk[labels[0]]
            for prev, t in zip(ts, ts[1:]):
                mass *= _next_switch_conditional(law, t, prev) * pk[labels[t]]
            j = len(ts)
            stop = theta ** (j - 1) * (1.0 - theta)
            go_on = (theta ** j) * _no_switch_before(law, n, ts[-1])
            total += mass * (stop + go_on)
    return from_linear(total)
