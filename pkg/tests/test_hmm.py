import itertools
import math

import numpy as np
import pytest

import expertseq as es
from expertseq.hmm import HmmModel, propagate_frontier
from expertseq.logprob import NEG_INF
from oracles import ZOO_NAMES, random_constant_experts, random_zoo_instance


class _Denormalized(HmmModel):
    """Planted defect: successor masses of the productive state sum to 0.9."""

    productive_tags = frozenset({"e"})
    silent_depth_bound = 0
    num_experts = 1

    def initial(self):
        return [(("e", 1, 0), 0.0)]

    def successors(self, q):
        return [(("e", q[1] + 1, 0), math.log(0.9))]

    def label(self, q):
        return q[2]


class _SilentLoop(HmmModel):
    """Planted defect: a silent state with a self-loop, violating continuity."""

    productive_tags = frozenset({"e"})
    silent_depth_bound = 1
    num_experts = 1

    def initial(self):
        return [(("s", 0), 0.0)]

    def successors(self, q):
        if q[0] == "s":
            return [(("s", q[1]), math.log(0.5)), (("e", q[1] + 1, 0), math.log(0.5))]
        return [(("s", q[1]), 0.0)]

    def label(self, q):
        return q[2]


class TestValidate:
    def test_zoo_models_are_valid(self):
        rng = np.random.default_rng(10)
        for name in ZOO_NAMES:
            model, _, _ = random_zoo_instance(name, rng, n=1)
            assert es.validate(model, 5) == [], name

    def test_denormalized_successors_named(self):
        issues = es.validate(_Denormalized(), 3)
        kinds = {i.kind for i in issues}
        assert "successor-normalization" in kinds
        bad = [i for i in issues if i.kind == "successor-normalization"]
        assert bad[0].state is not None

    def test_silent_self_loop_flagged(self):
        issues = es.validate(_SilentLoop(), 3)
        assert any(i.kind == "silent-depth" for i in issues)

    def test_levels_precondition(self):
        with pytest.raises(ValueError):
            es.validate(_Denormalized(), 0)

    def test_propagation_rejects_silent_cycles(self):
        with pytest.raises(ValueError):
            propagate_frontier(_SilentLoop(), {("s", 0): 0.0}, 1)


class TestExpertSequencePrior:
    def test_bayes_constant_sequence(self):
        m = es.bayes([0.25] * 4)
        assert es.expert_sequence_prior(m, [2, 2]) == pytest.approx(math.log(0.25), abs=1e-12)

    def test_bayes_forbids_switching(self):
        m = es.bayes([0.25] * 4)
        assert es.expert_sequence_prior(m, [2, 3]) == NEG_INF

    def test_fixed_share_switch_arc(self):
        m = es.fixed_share([0.5, 0.5], 0.5)
        got = es.expert_sequence_prior(m, [0, 1])
        assert got == pytest.approx(math.log(0.5 * 0.25), abs=1e-12)

    def test_zoo_priors_normalize(self):
        rng = np.random.default_rng(11)
        for name in ZOO_NAMES:
            for k, n in ((2, 6), (3, 4)):
                if name == "universal_elementwise" and k != 2:
                    continue
                model, _, _ = random_zoo_instance(name, rng, n=1, k=k)
                total = es.log_sum_iter(p for _, p in es.iter_sequence_priors(model, n))
                assert total == pytest.approx(0.0, abs=1e-9), (name, k, n)

    def test_empty_sequence_has_unit_mass(self):
        m = es.bayes([1.0])
        assert es.expert_sequence_prior(m, []) == 0.0


class TestEliminateSilent:
    def test_single_pred_single_succ(self):
        # Chain a -> hub -> a: removing the hub drops one state, keeps priors.
        m = es.fixed_elementwise([1.0])
        m2 = es.eliminate_silent(m, ("draw", 1))
        for n in range(1, 5):
            seq = [0] * n
            assert es.expert_sequence_prior(m2, seq) == pytest.approx(
                es.expert_sequence_prior(m, seq), abs=1e-12)
        reachable = {v for v, _ in m2.successors(("e", 1, 0))}
        assert ("draw", 1) not in reachable

    def test_fixed_share_hub_becomes_quadratic(self):
        k = 4
        m = es.fixed_share([1.0 / k] * k, 0.3)
        hub = ("draw", 2)
        arcs_through_hub = sum(1 for x in range(k) if hub in
                               {v for v, _ in m.successors(("e", 2, x))})
        arcs_through_hub += len(m.successors(hub))
        assert arcs_through_hub == 2 * k
        m2 = es.eliminate_silent(m, hub)
        direct = sum(len(m2.successors(("e", 2, x))) for x in range(k))
        assert direct == k * k

    def test_prior_preserved_on_all_sequences(self):
        m = es.fixed_share([0.3, 0.7], 0.4)
        m2 = es.eliminate_silent(m, ("draw", 1))
        for n in range(1, 5):
            for seq in itertools.product(range(2), repeat=n):
                assert es.expert_sequence_prior(m2, seq) == pytest.approx(
                    es.expert_sequence_prior(m, seq), abs=1e-9)

    def test_forward_marginal_preserved(self):
        rng = np.random.default_rng(12)
        experts = random_constant_experts(rng, 2, 2)
        m = es.fixed_share([0.5, 0.5], 0.25)
        m2 = es.eliminate_silent(m, ("draw", 2))
        for _ in range(5):
            data = list(rng.integers(0, 2, 4))
            a = es.forward_marginal(m, experts, data).log_marginal
            b = es.forward_marginal(m2, experts, data).log_marginal
            assert a == pytest.approx(b, abs=1e-9)

    def test_rejects_productive_and_initial_states(self):
        m = es.fixed_share([0.5, 0.5], 0.25)
        with pytest.raises(ValueError):
            es.eliminate_silent(m, ("e", 1, 0))
        with pytest.raises(ValueError):
            es.eliminate_silent(m, ("draw", 0))


class TestStateProtocol:
    def test_levels_and_productive_flags(self):
        m = es.fixed_share([0.5, 0.5], 0.5)
        assert m.level(("draw", 3)) == 3
        assert m.level(("e", 4, 1)) == 4
        assert not m.is_productive(("draw", 3))
        assert m.is_productive(("e", 4, 1))
        assert m.label(("e", 4, 1)) == 1

    def test_budget_guard(self):
        m = es.universal_elementwise(3, state_budget=10)
        experts = [es.uniform_expert(2)] * 3
        with pytest.raises(es.StateBudgetExceeded):
            es.forward_marginal(m, experts, [0] * 12)
