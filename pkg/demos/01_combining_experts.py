"""Combining expert forecasts on data whose best expert changes over time.

Three experts predict a binary stream: one tuned to the first regime, one
to the second, and a count-based learner. We compare combination models
that assume a single best expert (Bayes), a fixed mixture, a constant
switching rate, a decaying switching rate, and an explicit law on run
lengths, all evaluated online in one pass each.
"""

import numpy as np

import expertseq as es

rng = np.random.default_rng(1)

# Two regimes: symbol 0 dominates for 60 steps, then symbol 1 for 60 steps.
data = list(rng.choice(2, 60, p=[0.85, 0.15])) + list(rng.choice(2, 60, p=[0.1, 0.9]))
n = len(data)

experts = [
    es.ConstantExpert([0.85, 0.15]),  # regime-one specialist
    es.ConstantExpert([0.10, 0.90]),  # regime-two specialist
    es.KTEstimator(2),                # learns global frequencies
]
names = ["early", "late", "counts"]
k = len(experts)
w = [1.0 / k] * k

print(f"{n} outcomes, regime change at step 60\n")
print("per-expert chain-rule loss:")
for name, e in zip(names, experts):
    print(f"  {name:8s} {es.to_bits(es.sequential_log_loss(e, data)):8.2f} bits")

models = [
    ("bayes", es.bayes(w)),
    ("fixed elementwise", es.fixed_elementwise(w)),
    ("fixed share a=.05", es.fixed_share(w, 0.05)),
    ("switch", es.switch(es.default_switch_config(k), k)),
    ("run-length (elias)", es.run_length(es.elias_delta(), w)),
    ("universal share", es.universal_share(w)),
]

print("\ncombination models (total loss and per-level work):")
for name, model in models:
    res = es.forward_marginal(model, experts, data)
    per_level = res.transitions_per_level[-1]
    print(f"  {name:20s} {es.to_bits(res.log_marginal):8.2f} bits   "
          f"{per_level:4d} transitions at the last level")

# The switching models track the regime change; Bayes pays for betting on a
# single expert. The best achievable two-block score for reference:
lp = es.prediction_matrix(experts, data)
from expertseq.bounds import best_segmentations
seg = best_segmentations(lp, 2)[1]
print(f"\nbest single-switch assignment scores {es.to_bits(seg.log_likelihood):.2f} bits "
      f"(switches to expert {names[seg.sequence[-1]]} at step {seg.change_points[0] + 1})")
