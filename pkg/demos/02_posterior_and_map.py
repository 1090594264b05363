"""Looking back at a sequence: smoothed expert posteriors and MAP decoding.

After observing the whole stream we can ask, for every step, which expert
the switch model believes was active (taking the entire future into
account), and separately decode the single most probable expert sequence.
"""

import numpy as np

import expertseq as es

rng = np.random.default_rng(7)

# Three regimes: expert 0, then 1, then 0 again.
data = (list(rng.choice(2, 25, p=[0.8, 0.2]))
        + list(rng.choice(2, 25, p=[0.2, 0.8]))
        + list(rng.choice(2, 25, p=[0.8, 0.2])))

experts = [es.ConstantExpert([0.8, 0.2]), es.ConstantExpert([0.2, 0.8])]
cfg = es.default_switch_config(2)
model = es.switch(cfg, 2)

grid = np.exp(es.posterior_experts(model, experts, data))

SHADES = " .:-=+*#%@"
print("smoothed posterior of expert 1 (darker = more weight), 75 steps:")
row = "".join(SHADES[min(int(p * len(SHADES)), len(SHADES) - 1)] for p in grid[:, 1])
print("  " + row)

res = es.switch_map(cfg, experts, data)
print("\nMAP expert sequence (same steps):")
print("  " + "".join(str(x) for x in res.sequence))
print(f"  joint mass of the MAP sequence: {es.to_bits(res.log_probability):.2f} bits")

marg = es.forward_marginal(model, experts, data).log_marginal
print(f"  data marginal:                  {es.to_bits(marg):.2f} bits")

ml = es.ml_estimate(experts, data)
flips = sum(1 for a, b in zip(ml, ml[1:]) if a != b)
map_flips = sum(1 for a, b in zip(res.sequence, res.sequence[1:]) if a != b)
print(f"\nper-step ML assignment switches {flips} times; "
      f"the MAP sequence switches {map_flips} times - the prior "
      f"smooths out one-off flukes.")
