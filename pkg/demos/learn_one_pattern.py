"""Train a single two-input neuron on one spike pattern and watch it settle.

Run with ``python demos/learn_one_pattern.py``. The neuron starts with random
kernel slopes; the printout shows the slopes and threshold drifting until the
neuron answers each presentation with one short pulse, then reads the learnt
inter-spike interval back out of the weights two ways.
"""

from skan.analysis import learnt_pattern_estimate, receptive_field_2in
from skan.config import build_config
from skan.experiments import RunSpec, simulate
from skan.stimulus import NoiseSpec

cfg = build_config(overrides={"seed": 3})
spec = RunSpec(key=(0,), n_neurons=1, n_inputs=2, n_patterns=1, pw=cfg.PW,
               noise=NoiseSpec(), n_presentations=300)
result = simulate(cfg, spec)
target = result.patterns[0].offsets
print(f"pattern offsets: {list(target)}  (ISI {target[1] - target[0]})")

print("\npresentation  rises  latency  width  theta")
for rec in result.records[::30] + result.records[-1:]:
    print(f"{rec.presentation:12d}  {rec.rises[0]:5d}  {rec.latency[0]:7d}"
          f"  {rec.width[0]:5d}  {rec.theta[0]:5d}")

neuron = result.state.neurons[0]
dr = [k.dr for k in neuron.kernels]
estimate = learnt_pattern_estimate(dr, cfg.w)
rf = receptive_field_2in(cfg.neuron_params(2), dr, neuron.theta, cfg.PW)
print(f"\nfinal slopes {dr}, threshold {neuron.theta}")
print(f"ISI from slopes: {estimate[1] - estimate[0]:.2f}")
print(f"ISI from receptive field peak: {rf.argmax} (responds over {rf.boundaries})")
