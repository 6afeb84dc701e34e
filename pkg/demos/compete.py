"""Two neurons, two patterns: lateral inhibition splits the work.

Each neuron should end up owning exactly one pattern. The script prints who
answered what during the last few presentations and whether the run met the
convergence rule (a one-to-one mapping held for 20 presentations in a row).
"""

from skan.config import build_config
from skan.experiments import RunSpec, simulate
from skan.stimulus import NoiseSpec

cfg = build_config(overrides={"seed": 7})
for sigma in (0.0, 1.0):
    spec = RunSpec(key=(1,), n_neurons=2, n_inputs=2, n_patterns=2, pw=cfg.PW,
                   noise=NoiseSpec(jitter_sigma=sigma), n_presentations=400)
    result = simulate(cfg, spec)
    print(f"jitter sigma={sigma}: converged={result.converged} "
          f"at presentation {result.convergence_index}")
    for rec in result.records[-6:]:
        print(f"  pattern {rec.pattern} -> neurons {rec.responders}")
