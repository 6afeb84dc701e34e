"""Compare the reference and optimized engines on one long, sparse stream.

Both engines produce the same event log; the optimized one skips the idle
stretches between presentations, which is where nearly all the time goes.
"""

import time

import numpy as np

from skan.config import build_config
from skan.engine import run_optimized, run_reference
from skan.network import NetworkState, random_initial_dr
from skan.stimulus import NoiseSpec, make_schedule, random_patterns, render_stream

cfg = build_config()
rng = np.random.default_rng(0)
patterns = random_patterns(2, 4, cfg.PW, rng, cfg.min_separation)
schedule = make_schedule(cfg.T, 200, 2, rng)
stream = render_stream(schedule, patterns, NoiseSpec(), seed=0)
params = cfg.network_params(4)
state = NetworkState.fresh(random_initial_dr(rng, 2, 4), params.neuron.theta_init)

run_optimized(state, stream, params)  # compile once before timing
timings = {}
for name, fn in (("reference", run_reference), ("optimized", run_optimized)):
    t0 = time.perf_counter()
    final, trace = fn(state, stream, params)
    timings[name] = (time.perf_counter() - t0, final, trace)
    print(f"{name:9s}: {timings[name][0]:.3f} s, {len(trace.events)} events, "
          f"{trace.n_evaluated} of {stream.n_ticks} ticks evaluated")

(_, s_ref, t_ref), (_, s_opt, t_opt) = timings["reference"], timings["optimized"]
print("identical final state:", s_ref == s_opt)
print("first divergent tick:", t_ref.first_divergence(t_opt))
