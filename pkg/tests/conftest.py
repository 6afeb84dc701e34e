import numpy as np
import pytest
from hypothesis import settings

from skan.dendrite import KernelParams
from skan.network import InhibitParams, NetworkParams, NetworkState, random_initial_dr
from skan.soma import NeuronParams
from skan.stimulus import Stream

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


def default_params(n_inputs: int, theta_init: int = 0, gated: bool = True) -> NetworkParams:
    np_ = NeuronParams.default(n_inputs)
    return NetworkParams(
        NeuronParams(np_.kernel, np_.theta_rise, np_.theta_fall, theta_init),
        InhibitParams(), gated,
    )


def random_case(seed: int, max_ticks: int = 100_000, min_ticks: int = 10):
    """A random topology, parameter set, initial state and stream for engine fuzzing."""
    rng = np.random.default_rng(seed)
    n_neurons = int(rng.integers(1, 5))
    n_inputs = int(rng.integers(1, 9))
    n_ticks = int(np.exp(rng.uniform(np.log(min_ticks), np.log(max_ticks))))
    if rng.random() < 0.5:
        kp = KernelParams()
    else:
        w = int(rng.integers(50, 5000))
        dr_max = int(rng.integers(1, w + 1))
        kp = KernelParams(w, int(rng.integers(1, 4)), dr_max, int(rng.integers(1, dr_max + 1)),
                          bool(rng.random() < 0.7))
    params = NetworkParams(
        NeuronParams(kp, int(rng.integers(1, 400)), int(rng.integers(1, 1000)),
                     int(rng.integers(0, n_inputs * kp.w + 1))),
        InhibitParams(int(rng.integers(1, 200)), int(rng.integers(1, 5))),
        bool(rng.random() < 0.8),
    )
    lo = max(1, kp.dr_floor)
    dr = rng.integers(lo, kp.dr_max + 1, (n_neurons, n_inputs))
    state = NetworkState.fresh(dr, params.neuron.theta_init)
    # spike density from very sparse (idle-heavy) to dense
    density = float(np.exp(rng.uniform(np.log(1e-4), np.log(0.3))))
    n_spikes = rng.binomial(n_ticks * n_inputs, density)
    ticks = rng.integers(0, n_ticks, n_spikes)
    chans = rng.integers(0, n_inputs, n_spikes)
    period = int(rng.integers(20, 500))
    t0 = int(rng.integers(0, 1000))
    onsets = np.arange(0, n_ticks, period) + t0
    stream = Stream.from_events(n_ticks, n_inputs, ticks + t0, chans, t0, onsets)
    return state, stream, params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
