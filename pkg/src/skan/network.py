"""Competitive layer of neurons sharing inputs and one global inhibitory counter."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dendrite import KernelState, kernel_step
from .soma import NeuronParams, NeuronState, soma_output, threshold_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InhibitParams:
    inh_max: int = 100
    inh_decay: int = 1

    def __post_init__(self):
        for name in ("inh_max", "inh_decay"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class NetworkParams:
    """Parameters of a layer.

    Args:
        neuron: parameters shared by every neuron.
        inhibit: global inhibition constants.
        gated: use the inhibition-gated output and threshold rules. With
            ``False`` each neuron follows the stand-alone rules and the
            inhibitory counter is tracked but never read.
    """

    neuron: NeuronParams = field(default_factory=NeuronParams)
    inhibit: InhibitParams = field(default_factory=InhibitParams)
    gated: bool = True


@dataclass(frozen=True)
class NetworkState:
    neurons: tuple[NeuronState, ...]
    inh: int = 0

    @property
    def n_neurons(self) -> int:
        return len(self.neurons)

    @property
    def n_inputs(self) -> int:
        return self.neurons[0].n_inputs if self.neurons else 0

    def dr_matrix(self) -> np.ndarray:
        return np.array([[k.dr for k in n.kernels] for n in self.neurons], dtype=np.int64)

    @classmethod
    def fresh(cls, dr, theta_init: int = 0) -> "NetworkState":
        """Idle network with an ``(n_neurons, n_inputs)`` matrix of step sizes."""
        return cls(tuple(NeuronState.fresh(row, theta_init) for row in np.asarray(dr)), 0)


def random_initial_dr(
    rng: np.random.Generator, n_neurons: int, n_inputs: int, base: int = 100, spread: int = 100
) -> np.ndarray:
    """Heterogeneous initial step sizes ``floor(base + spread * U[0, 1))``."""
    return (base + np.floor(spread * rng.random((n_neurons, n_inputs)))).astype(np.int64)


def check_inhibit_rule_of_thumb(inhibit: InhibitParams, dr_init) -> bool:
    """Log when ``inh_max / inh_decay`` differs from the smallest initial step size."""
    target = int(np.min(dr_init))
    ok = inhibit.inh_max // inhibit.inh_decay == target
    if not ok:
        log.info(
            "inh_max/inh_decay = %d differs from min initial dr = %d",
            inhibit.inh_max // inhibit.inh_decay,
            target,
        )
    return ok


def gated_soma_output(membrane: int, theta_prev: int, inh_prev: int, s_prev: int) -> int:
    """Start a spike only when uninhibited; an ongoing spike may continue."""
    if membrane > theta_prev and (inh_prev == 0 or s_prev == 1):
        return 1
    return 0


def inhibition_step(inh_prev: int, any_spike_t: int, params: InhibitParams) -> int:
    if any_spike_t:
        return params.inh_max
    if inh_prev > 0:
        return max(0, inh_prev - params.inh_decay)
    return 0


def gated_threshold_step(
    theta_prev: int,
    membrane_t: int,
    membrane_prev: int,
    inh_prev: int,
    s_t: int,
    s_prev: int,
    params: NeuronParams,
) -> int:
    if membrane_t > theta_prev and (inh_prev == 0 or s_prev == 1):
        return theta_prev + params.theta_rise
    if (membrane_t == 0 and membrane_prev > 0 and inh_prev == 0) or (s_t == 0 and s_prev == 1):
        return max(0, theta_prev - params.theta_fall)
    return theta_prev


def network_tick(state_prev: NetworkState, inputs, params: NetworkParams) -> NetworkState:
    """Advance the whole layer by one tick.

    Kernels update from each neuron's own previous output, outputs read the
    previous inhibition value, and the inhibitory counter is updated last from
    the fresh outputs.
    """
    np_ = params.neuron
    kp = np_.kernel
    inh_prev = state_prev.inh
    neurons = []
    any_spike = 0
    for n in state_prev.neurons:
        if len(inputs) != len(n.kernels):
            raise ValueError(f"expected {len(n.kernels)} input bits, got {len(inputs)}")
        kernels = tuple(kernel_step(k, u, n.s, kp) for k, u in zip(n.kernels, inputs))
        membrane = 0
        for k in kernels:
            membrane += k.r
        membrane_prev = 0
        for k in n.kernels:
            membrane_prev += k.r
        if params.gated:
            s = gated_soma_output(membrane, n.theta, inh_prev, n.s)
            theta = gated_threshold_step(n.theta, membrane, membrane_prev, inh_prev, s, n.s, np_)
        else:
            s = soma_output(membrane, n.theta)
            theta = threshold_step(n.theta, membrane, membrane_prev, np_)
        any_spike |= s
        neurons.append(NeuronState(kernels, theta, s))
    inh = inhibition_step(inh_prev, any_spike, params.inhibit)
    return NetworkState(tuple(neurons), inh)


def connection_count(n_inputs: int, n_neurons: int) -> int:
    """Wires in a layer: every input plus the inhibition in/out per neuron."""
    if n_inputs < 0 or n_neurons < 0:
        raise ValueError("counts must be non-negative")
    return (n_inputs + 2) * n_neurons


def count_connections(state: NetworkState) -> int:
    """Structural count for a built network: input synapses + 2 inhibition links each."""
    return sum(len(n.kernels) + 2 for n in state.neurons)


__all__ = [
    "InhibitParams",
    "NetworkParams",
    "NetworkState",
    "KernelState",
    "connection_count",
    "count_connections",
    "gated_soma_output",
    "gated_threshold_step",
    "inhibition_step",
    "network_tick",
    "random_initial_dr",
]
