"""Dense tick-by-tick engine. Every tick goes through ``network_tick``; this is the
semantic oracle the optimized engine is checked against."""

from __future__ import annotations

import numpy as np

from ..network import NetworkParams, NetworkState, network_tick
from ..stimulus import Stream
from .trace import FALL, INPUT, ONSET, PHASE, RISE, THETA, DenseTrace, RecordPolicy, TickTrace


def run_reference(
    state: NetworkState,
    stream: Stream,
    params: NetworkParams,
    record: RecordPolicy = RecordPolicy(),
) -> tuple[NetworkState, TickTrace]:
    n_neurons, n_inputs = state.n_neurons, state.n_inputs
    if stream.n_channels != n_inputs:
        raise ValueError(f"stream has {stream.n_channels} channels, network has {n_inputs} inputs")
    by_tick: dict[int, list[int]] = {}
    for t, c in zip(stream.spike_ticks.tolist(), stream.spike_channels.tolist()):
        by_tick.setdefault(t, []).append(c)
    onsets = {t: stream.first_presentation + k for k, t in enumerate(stream.onsets.tolist())}
    dense = DenseTrace.empty(stream.n_ticks, n_neurons, n_inputs) if record.dense else None
    events: list[tuple[int, int, int, int, int]] = []
    zeros = (0,) * n_inputs

    for i in range(stream.n_ticks):
        t = stream.t0 + i
        if t in onsets:
            events.append((t, ONSET, -1, -1, onsets[t]))
            for n, neuron in enumerate(state.neurons):
                events.append((t, THETA, n, -1, neuron.theta))
        spiking = by_tick.get(t)
        if spiking:
            bits = list(zeros)
            for c in spiking:
                bits[c] = 1
                if record.inputs:
                    events.append((t, INPUT, -1, c, 1))
        else:
            bits = zeros
        new = network_tick(state, bits, params)
        for n, (a, b) in enumerate(zip(state.neurons, new.neurons)):
            for c, (ka, kb) in enumerate(zip(a.kernels, b.kernels)):
                if ka.p != kb.p:
                    events.append((t, PHASE, n, c, kb.p))
        for n, (a, b) in enumerate(zip(state.neurons, new.neurons)):
            if a.s != b.s:
                events.append((t, RISE if b.s else FALL, n, -1, b.theta))
        state = new
        if dense is not None:
            for n, neuron in enumerate(state.neurons):
                for c, k in enumerate(neuron.kernels):
                    dense.p[i, n, c] = k.p
                    dense.r[i, n, c] = k.r
                    dense.dr[i, n, c] = k.dr
                dense.theta[i, n] = neuron.theta
                dense.s[i, n] = neuron.s
            dense.inh[i] = state.inh

    ev = np.array(events, dtype=np.int64).reshape(-1, 5)
    return state, TickTrace(stream.t0, stream.n_ticks, ev, dense, stream.n_ticks)
