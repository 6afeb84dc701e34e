"""Compiled engine with idle-span fast-forward.

Same tick semantics as the reference engine, written over flat integer arrays
and compiled with numba. When every kernel is idle with a zero accumulator, no
neuron is spiking, inhibition is zero and every threshold is non-negative, the
network is at a fixed point until the next input spike, so the loop jumps
straight to it. Anything else is evaluated tick by tick.
"""

from __future__ import annotations

import numba
import numpy as np

from ..dendrite import KernelState
from ..network import NetworkParams, NetworkState
from ..soma import NeuronState
from ..stimulus import Stream
from .reference import run_reference
from .trace import DenseTrace, RecordPolicy, TickTrace


class EquivalenceError(RuntimeError):
    """The optimized engine disagreed with the reference engine."""

    def __init__(self, tick: int | None, detail: str = ""):
        self.tick = tick
        msg = f"engines diverge at tick {tick}" if tick is not None else "engines diverge"
        super().__init__(f"{msg}{': ' + detail if detail else ''}")


def state_to_arrays(state: NetworkState):
    p = np.array([[k.p for k in n.kernels] for n in state.neurons], np.int64)
    r = np.array([[k.r for k in n.kernels] for n in state.neurons], np.int64)
    dr = np.array([[k.dr for k in n.kernels] for n in state.neurons], np.int64)
    theta = np.array([n.theta for n in state.neurons], np.int64)
    s = np.array([n.s for n in state.neurons], np.int64)
    inh = np.array([state.inh], np.int64)
    return p, r, dr, theta, s, inh


def arrays_to_state(p, r, dr, theta, s, inh) -> NetworkState:
    neurons = []
    for n in range(p.shape[0]):
        kernels = tuple(
            KernelState(int(p[n, c]), int(r[n, c]), int(dr[n, c])) for c in range(p.shape[1])
        )
        neurons.append(NeuronState(kernels, int(theta[n]), int(s[n])))
    return NetworkState(tuple(neurons), int(inh[0]))


@numba.njit(cache=True)
def _push(buf, n, tick, kind, neuron, channel, value):
    if n == buf.shape[0]:
        grown = np.empty((buf.shape[0] * 2, 5), np.int64)
        grown[:n] = buf
        buf = grown
    buf[n, 0] = tick
    buf[n, 1] = kind
    buf[n, 2] = neuron
    buf[n, 3] = channel
    buf[n, 4] = value
    return buf, n + 1


@numba.njit(cache=True)
def _run(p, r, dr, theta, s, inh, spike_ticks, spike_channels, onsets, first_presentation,
         t0, n_ticks, w, ddr, dr_max, dr_floor, clamp_peak, theta_rise, theta_fall,
         inh_max, inh_decay, gated, log_inputs, dense_on, d_p, d_r, d_dr, d_theta, d_s, d_inh):
    n_neurons, n_inputs = p.shape
    buf = np.empty((1024, 5), np.int64)
    ne = 0
    n_eval = 0
    si = 0
    oi = 0
    n_spk = spike_ticks.shape[0]
    n_on = onsets.shape[0]
    t_end = t0 + n_ticks
    u = np.zeros(n_inputs, np.int64)
    p_new = np.empty(n_inputs, np.int64)
    s_before = np.empty(n_neurons, np.int64)
    t = t0
    while t < t_end:
        idle = inh[0] == 0
        if idle:
            for n in range(n_neurons):
                if s[n] != 0 or theta[n] < 0:
                    idle = False
                    break
                for c in range(n_inputs):
                    if p[n, c] != 0 or r[n, c] != 0:
                        idle = False
                        break
                if not idle:
                    break
        if idle:
            nxt = spike_ticks[si] if si < n_spk else t_end
            if nxt > t:
                # fixed point until nxt: only onset markers and snapshots to emit
                while oi < n_on and onsets[oi] < nxt:
                    buf, ne = _push(buf, ne, onsets[oi], 0, -1, -1, first_presentation + oi)
                    for n in range(n_neurons):
                        buf, ne = _push(buf, ne, onsets[oi], 1, n, -1, theta[n])
                    oi += 1
                if dense_on:
                    for i in range(t - t0, nxt - t0):
                        for n in range(n_neurons):
                            for c in range(n_inputs):
                                d_p[i, n, c] = 0
                                d_r[i, n, c] = 0
                                d_dr[i, n, c] = dr[n, c]
                            d_theta[i, n] = theta[n]
                            d_s[i, n] = 0
                        d_inh[i] = 0
                t = nxt
                continue

        n_eval += 1
        if oi < n_on and onsets[oi] == t:
            buf, ne = _push(buf, ne, t, 0, -1, -1, first_presentation + oi)
            for n in range(n_neurons):
                buf, ne = _push(buf, ne, t, 1, n, -1, theta[n])
            oi += 1
        for c in range(n_inputs):
            u[c] = 0
        while si < n_spk and spike_ticks[si] == t:
            u[spike_channels[si]] = 1
            if log_inputs:
                buf, ne = _push(buf, ne, t, 2, -1, spike_channels[si], 1)
            si += 1

        inh_prev = inh[0]
        any_spike = 0
        for n in range(n_neurons):
            s_before[n] = s[n]
        for n in range(n_neurons):
            s_prev = s_before[n]
            mem_prev = 0
            mem = 0
            for c in range(n_inputs):
                pp = p[n, c]
                rp = r[n, c]
                mem_prev += rp
                # phase flag from previous phase and accumulator
                if (u[c] == 1 and pp == 0) or (pp == 1 and rp < w):
                    pn = 1
                elif (pp == 1 and rp >= w) or (pp == -1 and rp > 0):
                    pn = -1
                else:
                    pn = 0
                p_new[c] = pn
                # accumulator and slope from previous phase and output
                rn = rp
                d = dr[n, c]
                if pp == 1:
                    rn = rp + d
                    if s_prev == 1:
                        d += ddr
                elif pp == -1:
                    rn = rp - d
                    if s_prev == 1:
                        d -= ddr
                if rn < 0:
                    rn = 0
                elif clamp_peak and rn > w:
                    rn = w
                if d > dr_max:
                    d = dr_max
                elif d < dr_floor:
                    d = dr_floor
                r[n, c] = rn
                dr[n, c] = d
                mem += rn
            for c in range(n_inputs):
                if p_new[c] != p[n, c]:
                    buf, ne = _push(buf, ne, t, 3, n, c, p_new[c])
                p[n, c] = p_new[c]
            th = theta[n]
            if gated:
                sn = 1 if (mem > th and (inh_prev == 0 or s_prev == 1)) else 0
                if mem > th and (inh_prev == 0 or s_prev == 1):
                    th = th + theta_rise
                elif (mem == 0 and mem_prev > 0 and inh_prev == 0) or (sn == 0 and s_prev == 1):
                    th = th - theta_fall
                    if th < 0:
                        th = 0
            else:
                sn = 1 if mem > th else 0
                if mem > th:
                    th = th + theta_rise
                elif mem == 0 and mem_prev > 0:
                    th = th - theta_fall
                    if th < 0:
                        th = 0
            theta[n] = th
            s[n] = sn
            any_spike |= sn
        for n in range(n_neurons):
            if s[n] != s_before[n]:
                buf, ne = _push(buf, ne, t, 4 if s[n] == 1 else 5, n, -1, theta[n])
        if any_spike:
            inh[0] = inh_max
        elif inh_prev > 0:
            inh[0] = inh_prev - inh_decay
            if inh[0] < 0:
                inh[0] = 0
        else:
            inh[0] = 0
        if dense_on:
            i = t - t0
            for n in range(n_neurons):
                for c in range(n_inputs):
                    d_p[i, n, c] = p[n, c]
                    d_r[i, n, c] = r[n, c]
                    d_dr[i, n, c] = dr[n, c]
                d_theta[i, n] = theta[n]
                d_s[i, n] = s[n]
            d_inh[i] = inh[0]
        t += 1
    return buf[:ne].copy(), n_eval


def run_optimized(
    state: NetworkState,
    stream: Stream,
    params: NetworkParams,
    record: RecordPolicy = RecordPolicy(),
    self_check: bool = False,
) -> tuple[NetworkState, TickTrace]:
    """Run a stream with idle-span skipping.

    Args:
        self_check: also run the reference engine and raise
            :class:`EquivalenceError` naming the first divergent tick if the
            event logs or final states differ.
    """
    if stream.n_channels != state.n_inputs:
        raise ValueError(
            f"stream has {stream.n_channels} channels, network has {state.n_inputs} inputs"
        )
    p, r, dr, theta, s, inh = state_to_arrays(state)
    n_neurons, n_inputs = p.shape
    if record.dense:
        dense = DenseTrace.empty(stream.n_ticks, n_neurons, n_inputs)
    else:
        dense = DenseTrace.empty(0, n_neurons, n_inputs)
    kp = params.neuron.kernel
    events, n_eval = _run(
        p, r, dr, theta, s, inh,
        np.ascontiguousarray(stream.spike_ticks, np.int64),
        np.ascontiguousarray(stream.spike_channels, np.int64),
        np.ascontiguousarray(stream.onsets, np.int64),
        stream.first_presentation, stream.t0, stream.n_ticks,
        kp.w, kp.ddr, kp.dr_max, kp.dr_floor, kp.clamp_peak,
        params.neuron.theta_rise, params.neuron.theta_fall,
        params.inhibit.inh_max, params.inhibit.inh_decay, params.gated,
        record.inputs, record.dense,
        dense.p, dense.r, dense.dr, dense.theta, dense.s, dense.inh,
    )
    final = arrays_to_state(p, r, dr, theta, s, inh)
    trace = TickTrace(stream.t0, stream.n_ticks, events, dense if record.dense else None, n_eval)
    if self_check:
        ref_state, ref_trace = run_reference(state, stream, params, record)
        check_equivalent(final, trace, ref_state, ref_trace)
    return final, trace


def check_equivalent(state_a, trace_a, state_b, trace_b) -> None:
    """Raise :class:`EquivalenceError` unless both runs agree bit for bit."""
    tick = trace_a.first_divergence(trace_b)
    if tick is not None:
        raise EquivalenceError(tick, "event logs differ")
    if state_a != state_b:
        raise EquivalenceError(trace_a.t0 + trace_a.n_ticks - 1, "final states differ")
    if trace_a.dense is not None and trace_b.dense is not None:
        for name in ("p", "r", "dr", "theta", "s", "inh"):
            a, b = getattr(trace_a.dense, name), getattr(trace_b.dense, name)
            rows = np.flatnonzero(np.any((a != b).reshape(len(a), -1), axis=1))
            if rows.size:
                raise EquivalenceError(trace_a.t0 + int(rows[0]), f"dense {name} differs")
