"""Post-processing of run traces: receptive fields, learnt-pattern estimates,
per-presentation records, classification/convergence scoring and pulse-width
statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dendrite import IDLE, KernelState, kernel_step
from .engine.trace import FALL, INPUT, ONSET, RISE, THETA, TickTrace
from .soma import NeuronParams, threshold_step


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ReceptiveField:
    """Receptive field over inter-spike intervals ``tau = t_channel1 - t_channel0``.

    ``argmax`` and ``boundaries`` are ``None`` when no interval elicits a spike.
    ``boundaries`` are the nearest zero-valued intervals on either side of the
    argmax (the sweep edge when the field never drops to zero on that side).
    """

    taus: np.ndarray
    values: np.ndarray
    argmax: int | None
    boundaries: tuple[int, int] | None

    def value(self, tau: int) -> int:
        i = np.searchsorted(self.taus, tau)
        if i < len(self.taus) and self.taus[i] == tau:
            return int(self.values[i])
        return 0

    def to_csv(self, path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(header)
            w = csv.writer(fh)
            w.writerow(["tau", "rf"])
            for t, v in zip(self.taus.tolist(), self.values.tolist()):
                w.writerow([t, v])


def _presentation_rf(dr, theta, tau, params: NeuronParams, theta_mode: str) -> int:
    """Excess of membrane over threshold summed across one frozen-slope presentation."""
    kp = params.kernel
    t_spike = (0, tau) if tau >= 0 else (-tau, 0)
    kernels = [KernelState(IDLE, 0, int(d)) for d in dr]
    th = int(theta)
    membrane_prev = 0
    total = 0
    t = 0
    last = max(t_spike)
    while True:
        bits = [1 if t == ts else 0 for ts in t_spike]
        # s_prev = 0 keeps the slopes frozen
        kernels = [kernel_step(k, u, 0, kp) for k, u in zip(kernels, bits)]
        membrane = sum(k.r for k in kernels)
        if membrane > th:
            total += membrane - th
        if theta_mode == "evolving":
            th = threshold_step(th, membrane, membrane_prev, params)
        membrane_prev = membrane
        if t > last and all(k.p == IDLE for k in kernels):
            return total
        t += 1


def receptive_field_2in(
    params: NeuronParams, dr: Sequence[int], theta: int, pw: int, theta_mode: str = "frozen"
) -> ReceptiveField:
    """Sweep every interval in ``[-pw, pw]`` on a 2-input snapshot.

    Slopes never adapt during the sweep. With ``theta_mode="frozen"`` the
    threshold is also held; ``"evolving"`` lets it follow the stand-alone
    threshold rule within each swept presentation.
    """
    if len(dr) != 2:
        raise UnsupportedDimensionError(f"receptive field sweep needs 2 inputs, got {len(dr)}")
    if theta_mode not in ("frozen", "evolving"):
        raise ValueError(f"unknown theta_mode {theta_mode!r}")
    taus = np.arange(-pw, pw + 1)
    values = np.array([_presentation_rf(dr, theta, int(t), params, theta_mode) for t in taus],
                      dtype=np.int64)
    if not values.any():
        return ReceptiveField(taus, values, None, None)
    i = int(np.argmax(values))  # first maximum = lowest tau on ties
    lo = i
    while lo > 0 and values[lo] > 0:
        lo -= 1
    hi = i
    while hi < len(values) - 1 and values[hi] > 0:
        hi += 1
    return ReceptiveField(taus, values, int(taus[i]), (int(taus[lo]), int(taus[hi])))


def learnt_pattern_estimate(dr: Sequence[int], w: int) -> np.ndarray:
    """Spike offsets that make every kernel peak at the same tick, mean-centred.

    A kernel started at offset ``o`` peaks at ``o + ceil(w / dr)``, so aligned
    peaks require ``o_i = C - ceil(w / dr_i)``.
    """
    dr = np.asarray(dr, dtype=np.int64)
    if np.any(dr < 1):
        raise ValueError("step sizes must be >= 1")
    rise = -(-w // dr)
    offsets = -rise.astype(float)
    return offsets - offsets.mean()


def rms_error(estimate: Sequence[float], target: Sequence[float]) -> float:
    """Translation-invariant RMS distance between two spike-offset vectors."""
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(target, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("need at least two channels")
    d = (a - a.mean()) - (b - b.mean())
    return float(np.sqrt(np.mean(d * d)))


@dataclass(frozen=True)
class RunRecord:
    """What every neuron did during one presentation.

    Per-neuron tuples: ``rises`` counts output rising edges inside the
    presentation window, ``latency`` is ticks from the last input spike at or
    before the first rising edge (``-1`` if no response), ``width`` is the
    total spiking ticks of the pulses that started in the window and
    ``theta`` the threshold at onset.
    """

    presentation: int
    pattern: int
    onset: int
    rises: tuple[int, ...]
    latency: tuple[int, ...]
    width: tuple[int, ...]
    theta: tuple[int, ...]

    @property
    def responders(self) -> tuple[int, ...]:
        return tuple(n for n, k in enumerate(self.rises) if k > 0)


def presentation_records(
    events: np.ndarray | TickTrace, n_neurons: int, labels: Sequence[int] | None = None,
    end_tick: int | None = None,
) -> list[RunRecord]:
    """Split an event log into per-presentation records.

    Args:
        events: event array (or a trace) containing ONSET markers.
        n_neurons: neurons in the run.
        labels: pattern index per presentation number; ``-1`` when omitted.
        end_tick: tick at which still-open pulses are cut; defaults to the
            trace end or the last event + 1.
    """
    if isinstance(events, TickTrace):
        if end_tick is None:
            end_tick = events.t0 + events.n_ticks
        events = events.events
    ev = np.asarray(events)
    if end_tick is None:
        end_tick = int(ev[:, 0].max()) + 1 if len(ev) else 0
    kind = ev[:, 1]
    on = ev[kind == ONSET]
    on_ticks = on[:, 0]
    on_idx = on[:, 4]
    th = ev[kind == THETA]
    in_ticks = ev[kind == INPUT, 0]
    n_pres = len(on_ticks)
    rises = np.zeros((n_pres, n_neurons), np.int64)
    first_rise = np.full((n_pres, n_neurons), -1, np.int64)
    width = np.zeros((n_pres, n_neurons), np.int64)
    for n in range(n_neurons):
        r_t = ev[(kind == RISE) & (ev[:, 2] == n), 0]
        f_t = ev[(kind == FALL) & (ev[:, 2] == n), 0]
        j = np.searchsorted(f_t, r_t, side="right")
        ends = np.where(j < len(f_t), f_t[np.minimum(j, len(f_t) - 1)] if len(f_t) else end_tick,
                        end_tick)
        k = np.searchsorted(on_ticks, r_t, side="right") - 1
        for rt, e, kk in zip(r_t.tolist(), np.broadcast_to(ends, r_t.shape).tolist(), k.tolist()):
            if kk < 0:
                continue
            rises[kk, n] += 1
            width[kk, n] += e - rt
            if first_rise[kk, n] < 0:
                first_rise[kk, n] = rt
    theta = np.zeros((n_pres, n_neurons), np.int64)
    if len(th):
        for n in range(n_neurons):
            rows = th[th[:, 2] == n]
            pos = np.searchsorted(rows[:, 0], on_ticks)
            ok = pos < len(rows)
            theta[ok, n] = rows[pos[ok], 4]
    records = []
    for k in range(n_pres):
        lat = []
        for n in range(n_neurons):
            rt = first_rise[k, n]
            if rt < 0:
                lat.append(-1)
                continue
            i = np.searchsorted(in_ticks, rt, side="right") - 1
            last_in = in_ticks[i] if i >= 0 and in_ticks[i] >= on_ticks[k] else on_ticks[k]
            lat.append(int(rt - last_in))
        p = int(on_idx[k])
        label = int(labels[p]) if labels is not None else -1
        records.append(RunRecord(p, label, int(on_ticks[k]), tuple(rises[k].tolist()),
                                 tuple(lat), tuple(width[k].tolist()), tuple(theta[k].tolist())))
    return records


def write_records_csv(records: Sequence[RunRecord], path, header: str | None = None) -> None:
    """``presentation,pattern,neuron,latency,width,theta`` with one row per neuron."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header)
        w = csv.writer(fh)
        w.writerow(["presentation", "pattern", "neuron", "rises", "latency", "width", "theta"])
        for rec in records:
            for n in range(len(rec.rises)):
                w.writerow([rec.presentation, rec.pattern, n, rec.rises[n], rec.latency[n],
                            rec.width[n], rec.theta[n]])


@dataclass(frozen=True)
class Convergence:
    converged: bool
    index: int | None
    mapping: dict[int, int]


def _correct(rec: RunRecord) -> int | None:
    """Responding neuron if exactly one neuron spiked exactly once, else None."""
    resp = [n for n, k in enumerate(rec.rises) if k]
    if len(resp) == 1 and rec.rises[resp[0]] == 1:
        return resp[0]
    return None


def classify_and_detect_convergence(records: Sequence[RunRecord], window: int = 20) -> Convergence:
    """Find the first run of ``window`` consecutive correctly classified presentations.

    A presentation is correct when exactly one neuron responds, with a single
    rising edge. The run also needs one consistent neuron/pattern pairing in
    both directions. ``index`` is the position (in ``records``) of the last
    presentation of the first such run.
    """
    winners = [_correct(r) for r in records]
    for end in range(window - 1, len(records)):
        lo = end - window + 1
        if any(winners[i] is None for i in range(lo, end + 1)):
            continue
        n2p: dict[int, int] = {}
        p2n: dict[int, int] = {}
        ok = True
        for i in range(lo, end + 1):
            n, k = winners[i], records[i].pattern
            if n2p.setdefault(n, k) != k or p2n.setdefault(k, n) != n:
                ok = False
                break
        if ok:
            return Convergence(True, end, dict(sorted(n2p.items())))
    return Convergence(False, None, {})


def not_converged_curve(indices: Sequence[int | None], n_presentations: int) -> np.ndarray:
    """Fraction of runs not yet converged after each presentation count ``1..n``."""
    idx = np.array([np.inf if i is None else i for i in indices], dtype=float)
    x = np.arange(1, n_presentations + 1)
    # a run converged at record index i has converged once i + 1 presentations are seen
    return (idx[None, :] + 1 > x[:, None]).mean(axis=1)


@dataclass(frozen=True)
class PulseWidthStats:
    width: np.ndarray
    running_mean: np.ndarray
    envelope: np.ndarray


def pulse_width_stats(records: Sequence[RunRecord], window: int = 50, neuron: int = 0) -> PulseWidthStats:
    """Per-presentation width of one neuron, trailing mean and trailing max envelope."""
    widths = np.array([r.width[neuron] for r in records], dtype=float)
    n = len(widths)
    mean = np.empty(n)
    env = np.empty(n)
    csum = np.concatenate([[0.0], np.cumsum(widths)])
    for i in range(n):
        lo = max(0, i - window + 1)
        mean[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
        env[i] = widths[lo:i + 1].max()
    return PulseWidthStats(widths, mean, env)


def selection_outcome(records: Sequence[RunRecord], half_index: int, neuron: int = 0) -> str:
    """Which of patterns 0 (x) and 1 (y) a neuron selected in the scoring half.

    Returns ``"x"`` or ``"y"`` when the neuron responded to every presentation
    of exactly one pattern and to none of the other, ``"both"`` when it
    responded to both patterns, and ``"neither"`` when it responded to no
    pattern or missed a presentation of the pattern it had selected.
    """
    scored = [r for r in records[half_index:] if r.pattern in (0, 1)]
    hits = {0: 0, 1: 0}
    seen = {0: 0, 1: 0}
    for r in scored:
        seen[r.pattern] += 1
        if r.rises[neuron]:
            hits[r.pattern] += 1
    if hits[0] and hits[1]:
        return "both"
    for k, name in ((0, "x"), (1, "y")):
        if hits[k]:
            return name if hits[k] == seen[k] else "neither"
    return "neither"
