"""Run traces: a sparse event log plus optional dense per-tick snapshots.

The event log is an ``(n, 5)`` int64 array with columns
``tick, kind, neuron, channel, value``. Within one tick events appear in the
order ONSET, THETA (by neuron), INPUT (by channel), PHASE (by neuron, then
channel), RISE/FALL (by neuron). ``-1`` marks an unused neuron/channel column.

Binary layout (all little-endian)::

    offset  size  field
    0       4     magic b"SKEV"
    4       2     format version (uint16, currently 1)
    6       2     number of columns (uint16, always 5)
    8       8     t0 (int64)
    16      8     n_ticks (int64)
    24      8     n_events (uint64)
    32      40*n  events, row-major int64
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

ONSET, THETA, INPUT, PHASE, RISE, FALL = range(6)
KIND_NAMES = {ONSET: "onset", THETA: "theta", INPUT: "input", PHASE: "phase", RISE: "rise", FALL: "fall"}

MAGIC = b"SKEV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHqqQ")


@dataclass(frozen=True)
class RecordPolicy:
    """What a run keeps besides the event log.

    Args:
        dense: keep per-tick snapshots of every state variable.
        inputs: log every input spike as an INPUT event.
    """

    dense: bool = False
    inputs: bool = True


@dataclass
class DenseTrace:
    """Per-tick snapshots; row ``i`` is the state at tick ``t0 + i``."""

    p: np.ndarray  # (n_ticks, n_neurons, n_inputs)
    r: np.ndarray
    dr: np.ndarray
    theta: np.ndarray  # (n_ticks, n_neurons)
    s: np.ndarray
    inh: np.ndarray  # (n_ticks,)

    @classmethod
    def empty(cls, n_ticks: int, n_neurons: int, n_inputs: int) -> "DenseTrace":
        shape3 = (n_ticks, n_neurons, n_inputs)
        return cls(
            np.zeros(shape3, np.int64),
            np.zeros(shape3, np.int64),
            np.zeros(shape3, np.int64),
            np.zeros((n_ticks, n_neurons), np.int64),
            np.zeros((n_ticks, n_neurons), np.int64),
            np.zeros(n_ticks, np.int64),
        )

    @property
    def membrane(self) -> np.ndarray:
        return self.r.sum(axis=2)

    def __eq__(self, other):
        if not isinstance(other, DenseTrace):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("p", "r", "dr", "theta", "s", "inh")
        )


@dataclass
class TickTrace:
    t0: int
    n_ticks: int
    events: np.ndarray = field(default_factory=lambda: np.zeros((0, 5), np.int64))
    dense: DenseTrace | None = None
    n_evaluated: int = 0

    def of_kind(self, kind: int) -> np.ndarray:
        return self.events[self.events[:, 1] == kind]

    def same_events(self, other: "TickTrace") -> bool:
        return np.array_equal(self.events, other.events)

    def first_divergence(self, other: "TickTrace") -> int | None:
        """Tick of the first differing event, or ``None`` when the logs agree."""
        a, b = self.events, other.events
        n = min(len(a), len(b))
        diff = np.flatnonzero(np.any(a[:n] != b[:n], axis=1))
        if diff.size:
            i = diff[0]
            return int(min(a[i, 0], b[i, 0]))
        if len(a) != len(b):
            longer = a if len(a) > len(b) else b
            return int(longer[n, 0])
        return None

    def to_csv(self, path) -> None:
        """Write ``tick,entity,variable,value`` rows.

        Uses the dense snapshots when present, otherwise the event log.
        """
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tick", "entity", "variable", "value"])
            if self.dense is None:
                for tick, kind, n, c, v in self.events.tolist():
                    if c >= 0 and n >= 0:
                        entity = f"n{n}.c{c}"
                    elif n >= 0:
                        entity = f"n{n}"
                    elif c >= 0:
                        entity = f"c{c}"
                    else:
                        entity = "net"
                    w.writerow([tick, entity, KIND_NAMES[kind], v])
                return
            d = self.dense
            _, n_neurons, n_inputs = d.r.shape
            for i in range(self.n_ticks):
                tick = self.t0 + i
                for n in range(n_neurons):
                    for c in range(n_inputs):
                        ent = f"n{n}.c{c}"
                        w.writerow([tick, ent, "p", int(d.p[i, n, c])])
                        w.writerow([tick, ent, "r", int(d.r[i, n, c])])
                        w.writerow([tick, ent, "dr", int(d.dr[i, n, c])])
                    w.writerow([tick, f"n{n}", "theta", int(d.theta[i, n])])
                    w.writerow([tick, f"n{n}", "s", int(d.s[i, n])])
                w.writerow([tick, "net", "inh", int(d.inh[i])])

    def write_binary(self, path) -> None:
        ev = np.ascontiguousarray(self.events, dtype="<i8")
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, 5, self.t0, self.n_ticks, len(ev)))
            fh.write(ev.tobytes())


def read_binary(path) -> TickTrace:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError("truncated event log header")
        magic, version, ncols, t0, n_ticks, n_events = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION or ncols != 5:
            raise ValueError(f"unsupported event log version {version} / {ncols} columns")
        body = fh.read()
    if len(body) != n_events * 5 * 8:
        raise ValueError("event log body length does not match header")
    events = np.frombuffer(body, dtype="<i8").reshape(n_events, 5).astype(np.int64)
    return TickTrace(t0, n_ticks, events)


def events_from_dense(dense: DenseTrace, t0: int, stream=None, prev=None) -> np.ndarray:
    """Rebuild the event log from dense snapshots.

    Args:
        dense: per-tick snapshots of a run.
        t0: tick of the first snapshot row.
        stream: the input stream, for ONSET/THETA/INPUT events.
        prev: ``(p, s, theta)`` arrays of the state before ``t0``; defaults
            to idle with the first row's threshold unknown (THETA skipped).
    """
    n_ticks, n_neurons, n_inputs = dense.p.shape
    onsets = {}
    inputs = {}
    if stream is not None:
        for k, t in enumerate(stream.onsets.tolist()):
            onsets[t] = stream.first_presentation + k
        for t, c in zip(stream.spike_ticks.tolist(), stream.spike_channels.tolist()):
            inputs.setdefault(t, []).append(c)
    if prev is None:
        p_prev = np.zeros((n_neurons, n_inputs), np.int64)
        s_prev = np.zeros(n_neurons, np.int64)
        theta_prev = None
    else:
        p_prev, s_prev, theta_prev = (np.asarray(x, np.int64) for x in prev)
    rows = []
    for i in range(n_ticks):
        t = t0 + i
        th_before = theta_prev if i == 0 else dense.theta[i - 1]
        if t in onsets:
            rows.append((t, ONSET, -1, -1, onsets[t]))
            if th_before is not None:
                for n in range(n_neurons):
                    rows.append((t, THETA, n, -1, int(th_before[n])))
        for c in inputs.get(t, []):
            rows.append((t, INPUT, -1, c, 1))
        p_now = dense.p[i]
        for n, c in zip(*np.nonzero(p_now != p_prev)):
            rows.append((t, PHASE, int(n), int(c), int(p_now[n, c])))
        for n in range(n_neurons):
            if dense.s[i, n] != s_prev[n]:
                rows.append((t, RISE if dense.s[i, n] else FALL, n, -1, int(dense.theta[i, n])))
        p_prev, s_prev = p_now, dense.s[i]
    return np.array(rows, dtype=np.int64).reshape(-1, 5)
