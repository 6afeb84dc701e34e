"""Spatio-temporal spike patterns, their corruption, and rendering into tick streams.

Random streams are split per presentation and per channel: the generator for
channel ``c`` of presentation ``k`` under seed ``s`` is
``PCG64(SeedSequence(s, spawn_key=(k, c)))``. A presentation can therefore be
regenerated on its own, in any order, on any platform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Invalid stimulus or experiment configuration."""


@dataclass(frozen=True)
class PatternSpec:
    """One target spike per channel at ``offsets[i]`` ticks after onset."""

    offsets: tuple[int, ...]
    pw: int

    def __post_init__(self):
        if self.pw < 0:
            raise ConfigurationError(f"pattern width must be >= 0, got {self.pw}")
        bad = [o for o in self.offsets if not 0 <= o <= self.pw]
        if bad:
            raise ConfigurationError(f"offsets {bad} outside [0, {self.pw}]")

    @property
    def n_channels(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption model.

    Args:
        jitter_sigma: standard deviation of the Gaussian timing jitter, ticks.
        p_signal: survival probability of each target spike.
        poisson_rate: expected noise spikes per channel per presentation period.
    """

    jitter_sigma: float = 0.0
    p_signal: float = 1.0
    poisson_rate: float = 0.0

    def __post_init__(self):
        for name in ("jitter_sigma", "p_signal", "poisson_rate"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {v}")
        if self.p_signal > 1:
            raise ConfigurationError(f"p_signal must be <= 1, got {self.p_signal}")

    @property
    def noiseless(self) -> bool:
        return self.jitter_sigma == 0 and self.p_signal == 1 and self.poisson_rate == 0

    @classmethod
    def from_snr(cls, signal: float, noise: float, jitter_sigma: float = 0.0) -> "NoiseSpec":
        """Signal:noise ratio at a constant mean rate of one spike per channel per period."""
        total = signal + noise
        return cls(jitter_sigma, signal / total, noise / total)


@dataclass(frozen=True)
class Schedule:
    period_T: int
    sequence: tuple[int, ...]
    probabilities: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.period_T < 1:
            raise ConfigurationError(f"period_T must be positive, got {self.period_T}")

    @property
    def n_ticks(self) -> int:
        return len(self.sequence) * self.period_T


def make_schedule(
    period_T: int,
    n_presentations: int,
    n_patterns: int,
    rng: np.random.Generator,
    probabilities: Sequence[float] | None = None,
) -> Schedule:
    """Random presentation order, uniform unless ``probabilities`` is given."""
    if probabilities is not None:
        p = np.asarray(probabilities, dtype=float)
        if len(p) != n_patterns or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ConfigurationError(f"invalid pattern probabilities {probabilities!r}")
        seq = rng.choice(n_patterns, size=n_presentations, p=p)
        probabilities = tuple(float(x) for x in p)
    else:
        seq = rng.integers(0, n_patterns, n_presentations)
    return Schedule(period_T, tuple(int(i) for i in seq), probabilities)


def random_pattern(n_channels: int, pw: int, rng: np.random.Generator) -> PatternSpec:
    if n_channels < 1:
        raise ConfigurationError("need at least one channel")
    offsets = rng.integers(0, pw + 1, n_channels)
    return PatternSpec(tuple(int(o) for o in offsets), pw)


def pattern_separation(a: PatternSpec, b: PatternSpec) -> int:
    """Largest disagreement in relative spike timing between two patterns.

    Equals ``max_ij |(a_i - a_j) - (b_i - b_j)|``, i.e. the range of ``a - b``;
    zero when one pattern is a time shift of the other.
    """
    d = np.asarray(a.offsets) - np.asarray(b.offsets)
    return int(d.max() - d.min())


def random_patterns(
    n_patterns: int,
    n_channels: int,
    pw: int,
    rng: np.random.Generator,
    min_separation: int = 0,
    max_tries: int = 10000,
) -> list[PatternSpec]:
    """Draw a set of patterns, redrawing the set until every pair is at least
    ``min_separation`` ticks apart (see :func:`pattern_separation`)."""
    for _ in range(max_tries):
        pats = [random_pattern(n_channels, pw, rng) for _ in range(n_patterns)]
        if n_channels < 2 or min_separation <= 0:
            return pats
        if all(
            pattern_separation(pats[i], pats[j]) >= min_separation
            for i in range(n_patterns)
            for j in range(i)
        ):
            return pats
    raise ConfigurationError(
        f"could not draw {n_patterns} patterns {min_separation} ticks apart with PW={pw}"
    )


def channel_rng(seed: int, presentation: int, channel: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(presentation, channel)))
    )


def corrupt_presentation(
    pattern: PatternSpec,
    noise: NoiseSpec,
    period_T: int,
    rng: np.random.Generator | Sequence[np.random.Generator],
) -> list[list[int]]:
    """Spike times of one noisy presentation, relative to its onset.

    Per channel, in this draw order: target survival, jitter of the surviving
    spike (rounded to the nearest tick and clamped to the window), then
    Bernoulli-per-tick noise with probability ``poisson_rate / period_T``.
    ``rng`` is one generator shared by all channels or one per channel.
    """
    if isinstance(rng, np.random.Generator):
        rngs = [rng] * pattern.n_channels
    else:
        rngs = list(rng)
    out = []
    p_tick = noise.poisson_rate / period_T
    for offset, g in zip(pattern.offsets, rngs):
        times = []
        if noise.p_signal >= 1 or g.random() < noise.p_signal:
            t = offset
            if noise.jitter_sigma > 0:
                t += int(np.rint(g.normal(0.0, noise.jitter_sigma)))
            times.append(min(max(t, 0), period_T - 1))
        if p_tick > 0:
            times.extend(int(x) for x in np.flatnonzero(g.random(period_T) < p_tick))
        times.sort()
        out.append(times)
    return out


@dataclass(frozen=True)
class Stream:
    """Sparse tick stream covering absolute ticks ``[t0, t0 + n_ticks)``.

    Spikes are stored as parallel arrays sorted by ``(tick, channel)`` without
    duplicates. ``onsets`` are presentation onset ticks and ``labels`` the
    pattern index shown at each onset (``-1`` when unknown).
    """

    n_ticks: int
    n_channels: int
    spike_ticks: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    spike_channels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    t0: int = 0
    onsets: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    first_presentation: int = 0

    @classmethod
    def from_events(cls, n_ticks, n_channels, ticks, channels, t0=0, onsets=(), labels=None,
                    first_presentation=0) -> "Stream":
        ticks = np.asarray(ticks, dtype=np.int64).ravel()
        channels = np.asarray(channels, dtype=np.int64).ravel()
        if ticks.size:
            if ticks.min() < t0 or ticks.max() >= t0 + n_ticks:
                raise ConfigurationError("spike tick outside stream window")
            if channels.min() < 0 or channels.max() >= n_channels:
                raise ConfigurationError("spike channel out of range")
            key = np.unique((ticks - t0) * n_channels + channels)
            ticks = key // n_channels + t0
            channels = key % n_channels
        onsets = np.asarray(onsets, dtype=np.int64).ravel()
        if labels is None:
            labels = np.full(onsets.size, -1, dtype=np.int64)
        return cls(int(n_ticks), int(n_channels), ticks, channels, int(t0), onsets,
                   np.asarray(labels, dtype=np.int64).ravel(), int(first_presentation))

    @classmethod
    def from_dense(cls, bits, t0: int = 0, onsets=()) -> "Stream":
        bits = np.asarray(bits)
        ticks, channels = np.nonzero(bits)
        return cls.from_events(bits.shape[0], bits.shape[1], ticks + t0, channels, t0, onsets)

    def to_dense(self) -> np.ndarray:
        bits = np.zeros((self.n_ticks, self.n_channels), dtype=np.uint8)
        bits[self.spike_ticks - self.t0, self.spike_channels] = 1
        return bits

    @property
    def n_spikes(self) -> int:
        return int(self.spike_ticks.size)

    def to_csv(self, path, dense: bool = False) -> None:
        """Write ``tick,channel,bit`` rows; only the 1-bits unless ``dense``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tick", "channel", "bit"])
            if dense:
                bits = self.to_dense()
                for t in range(self.n_ticks):
                    for c in range(self.n_channels):
                        w.writerow([t + self.t0, c, int(bits[t, c])])
            else:
                for t, c in zip(self.spike_ticks, self.spike_channels):
                    w.writerow([int(t), int(c), 1])


def render_stream(
    schedule: Schedule,
    patterns: Sequence[PatternSpec],
    noise: NoiseSpec,
    seed: int,
    start: int = 0,
    stop: int | None = None,
) -> Stream:
    """Render presentations ``start .. stop - 1`` of a schedule.

    Presentation ``k`` occupies absolute ticks ``[k*T, (k+1)*T)``; rendering a
    sub-range gives exactly the slice of the full rendering.
    """
    T = schedule.period_T
    stop = len(schedule.sequence) if stop is None else stop
    if not patterns:
        raise ConfigurationError("no patterns")
    n_channels = patterns[0].n_channels
    if any(p.n_channels != n_channels for p in patterns):
        raise ConfigurationError("patterns have different channel counts")
    ticks: list[int] = []
    channels: list[int] = []
    labels = []
    for k in range(start, stop):
        idx = schedule.sequence[k]
        if not 0 <= idx < len(patterns):
            raise ConfigurationError(f"pattern index {idx} out of range at presentation {k}")
        pat = patterns[idx]
        if pat.pw >= T:
            raise ConfigurationError(f"period_T={T} must exceed pattern width {pat.pw}")
        labels.append(idx)
        onset = k * T
        if noise.noiseless:
            for c, o in enumerate(pat.offsets):
                ticks.append(onset + o)
                channels.append(c)
            continue
        rngs = [channel_rng(seed, k, c) for c in range(n_channels)]
        for c, times in enumerate(corrupt_presentation(pat, noise, T, rngs)):
            ticks.extend(onset + t for t in times)
            channels.extend([c] * len(times))
    onsets = np.arange(start, stop, dtype=np.int64) * T
    return Stream.from_events(
        (stop - start) * T, n_channels, ticks, channels, start * T, onsets, labels, start
    )
