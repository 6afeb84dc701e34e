"""Synapto-dendritic kernel: a ramp-up/ramp-down accumulator with adaptive slope.

Everything here is integer-only and side-effect free. A kernel is triggered by
an input spike while idle, ramps up by ``dr`` per tick to the kernel height
``w``, ramps back down by ``dr`` per tick to zero, then idles again.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

RAMP_UP = 1
RAMP_DOWN = -1
IDLE = 0

PHASES = (RAMP_UP, RAMP_DOWN, IDLE)


class KernelState(NamedTuple):
    """State of one input channel's kernel.

    Attributes:
        p: phase flag, one of ``RAMP_UP``, ``RAMP_DOWN``, ``IDLE``.
        r: accumulator value (contribution to the membrane), ``0 <= r <= w``.
        dr: step size per tick.
    """

    p: int
    r: int
    dr: int


@dataclass(frozen=True)
class KernelParams:
    """Kernel constants shared by every channel of a neuron.

    Args:
        w: maximum kernel height (synaptic weight), held constant.
        ddr: slope change per tick of output feedback.
        dr_max: upper bound on the step size.
        dr_floor: lower bound on the step size; keeps the ramp moving.
        clamp_peak: clamp ``r`` at ``w`` on the flip tick. With ``False`` the
            accumulator keeps ramping on the flip tick and peaks at
            ``(ceil(w / dr) + 1) * dr``.
    """

    w: int = 10000
    ddr: int = 1
    dr_max: int = 400
    dr_floor: int = 1
    clamp_peak: bool = True

    def __post_init__(self):
        for name in ("w", "ddr", "dr_max", "dr_floor"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.dr_max > self.w:
            raise ValueError(f"dr_max ({self.dr_max}) must not exceed w ({self.w})")
        if self.dr_floor > self.dr_max:
            raise ValueError(
                f"dr_floor ({self.dr_floor}) must not exceed dr_max ({self.dr_max})"
            )


def kernel_phase_step(p_prev: int, r_prev: int, u: int, w: int) -> int:
    """Next phase flag from the previous phase, accumulator and input bit.

    A spike only starts a kernel when the channel is idle; spikes arriving while
    the kernel is ramping are ignored.
    """
    if (u and p_prev == IDLE) or (p_prev == RAMP_UP and r_prev < w):
        return RAMP_UP
    if (p_prev == RAMP_UP and r_prev >= w) or (p_prev == RAMP_DOWN and r_prev > 0):
        return RAMP_DOWN
    return IDLE


def kernel_accumulate(
    state_prev: KernelState, s_prev: int, params: KernelParams
) -> tuple[int, int]:
    """Advance accumulator and slope by one tick using the previous-tick phase.

    Returns:
        ``(r_new, dr_new)``. The slope moves by ``ddr`` in the direction of the
        phase while the soma output was high on the previous tick.
    """
    p, r, dr = state_prev
    if p == RAMP_UP:
        r += dr
        if s_prev:
            dr += params.ddr
    elif p == RAMP_DOWN:
        r -= dr
        if s_prev:
            dr -= params.ddr
    if r < 0:
        r = 0
    elif params.clamp_peak and r > params.w:
        r = params.w
    if dr > params.dr_max:
        dr = params.dr_max
    elif dr < params.dr_floor:
        dr = params.dr_floor
    return r, dr


def kernel_step(
    state_prev: KernelState, u: int, s_prev: int, params: KernelParams
) -> KernelState:
    """Full synchronous kernel update for one tick."""
    p = kernel_phase_step(state_prev.p, state_prev.r, u, params.w)
    r, dr = kernel_accumulate(state_prev, s_prev, params)
    return KernelState(p, r, dr)
