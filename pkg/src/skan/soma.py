"""Single-neuron soma: membrane summation, output bit and homeostatic threshold."""

from __future__ import annotations

from dataclasses import dataclass, field

from .dendrite import IDLE, KernelParams, KernelState, kernel_step

# per-input threshold coefficients of the default parameter profile
THETA_RISE_PER_INPUT = 40
THETA_FALL_PER_INPUT = 100


@dataclass(frozen=True)
class NeuronParams:
    """Parameters of one neuron.

    Args:
        kernel: kernel constants shared by all channels.
        theta_rise: threshold increment on every tick the soma spikes.
        theta_fall: threshold decrement when the membrane returns to zero.
        theta_init: threshold of a fresh neuron.
    """

    kernel: KernelParams = field(default_factory=KernelParams)
    theta_rise: int = 80
    theta_fall: int = 200
    theta_init: int = 0

    def __post_init__(self):
        for name in ("theta_rise", "theta_fall"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.theta_init, int) or self.theta_init < 0:
            raise ValueError(f"theta_init must be a non-negative integer, got {self.theta_init!r}")

    @classmethod
    def default(cls, n_inputs: int, **kernel_overrides) -> "NeuronParams":
        """Default profile: threshold rise/fall scale with the number of inputs."""
        return cls(
            kernel=KernelParams(**kernel_overrides),
            theta_rise=THETA_RISE_PER_INPUT * n_inputs,
            theta_fall=THETA_FALL_PER_INPUT * n_inputs,
        )


@dataclass(frozen=True)
class NeuronState:
    kernels: tuple[KernelState, ...]
    theta: int = 0
    s: int = 0

    @property
    def membrane(self) -> int:
        return sum(k.r for k in self.kernels)

    @property
    def n_inputs(self) -> int:
        return len(self.kernels)

    @classmethod
    def fresh(cls, dr, theta: int = 0) -> "NeuronState":
        """Idle neuron with the given per-channel step sizes."""
        return cls(tuple(KernelState(IDLE, 0, int(d)) for d in dr), int(theta), 0)


def soma_output(membrane: int, theta_prev: int) -> int:
    """Spike while the membrane is strictly above the previous threshold."""
    return 1 if membrane > theta_prev else 0


def threshold_step(
    theta_prev: int, membrane_t: int, membrane_prev: int, params: NeuronParams
) -> int:
    if membrane_t > theta_prev:
        return theta_prev + params.theta_rise
    if membrane_t == 0 and membrane_prev > 0:
        return max(0, theta_prev - params.theta_fall)
    return theta_prev


def neuron_tick(
    state_prev: NeuronState, inputs, s_feedback_prev: int, params: NeuronParams
) -> NeuronState:
    """Advance one stand-alone neuron by one tick.

    All new values are computed from previous-tick values: kernels use the
    previous phase and the previous output bit, the output compares the new
    membrane with the previous threshold, and the threshold sees both the new
    and previous membrane.

    Args:
        state_prev: neuron state at ``t - 1``.
        inputs: sequence of input bits ``u_i(t)``, one per channel.
        s_feedback_prev: back-propagated output bit ``s(t - 1)``. Normally
            ``state_prev.s``.
        params: neuron parameters.
    """
    if len(inputs) != len(state_prev.kernels):
        raise ValueError(
            f"expected {len(state_prev.kernels)} input bits, got {len(inputs)}"
        )
    kp = params.kernel
    kernels = tuple(
        kernel_step(k, u, s_feedback_prev, kp) for k, u in zip(state_prev.kernels, inputs)
    )
    membrane = sum(k.r for k in kernels)
    s = soma_output(membrane, state_prev.theta)
    theta = threshold_step(state_prev.theta, membrane, state_prev.membrane, params)
    return NeuronState(kernels, theta, s)


def validate_params(params: NeuronParams, pw: int) -> list[str]:
    """Check that the first kernel of a pattern outlives the pattern width.

    Returns a list of human-readable warnings; an empty list means the
    step-size cap is below ``w / pw``. Violations are allowed to run.
    """
    if pw < 1:
        raise ValueError(f"pattern width must be >= 1, got {pw}")
    kp = params.kernel
    # dr_max < w / pw  <=>  dr_max * pw < w, kept in integers
    if kp.dr_max * pw >= kp.w:
        return [
            f"dr_max={kp.dr_max} >= w/PW={kp.w}/{pw}={kp.w / pw:g}: the first kernel of "
            "a pattern may return to zero before its last spike arrives"
        ]
    return []
