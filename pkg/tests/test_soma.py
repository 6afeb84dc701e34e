import pytest

from skan.dendrite import IDLE, KernelParams
from skan.soma import (
    NeuronParams, NeuronState, neuron_tick, soma_output, threshold_step, validate_params,
)

P2 = NeuronParams.default(2)


def test_default_profile_scales_with_inputs():
    assert (P2.theta_rise, P2.theta_fall) == (80, 200)
    p8 = NeuronParams.default(8)
    assert (p8.theta_rise, p8.theta_fall) == (320, 800)


@pytest.mark.parametrize("m,th,out", [(5000, 4999, 1), (5000, 5000, 0), (0, 0, 0)])
def test_soma_output(m, th, out):
    assert soma_output(m, th) == out


@pytest.mark.parametrize("args,out", [
    ((1000, 5000, 4600), 1080),
    ((1000, 0, 400), 800),
    ((100, 0, 400), 0),
    ((1000, 500, 900), 1000),
])
def test_threshold_step(args, out):
    assert threshold_step(*args, P2) == out


def test_validate_params():
    assert validate_params(P2, 20) == []
    assert len(validate_params(P2, 40)) == 1
    assert validate_params(NeuronParams(KernelParams(dr_max=9999)), 1) == []
    with pytest.raises(ValueError):
        validate_params(P2, 0)


def test_idle_fixed_point():
    st = NeuronState.fresh([120, 180], 500)
    assert neuron_tick(st, (0, 0), 0, P2) == st


def test_input_length_checked():
    with pytest.raises(ValueError):
        neuron_tick(NeuronState.fresh([100, 100]), (1,), 0, P2)


def _oracle(dr, theta, spikes, n_ticks, w=10000, rise=80, fall=200, ddr=1, dr_max=400):
    """Literal per-tick transcription of the single-neuron update, written independently."""
    n = len(dr)
    p, r, d = [0] * n, [0] * n, list(dr)
    s = 0
    rows = []
    for t in range(n_ticks):
        u = [1 if t in spikes[i] else 0 for i in range(n)]
        new_p = []
        for i in range(n):
            if (u[i] == 1 and p[i] == 0) or (p[i] == 1 and r[i] < w):
                new_p.append(1)
            elif (p[i] == 1 and r[i] >= w) or (p[i] == -1 and r[i] > 0):
                new_p.append(-1)
            else:
                new_p.append(0)
        new_r = [min(w, max(0, r[i] + p[i] * d[i])) for i in range(n)]
        new_d = [min(dr_max, max(1, d[i] + p[i] * ddr * s)) for i in range(n)]
        mem, mem_prev = sum(new_r), sum(r)
        new_s = 1 if mem > theta else 0
        if mem > theta:
            theta += rise
        elif mem == 0 and mem_prev > 0:
            theta = max(0, theta - fall)
        p, r, d, s = new_p, new_r, new_d, new_s
        rows.append((tuple(p), tuple(r), tuple(d), theta, s))
    return rows


@pytest.mark.parametrize("dr,theta,spikes", [
    ((100, 150), 0, ({0}, {0})),
    ((100, 150), 1000, ({0}, {0})),
    ((137, 263), 3000, ({0}, {7})),
    ((400, 213), 15000, ({5, 9}, {0, 60, 200})),
])
def test_hand_trace(dr, theta, spikes):
    expected = _oracle(dr, theta, spikes, 300)
    st = NeuronState.fresh(dr, theta)
    for t in range(300):
        st = neuron_tick(st, [1 if t in sp else 0 for sp in spikes], st.s, P2)
        got = (tuple(k.p for k in st.kernels), tuple(k.r for k in st.kernels),
               tuple(k.dr for k in st.kernels), st.theta, st.s)
        assert got == expected[t], f"tick {t}"


def test_first_rise_at_threshold_crossing():
    # both spikes at t=0, dr=(100,150): membrane 250*t exceeds 1000 first at t=5
    st = NeuronState.fresh((100, 150), 1000)
    for t in range(10):
        st = neuron_tick(st, (int(t == 0), int(t == 0)), st.s, P2)
        if st.s:
            break
    assert t == 5 and st.membrane == 1250


def test_no_reset_while_spiking():
    st = NeuronState.fresh((300, 300), 0)
    highs = []
    for t in range(60):
        st = neuron_tick(st, (int(t == 0), int(t == 0)), st.s, P2)
        highs.append(st.s)
    # output stays high for several consecutive ticks and the membrane is not reset
    assert max(len(x) for x in "".join(map(str, highs)).split("0")) > 1


def _present(st, offsets, n):
    for _ in range(n):
        for t in range(400):
            st = neuron_tick(st, tuple(int(t == o) for o in offsets), st.s, P2)
    return st


def test_repeated_presentation_drives_dr_to_max():
    st = NeuronState.fresh((150, 180), 0)
    history = []
    for _ in range(400):
        st = _present(st, (0, 0), 1)
        history.append([k.dr for k in st.kernels])
    first = next(i for i, d in enumerate(history) if max(d) == 400)
    assert history[0][0] > 150 and history[0][1] > 180
    # once saturated, the pulse-end feedback keeps each slope within one ddr of the cap
    assert all(399 <= d <= 400 for row in history[first:] for d in row)
    assert all(k.p == IDLE for k in st.kernels)


def test_kernel_peaks_synchronise():
    offsets = (0, 6)
    st = _present(NeuronState.fresh((150, 180), 0), offsets, 400)
    peaks = [o + -(-10000 // k.dr) for o, k in zip(offsets, st.kernels)]
    assert abs(peaks[0] - peaks[1]) <= 1


def test_threshold_equilibrium_at_onsets():
    st = _present(NeuronState.fresh((150, 180), 0), (0, 6), 400)
    thetas = []
    for _ in range(10):
        thetas.append(st.theta)
        st = _present(st, (0, 6), 1)
    assert max(thetas) - min(thetas) <= P2.theta_rise
