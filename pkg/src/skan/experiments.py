"""Seeded simulation runs and the experiment presets built on them.

Every run is identified by a key tuple (grid position..., run index). Its
random draws (patterns, presentation order, initial kernel slopes, stimulus
noise) all come from ``SeedSequence(seed, spawn_key=key)``, so a run can be
repeated in isolation and results do not depend on how runs are scheduled
over worker processes.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .analysis import (
    RunRecord,
    classify_and_detect_convergence,
    learnt_pattern_estimate,
    not_converged_curve,
    presentation_records,
    receptive_field_2in,
    rms_error,
    selection_outcome,
)
from .config import ConfigError, ExperimentConfig, parse_snr
from .engine import run as run_engine
from .network import NetworkState, count_connections, connection_count, random_initial_dr
from .stimulus import (
    NoiseSpec,
    PatternSpec,
    make_schedule,
    random_patterns,
    render_stream,
)

log = logging.getLogger(__name__)

CHUNK = 50  # presentations simulated between convergence checks


@dataclass(frozen=True)
class RunSpec:
    """Everything that varies between runs of one preset."""

    key: tuple[int, ...]
    n_neurons: int
    n_inputs: int
    n_patterns: int
    pw: int
    noise: NoiseSpec
    n_presentations: int
    probabilities: tuple[float, ...] | None = None
    stop_on_convergence: bool = False


@dataclass
class RunResult:
    key: tuple[int, ...]
    patterns: list[PatternSpec]
    records: list[RunRecord]
    state: NetworkState
    converged: bool
    convergence_index: int | None
    ticks_evaluated: int
    ticks_total: int


def _seeds(seed: int, key: tuple[int, ...]):
    root = np.random.SeedSequence(seed, spawn_key=key)
    pat, sched, dr, noise = root.spawn(4)
    noise_seed = int(noise.generate_state(1, np.uint64)[0])
    return (np.random.default_rng(pat), np.random.default_rng(sched),
            np.random.default_rng(dr), noise_seed)


def simulate(cfg: ExperimentConfig, spec: RunSpec, engine: str = "optimized") -> RunResult:
    """Run one seeded simulation.

    With ``spec.stop_on_convergence`` the stream is rendered and simulated in
    chunks of presentations and the run ends after the chunk in which the
    network first converged.
    """
    g_pat, g_sched, g_dr, noise_seed = _seeds(cfg.seed, spec.key)
    patterns = random_patterns(spec.n_patterns, spec.n_inputs, spec.pw, g_pat, cfg.min_separation)
    schedule = make_schedule(cfg.T, spec.n_presentations, spec.n_patterns, g_sched,
                             spec.probabilities)
    dr = random_initial_dr(g_dr, spec.n_neurons, spec.n_inputs,
                           cfg.dr_init_base, cfg.dr_init_spread)
    params = cfg.network_params(spec.n_inputs)
    state = NetworkState.fresh(dr, params.neuron.theta_init)
    if count_connections(state) != connection_count(spec.n_inputs, spec.n_neurons):
        raise RuntimeError("connection count mismatch")

    step = CHUNK if spec.stop_on_convergence else spec.n_presentations
    chunks = []
    evaluated = 0
    conv = None
    records: list[RunRecord] = []
    for start in range(0, spec.n_presentations, step):
        stop = min(start + step, spec.n_presentations)
        stream = render_stream(schedule, patterns, spec.noise, noise_seed, start, stop)
        state, trace = run_engine(state, stream, params, engine)
        chunks.append(trace.events)
        evaluated += trace.n_evaluated
        events = np.concatenate(chunks)
        records = presentation_records(events, spec.n_neurons, schedule.sequence,
                                       end_tick=stop * cfg.T)
        if spec.stop_on_convergence:
            conv = classify_and_detect_convergence(records, cfg.convergence_window)
            if conv.converged:
                break
    if conv is None:
        conv = classify_and_detect_convergence(records, cfg.convergence_window)
    ticks_total = len(records) * cfg.T
    return RunResult(spec.key, patterns, records, state, conv.converged, conv.index,
                     evaluated, ticks_total)


def _simulate_task(args):
    cfg, spec, engine = args
    return simulate(cfg, spec, engine)


def run_many(cfg: ExperimentConfig, specs: Sequence[RunSpec], engine: str = "optimized",
             jobs: int = 1) -> list[RunResult]:
    """Simulate ``specs``, optionally over worker processes; results follow run key order."""
    tasks = [(cfg, s, engine) for s in specs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_simulate_task(t) for t in tasks]
    return sorted(results, key=lambda r: r.key)


# ---------------------------------------------------------------- output


def provenance(cfg: ExperimentConfig, preset: str) -> str:
    return f"skan {__version__} preset={preset} seed={cfg.seed} config_hash={cfg.config_hash()}"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if np.isnan(x):
            return "nan"
        return f"{float(x):.6g}"
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows, prov: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {prov}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by :func:`write_csv` (comment lines skipped)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_records(path: Path, group_names: Sequence[str], results: Sequence[RunResult],
                  prov: str) -> None:
    def rows():
        for res in results:
            group, run = res.key[:-1], res.key[-1]
            for rec in res.records:
                for n in range(len(rec.rises)):
                    yield (*group, run, rec.presentation, rec.pattern, n, rec.rises[n],
                           rec.latency[n], rec.width[n], rec.theta[n])
    write_csv(path, [*group_names, "run", "presentation", "pattern", "neuron", "rises",
                     "latency", "width", "theta"], rows(), prov)


def plot(path: Path, series: dict, xlabel: str, ylabel: str, title: str, prov: str,
         kind: str = "line") -> None:
    """Static SVG with reproducible bytes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "skan", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, (x, y) in series.items():
            if kind == "scatter":
                ax.scatter(x, y, s=8, label=str(label))
            else:
                ax.plot(x, y, marker="o" if len(x) < 20 else None, label=str(label))
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": prov})
        plt.close(fig)


# ---------------------------------------------------------------- presets


@dataclass(frozen=True)
class Preset:
    name: str
    defaults: dict
    run: Callable
    doc: str


def _convergence_sweep(cfg, engine, jobs, out, prov, groups, group_names, make_spec, title):
    """Shared body of the convergence presets (fig14, fig15, fig16)."""
    specs = [make_spec(gi, g, r) for gi, g in enumerate(groups) for r in range(cfg.runs)]
    results = run_many(cfg, specs, engine, jobs)
    n = cfg.n_presentations
    rows, curves = [], {}
    for gi, g in enumerate(groups):
        res = [r for r in results if r.key[0] == gi]
        idx = [r.convergence_index for r in res]
        conv = [i for i in idx if i is not None]
        rows.append((*g, len(res), len(conv), len(conv) / len(res),
                     float(np.median(conv)) + 1 if conv else float("nan")))
        curves[g] = not_converged_curve(idx, n)
    write_csv(out / "summary.csv", [*group_names, "runs", "converged", "fraction_converged",
                                    "median_presentations"], rows, prov)
    labels = ["/".join(f"{k}={v}" for k, v in zip(group_names, g)) for g in groups]
    header = ["presentations"] + labels
    x = np.arange(1, n + 1)
    write_csv(out / "not_converged.csv", header,
              ([int(x[i])] + [100 * curves[g][i] for g in groups] for i in range(n)), prov)
    write_records(out / "run_records.csv", ["group"], results, prov)
    plot(out / "not_converged.svg",
         {lab: (x, 100 * curves[g]) for lab, g in zip(labels, groups)},
         "pattern presentations", "% not converged", title, prov)
    return results


def run_fig14(cfg, engine, jobs, out, prov):
    groups = [(n,) for n in cfg.neuron_grid]
    return _convergence_sweep(
        cfg, engine, jobs, out, prov, groups, ["n_neurons"],
        lambda gi, g, r: RunSpec((gi, r), g[0], cfg.n_inputs, g[0], cfg.PW, cfg.noise(),
                                 cfg.n_presentations, None, cfg.stop_on_convergence),
        "Convergence vs neuron/pattern count")


def run_fig15(cfg, engine, jobs, out, prov):
    groups = [(pw, n) for pw in cfg.pw_grid for n in cfg.input_grid]
    return _convergence_sweep(
        cfg, engine, jobs, out, prov, groups, ["PW", "n_inputs"],
        lambda gi, g, r: RunSpec((gi, r), cfg.n_neurons, g[1], cfg.n_patterns, g[0],
                                 cfg.noise(), cfg.n_presentations, None,
                                 cfg.stop_on_convergence),
        "Convergence vs input dimension and pattern width")


def run_fig16(cfg, engine, jobs, out, prov):
    groups = [(s,) for s in cfg.sigmas]
    return _convergence_sweep(
        cfg, engine, jobs, out, prov, groups, ["sigma"],
        lambda gi, g, r: RunSpec((gi, r), cfg.n_neurons, cfg.n_inputs, cfg.n_patterns, cfg.PW,
                                 NoiseSpec(g[0], cfg.p_signal, cfg.poisson_rate),
                                 cfg.n_presentations, None, cfg.stop_on_convergence),
        "Convergence vs temporal jitter")


def run_fig7(cfg, engine, jobs, out, prov):
    half = cfg.n_presentations // 2
    specs = [RunSpec((gi, r), 1, cfg.n_inputs, 2, cfg.PW, cfg.noise(), cfg.n_presentations,
                     (px, 1 - px))
             for gi, px in enumerate(cfg.p_x_grid) for r in range(cfg.runs)]
    results = run_many(cfg, specs, engine, jobs)
    rows = []
    for gi, px in enumerate(cfg.p_x_grid):
        outcomes = [selection_outcome(r.records, half) for r in results if r.key[0] == gi]
        counts = {k: outcomes.count(k) for k in ("x", "y", "both", "neither")}
        rows.append((px, len(outcomes), counts["x"], counts["y"], counts["both"],
                     counts["neither"], 100 * counts["x"] / len(outcomes)))
    write_csv(out / "summary.csv", ["p_x", "runs", "x", "y", "both", "neither", "percent_x"],
              rows, prov)
    write_records(out / "run_records.csv", ["group"], results, prov)
    plot(out / "selection.svg", {"x selected": ([r[0] for r in rows], [r[6] for r in rows])},
         "P(x)", "% runs selecting x", "Commonest pattern selection", prov)
    return results


def run_fig8(cfg, engine, jobs, out, prov):
    specs = [RunSpec((0, r), 1, cfg.n_inputs, 1, cfg.PW, cfg.noise(), cfg.n_presentations)
             for r in range(cfg.runs)]
    results = run_many(cfg, specs, engine, jobs)
    lat = np.array([[rec.latency[0] for rec in r.records] for r in results], dtype=float)
    lat[lat < 0] = np.nan
    rows = []
    for k in range(lat.shape[1]):
        col = lat[:, k]
        ok = col[~np.isnan(col)]
        rows.append((k, len(ok), np.mean(ok) if ok.size else np.nan,
                     np.min(ok) if ok.size else np.nan, np.max(ok) if ok.size else np.nan))
    write_csv(out / "summary.csv", ["presentation", "responses", "mean_latency", "min_latency",
                                    "max_latency"], rows, prov)
    write_records(out / "run_records.csv", ["group"], results, prov)
    plot(out / "latency.svg", {"mean latency": ([r[0] for r in rows], [r[2] for r in rows])},
         "presentation", "latency (ticks)", "Response time during adaptation", prov)
    return results


def terminal_width(records: Sequence[RunRecord], window: int, neuron: int = 0) -> float:
    """Mean width of the responses among the last ``window`` presentations."""
    w = [r.width[neuron] for r in records[-window:] if r.width[neuron] > 0]
    return float(np.mean(w)) if w else float("nan")


def run_fig9(cfg, engine, jobs, out, prov):
    specs = [RunSpec((gi, r), 1, cfg.n_inputs, 1, cfg.PW, NoiseSpec(s, cfg.p_signal,
                                                                      cfg.poisson_rate),
                     cfg.n_presentations)
             for gi, s in enumerate(cfg.sigmas) for r in range(cfg.runs)]
    results = run_many(cfg, specs, engine, jobs)
    rows, per_run = [], []
    for gi, s in enumerate(cfg.sigmas):
        res = [r for r in results if r.key[0] == gi]
        widths = np.array([terminal_width(r.records, cfg.width_window) for r in res])
        missed = np.array([np.mean([rec.rises[0] == 0 for rec in r.records[-cfg.width_window:]])
                           for r in res])
        per_run.extend((s, r.key[1], wd, m) for r, wd, m in zip(res, widths, missed))
        ok = widths[~np.isnan(widths)]
        rows.append((s, len(res), np.mean(ok) if ok.size else np.nan,
                     np.std(ok) if ok.size else np.nan, np.mean(missed)))
    write_csv(out / "summary.csv", ["sigma", "runs", "mean_width", "std_width", "missed_fraction"],
              rows, prov)
    write_csv(out / "run_widths.csv", ["sigma", "run", "mean_width", "missed_fraction"], per_run,
              prov)
    write_records(out / "run_records.csv", ["group"], results, prov)
    plot(out / "width.svg", {"mean width": ([r[0] for r in rows], [r[2] for r in rows])},
         "jitter sigma (ticks)", "output pulse width (ticks)", "Pulse width vs jitter", prov)
    return results


def learnt_offsets(cfg: ExperimentConfig, state: NetworkState, neuron: int = 0):
    """Learnt pattern of one neuron as spike offsets, or None if it has no receptive field.

    Two-input neurons use the maximum of the swept receptive field; wider
    neurons use kernel-peak alignment.
    """
    dr = state.dr_matrix()[neuron]
    if len(dr) == 2:
        rf = receptive_field_2in(cfg.neuron_params(2), dr, state.neurons[neuron].theta, cfg.PW,
                                 cfg.rf_theta_mode)
        return None if rf.argmax is None else np.array([0.0, float(rf.argmax)])
    return learnt_pattern_estimate(dr, cfg.w)


def run_fig12(cfg, engine, jobs, out, prov):
    groups = [(n, snr) for n in cfg.input_grid for snr in cfg.snrs]
    specs = []
    for gi, (n, snr) in enumerate(groups):
        sig, noi = parse_snr(snr)
        noise = NoiseSpec.from_snr(sig, noi, cfg.jitter_sigma)
        specs.extend(RunSpec((gi, r), 1, n, 1, cfg.PW, noise, cfg.n_presentations)
                     for r in range(cfg.runs))
    results = run_many(cfg, specs, engine, jobs)
    rows, per_run = [], []
    for gi, (n, snr) in enumerate(groups):
        errs, kernel_errs = [], []
        for r in (x for x in results if x.key[0] == gi):
            target = r.patterns[0].offsets
            k_err = rms_error(learnt_pattern_estimate(r.state.dr_matrix()[0], cfg.w), target)
            est = learnt_offsets(cfg, r.state)
            e = float("nan") if est is None else rms_error(est, target)
            if est is not None:
                errs.append(e)
            kernel_errs.append(k_err)
            per_run.append((n, snr, r.key[1], e, k_err))
        rows.append((n, snr, len(kernel_errs), len(kernel_errs) - len(errs),
                     np.mean(errs) if errs else np.nan, np.std(errs) if errs else np.nan,
                     np.mean(kernel_errs)))
    write_csv(out / "summary.csv", ["n_inputs", "snr", "runs", "silent", "mean_rms", "std_rms",
                                    "mean_rms_kernel"], rows, prov)
    write_csv(out / "run_rms.csv", ["n_inputs", "snr", "run", "rms", "rms_kernel"], per_run, prov)
    series = {}
    for n in cfg.input_grid:
        sel = [r for r in rows if r[0] == n]
        series[f"{n} inputs"] = (list(range(len(sel))), [r[4] for r in sel])
    plot(out / "rms.svg", series, "SNR index (" + ", ".join(cfg.snrs) + ")",
         "RMS error (ticks)", "Learnt pattern error vs SNR", prov)
    return results


def run_rf_sweep(cfg, engine, jobs, out, prov):
    if cfg.n_inputs != 2:
        raise ConfigError("rf-sweep needs n_inputs = 2")
    specs = [RunSpec((0, r), 1, 2, 1, cfg.PW, cfg.noise(), cfg.n_presentations)
             for r in range(cfg.runs)]
    results = run_many(cfg, specs, engine, jobs)
    params = cfg.neuron_params(2)
    rows = []
    for res in results:
        neuron = res.state.neurons[0]
        dr = [k.dr for k in neuron.kernels]
        rf = receptive_field_2in(params, dr, neuron.theta, cfg.PW, cfg.rf_theta_mode)
        est = learnt_pattern_estimate(dr, cfg.w)
        off = res.patterns[0].offsets
        if rf.argmax is None:
            peak = lo = hi = diff = float("nan")
        else:
            peak, (lo, hi) = rf.argmax, rf.boundaries
            diff = abs(peak - (est[1] - est[0]))
        rows.append((res.key[1], off[1] - off[0], dr[0], dr[1], neuron.theta, peak, lo, hi,
                     est[1] - est[0], diff))
        if res.key[1] == 0:
            rf.to_csv(out / "rf_curve.csv", header=f"# {prov}\n")
            plot(out / "rf_curve.svg", {"RF": (rf.taus, rf.values)}, "ISI (ticks)", "RF",
                 "Receptive field after training", prov)
    write_csv(out / "summary.csv", ["run", "target_isi", "dr_1", "dr_2", "theta", "rf_argmax",
                                    "rf_lo", "rf_hi", "estimate_isi", "abs_diff"], rows, prov)
    return results


def run_single(cfg, engine, jobs, out, prov):
    spec = RunSpec((0, 0), cfg.n_neurons, cfg.n_inputs, cfg.n_patterns, cfg.PW, cfg.noise(),
                   cfg.n_presentations,
                   (cfg.p_x, 1 - cfg.p_x) if cfg.n_patterns == 2 else None,
                   cfg.stop_on_convergence and cfg.n_neurons > 1)
    res = simulate(cfg, spec, engine)
    dr = res.state.dr_matrix()
    rows = [(n, c, int(dr[n, c])) for n in range(dr.shape[0]) for c in range(dr.shape[1])]
    write_csv(out / "final_dr.csv", ["neuron", "channel", "dr"], rows, prov)
    write_csv(out / "summary.csv",
              ["presentations", "converged", "convergence_index", "ticks_evaluated",
               "ticks_total"],
              [(len(res.records), res.converged,
                -1 if res.convergence_index is None else res.convergence_index,
                res.ticks_evaluated, res.ticks_total)], prov)
    write_records(out / "run_records.csv", ["group"], [res], prov)
    x = [r.presentation for r in res.records]
    plot(out / "width.svg",
         {f"neuron {n}": (x, [r.width[n] for r in res.records]) for n in range(cfg.n_neurons)},
         "presentation", "output pulse width (ticks)", "Pulse width", prov, kind="scatter")
    return [res]


PRESETS = {
    "fig7": Preset("fig7", dict(n_neurons=1, n_inputs=4, n_patterns=2, n_presentations=300,
                                runs=100, stop_on_convergence=False), run_fig7,
                   "commonest pattern selection vs P(x)"),
    "fig8": Preset("fig8", dict(n_neurons=1, n_patterns=1, n_presentations=50, runs=20,
                                stop_on_convergence=False), run_fig8,
                   "response latency over presentations"),
    "fig9": Preset("fig9", dict(n_neurons=1, n_patterns=1, n_presentations=300, runs=100,
                                sigmas=(0.0, 0.5, 1.0, 2.0), stop_on_convergence=False),
                   run_fig9, "output pulse width vs jitter"),
    "fig12": Preset("fig12", dict(n_neurons=1, n_patterns=1, n_presentations=1000, runs=50,
                                  stop_on_convergence=False), run_fig12,
                    "learnt pattern RMS error vs signal:noise ratio"),
    "fig14": Preset("fig14", dict(n_inputs=2, n_presentations=800, runs=200), run_fig14,
                    "convergence vs neuron/pattern count"),
    "fig15": Preset("fig15", dict(n_neurons=2, n_patterns=2, n_presentations=800, runs=100,
                                  input_grid=(2, 4, 8, 16)), run_fig15,
                    "convergence vs input dimension and pattern width"),
    "fig16": Preset("fig16", dict(n_neurons=2, n_patterns=2, n_inputs=2, n_presentations=800,
                                  runs=200), run_fig16, "convergence vs temporal jitter"),
    "rf-sweep": Preset("rf-sweep", dict(n_neurons=1, n_inputs=2, n_patterns=1,
                                        n_presentations=200, runs=20,
                                        stop_on_convergence=False), run_rf_sweep,
                       "receptive field of trained 2-input neurons"),
    "single": Preset("single", {}, run_single, "one run with the configured topology"),
}


def preset_config(name: str, values: dict | None = None, overrides: dict | None = None):
    """Config for a preset: preset defaults, then file values, then overrides."""
    from .config import build_config

    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return build_config({**PRESETS[name].defaults, **(values or {})}, overrides)


def run_preset(name: str, cfg: ExperimentConfig, engine: str = "optimized", jobs: int = 1,
               out: str | os.PathLike | None = None):
    """Run a preset and write its artifacts to ``out`` (default ``cfg.out``)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if engine not in ("reference", "optimized", "both"):
        raise ConfigError(f"unknown engine {engine!r}")
    out = Path(cfg.out if out is None else out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    prov = provenance(cfg, name)
    (out / "config.txt").write_text(f"# {prov}\n" + cfg.dumps())
    log.info("running %s (%s) into %s", name, prov, out)
    return PRESETS[name].run(cfg, engine, jobs, out, prov)
