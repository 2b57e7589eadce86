"""Command-line experiment runner.

Every command reads the YAML config (defaults fill any gap), writes CSV and
JSON data plus an SVG view into ``--out``, and records a manifest with the
config hash, seed, and library versions.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__, svg
from .config import DEFAULT_YAML, ConfigError, ExperimentConfig
from .engine import Device, mirror_circuit, z_substrings
from .learn import UnderdeterminedError, UnfittableError, learn
from .model import RateCeilingError, relative_cost
from .pec import delta_mit, delta_pred, mitigate, model_hash, predict_fidelity, stability_run
from .rng import stream
from .theory import (
    GaussianRate,
    averaged_t1_sim,
    curves_csv,
    effective_depth,
    fitted_rate,
    lognormal_moment,
    mitsim,
    quasi_static_bias,
    quasi_static_learning_sim,
    simulate_learn_mitigate,
)
from .tls import Averaged, Optimized, drift, pe_proxy, sample_k, scan_pe, waveform
from .theory import _exp_fit

log = logging.getLogger("tlsmit")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
STRATEGIES = ("control", "optimized", "averaged")


class Output:
    """Collects written files for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {root}: {e}") from e
        self.files: list[str] = []

    def write(self, name: str, text: str) -> Path:
        p = self.root / name
        try:
            p.write_text(text)
        except OSError as e:
            raise ConfigError(f"cannot write {p}: {e}") from e
        self.files.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        return self.write(name, json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return self.write(name, buf.getvalue())

    def manifest(self, command: str, cfg: ExperimentConfig, extra: dict | None = None) -> None:
        m = {
            "command": command,
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "config": cfg.data,
            "versions": {
                "tlsmit": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "outputs": sorted(self.files),
        }
        if extra:
            m.update(extra)
        self.json(f"manifest_{command}.json", m)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _strategies(args, default_all: bool) -> list[str]:
    if args.strategy:
        return [args.strategy]
    return list(STRATEGIES) if default_all else ["control"]


def _time_grid(hours: float, step: float) -> np.ndarray:
    return np.round(np.arange(0.0, hours + 1e-9, step), 10)


# -- commands ---------------------------------------------------------------------------


def cmd_init(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out) if args.out else Path(".")
    target = out if out.suffix in (".yaml", ".yml") else out / "config.yaml"
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(DEFAULT_YAML)
    except OSError as e:
        raise ConfigError(f"cannot write {target}: {e}") from e
    print(target)
    return EXIT_OK


def cmd_landscape(args, cfg: ExperimentConfig, out: Output) -> int:
    L = cfg.landscape()
    out.json("landscape_initial.json", L.to_dict())
    sc = cfg["scan"]
    times = _time_grid(float(sc["hours"]), float(sc["step_hr"]))
    grid = cfg.grid()
    rows = []
    maps = np.zeros((L.n, times.size, grid.size))
    for ti, t in enumerate(times):
        if ti > 0:
            L = drift(L, float(times[ti] - times[ti - 1]), stream(cfg.seed, "scan-drift", ti))
        for q in range(L.n):
            curve = scan_pe(L, q, grid, float(sc["delay"]))
            maps[q, ti] = curve[:, 1]
            rows += [(float(t), q, float(k), float(p)) for k, p in curve]
    out.csv("landscape_scan.csv", ["time_hr", "qubit", "k", "pe"], rows)
    for q in range(L.n):
        out.write(
            f"landscape_q{q}.svg",
            svg.heatmap(maps[q], grid, times, f"qubit {q}: P_e after probe delay", "k_TLS", "time (h)"),
        )
    out.json("landscape_final.json", L.to_dict())
    out.manifest("landscape", cfg)
    return EXIT_OK


def _averaged_t1(L, strategy: Averaged, delays: np.ndarray, points: int = 200) -> np.ndarray:
    phase = (np.arange(points) + 0.5) / points
    k = strategy.center + strategy.amplitude * waveform(strategy.waveform, phase)
    t1 = L.t1(np.repeat(k[:, None], L.n, axis=1))  # (points, n)
    out = []
    for q in range(L.n):
        curve = np.exp(-delays[None, :] / t1[:, q : q + 1]).mean(0)
        out.append(_exp_fit(delays, curve, float(t1[:, q].mean())))
    return np.array(out)


def cmd_t1(args, cfg: ExperimentConfig, out: Output) -> int:
    L = cfg.landscape()
    tc = cfg["t1"]
    times = _time_grid(float(tc["hours"]), float(tc["step_hr"]))
    lo, hi, npts = tc["delays"]
    delays = np.linspace(float(lo), float(hi), int(npts))
    names = _strategies(args, True)
    strat = {s: cfg.strategy(s) for s in names}
    rows, series = [], {s: [] for s in names}
    for ti, t in enumerate(times):
        if ti > 0:
            L = drift(L, float(times[ti] - times[ti - 1]), stream(cfg.seed, "t1-drift", ti))
        for s in names:
            st = strat[s]
            if isinstance(st, Optimized):
                if st.due(L.time_hr):
                    st = strat[s] = st.reoptimize(L)
            if isinstance(st, Averaged):
                t1 = _averaged_t1(L, st, delays)
            else:
                t1 = L.t1(sample_k(st, np.zeros(1, dtype=np.int64), cfg["shot_rate_hz"], L.n))[0]
            series[s].append(t1)
            rows += [(float(t), s, q, float(v) * 1e6) for q, v in enumerate(t1)]
    out.csv("t1_series.csv", ["time_hr", "strategy", "qubit", "t1_us"], rows)
    summary = {
        s: {
            "mean_t1_us": float(np.mean(v) * 1e6),
            "std_t1_us_per_qubit": (np.std(np.array(v), axis=0) * 1e6).tolist(),
        }
        for s, v in series.items()
    }
    out.json("t1_summary.json", summary)
    out.write(
        "t1_q0.svg",
        svg.line_plot({s: (times, np.array(v)[:, 0] * 1e6) for s, v in series.items()},
                      "qubit 0 T1", "time (h)", "T1 (us)"),
    )
    out.manifest("t1", cfg)
    return EXIT_OK


def _device(cfg: ExperimentConfig, L, strategy, seed_key: tuple) -> Device:
    return Device(
        cfg.generator_set(), L, strategy, float(cfg["tau"]), cfg.floors(), cfg.readout(),
        seed=int(stream(cfg.seed, "device", *seed_key).integers(2**62)),
        shot_rate_hz=float(cfg["shot_rate_hz"]), mode=cfg["mode"],
    )


def cmd_learn(args, cfg: ExperimentConfig, out: Output) -> int:
    (name,) = _strategies(args, False)
    st = cfg.strategy(name)
    L = cfg.landscape()
    layers = cfg.layers()
    cycles = int(args.cycles or 1)
    dt = float(cfg["stability"]["cycle_hr"])
    lcfg = cfg.learning_config()
    boot = int(cfg["learning"]["bootstrap"])
    reports, gamma_rows, lam = [], [], {ln: [] for ln in layers}
    times = []
    for c in range(cycles):
        if c > 0:
            L = drift(L, dt, stream(cfg.seed, "learn-drift", c))
        if isinstance(st, Optimized) and st.due(L.time_hr):
            st = st.reoptimize(L)
        dev = _device(cfg, L, st, (c,))
        times.append(L.time_hr)
        for ln, layer in layers.items():
            res = learn(layer, dev, lcfg, bootstrap=boot)
            log.info("cycle %d layer %s gamma %.5f", c, ln, res.gamma)
            d = res.to_dict()
            d["cycle"] = c
            d["strategy"] = name
            reports.append(d)
            gamma_rows.append((c, L.time_hr, name, ln, res.gamma, res.gamma_std))
            lam[ln].append(res.model.rates)
    out.write("learn_reports.jsonl", "".join(json.dumps(r, default=_jsonable) + "\n" for r in reports))
    out.csv("gamma_series.csv", ["cycle", "time_hr", "strategy", "layer", "gamma", "gamma_std"], gamma_rows)
    gs = cfg.generator_set()
    lam_rows, dl_rows = [], []
    for ln, series in lam.items():
        arr = np.array(series)
        for c, row in enumerate(arr):
            lam_rows += [(c, times[c], ln, gs.labels[k], float(v)) for k, v in enumerate(row)]
        dlam = arr - np.median(arr, axis=0)
        order = np.argsort(-np.abs(dlam).max(axis=0), kind="stable")[:20]
        for k in order:
            dl_rows += [(ln, gs.labels[k], c, times[c], float(dlam[c, k])) for c in range(len(arr))]
    out.csv("lambda_series.csv", ["cycle", "time_hr", "layer", "generator", "lambda"], lam_rows)
    out.csv("delta_lambda_top20.csv", ["layer", "generator", "cycle", "time_hr", "delta_lambda"], dl_rows)
    g = np.array([r[4] for r in gamma_rows])
    summary = {
        "strategy": name,
        "cycles": cycles,
        "gamma_quartiles": np.quantile(g, [0.0, 0.25, 0.5, 0.75, 1.0]).tolist(),
        "gamma_by_layer": {ln: [r[4] for r in gamma_rows if r[3] == ln] for ln in layers},
    }
    out.json("learn_summary.json", summary)
    out.write(
        "gamma_series.svg",
        svg.line_plot(
            {ln: (times, summary["gamma_by_layer"][ln]) for ln in layers},
            f"sampling overhead per layer ({name})", "time (h)", "gamma",
        ),
    )
    out.manifest("learn", cfg)
    return EXIT_OK


def cmd_mitigate(args, cfg: ExperimentConfig, out: Output) -> int:
    (name,) = _strategies(args, False)
    st = cfg.strategy(name)
    L = cfg.landscape()
    if isinstance(st, Optimized):
        st = st.reoptimize(L)
    layers = cfg.layers()
    N = int(args.depth or cfg["mitigation"]["N"])
    circuit = mirror_circuit(int(cfg["n"]), N, layers, z_substrings(int(cfg["n"])))
    dev = _device(cfg, L, st, (0, 0))
    models = {ln: learn(layer, dev, cfg.learning_config(), bootstrap=0).model for ln, layer in layers.items()}
    delay = float(cfg["stability"]["learn_to_mitigate_hr"])
    L_mit = drift(L, delay, stream(cfg.seed, "mitigate-drift")) if delay > 0 else L
    res = mitigate(circuit, models, cfg.budget(), _device(cfg, L_mit, st, (0, 1)))
    full = circuit.observables[-1].label
    fp = predict_fidelity(circuit, models, circuit.observables[-1])
    report = res.to_dict()
    report.update(
        strategy=name, N=N, t_hr=L.time_hr, lambda_hash=model_hash(models),
        models={ln: m.to_dict() for ln, m in models.items()},
        f_pred=fp, delta_pred=delta_pred(res.raw[full].mean, fp), delta_mit=delta_mit(res[full].mean),
    )
    out.json("mitigate.json", report)
    rows = []
    for O in circuit.observables:
        m, r = res.mitigated[O.label], res.raw[O.label]
        rows.append((O.label, O.weight, m.mean, m.stderr, r.mean, r.stderr))
    out.csv("per_weight.csv", ["observable", "weight", "mitigated", "mitigated_stderr", "raw", "raw_stderr"], rows)
    w = np.array([r[1] for r in rows], float)
    out.write(
        "per_weight.svg",
        svg.scatter_plot(
            {"mitigated": (w, [r[2] for r in rows]), "unmitigated": (w, [r[4] for r in rows])},
            f"mirror circuit N={N} ({name})", "observable weight", "expectation",
        ),
    )
    out.manifest("mitigate", cfg)
    return EXIT_OK


def cmd_stability(args, cfg: ExperimentConfig, out: Output) -> int:
    names = _strategies(args, True)
    scfg = cfg.stability_config()
    if args.cycles:
        scfg = type(scfg)(**{**scfg.__dict__, "cycles": int(args.cycles)})
    if args.depth:
        scfg = type(scfg)(**{**scfg.__dict__, "N": int(args.depth)})

    def progress(rec):
        log.info("%s cycle %d: raw %.3f mitigated %.3f", rec.strategy, rec.cycle, rec.raw, rec.mitigated)

    runs = stability_run(
        cfg.landscape(), [cfg.strategy(s) for s in names], scfg, cfg.generator_set(),
        cfg.floors(), cfg.readout(), seed=cfg.seed, progress=progress,
    )
    lines, rows, summary = [], [], {}
    for s, recs in runs.items():
        for r in recs:
            lines.append(json.dumps(r.to_dict(), default=_jsonable))
            rows.append((s, r.cycle, r.t_hr, r.raw, r.mitigated, r.mitigated_stderr, r.f_pred, r.delta_pred, r.delta_mit))
        dm = np.array([r.delta_mit for r in recs])
        dp = np.array([r.delta_pred for r in recs])
        summary[s] = {
            "std_delta_mit": float(dm.std(ddof=1)) if dm.size > 1 else 0.0,
            "mean_delta_mit": float(dm.mean()),
            "pearson_r": float(np.corrcoef(dp, dm)[0, 1]) if dm.size > 2 else None,
            "mean_raw": float(np.mean([r.raw for r in recs])),
            "cumulative_mean": recs[-1].cumulative_mean,
            "cumulative_stderr": recs[-1].cumulative_stderr,
        }
    out.write("stability.jsonl", "\n".join(lines) + "\n")
    out.csv(
        "stability.csv",
        ["strategy", "cycle", "time_hr", "raw", "mitigated", "mitigated_stderr", "f_pred", "delta_pred", "delta_mit"],
        rows,
    )
    out.json("stability_summary.json", summary)
    out.write(
        "stability_timeline.svg",
        svg.line_plot(
            {s: ([r.t_hr for r in v], [r.mitigated for r in v]) for s, v in runs.items()},
            "mitigated <ZZZZZZ>", "time (h)", "expectation", hline=1.0,
        ),
    )
    out.write(
        "stability_scatter.svg",
        svg.scatter_plot(
            {s: ([r.delta_pred for r in v], [r.delta_mit for r in v]) for s, v in runs.items()},
            "predicted vs observed deviation", "delta_pred", "delta_mit",
        ),
    )
    out.manifest("stability", cfg)
    return EXIT_OK


def cmd_theory(args, cfg: ExperimentConfig, out: Output) -> int:
    th = cfg["theory"]
    sched = [int(d) for d in th["schedule"]]
    d = int(args.depth or th["target_d"])
    d_eff = effective_depth(sched)
    rng = stream(cfg.seed, "theory")
    mu = float(th["mu"])
    bias_rows = []
    for s in th["sigmas"]:
        r = GaussianRate(mu, float(s))
        sim = simulate_learn_mitigate(r, sched, d, int(th["samples"]), rng)
        bias_rows.append((s, d, d_eff, fitted_rate(r, sched), quasi_static_bias(float(s), d, d_eff),
                          sim.ratio, sim.stderr))
    out.csv("bias_table.csv", ["sigma", "d", "d_eff", "mu_fit", "bias_closed_form", "bias_mc", "bias_mc_stderr"], bias_rows)
    cost_rows = [(1.13, 1.06, N, relative_cost(1.13, 1.06, N)) for N in (20, 40)]
    out.csv("relative_cost.csv", ["gamma_worse", "gamma_better", "N", "relative_cost"], cost_rows)
    mom_rows = []
    for s in th["sigmas"]:
        r = GaussianRate(mu, float(s))
        g = r.sample(rng, int(th["samples"]), truncate=False)
        for dd in (1, d):
            v = np.exp(-dd * g)
            mom_rows.append((s, dd, lognormal_moment(r, dd), v.mean(), v.std() / np.sqrt(v.size)))
    out.csv("moments.csv", ["sigma", "d", "closed_form", "mc_mean", "mc_stderr"], mom_rows)
    out.write("curves.csv", curves_csv(GaussianRate(mu, float(th["sigmas"][-1])), range(0, 65, 4)))

    delays = np.linspace(0.0, 4.0 * float(th["t1_mean"]), 41)
    t1s = averaged_t1_sim(float(th["t1_mean"]), float(th["t1_sd"]), delays, int(th["t1_trials"]), rng,
                          int(th["t1_repetitions"]))
    out.csv("averaged_t1_hist.csv", ["fitted_t1_us"], [(v * 1e6,) for v in t1s.fitted_t1_samples])

    L = cfg.landscape()
    av = cfg.strategy("averaged")
    ks = sample_k(av, np.arange(int(cfg["shot_rate_hz"] / av.freq_hz)), float(cfg["shot_rate_hz"]), L.n)
    t1_dist = L.t1(ks).T  # (n, shots)
    ms = mitsim(list(t1_dist), sched, float(cfg["tau"]), d, rng=rng)
    qs = [quasi_static_learning_sim(x, 0.2e-6, [0, 8, 24, 48, 96, 128]) for x in t1_dist]
    out.csv("mitsim_deviations.csv", ["deviation"], [(v,) for v in ms.deviations[:20000]])
    summary = {
        "d_eff": d_eff,
        "target_d": d,
        "relative_cost": {str(N): v for _, _, N, v in cost_rows},
        "averaged_t1_us": t1s.fitted_t1 * 1e6,
        "averaged_t1_spread_over_mean": float(t1s.fitted_t1_samples.std() / t1s.fitted_t1_samples.mean()),
        "mitsim_mean_deviation": ms.mean_deviation,
        "mitsim_mean_abs_deviation": ms.mean_abs_deviation,
        "quasi_static_relative_difference": [q[2] for q in qs],
    }
    out.json("theory_summary.json", summary)
    out.write("mitsim_violin.svg", svg.violin_plot({"averaged": ms.deviations[:20000]}, "mitigated deviation", "deviation"))
    out.manifest("theory", cfg)
    return EXIT_OK


def cmd_report(args, cfg: ExperimentConfig, out: Output) -> int:
    lines = ["# Experiment report", ""]
    manifests = sorted(out.root.glob("manifest_*.json"))
    if not manifests:
        lines.append("No manifests found; run another command first.")
    for p in manifests:
        if p.name == "manifest_report.json":
            continue
        m = json.loads(p.read_text())
        lines.append(f"## {m['command']}")
        lines.append("")
        lines.append(f"- config hash: `{m['config_hash'][:16]}`, seed {m['seed']}")
        lines.append(f"- outputs: {', '.join(m['outputs'])}")
        for name in m["outputs"]:
            if name.endswith("summary.json"):
                lines.append(f"- {name}:")
                lines.append("")
                lines.append("```json")
                lines.append((out.root / name).read_text().strip())
                lines.append("```")
        lines.append("")
    out.write("report.md", "\n".join(lines) + "\n")
    out.manifest("report", cfg)
    return EXIT_OK


COMMANDS = {
    "landscape": cmd_landscape,
    "t1": cmd_t1,
    "learn": cmd_learn,
    "mitigate": cmd_mitigate,
    "stability": cmd_stability,
    "theory": cmd_theory,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tlsmit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("init",) + tuple(COMMANDS):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML config file (defaults fill missing keys)")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--out", help="output directory (init: file or directory)")
        sp.add_argument("--strategy", choices=STRATEGIES)
        sp.add_argument("--cycles", type=int)
        sp.add_argument("--depth", type=int, help="mirror repetitions N, or target depth for theory")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        if args.cycles is not None and args.cycles < 1:
            raise ConfigError("--cycles must be at least 1")
        if args.depth is not None and args.depth < 1:
            raise ConfigError("--depth must be at least 1")
        cfg = ExperimentConfig.load(args.config, seed=args.seed)
        if args.command == "init":
            return cmd_init(args, cfg)
        out = Output(Path(args.out or "out"))
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError, UnfittableError, UnderdeterminedError,
            RateCeilingError, ZeroDivisionError, OverflowError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
