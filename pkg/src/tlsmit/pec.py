"""Probabilistic error cancellation, prediction diagnostics, and stability runs."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .engine import (
    Circuit,
    Device,
    ReadoutModel,
    default_layers,
    estimate_with_readout_twirl,
    exact_expectation,
    mirror_circuit,
    readout_monitor_circuit,
)
from .learn import LearningConfig, learn
from .model import GeneratorSet, LindbladModel, NoiseRealization
from .pauli import PauliString
from .rng import stream
from .tls import Optimized, Strategy, TlsLandscape, drift

__all__ = [
    "Budget",
    "EstimatorResult",
    "MitigationResult",
    "StabilityConfig",
    "StabilityRecord",
    "mitigate",
    "predict_fidelity",
    "delta_pred",
    "delta_mit",
    "stability_run",
    "RepeatedPrediction",
    "repeated_lm_prediction",
    "lm_ratio_bias",
    "model_hash",
]

F_PRED_FLOOR = 1e-6


@dataclass(frozen=True)
class Budget:
    """Circuit budgets for one mitigation experiment."""

    instances: int = 4096
    shots: int = 32
    readout_instances: int = 2048
    unmitigated_instances: int = 512
    bootstrap: int = 25
    inverse_per: str = "shot"

    def __post_init__(self):
        if min(self.instances, self.shots, self.readout_instances, self.unmitigated_instances) < 1:
            raise ValueError("budget entries must be positive")
        if self.inverse_per not in ("shot", "instance"):
            raise ValueError("inverse_per must be 'shot' or 'instance'")


@dataclass(frozen=True)
class EstimatorResult:
    """One estimated expectation value.

    ``stderr`` is the instance-level standard error; ``bootstrap`` holds
    the means of instance resamples (empty in exact mode).
    """

    label: str
    mean: float
    stderr: float
    gamma: float
    instances: int
    shots: int
    bootstrap: tuple[float, ...] = ()

    @property
    def bootstrap_stderr(self) -> float:
        return float(np.std(self.bootstrap, ddof=1)) if len(self.bootstrap) > 1 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bootstrap"] = list(self.bootstrap)
        return d


@dataclass
class MitigationResult:
    mitigated: dict[str, EstimatorResult]
    raw: dict[str, EstimatorResult]
    gamma_total: float
    readout_factors: dict[str, float]

    def __getitem__(self, label: str) -> EstimatorResult:
        return self.mitigated[label]

    def stderr_ratio(self, label: str) -> float:
        """Mitigated over raw standard error, normalized to equal shot counts."""
        m, r = self.mitigated[label], self.raw[label]
        return (m.stderr * np.sqrt(m.instances * m.shots)) / (r.stderr * np.sqrt(r.instances * r.shots))

    def to_dict(self) -> dict:
        return {
            "gamma_total": self.gamma_total,
            "mitigated": {k: v.to_dict() for k, v in self.mitigated.items()},
            "raw": {k: v.to_dict() for k, v in self.raw.items()},
            "readout_factors": self.readout_factors,
        }


def _gamma_total(c: Circuit, models: Mapping[str, LindbladModel]) -> float:
    return float(np.prod([models[L].gamma() for L in c.slots])) if c.slots else 1.0


def mitigate(
    circuit: Circuit,
    models: Mapping[str, LindbladModel],
    budget: Budget | None,
    device: Device,
    observables: Sequence[PauliString] | None = None,
) -> MitigationResult:
    """PEC estimate (with readout twirling) of every observable of ``circuit``.

    In exact mode the analytic expectation of the estimator is returned,
    ``prod_s f_true(P_s) / f_model(P_s)`` averaged over the realization
    ensemble, with zero error bars.
    """
    if budget is None:
        raise ValueError("a mitigation budget is required")
    missing = set(circuit.slots) - set(models)
    if missing:
        raise KeyError(f"no learned model for layer(s) {sorted(missing)}")
    obs = list(observables or circuit.observables)
    labels = [O.label for O in obs]
    gamma = _gamma_total(circuit, models)

    if device.mode == "exact":
        mit = device.exact(circuit, obs, inverse=models)
        raw = device.exact(circuit, obs)
        return MitigationResult(
            {L: EstimatorResult(L, float(v), 0.0, gamma, 0, 0) for L, v in zip(labels, mit)},
            {L: EstimatorResult(L, float(v), 0.0, 1.0, 0, 0) for L, v in zip(labels, raw)},
            gamma,
            {L: 1.0 for L in labels},
        )

    b = budget
    mon = device.run(readout_monitor_circuit(circuit.n), b.readout_instances, b.shots, "readout")
    cal = estimate_with_readout_twirl(mon)
    pec = device.run(circuit, b.instances, b.shots, "pec", inverse=models, inverse_per=b.inverse_per)
    unm = device.run(circuit, b.unmitigated_instances, b.shots, "unmitigated")

    pec_inst = pec.instance_means(obs) * pec.gamma
    raw_inst = unm.instance_means(obs)
    cal_inst = np.stack([(mon.values(O)).mean(axis=1) for O in obs])
    factors = cal_inst.mean(axis=1)
    if np.any(factors <= 0):
        raise FloatingPointError("nonpositive readout correction factor")

    rng = stream(device.seed, "pec-bootstrap", device.runs)
    boot_m = np.zeros((b.bootstrap, len(obs)))
    boot_r = np.zeros((b.bootstrap, len(obs)))
    for i in range(b.bootstrap):
        pi = rng.integers(0, b.instances, b.instances)
        ui = rng.integers(0, b.unmitigated_instances, b.unmitigated_instances)
        ci = rng.integers(0, b.readout_instances, b.readout_instances)
        fac = cal_inst[:, ci].mean(axis=1)
        boot_m[i] = pec_inst[:, pi].mean(axis=1) / fac
        boot_r[i] = raw_inst[:, ui].mean(axis=1) / fac

    def se(x: np.ndarray) -> np.ndarray:
        return x.std(axis=1, ddof=1) / np.sqrt(x.shape[1])

    mit_mean = pec_inst.mean(axis=1) / factors
    raw_mean = raw_inst.mean(axis=1) / factors
    mit_se = se(pec_inst) / factors
    raw_se = se(raw_inst) / factors
    mitigated = {
        L: EstimatorResult(L, float(mit_mean[j]), float(mit_se[j]), gamma, b.instances, b.shots,
                           tuple(boot_m[:, j].tolist()))
        for j, L in enumerate(labels)
    }
    raw = {
        L: EstimatorResult(L, float(raw_mean[j]), float(raw_se[j]), 1.0, b.unmitigated_instances,
                           b.shots, tuple(boot_r[:, j].tolist()))
        for j, L in enumerate(labels)
    }
    return MitigationResult(mitigated, raw, gamma, dict(zip(labels, factors.tolist())))


def predict_fidelity(
    circuit: Circuit, models: Mapping[str, LindbladModel], O: PauliString | None = None
) -> float:
    """Noisy-over-ideal signal predicted by the learned models."""
    O = O or circuit.observables[0]
    f = exact_expectation(circuit, NoiseRealization(dict(models)), O)
    if abs(f) < F_PRED_FLOOR:
        warnings.warn(f"predicted fidelity {f:.3g} is ill-conditioned", RuntimeWarning)
    return f


def delta_pred(raw: float, f_pred: float) -> float:
    """Deviation expected from model staleness, ``raw / f_pred - 1``."""
    return raw / f_pred - 1.0


def delta_mit(mitigated: float, ideal: float = 1.0) -> float:
    return mitigated - ideal


def model_hash(models: Mapping[str, LindbladModel]) -> str:
    h = hashlib.sha256()
    for name in sorted(models):
        h.update(name.encode())
        h.update(np.ascontiguousarray(models[name].rates).tobytes())
    return h.hexdigest()[:16]


# -- stability ----------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityConfig:
    """Cadence and budgets for repeated learn-then-mitigate cycles.

    Each cycle drifts the landscape to the cycle start, learns every layer,
    drifts for ``learn_to_mitigate_hr``, then mitigates the benchmark.
    """

    cycles: int = 20
    cycle_hr: float = 2.5
    learn_to_mitigate_hr: float = 0.5
    learning: LearningConfig = field(default_factory=LearningConfig)
    budget: Budget = field(default_factory=Budget)
    learn_bootstrap: int = 0
    N: int = 10
    tau: float = 135e-9
    shot_rate_hz: float = 1000.0
    mode: str = "sampled"

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("need at least one cycle")
        if self.cycle_hr <= 0 or not 0 <= self.learn_to_mitigate_hr < self.cycle_hr:
            raise ValueError("need 0 <= learn_to_mitigate_hr < cycle_hr")


@dataclass
class StabilityRecord:
    cycle: int
    t_hr: float
    strategy: str
    lambda_hash: str
    gamma: float
    f_pred: float
    f_exp: float
    delta_pred: float
    delta_mit: float
    mitigated: float
    mitigated_stderr: float
    raw: float
    raw_stderr: float
    cumulative_mean: float
    cumulative_stderr: float
    bootstrap: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def stability_run(
    landscape: TlsLandscape,
    strategies: Sequence[Strategy],
    cfg: StabilityConfig,
    gs: GeneratorSet,
    floors: Mapping[str, LindbladModel],
    readout: ReadoutModel | None = None,
    seed: int = 0,
    progress=None,
) -> dict[str, list[StabilityRecord]]:
    """Paired learn-then-mitigate cycles for several strategies on one timeline.

    All strategies see the same drifted landscapes; only the control knob
    differs.  Returns records keyed by strategy name.
    """
    layers = default_layers(gs.n)
    circuit = mirror_circuit(gs.n, cfg.N, layers)
    O = circuit.observables[0]
    state = {s.name: s for s in strategies}
    out: dict[str, list[StabilityRecord]] = {s.name: [] for s in strategies}
    L = L_mit = landscape
    for c in range(cfg.cycles):
        if c > 0:
            L = drift(L_mit, cfg.cycle_hr - cfg.learn_to_mitigate_hr, stream(seed, "drift", c, 0))
        L_mit = L
        if cfg.learn_to_mitigate_hr > 0:
            L_mit = drift(L, cfg.learn_to_mitigate_hr, stream(seed, "drift", c, 1))
        for si, name in enumerate(state):
            strat = state[name]
            if isinstance(strat, Optimized) and strat.due(L.time_hr):
                strat = state[name] = strat.reoptimize(L)

            def device(land: TlsLandscape, phase: int) -> Device:
                return Device(
                    gs, land, strat, cfg.tau, dict(floors), readout,
                    seed=int(stream(seed, "device", c, si, phase).integers(2**62)),
                    shot_rate_hz=cfg.shot_rate_hz, mode=cfg.mode,
                )

            dev = device(L, 0)
            models = {
                ln: learn(layer, dev, cfg.learning, bootstrap=cfg.learn_bootstrap).model
                for ln, layer in layers.items()
            }
            res = mitigate(circuit, models, cfg.budget, device(L_mit, 1), [O])
            m, r = res.mitigated[O.label], res.raw[O.label]
            fp = predict_fidelity(circuit, models, O)
            hist = [rec.mitigated for rec in out[name]] + [m.mean]
            cum_se = float(np.std(hist, ddof=1) / np.sqrt(len(hist))) if len(hist) > 1 else 0.0
            rec = StabilityRecord(
                cycle=c,
                t_hr=L.time_hr,
                strategy=name,
                lambda_hash=model_hash(models),
                gamma=res.gamma_total,
                f_pred=fp,
                f_exp=r.mean,
                delta_pred=delta_pred(r.mean, fp),
                delta_mit=delta_mit(m.mean),
                mitigated=m.mean,
                mitigated_stderr=m.stderr,
                raw=r.mean,
                raw_stderr=r.stderr,
                cumulative_mean=float(np.mean(hist)),
                cumulative_stderr=cum_se,
                bootstrap=list(m.bootstrap),
            )
            out[name].append(rec)
            if progress is not None:
                progress(rec)
    return out


# -- repeated learn-mitigate predictions --------------------------------------------


@dataclass(frozen=True)
class RepeatedPrediction:
    """Predicted mitigated values from every ordered pair of learned models.

    ``pairs[j] = (n1, n2, f_pred[n1] / f_pred[n2])``.  ``cumulative_mean[m]``
    and ``cumulative_stderr[m]`` summarize the pairs among the first
    ``m + 2`` models, the latter as ``std / sqrt(m + 2)``.
    """

    f_pred: np.ndarray
    pairs: np.ndarray
    cumulative_mean: np.ndarray
    cumulative_stderr: np.ndarray


def repeated_lm_prediction(
    series: Sequence[Mapping[str, LindbladModel]],
    circuit: Circuit,
    O: PauliString | None = None,
    ideal: float = 1.0,
) -> RepeatedPrediction:
    if len(series) < 2:
        raise ValueError("need at least two learned models")
    f = np.array([predict_fidelity(circuit, m, O) for m in series])
    M = len(f)
    pairs = np.array([(i, j, ideal * f[i] / f[j]) for i in range(M) for j in range(M) if i != j])
    cm, cs = [], []
    for m in range(2, M + 1):
        sel = (pairs[:, 0] < m) & (pairs[:, 1] < m)
        v = pairs[sel, 2]
        cm.append(v.mean())
        cs.append(v.std(ddof=0) / np.sqrt(m))
    return RepeatedPrediction(f, pairs, np.array(cm), np.array(cs))


def lm_ratio_bias(samples, pred_samples=None) -> tuple[float, float, float]:
    """``E[f_exp / f_pred]`` versus ``E[f_exp] / E[f_pred]`` for independent draws.

    With one sample array both fidelities come from the same distribution
    and the first expectation is the exact mean over all ordered pairs of
    distinct samples.  Returns ``(mean_ratio, ratio_of_means, gap)``.
    """
    f = np.asarray(samples, dtype=float)
    g = f if pred_samples is None else np.asarray(pred_samples, dtype=float)
    for a in (f, g):
        if a.ndim != 1 or a.size < 2 or np.any(a <= 0):
            raise ValueError("need at least two positive samples")
    if pred_samples is None:
        N = f.size
        mean_ratio = (f.sum() * (1.0 / f).sum() - N) / (N * (N - 1))
    else:
        mean_ratio = f.mean() * (1.0 / g).mean()
    ratio_means = f.mean() / g.mean()
    return float(mean_ratio), float(ratio_means), float(mean_ratio - ratio_means)
