"""Noise learning: depth series, decay fits, degeneracy pairing, NNLS inversion.

For a layer ``U`` and a Pauli ``P`` measured after ``d`` twirled
repetitions, the signal decays as ``A * (f_P f_P')**(d/2)`` where
``P' = U^dagger P U``.  When ``P != P'`` only the product is observable, so
both fidelities are set to its square root (the symmetry assumption).
The per-Pauli fidelities then determine the rates through
``-ln f_P / 2 = sum_k rate_k <P, G_k>``.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .engine import Device, learning_circuit
from .model import GeneratorSet, LindbladModel
from .nnls import nnls
from .pauli import CliffordLayer, PauliString, conjugate
from .rng import stream

__all__ = [
    "LearningConfig",
    "FidelityRecord",
    "FitResult",
    "LearnResult",
    "UnfittableError",
    "UnderdeterminedError",
    "measurement_bases",
    "measurable_in",
    "degeneracy_pairs",
    "fit_fidelity",
    "solve_lambda",
    "learn",
]

log = logging.getLogger(__name__)

MEAN_FLOOR = 1e-3


class UnfittableError(ValueError):
    """Every point of a decay curve sits at or below the floor."""


class UnderdeterminedError(np.linalg.LinAlgError):
    """The measured Paulis do not pin down every rate."""

    def __init__(self, message: str, directions: list[dict[str, float]]):
        super().__init__(message)
        self.directions = directions


@dataclass(frozen=True)
class LearningConfig:
    depths: tuple[int, ...] = (0, 4, 12, 24, 64)
    twirls: int = 60
    shots: int = 32
    bases: tuple[str, ...] | None = None

    def __post_init__(self):
        d = tuple(int(x) for x in self.depths)
        object.__setattr__(self, "depths", d)
        if any(x < 0 or x % 2 for x in d):
            raise ValueError("learning depths must be even and nonnegative")
        if 0 not in d:
            raise ValueError("learning depths must include 0")
        if len(set(d)) < 2:
            raise ValueError("need at least two distinct depths")
        if self.twirls < 2:
            raise ValueError("need at least two twirl instances per depth")
        if self.shots < 1:
            raise ValueError("need at least one shot per circuit")


@dataclass(frozen=True)
class FitResult:
    A: float
    f_pair: float
    f: float
    residual: float
    slope_stderr: float
    clamped: bool


@dataclass(frozen=True)
class FidelityRecord:
    label: str
    depths: tuple[int, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    A: float
    f_pair: float
    f: float
    residual: float
    partner: str
    assumed_symmetric: bool
    clamped: bool = False

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


# -- bases and pairing -----------------------------------------------------------


def _is_chain(gs: GeneratorSet) -> bool:
    return set(map(tuple, gs.edges)) == {(q, q + 1) for q in range(gs.n - 1)}


def measurement_bases(gs: GeneratorSet | int) -> list[str]:
    """Nine product bases covering every Pauli pair on every chain edge.

    Qubits alternate between the two letters of a setting ``(a, b)``, so an
    edge ``(q, q+1)`` sees ``(a, b)`` or ``(b, a)``; running over all nine
    settings covers all nine pairs.
    """
    if isinstance(gs, int):
        gs = GeneratorSet.chain(gs)
    if not _is_chain(gs):
        raise NotImplementedError("measurement bases are only built for chain topologies")
    out: list[str] = []
    for a in "XYZ":
        for b in "XYZ":
            s = "".join(a if q % 2 == 0 else b for q in range(gs.n))
            if s not in out:
                out.append(s)
    return out


def measurable_in(P: PauliString, basis: str) -> bool:
    return all(P.op(q) == basis[q] for q in P.support)


def degeneracy_pairs(
    layer: CliffordLayer, paulis: Sequence[PauliString] | None = None
) -> dict[str, str]:
    """Partner label ``U^dagger P U`` (unsigned) for every Pauli in ``paulis``.

    Defaults to the generator Paulis of the chain on ``layer.n`` qubits.
    Fixed points map to themselves.
    """
    if paulis is None:
        paulis = GeneratorSet.chain(layer.n).generators
    inv = layer.inverse()
    return {P.unsigned().label: conjugate(inv, P.unsigned()).unsigned().label for P in paulis}


# -- fitting ------------------------------------------------------------------------


def fit_fidelity(
    depths: Sequence[float],
    means: Sequence[float],
    stderrs: Sequence[float] | None = None,
    unit: int = 2,
) -> FitResult:
    """Weighted log-linear fit of ``mean = A * f_pair**(d / unit)``.

    Weights are ``(stderr / mean)**-2``; when no stderr is positive the fit
    is unweighted.  Means below ``1e-3`` are clipped.  ``f`` is the
    per-layer fidelity ``f_pair**(1 / unit)``.
    """
    d = np.asarray(depths, dtype=float)
    y = np.asarray(means, dtype=float)
    if d.shape != y.shape or len(np.unique(d)) < 2:
        raise ValueError("need matching arrays with at least two distinct depths")
    se = np.zeros_like(y) if stderrs is None else np.asarray(stderrs, dtype=float)
    low = y < MEAN_FLOOR
    if low.all():
        raise UnfittableError("every mean is below the fit floor")
    if low.any():
        warnings.warn(f"{int(low.sum())} decay point(s) clipped at {MEAN_FLOOR}", RuntimeWarning)
        y = np.where(low, MEAN_FLOOR, y)
    rel = se / y
    if np.any(rel > 0):
        rel = np.maximum(rel, max(rel[rel > 0].min(), 1e-9))
        w = rel**-2.0
    else:
        w = np.ones_like(y)
    X = np.column_stack([np.ones_like(d), d / unit])
    Xw = X * w[:, None]
    cov = np.linalg.inv(X.T @ Xw)
    beta = cov @ (Xw.T @ np.log(y))
    resid = np.log(y) - X @ beta
    residual = float(np.sqrt(np.sum(w * resid**2) / max(np.sum(w), 1e-300)))
    slope_se = float(np.sqrt(cov[1, 1])) if np.any(se > 0) else 0.0
    clamped = beta[1] > 0
    lnf_pair = min(beta[1], 0.0)
    A = float(np.exp(beta[0]))
    return FitResult(
        A=A,
        f_pair=float(np.exp(lnf_pair)),
        f=float(np.exp(lnf_pair / unit)),
        residual=residual,
        slope_stderr=slope_se / unit,
        clamped=bool(clamped),
    )


# -- inversion ----------------------------------------------------------------------


def _null_directions(M: np.ndarray, gs: GeneratorSet, tol: float) -> list[dict[str, float]]:
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * s.max())) if s.size else 0
    out = []
    for v in vt[rank:]:
        out.append({gs.labels[k]: round(float(c), 6) for k, c in enumerate(v) if abs(c) > 1e-8})
    return out


@dataclass(frozen=True)
class SolveResult:
    rates: np.ndarray
    residual: float
    labels: tuple[str, ...]


def solve_lambda(
    fidelities: Mapping[str, float],
    gs: GeneratorSet,
    tol: float = 1e-10,
) -> SolveResult:
    """Nonnegative rates reproducing ``f_P = exp(-2 sum_k rate_k <P, G_k>)``.

    Raises
    ------
    UnderdeterminedError
        If the overlap matrix of the supplied Paulis has column rank below
        the number of generators.  The exception lists null-space directions.
    """
    labels = tuple(fidelities)
    paulis = [PauliString.from_label(L) for L in labels]
    f = np.array([fidelities[L] for L in labels], dtype=float)
    if np.any(f <= 0) or np.any(f > 1 + 1e-12):
        raise ValueError("fidelities must lie in (0, 1]")
    M = gs.overlap_matrix(paulis)
    rank = np.linalg.matrix_rank(M) if M.size else 0
    if rank < len(gs):
        dirs = _null_directions(M, gs, 1e-10)
        raise UnderdeterminedError(
            f"overlap matrix has rank {rank} < {len(gs)} generators", dirs
        )
    b = -0.5 * np.log(np.minimum(f, 1.0))
    x, rnorm = nnls(M, b, tol=tol)
    return SolveResult(x, rnorm, labels)


# -- full protocol ------------------------------------------------------------------


@dataclass
class LearnResult:
    layer: str
    model: LindbladModel
    records: list[FidelityRecord]
    residual: float
    gamma: float
    gamma_std: float
    rate_std: np.ndarray
    bootstrap_rates: np.ndarray
    decays: dict = field(default_factory=dict)
    timestamp: float = 0.0

    def local_gamma_table(self) -> dict[str, float]:
        gs = self.model.generator_set
        return {str(s): self.model.local_gamma(s) for s in gs.scopes()}

    def to_dict(self) -> dict:
        q = (
            np.quantile(self.bootstrap_rates, [0.25, 0.5, 0.75], axis=0).tolist()
            if len(self.bootstrap_rates)
            else []
        )
        return {
            "layer": self.layer,
            "time_hr": self.timestamp,
            "model": self.model.to_dict(),
            "gamma": self.gamma,
            "gamma_std": self.gamma_std,
            "lambda_std": self.rate_std.tolist(),
            "local_gamma": self.local_gamma_table(),
            "bootstrap_quantiles": {"q": [0.25, 0.5, 0.75], "lambda": q},
            "residual": self.residual,
            "records": [r.to_dict() for r in self.records],
            "decays": self.decays,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _measured_paulis(gs: GeneratorSet, basis: str) -> list[PauliString]:
    return [G for G in gs.generators if measurable_in(G, basis)]


def _z_string(P: PauliString) -> PauliString:
    return PauliString(P.n, 0, P.x | P.z)


def _collect(
    layer: CliffordLayer, device: Device, cfg: LearningConfig, gs: GeneratorSet, bases: list[str]
) -> dict[tuple[str, int], tuple[list[str], np.ndarray]]:
    """Per (basis, depth): measured labels and per-instance means (labels x twirls)."""
    data = {}
    for b in bases:
        meas = _measured_paulis(gs, b)
        obs = [_z_string(P) for P in meas]
        labels = [P.label for P in meas]
        for d in cfg.depths:
            c = learning_circuit(layer, d, b, observables=obs)
            if device.mode == "exact":
                vals = device.exact(c, obs)
                means = np.repeat(vals[:, None], cfg.twirls, axis=1)
            else:
                batch = device.run(c, cfg.twirls, cfg.shots, purpose=f"learn:{layer.name}:{b}:{d}")
                means = batch.instance_means(obs)
            data[(b, d)] = (labels, means)
    return data


def _pool(data, cfg: LearningConfig, picks=None):
    """Per-label arrays of per-depth means and stderrs, optionally resampled."""
    acc: dict[str, dict[int, list[np.ndarray]]] = {}
    for (b, d), (labels, means) in data.items():
        m = means if picks is None else means[:, picks[(b, d)]]
        for j, L in enumerate(labels):
            acc.setdefault(L, {}).setdefault(d, []).append(m[j])
    out = {}
    for L, per in acc.items():
        mu, se = [], []
        for d in cfg.depths:
            v = np.concatenate(per[d])
            mu.append(v.mean())
            se.append(v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0)
        out[L] = (np.array(mu), np.array(se))
    return out


def _resolve(layer: CliffordLayer, pooled, cfg: LearningConfig, gs: GeneratorSet, quiet=False):
    pairs = degeneracy_pairs(layer, gs.generators)
    fits = {}
    for L, (mu, se) in pooled.items():
        if quiet:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fits[L] = fit_fidelity(cfg.depths, mu, se)
        else:
            fits[L] = fit_fidelity(cfg.depths, mu, se)
    # both members of a measured 2-cycle estimate the same product: combine in log space
    lnf = {}
    for L, fr in fits.items():
        P2 = pairs[L]
        group = [L] + ([P2] if P2 in fits and P2 != L else [])
        vals = np.array([np.log(fits[g].f) for g in group])
        errs = np.array([fits[g].slope_stderr for g in group])
        if np.all(errs > 0):
            w = errs**-2.0
            v = float(np.sum(w * vals) / np.sum(w))
        else:
            v = float(vals.mean())
        lnf[L] = v
        lnf.setdefault(P2, v)
    return fits, pairs, {L: float(np.exp(v)) for L, v in lnf.items()}


def learn(
    layer: CliffordLayer,
    device: Device,
    cfg: LearningConfig | None = None,
    bootstrap: int = 100,
    seed: int | None = None,
) -> LearnResult:
    """Run the learning protocol for one layer on a simulated device."""
    cfg = cfg or LearningConfig()
    gs = device.gs
    bases = list(cfg.bases or measurement_bases(gs))
    data = _collect(layer, device, cfg, gs, bases)
    pooled = _pool(data, cfg)
    fits, pairs, fids = _resolve(layer, pooled, cfg, gs)
    sol = solve_lambda(fids, gs)
    model = LindbladModel(gs, sol.rates)

    records = []
    for L, fr in fits.items():
        mu, se = pooled[L]
        records.append(
            FidelityRecord(
                label=L,
                depths=tuple(cfg.depths),
                means=tuple(float(v) for v in mu),
                stderrs=tuple(float(v) for v in se),
                A=fr.A,
                f_pair=fr.f_pair,
                f=fids[L],
                residual=fr.residual,
                partner=pairs[L],
                assumed_symmetric=pairs[L] != L,
                clamped=fr.clamped,
            )
        )

    boot = np.zeros((0, len(gs)))
    if bootstrap and device.mode == "sampled":
        rng = stream(device.seed if seed is None else seed, f"learn-bootstrap:{layer.name}")
        rows = []
        for _ in range(bootstrap):
            picks = {key: rng.integers(0, m.shape[1], m.shape[1]) for key, (_, m) in data.items()}
            _, _, f_b = _resolve(layer, _pool(data, cfg, picks), cfg, gs, quiet=True)
            rows.append(solve_lambda(f_b, gs).rates)
        boot = np.array(rows)
    gammas = np.exp(2 * boot.sum(1)) if len(boot) else np.zeros(0)
    decays = {
        f"{b}:{d}": {"labels": labels, "means": means.mean(1).tolist()}
        for (b, d), (labels, means) in data.items()
    }
    return LearnResult(
        layer=layer.name,
        model=model,
        records=records,
        residual=sol.residual,
        gamma=model.gamma(),
        gamma_std=float(gammas.std(ddof=1)) if len(gammas) > 1 else 0.0,
        rate_std=boot.std(0, ddof=1) if len(boot) > 1 else np.zeros(len(gs)),
        bootstrap_rates=boot,
        decays=decays,
        timestamp=device.landscape.time_hr if device.landscape is not None else 0.0,
    )
