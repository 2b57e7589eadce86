"""Quasi-static noise: closed forms and the Monte Carlo studies that check them.

With a shot-constant rate ``Gamma`` the fidelity after ``d`` layers is
``exp(-d Gamma)``, so averaging over shots gives the moment generating
function of ``Gamma`` rather than a pure exponential in ``d``.  Fitting an
exponential to such a curve and dividing it out during mitigation leaves a
multiplicative bias set by the depth schedule.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

__all__ = [
    "DEFAULT_SCHEDULE",
    "GaussianRate",
    "lognormal_moment",
    "effective_depth",
    "fitted_rate",
    "fitted_rate_lstsq",
    "quasi_static_bias",
    "LearnMitigateResult",
    "simulate_learn_mitigate",
    "AveragedT1Result",
    "averaged_t1_sim",
    "quasi_static_learning_sim",
    "MitsimResult",
    "mitsim",
    "jensen_gap",
    "additive_deviation",
    "curves_csv",
]

DEFAULT_SCHEDULE = (0, 4, 12, 24, 48, 64)


@dataclass(frozen=True)
class GaussianRate:
    """Per-layer decay rate ``Gamma ~ N(mu, sigma**2)``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def sample(self, rng: np.random.Generator, size, truncate: bool = True) -> np.ndarray:
        """Draw rates; with ``truncate`` negative draws are redrawn (zero-truncated law)."""
        g = rng.normal(self.mu, self.sigma, size)
        if truncate:
            bad = g < 0
            while np.any(bad):
                g[bad] = rng.normal(self.mu, self.sigma, int(bad.sum()))
                bad = g < 0
        return g


def lognormal_moment(r: GaussianRate, d) -> np.ndarray | float:
    """``E[f**d] = exp(-d mu + d**2 sigma**2 / 2)`` for ``f = exp(-Gamma)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("depth must be nonnegative")
    out = np.exp(-d * r.mu + 0.5 * d**2 * r.sigma**2)
    return float(out) if out.ndim == 0 else out


def _schedule(s: Sequence[float]) -> np.ndarray:
    d = np.asarray(s, dtype=float)
    if d.ndim != 1 or d.size == 0 or np.any(d < 0):
        raise ValueError("schedule must be a nonempty list of nonnegative depths")
    return d


def effective_depth(s: Sequence[float]) -> float:
    """``sum d**3 / sum d**2`` of a depth schedule."""
    d = _schedule(s)
    den = np.sum(d**2)
    if den == 0:
        raise ValueError("schedule has no nonzero depth")
    return float(np.sum(d**3) / den)


def fitted_rate(r: GaussianRate, s: Sequence[float]) -> float:
    """Closed-form rate ``mu - sigma**2 d_eff / 2`` returned by the log-linear fit."""
    return r.mu - 0.5 * r.sigma**2 * effective_depth(s)


def fitted_rate_lstsq(moments: Sequence[float], s: Sequence[float]) -> float:
    """Least-squares rate through the origin: ``-sum d ln m_d / sum d**2``."""
    d = _schedule(s)
    m = np.asarray(moments, dtype=float)
    if m.shape != d.shape or np.any(m <= 0):
        raise ValueError("need one positive moment per depth")
    den = np.sum(d**2)
    if den == 0:
        raise ValueError("schedule has no nonzero depth")
    return float(-np.sum(d * np.log(m)) / den)


def quasi_static_bias(sigma: float, d: float, d_eff: float) -> float:
    """Mitigated-over-ideal ratio ``exp(sigma**2 d (d - d_eff) / 2)``."""
    return float(np.exp(0.5 * sigma**2 * d * (d - d_eff)))


# -- learn-then-mitigate Monte Carlo ------------------------------------------------


@dataclass(frozen=True)
class LearnMitigateResult:
    ratio: float
    stderr: float
    closed_form: float
    fitted_rate: float
    samples: int

    @property
    def z(self) -> float:
        return (self.ratio - self.closed_form) / self.stderr if self.stderr > 0 else 0.0


def simulate_learn_mitigate(
    r: GaussianRate,
    schedule: Sequence[float],
    d: int,
    samples: int,
    rng: np.random.Generator,
    truncate: bool = False,
    groups: int = 50,
    independent: bool = False,
) -> LearnMitigateResult:
    """Learn a rate from a shot-averaged depth series, then mitigate depth ``d``.

    Each of ``samples`` shots draws one rate and contributes its exact
    decay (infinite shots per realization).  By default learning and
    mitigation see the same ensemble draws; ``independent`` gives them
    separate draws.  The standard error comes from a delete-one-group
    jackknife.
    """
    sched = _schedule(schedule)
    g_learn = r.sample(rng, samples, truncate)
    g_mit = r.sample(rng, samples, truncate) if independent else g_learn
    learn_terms = np.exp(-np.outer(g_learn, sched))  # (samples, depths)
    mit_terms = np.exp(-d * g_mit)

    def estimate(lt_mean: np.ndarray, mt_mean: float) -> tuple[float, float]:
        mu_t = fitted_rate_lstsq(lt_mean, sched)
        return mt_mean / np.exp(-d * mu_t), mu_t

    ratio, mu_t = estimate(learn_terms.mean(0), mit_terms.mean())
    G = groups
    lt_g = np.array([c.sum(0) for c in np.array_split(learn_terms, G)])
    mt_g = np.array([c.sum() for c in np.array_split(mit_terms, G)])
    n_g = np.array([len(c) for c in np.array_split(mit_terms, G)])
    jack = np.empty(G)
    for g in range(G):
        n = samples - n_g[g]
        jack[g] = estimate((lt_g.sum(0) - lt_g[g]) / n, (mt_g.sum() - mt_g[g]) / n)[0]
    se = float(np.sqrt((G - 1) / G * np.sum((jack - jack.mean()) ** 2)))
    cf = quasi_static_bias(r.sigma, d, effective_depth(sched))
    return LearnMitigateResult(float(ratio), se, cf, mu_t, samples)


# -- T1 averaging ------------------------------------------------------------------


@dataclass(frozen=True)
class AveragedT1Result:
    fitted_t1: float
    fitted_t1_samples: np.ndarray
    delays: np.ndarray
    curve: np.ndarray
    max_sampled_t1: float

    def histogram(self, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.fitted_t1_samples, bins=bins)


def _exp_fit(t: np.ndarray, y: np.ndarray, t0: float) -> float:
    popt, _ = curve_fit(lambda t, a, T: a * np.exp(-t / T), t, y, p0=(1.0, t0), maxfev=10000)
    return float(popt[1])


def averaged_t1_sim(
    mean: float,
    sd: float,
    delays: Sequence[float],
    trials: int,
    rng: np.random.Generator,
    repetitions: int = 1,
) -> AveragedT1Result:
    """Fit one exponential to survival curves averaged over random static T1 draws.

    T1 is drawn from a zero-truncated normal per trial.  The first
    repetition provides ``fitted_t1`` and ``curve``; all repetitions fill the
    histogram sample.
    """
    if mean <= 0 or sd < 0 or trials < 1 or repetitions < 1:
        raise ValueError("invalid T1 distribution or trial counts")
    t = np.asarray(delays, dtype=float)
    fits, first_curve, tmax = [], None, 0.0
    for rep in range(repetitions):
        t1 = GaussianRate(mean, sd).sample(rng, trials, truncate=True)
        t1 = t1[t1 > 0]
        curve = np.exp(-t[None, :] / t1[:, None]).mean(0)
        fits.append(_exp_fit(t, curve, mean))
        if rep == 0:
            first_curve, tmax = curve, float(t1.max())
    fits = np.array(fits)
    return AveragedT1Result(float(fits[0]), fits, t, first_curve, tmax)


def quasi_static_learning_sim(
    t1_samples: Sequence[float], t0: float, depths: Sequence[int]
) -> tuple[float, float, float]:
    """Markovian versus fitted average Z fidelity for an equal-weight T1 set.

    Returns ``(f_markov, f_fit, |f_markov - f_fit| / f_markov)``; the fit
    is the unweighted log-linear fit through the origin.
    """
    t1 = np.asarray(t1_samples, dtype=float)
    if t1.size == 0 or np.any(t1 <= 0):
        raise ValueError("need a nonempty set of positive T1 values")
    f = np.exp(-t0 / t1)
    f_markov = float(f.mean())
    d = _schedule(depths)
    curve = np.array([np.mean(f**k) for k in d])
    f_fit = float(np.exp(-fitted_rate_lstsq(curve, d)))
    return f_markov, f_fit, abs(f_markov - f_fit) / f_markov


# -- six-qubit mitigation simulation ---------------------------------------------------


@dataclass(frozen=True)
class MitsimResult:
    """Deviation of mitigated ``<Z...Z>`` from 1 over the product T1 distribution.

    ``mean_deviation`` is exact (the product distribution factorizes);
    ``deviations`` is the full enumeration or a random subsample of it.
    """

    fitted_t1: np.ndarray
    mean_deviation: float
    deviations: np.ndarray
    enumerated: bool

    @property
    def mean_abs_deviation(self) -> float:
        return float(np.mean(np.abs(self.deviations)))


def _fit_t1(t1: np.ndarray, schedule: np.ndarray, tau: float) -> float:
    curve = np.array([np.mean(np.exp(-d * tau / t1)) for d in schedule])
    return tau / fitted_rate_lstsq(curve, schedule) if np.any(schedule > 0) else np.inf


def mitsim(
    learn_t1: Sequence[Sequence[float]],
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    tau: float = 135e-9,
    target_d: int = 24,
    target_t1: Sequence[Sequence[float]] | None = None,
    rng: np.random.Generator | None = None,
    max_enumerate: int = 1_000_000,
    subsample: int = 100_000,
) -> MitsimResult:
    """Learn per-qubit T1 from averaged decays, then mitigate a depth-``d`` Z string.

    ``target_t1`` (defaults to ``learn_t1``) gives the per-qubit T1 values
    at mitigation time, which lets learned-at-one-time models be applied to
    later landscapes.
    """
    learn = [np.asarray(x, dtype=float) for x in learn_t1]
    target = learn if target_t1 is None else [np.asarray(x, dtype=float) for x in target_t1]
    if len(learn) != len(target):
        raise ValueError("learn and target distributions need the same qubit count")
    sched = _schedule(schedule)
    fitted = np.array([_fit_t1(x, sched, tau) for x in learn])
    # per-qubit mitigated factors exp(-d tau / T1) / exp(-d tau / T1_fit)
    factors = [np.exp(-target_d * tau * (1.0 / x - 1.0 / ft)) for x, ft in zip(target, fitted)]
    mean_dev = float(np.prod([f.mean() for f in factors]) - 1.0)
    total = int(np.prod([f.size for f in factors], dtype=float))
    if total <= max_enumerate:
        prod = np.ones(1)
        for f in factors:
            prod = np.multiply.outer(prod, f).ravel()
        devs, enumerated = prod - 1.0, True
    else:
        rng = rng or np.random.default_rng(0)
        prod = np.ones(subsample)
        for f in factors:
            prod *= f[rng.integers(0, f.size, subsample)]
        devs, enumerated = prod - 1.0, False
    return MitsimResult(fitted, mean_dev, devs, enumerated)


# -- convexity and perturbation checks ------------------------------------------------


def jensen_gap(rates: np.ndarray, depths: Sequence[int], weights: np.ndarray | None = None) -> np.ndarray:
    """``E[f**d] - E[f]**d`` for ``f = exp(-rate)`` over a discrete distribution."""
    g = np.asarray(rates, dtype=float)
    w = np.full(g.size, 1.0 / g.size) if weights is None else np.asarray(weights, float) / np.sum(weights)
    f = np.exp(-g)
    d = np.asarray(depths, dtype=float)
    return (w @ f[:, None] ** d[None, :]) - (w @ f) ** d


def additive_deviation(f: float, fp: float, delta: float, d: int) -> float:
    """``|E[(f f')**d] - E[f f']**d|`` for independent symmetric +/-delta shifts.

    Each of ``f`` and ``f'`` moves by ``+delta`` or ``-delta`` with equal
    probability; the four outcomes are enumerated exactly.
    """
    if not (0 < f - delta and f + delta <= 1 and 0 < fp - delta and fp + delta <= 1):
        raise ValueError("perturbed fidelities must stay in (0, 1]")
    vals = [(f + a * delta) * (fp + b * delta) for a in (-1, 1) for b in (-1, 1)]
    vals = np.array(vals)
    return float(abs(np.mean(vals**d) - np.mean(vals) ** d))


def curves_csv(r: GaussianRate, depths: Sequence[int]) -> str:
    """CSV rows ``(d, markov_curve, quasi_static_curve)`` for a Gaussian rate."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "markov_curve", "quasi_static_curve"])
    f_bar = lognormal_moment(r, 1)
    for d in depths:
        w.writerow([d, f_bar**d, lognormal_moment(r, d)])
    return buf.getvalue()
