"""Synthetic TLS landscapes and k_TLS modulation strategies.

Each qubit has a base T1 and a handful of defects.  A defect adds a
Lorentzian relaxation-rate peak in the dimensionless control coordinate
``k``; defect centers wander as mean-reverting (Ornstein-Uhlenbeck) walks
in simulated hours.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np

from .model import GeneratorSet, LindbladModel, NoiseRealization, model_from_t1, t1_rates

__all__ = [
    "DEFAULT_GRID",
    "PE_DELAY",
    "Defect",
    "TlsLandscape",
    "Control",
    "Optimized",
    "Averaged",
    "Strategy",
    "random_landscape",
    "t1_at",
    "pe_proxy",
    "scan_pe",
    "optimize_k",
    "sample_k",
    "waveform",
    "drift",
    "realize_noise",
    "realization_rates",
]

PE_DELAY = 40e-6
DEFAULT_GRID = np.round(np.linspace(-1.0, 1.0, 41), 10)


@dataclass(frozen=True)
class Defect:
    center: float
    width: float
    strength: float
    anchor: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("defect width must be positive")
        if self.strength < 0:
            raise ValueError("defect strength must be nonnegative")


@dataclass(frozen=True, eq=False)
class TlsLandscape:
    """Per-qubit defect landscape at simulated time ``time_hr``.

    Defect arrays have shape ``(n, D)``; unused slots carry zero strength.
    ``sigma_drift`` is the center diffusion per square-root hour and
    ``theta`` the mean-reversion rate per hour.
    """

    base_t1: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    strengths: np.ndarray
    anchors: np.ndarray
    sigma_drift: float = 0.15
    theta: float = 0.05
    k_range: tuple[float, float] = (-1.0, 1.0)
    time_hr: float = 0.0

    def __post_init__(self):
        base = np.atleast_1d(np.asarray(self.base_t1, dtype=float))
        n = base.shape[0]
        arrays = {}
        for name in ("centers", "widths", "strengths", "anchors"):
            a = np.asarray(getattr(self, name), dtype=float).reshape(n, -1)
            a.setflags(write=False)
            arrays[name] = a
        if np.any(base <= 0):
            raise ValueError("base T1 must be positive")
        if np.any(arrays["widths"] <= 0):
            raise ValueError("defect widths must be positive")
        if np.any(arrays["strengths"] < 0):
            raise ValueError("defect strengths must be nonnegative")
        base.setflags(write=False)
        object.__setattr__(self, "base_t1", base)
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.base_t1.shape[0]

    @classmethod
    def flat(cls, base_t1: Sequence[float], **kw) -> "TlsLandscape":
        base = np.asarray(base_t1, dtype=float)
        z = np.zeros((base.shape[0], 1))
        return cls(base, z, np.ones_like(z), z, z, **kw)

    @classmethod
    def from_defects(
        cls, base_t1: Sequence[float], defects: Sequence[Sequence[Defect]], **kw
    ) -> "TlsLandscape":
        n = len(base_t1)
        D = max(1, max((len(d) for d in defects), default=0))
        c, w, s, a = (np.zeros((n, D)) for _ in range(4))
        w[:] = 1.0
        for q, ds in enumerate(defects):
            for j, d in enumerate(ds):
                c[q, j], w[q, j], s[q, j], a[q, j] = d.center, d.width, d.strength, d.anchor
        return cls(np.asarray(base_t1, float), c, w, s, a, **kw)

    def defects(self, qubit: int) -> list[Defect]:
        return [
            Defect(*(float(v) for v in (c, w, s, a)))
            for c, w, s, a in zip(
                self.centers[qubit], self.widths[qubit], self.strengths[qubit], self.anchors[qubit]
            )
            if s > 0
        ]

    def check_k(self, k) -> None:
        k = np.asarray(k, dtype=float)
        lo, hi = self.k_range
        if np.any(k < lo - 1e-12) or np.any(k > hi + 1e-12):
            raise ValueError(f"k outside configured range [{lo}, {hi}]")

    def decay_rate(self, k: np.ndarray) -> np.ndarray:
        """1/T1 for ``k`` of shape ``(..., n)`` (one column per qubit)."""
        k = np.asarray(k, dtype=float)
        self.check_k(k)
        u = (k[..., :, None] - self.centers) / self.widths
        return 1.0 / self.base_t1 + (self.strengths / (1.0 + u * u)).sum(-1)

    def t1(self, k: np.ndarray) -> np.ndarray:
        return 1.0 / self.decay_rate(k)

    def to_dict(self) -> dict:
        return {
            "base_t1": self.base_t1.tolist(),
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "strengths": self.strengths.tolist(),
            "anchors": self.anchors.tolist(),
            "sigma_drift": self.sigma_drift,
            "theta": self.theta,
            "k_range": list(self.k_range),
            "time_hr": self.time_hr,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "TlsLandscape":
        data = dict(data)
        data["k_range"] = tuple(data.get("k_range", (-1.0, 1.0)))
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "TlsLandscape":
        return cls.from_dict(json.loads(text))


def random_landscape(
    n: int,
    rng: np.random.Generator,
    base_t1_range: tuple[float, float] = (60e-6, 150e-6),
    defects_per_qubit: tuple[int, int] = (2, 4),
    width_range: tuple[float, float] = (0.04, 0.12),
    strength_range: tuple[float, float] = (0.5, 5.0),
    center_range: tuple[float, float] = (-1.2, 1.2),
    **kw,
) -> TlsLandscape:
    """Draw a landscape; defect strengths are multiples of the base decay rate."""
    base = rng.uniform(*base_t1_range, size=n)
    D = defects_per_qubit[1]
    c, w, s = np.zeros((n, D)), np.ones((n, D)), np.zeros((n, D))
    for q in range(n):
        m = rng.integers(defects_per_qubit[0], defects_per_qubit[1] + 1)
        c[q, :m] = rng.uniform(*center_range, size=m)
        w[q, :m] = rng.uniform(*width_range, size=m)
        s[q, :m] = rng.uniform(*strength_range, size=m) / base[q]
    return TlsLandscape(base, c, w, s, c.copy(), **kw)


def t1_at(L: TlsLandscape, qubit: int, k: float) -> float:
    """T1 in seconds of ``qubit`` at control value ``k`` (current landscape time)."""
    L.check_k(k)
    u = (k - L.centers[qubit]) / L.widths[qubit]
    return float(1.0 / (1.0 / L.base_t1[qubit] + (L.strengths[qubit] / (1.0 + u * u)).sum()))


def pe_proxy(t1, delay: float = PE_DELAY):
    """Excited-state survival after ``delay`` (SPAM ignored)."""
    if delay < 0:
        raise ValueError("delay must be nonnegative")
    t1 = np.asarray(t1, dtype=float)
    if np.any(t1 <= 0):
        raise ValueError("T1 must be positive")
    out = np.exp(-delay / t1)
    return float(out) if out.ndim == 0 else out


def scan_pe(
    L: TlsLandscape, qubit: int, grid: Sequence[float] = DEFAULT_GRID, delay: float = PE_DELAY
) -> np.ndarray:
    """Array of ``(k, P_e)`` rows over the grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty k grid")
    L.check_k(grid)
    u = (grid[:, None] - L.centers[qubit]) / L.widths[qubit]
    rate = 1.0 / L.base_t1[qubit] + (L.strengths[qubit] / (1.0 + u * u)).sum(-1)
    return np.column_stack([grid, np.exp(-delay * rate)])


def optimize_k(
    L: TlsLandscape, qubit: int, grid: Sequence[float] = DEFAULT_GRID, delay: float = PE_DELAY
) -> float:
    """Grid point maximizing P_e; ties go to the point nearest the grid center."""
    curve = scan_pe(L, qubit, grid, delay)
    k, pe = curve[:, 0], curve[:, 1]
    center = 0.5 * (k.min() + k.max())
    best = np.flatnonzero(pe == pe.max())
    return float(k[best[np.argmin(np.abs(k[best] - center))]])


@dataclass(frozen=True)
class Control:
    """Hold k fixed at the neutral point."""

    k_fixed: float = 0.0
    name: str = field(default="control", init=False)


@dataclass(frozen=True)
class Optimized:
    """Pin each qubit at its P_e argmax, refreshed every ``reopt_period_hr``."""

    reopt_period_hr: float = 1.5
    grid: tuple[float, ...] = tuple(DEFAULT_GRID.tolist())
    k_star: tuple[float, ...] | None = None
    last_opt_hr: float | None = None
    name: str = field(default="optimized", init=False)

    def reoptimize(self, L: TlsLandscape) -> "Optimized":
        ks = tuple(optimize_k(L, q, self.grid) for q in range(L.n))
        return replace(self, k_star=ks, last_opt_hr=L.time_hr)

    def due(self, time_hr: float) -> bool:
        return self.last_opt_hr is None or time_hr - self.last_opt_hr >= self.reopt_period_hr - 1e-12


@dataclass(frozen=True)
class Averaged:
    """Slow per-shot modulation ``center + amplitude * wave(freq * t)``."""

    waveform: str = "triangle"
    freq_hz: float = 1.0
    amplitude: float = 0.2
    center: float = 0.0
    name: str = field(default="averaged", init=False)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.waveform not in ("sine", "triangle"):
            raise ValueError(f"unknown waveform {self.waveform!r}")


Strategy = Union[Control, Optimized, Averaged]


def waveform(kind: str, phase: np.ndarray) -> np.ndarray:
    """Unit-amplitude wave of the cycle fraction ``phase``; zero and rising at 0."""
    phase = np.mod(np.asarray(phase, dtype=float), 1.0)
    if kind == "sine":
        return np.sin(2 * np.pi * phase)
    if kind == "triangle":
        return np.where(
            phase < 0.25, 4 * phase, np.where(phase < 0.75, 2 - 4 * phase, 4 * phase - 4)
        )
    raise ValueError(f"unknown waveform {kind!r}")


def sample_k(strategy: Strategy, shot_index, shot_rate_hz: float, n: int) -> np.ndarray:
    """Per-qubit k for each shot; returns shape ``shot_index.shape + (n,)``."""
    shots = np.asarray(shot_index)
    if isinstance(strategy, Control):
        return np.full(shots.shape + (n,), strategy.k_fixed, dtype=float)
    if isinstance(strategy, Optimized):
        if strategy.k_star is None:
            raise ValueError("optimized strategy has not been optimized yet")
        return np.broadcast_to(np.asarray(strategy.k_star, float), shots.shape + (n,)).copy()
    if isinstance(strategy, Averaged):
        if shot_rate_hz <= strategy.freq_hz:
            raise ValueError("shot rate must exceed the modulation frequency")
        phase = strategy.freq_hz * shots / shot_rate_hz
        k = strategy.center + strategy.amplitude * waveform(strategy.waveform, phase)
        return np.repeat(np.asarray(k, float)[..., None], n, axis=-1)
    raise TypeError(f"unknown strategy {strategy!r}")


def drift(L: TlsLandscape, dt_hr: float, rng: np.random.Generator) -> TlsLandscape:
    """Advance defect centers by one Euler-Maruyama OU step of ``dt_hr`` hours."""
    if dt_hr <= 0:
        raise ValueError("dt must be positive")
    noise = rng.standard_normal(L.centers.shape)
    step = -L.theta * (L.centers - L.anchors) * dt_hr + L.sigma_drift * np.sqrt(dt_hr) * noise
    return replace(L, centers=L.centers + step, time_hr=L.time_hr + dt_hr)


def realization_rates(
    L: TlsLandscape,
    k: np.ndarray,
    tau: float,
    gs: GeneratorSet,
    floors: Mapping[str, LindbladModel],
) -> dict[str, np.ndarray]:
    """Vectorized :func:`realize_noise`: rates of shape ``k.shape[:-1] + (K,)`` per layer."""
    r = t1_rates(L.t1(k), tau)
    base = np.zeros(r.shape[:-1] + (len(gs),))
    base[..., 0 : 3 * gs.n : 3] = r
    base[..., 1 : 3 * gs.n : 3] = r
    return {name: base + floor.rates for name, floor in floors.items()}


def realize_noise(
    L: TlsLandscape,
    k: Sequence[float],
    layers: Sequence[str],
    tau: float,
    gs: GeneratorSet,
    floors: Mapping[str, LindbladModel] | None = None,
    index: int = 0,
) -> NoiseRealization:
    """One quasi-static snapshot: T1-limited model per layer plus static floors."""
    k = np.asarray(k, dtype=float)
    t1 = L.t1(k)
    base = model_from_t1(t1, tau, gs)
    models = {}
    for name in layers:
        m = base
        if floors and name in floors:
            m = base + floors[name]
        models[name] = m
    return NoiseRealization(models, index=index, timestamp=L.time_hr, t1=tuple(t1.tolist()))
