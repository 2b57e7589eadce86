"""Experiment configuration: YAML file merged over documented defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .engine import ReadoutModel, default_layers
from .learn import LearningConfig
from .model import RATE_CEILING, GeneratorSet, LindbladModel, floor_model
from .pec import Budget, StabilityConfig
from .rng import stream
from .tls import Averaged, Control, Optimized, TlsLandscape, random_landscape

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULT_CONFIG", "DEFAULT_YAML"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


DEFAULT_YAML = """\
# Experiment configuration.  Every key is optional; missing keys take these values.
seed: 0                     # master seed; every random stream is keyed from it
n: 6                        # qubits on a linear chain
tau: 1.35e-7                # CZ layer duration in seconds (135 ns)
shot_rate_hz: 1000.0        # simulated repetition rate (1 kHz)
mode: sampled               # sampled shots, or "exact" ensemble averages

landscape:                  # synthetic TLS defects (not fitted to any device)
  file: null                # optional landscape JSON to load instead of drawing one
  base_t1_range: [6.0e-5, 1.5e-4]
  defects_per_qubit: [2, 4]
  width_range: [0.04, 0.12]
  strength_range: [0.5, 5.0]   # peak extra decay rate, in units of 1/base_t1
  sigma_drift: 0.15         # center diffusion per sqrt(hour)
  theta: 0.05               # mean reversion per hour
  k_range: [-1.0, 1.0]

floor:                      # static non-T1 noise per CZ layer
  pair_rate: 4.0e-4         # each of the 15 Paulis on a gate pair
  idle_rate: 5.0e-5         # each weight-one Pauli on an idle qubit

readout:
  p01: 0.01
  p10: 0.02

strategies:
  control: {k_fixed: 0.0}
  optimized: {reopt_period_hr: 1.5, grid_step: 0.05}
  averaged: {waveform: triangle, freq_hz: 1.0, amplitude: 0.2, center: 0.0}

learning:                   # depth series per layer (60 twirls x 32 shots)
  depths: [0, 4, 12, 24, 64]
  twirls: 60
  shots: 32
  bootstrap: 100

mitigation:                 # budgets per mitigation experiment
  N: 10                     # mirror-circuit repetitions
  instances: 4096
  shots: 32
  readout_instances: 2048
  unmitigated_instances: 512
  bootstrap: 25
  inverse_per: shot         # fresh inverse Pauli per shot, or per instance

stability:
  cycles: 20
  cycle_hr: 2.5
  learn_to_mitigate_hr: 0.5

scan:                       # landscape monitoring
  hours: 24.0
  step_hr: 0.5
  grid_step: 0.05
  delay: 4.0e-5             # P_e probe delay (40 us)

t1:
  hours: 48.0
  step_hr: 0.5
  delays: [0.0, 5.0e-4, 26]   # T1 fit delay grid: start, stop, points

theory:
  mu: 0.01
  sigmas: [0.005, 0.01, 0.02, 0.03]
  schedule: [0, 4, 12, 24, 48, 64]
  target_d: 24
  samples: 1000000
  t1_mean: 5.0e-4
  t1_sd: 1.5e-4
  t1_trials: 1000
  t1_repetitions: 200
"""

DEFAULT_CONFIG: dict = yaml.safe_load(DEFAULT_YAML)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and base[k] and not isinstance(v, dict):
            raise ConfigError(f"config key {path + k!r} must be a mapping")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    data: dict

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "ExperimentConfig":
        user: dict = {}
        if path is not None:
            try:
                user = yaml.safe_load(Path(path).read_text()) or {}
            except OSError as e:
                raise ConfigError(f"cannot read config {path}: {e}") from e
            except yaml.YAMLError as e:
                raise ConfigError(f"config {path} is not valid YAML: {e}") from e
            if not isinstance(user, dict):
                raise ConfigError("config root must be a mapping")
        data = _merge(DEFAULT_CONFIG, user)
        for k, v in overrides.items():
            if v is not None:
                cur = data
                *head, last = k.split(".")
                for h in head:
                    cur = cur[h]
                cur[last] = v
        cfg = cls(data)
        cfg.validate()
        return cfg

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def validate(self) -> None:
        d = self.data
        try:
            if int(d["n"]) < 2:
                raise ConfigError("n must be at least 2")
            if float(d["tau"]) <= 0 or float(d["shot_rate_hz"]) <= 0:
                raise ConfigError("tau and shot_rate_hz must be positive")
            if d["mode"] not in ("sampled", "exact"):
                raise ConfigError("mode must be 'sampled' or 'exact'")
            self.learning_config()
            self.budget()
            self.stability_config()
            self.readout()
            for name in ("control", "optimized", "averaged"):
                self.strategy(name)
            f = d["floor"]
            if not all(0 <= float(f[k]) <= RATE_CEILING for k in ("pair_rate", "idle_rate")):
                raise ConfigError(f"floor rates must lie in [0, {RATE_CEILING}]")
            if float(d["scan"]["step_hr"]) <= 0 or float(d["t1"]["step_hr"]) <= 0:
                raise ConfigError("time steps must be positive")
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(str(e)) from e

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)

    # builders

    def generator_set(self) -> GeneratorSet:
        return GeneratorSet.chain(int(self.data["n"]))

    def layers(self):
        return default_layers(int(self.data["n"]))

    def floors(self) -> dict[str, LindbladModel]:
        gs = self.generator_set()
        f = self.data["floor"]
        out = {}
        for name, L in self.layers().items():
            edges = [tuple(sorted(P.support)) for P in L.image_x if P.weight == 2]
            edges = sorted(set(edges))
            out[name] = floor_model(gs, edges, float(f["pair_rate"]), float(f["idle_rate"]))
        return out

    def readout(self) -> ReadoutModel:
        r = self.data["readout"]
        return ReadoutModel.uniform(int(self.data["n"]), float(r["p01"]), float(r["p10"]))

    def landscape(self) -> TlsLandscape:
        ls = self.data["landscape"]
        if ls.get("file"):
            try:
                L = TlsLandscape.from_json(Path(ls["file"]).read_text())
            except OSError as e:
                raise ConfigError(f"cannot read landscape file: {e}") from e
            if L.n != int(self.data["n"]):
                raise ConfigError("landscape file qubit count differs from n")
            return L
        return random_landscape(
            int(self.data["n"]),
            stream(self.seed, "landscape"),
            base_t1_range=tuple(ls["base_t1_range"]),
            defects_per_qubit=tuple(ls["defects_per_qubit"]),
            width_range=tuple(ls["width_range"]),
            strength_range=tuple(ls["strength_range"]),
            sigma_drift=float(ls["sigma_drift"]),
            theta=float(ls["theta"]),
            k_range=tuple(ls["k_range"]),
        )

    def grid(self, step: float | None = None) -> np.ndarray:
        lo, hi = self.data["landscape"]["k_range"]
        step = float(step or self.data["scan"]["grid_step"])
        if step <= 0:
            raise ConfigError("grid step must be positive")
        return np.round(np.linspace(lo, hi, int(round((hi - lo) / step)) + 1), 10)

    def strategy(self, name: str):
        s = self.data["strategies"]
        if name == "control":
            return Control(float(s["control"]["k_fixed"]))
        if name == "optimized":
            o = s["optimized"]
            grid = tuple(self.grid(o.get("grid_step")).tolist())
            return Optimized(float(o["reopt_period_hr"]), grid)
        if name == "averaged":
            a = s["averaged"]
            return Averaged(a["waveform"], float(a["freq_hz"]), float(a["amplitude"]), float(a["center"]))
        raise ConfigError(f"unknown strategy {name!r}")

    def learning_config(self) -> LearningConfig:
        l = self.data["learning"]
        return LearningConfig(tuple(l["depths"]), int(l["twirls"]), int(l["shots"]))

    def budget(self) -> Budget:
        m = self.data["mitigation"]
        return Budget(
            int(m["instances"]), int(m["shots"]), int(m["readout_instances"]),
            int(m["unmitigated_instances"]), int(m["bootstrap"]), m["inverse_per"],
        )

    def stability_config(self) -> StabilityConfig:
        s = self.data["stability"]
        return StabilityConfig(
            cycles=int(s["cycles"]),
            cycle_hr=float(s["cycle_hr"]),
            learn_to_mitigate_hr=float(s["learn_to_mitigate_hr"]),
            learning=self.learning_config(),
            budget=self.budget(),
            N=int(self.data["mitigation"]["N"]),
            tau=float(self.data["tau"]),
            shot_rate_hz=float(self.data["shot_rate_hz"]),
            mode=self.data["mode"],
        )
