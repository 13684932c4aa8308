"""Run configuration: flat ``section.key = value`` files merged with command-line overrides.

Precedence is defaults < file < flags. Lines starting with ``#`` and blank
lines are ignored. Lists are comma separated.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .bloch import ArrayParams
from .quench import DEFAULT_N_K, STANDARD_TAUS, DissipativeParams, QuenchSchedule
from .ssh import SSHParams

EXPERIMENTS = (
    "bandstructure", "quench-trace", "quench-spectrum", "kc-sweep", "dissipation",
    "integrated", "ssh-spectrum", "ssh-quench", "lz-kz-compare",
)
THREADS_ENV = "QUENCHLAB_THREADS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    params: ArrayParams = field(default_factory=ArrayParams)
    tau_q: float = 800.0
    tau_list: tuple = STANDARD_TAUS
    k: float = 0.2 * np.pi
    epsilon: Optional[float] = None
    observable: str = "transfer"
    n_k: int = DEFAULT_N_K
    n_samples: int = 201
    g_list: tuple = (0.0, 0.02)
    dissipation: DissipativeParams = field(default_factory=DissipativeParams)
    kappa_list: tuple = (0.0, 0.001, 0.01)
    ssh_initial: SSHParams = field(default_factory=SSHParams)
    ssh_final: Optional[SSHParams] = None
    lambda_list: tuple = tuple(np.round(np.linspace(0.0, 3.0, 61), 12))
    t_max: Optional[float] = None
    output_dir: Path = Path(".")
    threads: int = 1

    @property
    def schedule(self) -> QuenchSchedule:
        return QuenchSchedule(self.params.g, self.tau_q)

    @property
    def ssh_target(self) -> SSHParams:
        return self.ssh_initial.swapped() if self.ssh_final is None else self.ssh_final


def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s)


def _floats(s: str) -> tuple:
    items = [x.strip() for x in s.split(",") if x.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(x) for x in items)


def _optional_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _choice(*options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"not one of {', '.join(options)}")
        return s
    return parse


# key -> (parser, expected type shown in errors)
_KEYS: Mapping[str, tuple] = {
    "array.delta": (_float, "float"),
    "array.omega": (_float, "float"),
    "array.g": (_float, "float"),
    "array.j_opt": (_float, "float"),
    "array.k_mech": (_float, "float"),
    "array.kappa": (_float, "float"),
    "array.gamma": (_float, "float"),
    "quench.tau_q": (_float, "float"),
    "quench.tau_list": (_floats, "comma-separated floats"),
    "quench.k": (_float, "float"),
    "quench.epsilon": (_optional_float, "float or 'auto'"),
    "quench.observable": (_choice("transfer", "n_q"), "one of transfer, n_q"),
    "grid.n_k": (_int, "integer"),
    "grid.n_samples": (_int, "integer"),
    "bands.g_list": (_floats, "comma-separated floats"),
    "dissipation.kappa": (_float, "float"),
    "dissipation.gamma": (_float, "float"),
    "dissipation.n_bath_mech": (_float, "float"),
    "dissipation.n_bath_opt": (_float, "float"),
    "dissipation.kappa_list": (_floats, "comma-separated floats"),
    "ssh.n_cells": (_int, "integer"),
    "ssh.k_intra": (_float, "float"),
    "ssh.k_inter": (_float, "float"),
    "ssh.final_k_intra": (_float, "float"),
    "ssh.final_k_inter": (_float, "float"),
    "ssh.lambda_list": (_floats, "comma-separated floats"),
    "ssh.t_max": (_optional_float, "float or 'auto'"),
    "run.out": (str, "path"),
    "run.threads": (_int, "integer"),
}


def parse_value(key: str, raw: str, where: str):
    if key not in _KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    parser, type_name = _KEYS[key]
    try:
        return parser(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: key {key!r} expects {type_name}, got {raw.strip()!r} ({exc})") from None


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{path}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, raw, where)
    return values


def parse_overrides(pairs: Iterable[str]) -> dict:
    values = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"command line: --param expects key=value, got {pair!r}")
        key, raw = (s.strip() for s in pair.split("=", 1))
        values[key] = parse_value(key, raw, "command line")
    return values


def resolve_threads(flag: Optional[int], from_file: Optional[int], env: Mapping[str, str] = os.environ) -> int:
    """Flag, then config file, then ``QUENCHLAB_THREADS``, then 1. Zero means all cores."""
    n = flag if flag is not None else from_file
    if n is None and env.get(THREADS_ENV, "").strip():
        try:
            n = int(env[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"environment: {THREADS_ENV} expects integer, got {env[THREADS_ENV]!r}") from None
    if n is None:
        n = 1
    if n < 0:
        raise ConfigError(f"thread count must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def _replace(obj, updates: dict, prefix: str, names: Mapping[str, str]):
    picked = {attr: updates[prefix + key] for key, attr in names.items() if prefix + key in updates}
    return dataclasses.replace(obj, **picked) if picked else obj


def build_config(experiment: str, values: Mapping[str, object], threads: int = 1) -> RunConfig:
    """Assemble a validated :class:`RunConfig` from parsed ``section.key`` values."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    try:
        params = _replace(ArrayParams(), values, "array.",
                          {k: k for k in ("delta", "omega", "g", "j_opt", "k_mech", "kappa", "gamma")})
        diss = DissipativeParams(kappa=params.kappa, gamma=params.gamma)
        diss = _replace(diss, values, "dissipation.",
                        {k: k for k in ("kappa", "gamma", "n_bath_mech", "n_bath_opt")})
        ssh_init = _replace(SSHParams(), values, "ssh.",
                            {"n_cells": "n_cells", "k_intra": "k_intra", "k_inter": "k_inter"})
        ssh_final = None
        if "ssh.final_k_intra" in values or "ssh.final_k_inter" in values:
            swapped = ssh_init.swapped()
            ssh_final = SSHParams(ssh_init.n_cells, values.get("ssh.final_k_intra", swapped.k_intra),
                                  values.get("ssh.final_k_inter", swapped.k_inter))
        simple = {
            "quench.tau_q": "tau_q", "quench.tau_list": "tau_list", "quench.k": "k",
            "quench.epsilon": "epsilon", "quench.observable": "observable", "grid.n_k": "n_k",
            "grid.n_samples": "n_samples", "bands.g_list": "g_list", "dissipation.kappa_list": "kappa_list",
            "ssh.lambda_list": "lambda_list", "ssh.t_max": "t_max",
        }
        kwargs = {attr: values[key] for key, attr in simple.items() if key in values}
        if "run.out" in values:
            kwargs["output_dir"] = Path(values["run.out"])
        cfg = RunConfig(experiment=experiment, params=params, dissipation=diss, ssh_initial=ssh_init,
                        ssh_final=ssh_final, threads=threads, **kwargs)
        cfg.schedule  # validates tau_q
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from None
    if cfg.n_samples < 2:
        raise ConfigError("grid.n_samples must be at least 2")
    if cfg.n_k < 2:
        raise ConfigError("grid.n_k must be at least 2")
    return cfg
