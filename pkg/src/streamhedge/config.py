"""Run configuration: a small INI dialect, presets, and validation.

A run is described by one human-editable ``key = value`` file with the
sections ``[model]``, ``[box]``, ``[channel]``, ``[filter]``, ``[hedge]``,
``[feedback]`` and ``[data]``.  Scalars broadcast where a vector is
expected (box bounds), lists are comma-separated, and Ising edges are
written ``0-1, 1-2``.  Unknown keys are rejected so typos fail loudly, and
validation errors carry the section, key and file line that caused them.

Three presets reproduce the canonical synthetic experiments:

* ``exp1``  -- filtering under a BSC(0.1) with 1/sqrt(t) steps; the regret
  ledger against the generating piecewise model is the main output.
* ``exp2a`` -- threshold adaptation with forecaster-driven queries and the
  literal linear belief transform with log C = 220.
* ``exp2b`` -- threshold adaptation with volunteered feedback (every
  declared anomaly reviewed, misses reported 20% of the time) and a
  log transform calibrated on a warmup window.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import ChannelKind, NoisyChannel
from .families import FamilyKind, FamilyModel, FeasibleBox, bernoulli_product, \
    gaussian_unit_var, ising_exact, make_box
from .filtering import Schedule
from .hedging import ZetaKind

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "preset_config",
           "PRESET_NAMES"]

PRESET_NAMES = ("exp1", "exp2a", "exp2b")

_KNOWN_KEYS = {
    "model": {"family", "dim", "vertices", "edges"},
    "box": {"lo", "hi", "user_h"},
    "channel": {"kind", "p", "sigma2"},
    "filter": {"schedule", "theta_init"},
    "hedge": {
        "tau_min",
        "tau_max",
        "eta",
        "horizon",
        "zeta",
        "zeta_c",
        "zeta_log_c",
        "calibrate",
        "tau_init",
    },
    "feedback": {"mode", "miss_prob", "timeout", "window", "step_delay"},
    "data": {"source", "seed", "out", "store_observations", "t", "d"},
}


class ConfigError(ValueError):
    """Invalid run configuration; message carries section/key/line."""


@dataclass
class RunConfig:
    model: FamilyModel
    box: FeasibleBox
    channel: NoisyChannel
    schedule: Schedule
    theta_init: Optional[np.ndarray]  # None means box midpoint
    tau_min: float
    tau_max: float
    eta: Optional[float]
    horizon: Optional[int]
    zeta_kind: ZetaKind
    zeta_c: float
    zeta_log_c: float
    calibrate: int  # warmup length; 0 disables calibration
    tau_init_mode: str  # "min" | "first_belief"
    mode: str  # full | label | arbitrary | service
    miss_prob: float
    timeout: float
    feedback_window: int
    step_delay: float
    source: str
    seed: int
    out: str
    store_observations: bool
    user_h: Optional[float] = None
    data_t: Optional[int] = None  # horizon override for generated sources
    data_d: Optional[int] = None  # must match the model dimension

    def validate(self) -> None:
        if self.data_t is not None and self.data_t < 1:
            raise ConfigError("data.t must be a positive horizon")
        if self.data_d is not None and self.data_d != self.model.dim:
            raise ConfigError(
                f"data.d = {self.data_d} does not match model dim {self.model.dim}"
            )
        if not self.tau_min < self.tau_max:
            raise ConfigError("hedge: need tau_min < tau_max")
        if self.eta is not None and self.eta <= 0:
            raise ConfigError("hedge.eta must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("hedge.horizon must be positive")
        if self.tau_init_mode not in ("min", "first_belief"):
            raise ConfigError("hedge.tau_init must be 'min' or 'first_belief'")
        if self.mode not in ("full", "label", "arbitrary", "service"):
            raise ConfigError("feedback.mode must be full|label|arbitrary|service")
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ConfigError("feedback.miss_prob must lie in [0,1]")
        if self.calibrate < 0:
            raise ConfigError("hedge.calibrate must be >= 0")
        if not self.channel.compatible_with(self.model):
            raise ConfigError(
                f"channel {self.channel.kind.value} is incompatible with "
                f"family {self.model.kind.value}"
            )
        if self.box.dim != self.model.dim:
            raise ConfigError("box dimension does not match the model")
        if self.theta_init is not None and not self.box.contains(self.theta_init):
            raise ConfigError("filter.theta_init must lie inside the box")
        if self.source.startswith("preset:"):
            name = self.source.split(":", 1)[1]
            if name not in PRESET_NAMES:
                raise ConfigError(f"unknown preset '{name}'")


def _parse_vector(text: str, dim: int, what: str) -> np.ndarray:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{what}: not numeric: {text!r}") from exc
    if len(vals) == 1:
        return np.full(dim, vals[0])
    if len(vals) != dim:
        raise ConfigError(f"{what}: expected 1 or {dim} values, got {len(vals)}")
    return np.array(vals)


def _parse_edges(text: str) -> list[tuple[int, int]]:
    edges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            a, b = part.split("-")
            edges.append((int(a), int(b)))
        except ValueError as exc:
            raise ConfigError(f"model.edges: bad edge {part!r} (want 'a-b')") from exc
    return edges


def _line_of(raw_text: str, section: str, key: str) -> Optional[int]:
    in_section = False
    for i, line in enumerate(raw_text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            in_section = stripped[1:-1].strip() == section
        elif in_section and stripped.split("=")[0].strip() == key:
            return i
    return None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config file's text."""
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                line = _line_of(text, section, key)
                where = f" (line {line})" if line else ""
                raise ConfigError(f"unknown key {section}.{key}{where}")

    def get(section, key, default=None):
        return parser.get(section, key, fallback=default)

    def fail(section, key, msg):
        line = _line_of(text, section, key)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{section}.{key}{where}: {msg}")

    family = (get("model", "family", "bernoulli") or "bernoulli").lower()
    if family in ("bernoulli", "bernoulli_product"):
        try:
            dim = int(get("model", "dim", "0"))
        except ValueError:
            fail("model", "dim", "not an integer")
        if dim < 1:
            fail("model", "dim", "must be a positive integer")
        model = bernoulli_product(dim)
    elif family in ("gaussian", "gaussian_unit_var"):
        try:
            dim = int(get("model", "dim", "0"))
        except ValueError:
            fail("model", "dim", "not an integer")
        if dim < 1:
            fail("model", "dim", "must be a positive integer")
        model = gaussian_unit_var(dim)
    elif family in ("ising", "ising_exact"):
        try:
            vertices = int(get("model", "vertices", "0"))
        except ValueError:
            fail("model", "vertices", "not an integer")
        edges = _parse_edges(get("model", "edges", "") or "")
        try:
            model = ising_exact(vertices, edges)
        except ValueError as exc:
            fail("model", "vertices", str(exc))
    else:
        fail("model", "family", f"unknown family {family!r}")

    lo = _parse_vector(get("box", "lo", "-2"), model.dim, "box.lo")
    hi = _parse_vector(get("box", "hi", "2"), model.dim, "box.hi")
    try:
        box = FeasibleBox(lo=lo, hi=hi)
    except ValueError as exc:
        fail("box", "lo", str(exc))
    user_h = get("box", "user_h")
    user_h = float(user_h) if user_h is not None else None

    ckind = (get("channel", "kind", "identity") or "identity").lower()
    try:
        if ckind == "identity":
            channel = NoisyChannel(ChannelKind.IDENTITY)
        elif ckind == "bsc":
            channel = NoisyChannel(ChannelKind.BSC, p=float(get("channel", "p", "0.1")))
        elif ckind == "awgn":
            channel = NoisyChannel(
                ChannelKind.AWGN, sigma2=float(get("channel", "sigma2", "1.0"))
            )
        else:
            fail("channel", "kind", f"unknown channel {ckind!r}")
    except ValueError as exc:
        fail("channel", "kind", str(exc))

    sched_name = (get("filter", "schedule", "inverse_sqrt_t") or "").lower()
    try:
        schedule = Schedule(sched_name)
    except ValueError:
        fail("filter", "schedule", f"unknown schedule {sched_name!r}")

    theta_init_text = get("filter", "theta_init", "midpoint") or "midpoint"
    if theta_init_text.strip().lower() == "midpoint":
        theta_init = None
    else:
        theta_init = _parse_vector(theta_init_text, model.dim, "filter.theta_init")

    try:
        tau_min = float(get("hedge", "tau_min", "0"))
        tau_max = float(get("hedge", "tau_max", "1"))
    except ValueError:
        fail("hedge", "tau_min", "not numeric")
    eta = get("hedge", "eta")
    eta = float(eta) if eta is not None else None
    horizon = get("hedge", "horizon")
    horizon = int(horizon) if horizon is not None else None
    zeta_name = (get("hedge", "zeta", "log") or "log").lower()
    try:
        zeta_kind = ZetaKind(zeta_name)
    except ValueError:
        fail("hedge", "zeta", f"unknown transform {zeta_name!r}")
    zeta_c = float(get("hedge", "zeta_c", "1.0"))
    zeta_log_c = float(get("hedge", "zeta_log_c", "0.0"))
    calibrate = int(get("hedge", "calibrate", "0"))
    tau_init_mode = (get("hedge", "tau_init", "min") or "min").lower()

    mode = (get("feedback", "mode", "full") or "full").lower()
    miss_prob = float(get("feedback", "miss_prob", "0.2"))
    timeout = float(get("feedback", "timeout", "300"))
    feedback_window = int(get("feedback", "window", "50"))
    step_delay = float(get("feedback", "step_delay", "0"))

    source = get("data", "source", "stdin") or "stdin"
    seed = int(get("data", "seed", "0"))
    out = get("data", "out", "runs/out") or "runs/out"
    store_obs = (get("data", "store_observations", "true") or "true").lower() in (
        "1",
        "true",
        "yes",
    )
    data_t = get("data", "t")
    data_t = int(data_t) if data_t is not None else None
    data_d = get("data", "d")
    data_d = int(data_d) if data_d is not None else None

    cfg = RunConfig(
        model=model,
        box=box,
        channel=channel,
        schedule=schedule,
        theta_init=theta_init,
        tau_min=tau_min,
        tau_max=tau_max,
        eta=eta,
        horizon=horizon,
        zeta_kind=zeta_kind,
        zeta_c=zeta_c,
        zeta_log_c=zeta_log_c,
        calibrate=calibrate,
        tau_init_mode=tau_init_mode,
        mode=mode,
        miss_prob=miss_prob,
        timeout=timeout,
        feedback_window=feedback_window,
        step_delay=step_delay,
        source=source,
        seed=seed,
        out=out,
        store_observations=store_obs,
        user_h=user_h,
        data_t=data_t,
        data_d=data_d,
    )
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


_EXP1_TEXT = """
[model]
family = bernoulli
dim = 500

[box]
lo = -2.6
hi = 2.6

[channel]
kind = bsc
p = 0.1

[filter]
schedule = inverse_sqrt_t
theta_init = midpoint

[hedge]
tau_min = -1.4
tau_max = -0.6
horizon = 1000
zeta = log
calibrate = 99
tau_init = first_belief

[feedback]
mode = full

[data]
source = preset:exp1
seed = 0
out = runs/exp1
store_observations = false
"""

_EXP2A_TEXT = """
[model]
family = bernoulli
dim = 500

[box]
lo = -2.6
hi = 2.6

[channel]
kind = bsc
p = 0.1

[filter]
schedule = inverse_sqrt_t
theta_init = midpoint

[hedge]
tau_min = 0
tau_max = 1
horizon = 1000
zeta = linear
zeta_log_c = 220
tau_init = min

[feedback]
mode = label

[data]
source = preset:exp2a
seed = 0
out = runs/exp2a
store_observations = false
"""

_EXP2B_TEXT = """
[model]
family = bernoulli
dim = 500

[box]
lo = -2.6
hi = 2.6

[channel]
kind = bsc
p = 0.1

[filter]
schedule = inverse_sqrt_t
theta_init = midpoint

[hedge]
tau_min = -1.4
tau_max = -0.6
horizon = 1000
zeta = log
calibrate = 99
tau_init = first_belief

[feedback]
mode = arbitrary
miss_prob = 0.2

[data]
source = preset:exp2b
seed = 0
out = runs/exp2b
store_observations = false
"""

_PRESETS = {"exp1": _EXP1_TEXT, "exp2a": _EXP2A_TEXT, "exp2b": _EXP2B_TEXT}


def preset_config(name: str, seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    """Built-in config for one of the canonical experiments."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset '{name}'")
    cfg = parse_config(_PRESETS[name])
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    return cfg


def preset_text(name: str) -> str:
    """The config file text of a preset, for --dump-config."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset '{name}'")
    return _PRESETS[name].strip() + "\n"
