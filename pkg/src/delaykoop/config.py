"""Flat key=value experiment configuration.

One value per line, ``section.key = value`` with at most one dotted level,
``#`` comments. Vectors are comma-separated. Unknown keys are rejected so
typos fail loudly; omitted keys fall back to the per-system defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .systems import DEFAULT_WALKER_SLOPE

_PENDULUM_DEFAULTS = {
    "system": "pendulum",
    "dt": 0.01,
    "train.duration": 6.0,
    "hankel.N": 110,
    "hankel.M": 90,
    "fit.rtol": 1e-10,
    "lqr.q": 1.0,
    "lqr.r": 1.0,
    "control.duration": 6.0,
    "disturbance.time": 0.35,
    "disturbance.after_events": None,
    "disturbance.delta": (0.0, 0.6),
    "pendulum.g": 9.81,
    "pendulum.length": 1.0,
    "pendulum.damping": 0.1,
    "pendulum.theta_star": 0.5,
    "pendulum.x0": (0.0, -2.0),
}

_WALKER_DEFAULTS = {
    "system": "walker",
    "dt": 0.01,
    "train.duration": 10.0,
    "hankel.N": 300,
    "hankel.M": 600,
    "fit.rtol": 1e-10,
    "lqr.q": 1.0,
    "lqr.r": 1.0,
    "control.duration": 26.0,
    "disturbance.time": None,
    "disturbance.after_events": 2,
    "disturbance.delta": (0.0, 0.0, 0.1, 0.0),
    "walker.slope": DEFAULT_WALKER_SLOPE,
    "walker.damping1": 0.5,
    "walker.damping2": 0.5,
    "walker.arming_theta": -0.05,
    "walker.guess": (0.162, 0.324, -0.1643, -0.00855),
}

_KEY_TYPES = {
    "system": str,
    "dt": float,
    "train.duration": float,
    "hankel.N": int,
    "hankel.M": int,
    "fit.rtol": float,
    "lqr.q": float,
    "lqr.r": float,
    "control.duration": float,
    "disturbance.time": float,
    "disturbance.after_events": int,
    "disturbance.delta": tuple,
    "pendulum.g": float,
    "pendulum.length": float,
    "pendulum.damping": float,
    "pendulum.theta_star": float,
    "pendulum.x0": tuple,
    "walker.slope": float,
    "walker.damping1": float,
    "walker.damping2": float,
    "walker.arming_theta": float,
    "walker.guess": tuple,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """All scenario parameters for one benchmark experiment."""

    system: str
    dt: float
    train_duration: float
    hankel_n: int
    hankel_m: int
    fit_rtol: float
    q_weight: float
    r_weight: float
    control_duration: float
    disturbance_time: float | None
    disturbance_after_events: int | None
    disturbance_delta: tuple[float, ...]
    pendulum_g: float = 9.81
    pendulum_length: float = 1.0
    pendulum_damping: float = 0.1
    pendulum_theta_star: float = 0.5
    pendulum_x0: tuple[float, ...] = (0.0, -2.0)
    walker_slope: float = DEFAULT_WALKER_SLOPE
    walker_damping1: float = 0.5
    walker_damping2: float = 0.5
    walker_arming_theta: float = -0.05
    walker_guess: tuple[float, ...] = (0.162, 0.324, -0.1643, -0.00855)

    @property
    def state_dim(self) -> int:
        return 2 if self.system == "pendulum" else 4

    @property
    def control_dim(self) -> int:
        return 1 if self.system == "pendulum" else 2

    def validate(self) -> None:
        if self.system not in ("pendulum", "walker"):
            raise ValueError(f"unknown system {self.system!r}")
        for name in ("dt", "train_duration", "control_duration", "q_weight", "r_weight"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.fit_rtol < 0:
            raise ValueError(f"fit_rtol must be >= 0, got {self.fit_rtol}")
        if self.hankel_n < 1 or self.hankel_m < 1:
            raise ValueError("hankel.N and hankel.M must be >= 1")
        samples = int(round(self.train_duration / self.dt)) + 1
        needed = self.hankel_n + self.hankel_m + 2
        if needed > samples:
            raise ValueError(
                f"Hankel construction needs {needed} samples but the training "
                f"run has only {samples}; increase train.duration or shrink N/M"
            )
        if (self.disturbance_time is None) == (self.disturbance_after_events is None):
            raise ValueError("set exactly one of disturbance.time or disturbance.after_events")
        if len(self.disturbance_delta) != self.state_dim:
            raise ValueError(
                f"disturbance.delta needs {self.state_dim} entries, "
                f"got {len(self.disturbance_delta)}"
            )
        if self.system == "pendulum" and len(self.pendulum_x0) != 2:
            raise ValueError("pendulum.x0 needs 2 entries")
        if self.system == "walker" and len(self.walker_guess) != 4:
            raise ValueError("walker.guess needs 4 entries")


_FIELD_NAMES = {
    "system": "system",
    "dt": "dt",
    "train.duration": "train_duration",
    "hankel.N": "hankel_n",
    "hankel.M": "hankel_m",
    "fit.rtol": "fit_rtol",
    "lqr.q": "q_weight",
    "lqr.r": "r_weight",
    "control.duration": "control_duration",
    "disturbance.time": "disturbance_time",
    "disturbance.after_events": "disturbance_after_events",
    "disturbance.delta": "disturbance_delta",
    "pendulum.g": "pendulum_g",
    "pendulum.length": "pendulum_length",
    "pendulum.damping": "pendulum_damping",
    "pendulum.theta_star": "pendulum_theta_star",
    "pendulum.x0": "pendulum_x0",
    "walker.slope": "walker_slope",
    "walker.damping1": "walker_damping1",
    "walker.damping2": "walker_damping2",
    "walker.arming_theta": "walker_arming_theta",
    "walker.guess": "walker_guess",
}


def _parse_value(key: str, raw: str):
    kind = _KEY_TYPES[key]
    raw = raw.strip()
    if raw.lower() == "none":
        return None
    try:
        if kind is str:
            return raw
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"cannot parse value for {key!r}: {raw!r}") from exc
    raise ValueError(f"unhandled type for key {key!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat key=value text into a validated :class:`ExperimentConfig`."""
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _parse_value(key, value)

    system = raw.get("system", "pendulum")
    if system not in ("pendulum", "walker"):
        raise ValueError(f"unknown system {system!r}")
    defaults = _PENDULUM_DEFAULTS if system == "pendulum" else _WALKER_DEFAULTS
    merged = dict(defaults)
    merged.update(raw)
    # an explicit trigger of one kind silently clears the default of the other
    if "disturbance.time" in raw and "disturbance.after_events" not in raw:
        merged["disturbance.after_events"] = None
    if "disturbance.after_events" in raw and "disturbance.time" not in raw:
        merged["disturbance.time"] = None

    kwargs = {_FIELD_NAMES[key]: value for key, value in merged.items() if key in _FIELD_NAMES}
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def config_to_text(config: ExperimentConfig) -> str:
    """Render a config back to the flat key=value format."""
    lines = []
    for key, name in _FIELD_NAMES.items():
        if config.system == "pendulum" and key.startswith("walker."):
            continue
        if config.system == "walker" and key.startswith("pendulum."):
            continue
        value = getattr(config, name)
        if value is None:
            continue
        if isinstance(value, tuple):
            rendered = ", ".join(f"{v:.17g}" for v in value)
        elif isinstance(value, float):
            rendered = f"{value:.17g}"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def default_config(system: str) -> ExperimentConfig:
    if system == "pendulum":
        return parse_config("system = pendulum")
    if system == "walker":
        return parse_config("system = walker")
    raise ValueError(f"unknown system {system!r}")
