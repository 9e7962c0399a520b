"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ChannelNorm, RegularizationParams

TV_NOTICE = ("the 'tv' key requests TV-augmented outer iterations, which are not "
             "implemented: that mode is a heuristic without convergence analysis. "
             "Remove the key to run the analysed scheme.")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All settings a command may read; unset optional paths stay ``None``.

    ``rho`` follows the per-scale rule ``rho_base * 2**(-rho_exponent * j)``
    where ``j`` is the scale of each coefficient (0 for unstructured
    problems).  ``theta`` may be a scalar or a comma-separated list with one
    entry per coefficient index.
    """

    # regularisation
    q: str = "inf"
    theta: tuple = (10.0,)
    omega: float = 0.05
    gamma: float | None = None
    rho_base: float = 1.0
    rho_exponent: float = 0.75
    # schedule
    n_max: int = 15
    inner_iters: int | None = None
    delta_target: float | None = None
    step_tol: float = 1e-12
    outer_tol: float = 1e-8
    target_norm: float = 0.9
    seed: int = 0
    # paths
    problem: str | None = None
    out: str = "out"
    # synthetic problem generation
    n_indices: int = 128
    n_channels: int = 3
    n_blocks: int = 3
    sparsity: int = 16
    overlap: float = 1.0
    noise: float = 0.0
    rows: int | None = None
    full_first_channel: bool = False
    chroma_scale: float = 1.0
    # colour demo
    color: str | None = None
    gray: str | None = None
    side: int = 64
    downsample: int = 4
    levels: int = 3
    blur_sigma: float = 1.0
    intensity_scale: float = 255.0
    error_csv: bool = True
    # parsed but rejected
    tv: str | None = field(default=None, repr=False)

    def regularization(self, scales) -> RegularizationParams:
        """Parameters for coefficients at the given integer scales."""
        scales = np.asarray(scales, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if theta.size == 1:
            theta = theta[0]
        elif theta.size != scales.size:
            raise ConfigError(f"theta lists {theta.size} values for {scales.size} indices")
        rho = self.rho_base * 2.0 ** (-self.rho_exponent * scales)
        return RegularizationParams.create(scales.size, ChannelNorm.parse(self.q), theta, rho,
                                           self.omega, self.gamma)

    def echo(self) -> list[tuple[str, str]]:
        """Settings as ``(key, text)`` pairs, for file headers.

        The output directory is left out so reruns elsewhere stay identical.
        """
        out = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in ("tv", "out") or value is None:
                continue
            out.append((f.name, _format(value)))
        return out


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _converter(name: str):
    if name == "q":
        return lambda s: ChannelNorm.parse(s).value
    if name == "theta":
        return lambda s: tuple(float(t) for t in s.split(","))
    kind = str(_FIELDS[name].type)
    if kind.startswith("bool"):
        return _parse_bool
    if kind.startswith("int"):
        return int
    if kind.startswith("float"):
        return float
    return str


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_KEYS = set(_FIELDS)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Unknown or repeated keys are errors.  ``none`` clears an optional value.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if value.lower() == "none":
            if "None" not in str(_FIELDS[key].type):
                raise ConfigError(f"{source}:{lineno}: {key} cannot be none")
            values[key] = None
            continue
        try:
            values[key] = _converter(key)(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def validate(cfg: RunConfig):
    if cfg.tv is not None:
        raise ConfigError(TV_NOTICE)
    if cfg.n_max < 0:
        raise ConfigError("n_max must be nonnegative")
    if cfg.inner_iters is not None and cfg.inner_iters < 0:
        raise ConfigError("inner_iters must be nonnegative")
    if cfg.omega <= 0:
        raise ConfigError("omega must be positive")
    if cfg.rho_base < 0:
        raise ConfigError("rho_base must be nonnegative")
    if cfg.downsample < 1 or cfg.levels < 0:
        raise ConfigError("downsample must be >= 1 and levels >= 0")
    if cfg.intensity_scale <= 0:
        raise ConfigError("intensity_scale must be positive")
