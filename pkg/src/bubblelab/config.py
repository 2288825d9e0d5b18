"""JSON configuration of the lab driver."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .minimize import MinimizeOptions


class ConfigError(ValueError):
    pass


@dataclass
class BubbleSeed:
    a: tuple = (0.5, 0.5)
    # "predicted": balanced scale for the first eps; "cold": twice that; or a number
    lam: object = "predicted"


@dataclass
class GreensConfig:
    ewald_split: float = 0.5641895835477563  # 1/sqrt(pi)
    real_space_cutoff: int = 3
    fourier_cutoff: int = 3
    r_min: float = 1e-3
    r_max: float = 0.45
    n_radii: int = 24
    n_angles: int = 16
    pde_grid: int = 256
    pde_annulus: tuple = (0.1, 0.5)


@dataclass
class VerifyConfig:
    lams: tuple = (8.0, 16.0, 32.0, 64.0)
    epsilon: float = 1e-5
    grids: tuple = (1024, 2048)
    slope_floor: float = -2.5
    probes: bool = True


@dataclass
class FitConfig:
    input: str | None = None
    xatol: float = 1e-4
    restarts: int = 0


@dataclass
class LabConfig:
    grid_n: int = 512
    epsilon_list: tuple = (1e-4, 5e-5, 2.5e-5)
    seed: int = 0
    out_dir: str = "lab_out"
    warm_start: bool = True
    snapshots: bool = True
    bubble: BubbleSeed = field(default_factory=BubbleSeed)
    minimizer: dict = field(default_factory=lambda: {"log_every": 10})
    greens: GreensConfig = field(default_factory=GreensConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        n = self.grid_n
        if not isinstance(n, int) or isinstance(n, bool) or n < 64 or n & (n - 1):
            raise ConfigError(f"grid_n must be a power of two >= 64, got {n!r}")
        eps = list(self.epsilon_list)
        if not eps or any(not isinstance(e, (int, float)) or e <= 0 for e in eps):
            raise ConfigError("epsilon_list must be a non-empty list of positive numbers")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon_list must be strictly decreasing")
        self.epsilon_list = tuple(float(e) for e in eps)
        lam = self.bubble.lam
        if not (lam in ("predicted", "cold") or (isinstance(lam, (int, float)) and lam >= 1)):
            raise ConfigError(f'bubble.lam must be "predicted", "cold" or a number >= 1, got {lam!r}')
        try:
            self.minimize_options()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"minimizer: {exc}") from exc
        g = self.verify.grids
        if len(g) != 2 or g[1] != 2 * g[0]:
            raise ConfigError("verify.grids must be [n, 2n]")

    def minimize_options(self) -> MinimizeOptions:
        return MinimizeOptions(**self.minimizer)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"bubble": BubbleSeed, "greens": GreensConfig, "verify": VerifyConfig, "fit": FitConfig}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        if k in _SECTIONS and cls is LabConfig:
            v = _build(_SECTIONS[k], v, k)
        elif isinstance(v, list):
            v = tuple(v)
        kw[k] = v
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> LabConfig:
    return _build(LabConfig, data, "")


def load_config(path=None, overrides: dict | None = None) -> LabConfig:
    """Read a JSON config (defaults when ``path`` is None) and apply top-level overrides."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data = dict(data)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if isinstance(v, dict):
            data[k] = {**data.get(k, {}), **v}
        else:
            data[k] = v
    return config_from_dict(data)
