"""Experiment configuration: weight schemes, JSON schema, validation."""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from swfalloc.bandit import UtilityModel
from swfalloc.welfare import NEG_INF, Family, WelfareSpec

Scalar = Union[int, float]


class ConfigError(ValueError):
    """Malformed experiment configuration."""


def geometric_weights(n: int, ratio: float = 0.9) -> np.ndarray:
    """w_i proportional to ratio**(i-1), normalized to sum 1."""
    w = ratio ** np.arange(n, dtype=float)
    return w / w.sum()


def linear_weights(n: int) -> np.ndarray:
    """Linearly decaying weights from 2/S to 1/S, normalized to sum 1."""
    if n == 1:
        return np.ones(1)
    w = 2.0 - np.arange(n, dtype=float) / (n - 1)
    return w / w.sum()


def make_weights(scheme: dict, n: int) -> np.ndarray:
    """Build a weight vector from a scheme dict.

    Schemes: {"scheme": "geometric", "ratio": r}, {"scheme": "linear"},
    {"scheme": "uniform"}, {"scheme": "explicit", "values": [...]}.
    """
    if not isinstance(scheme, dict) or "scheme" not in scheme:
        raise ConfigError("weights must be a dict with a 'scheme' key")
    kind = scheme["scheme"]
    if kind == "geometric":
        return geometric_weights(n, float(scheme.get("ratio", 0.9)))
    if kind == "linear":
        return linear_weights(n)
    if kind == "uniform":
        return np.full(n, 1.0 / n)
    if kind == "explicit":
        values = np.asarray(scheme.get("values", []), dtype=float)
        if values.size != n:
            raise ConfigError(f"explicit weights need {n} values")
        return values
    raise ConfigError(f"unknown weight scheme {kind!r}")


def parse_q(value) -> Optional[float]:
    """Accept floats, the strings '-inf'/'inf' (JSON has no infinities),
    and None (Gini)."""
    if value is None:
        return None
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("-inf", "-infinity"):
            return NEG_INF
        raise ConfigError(f"cannot parse power parameter {value!r}")
    q = float(value)
    if math.isnan(q) or q == math.inf:
        raise ConfigError("power parameter must be -inf or a finite real")
    return q


def q_tag(q: Optional[float]) -> str:
    """Filesystem-safe label for a power parameter."""
    if q is None:
        return "none"
    if q == NEG_INF:
        return "neginf"
    return format(q, "g").replace("-", "m").replace(".", "p")


@dataclass(frozen=True)
class ExperimentConfig:
    """Simulation instance plus sweep grids.

    ``k``, ``T`` and ``q`` may be tuples, in which case :meth:`cells`
    enumerates the scalar grid.  The instance seed fixes the environment
    (Beta parameters); run seeds only vary the sampling randomness.
    """

    n: int
    k: Union[int, Tuple[int, ...]]
    T: Union[int, Tuple[int, ...]]
    family: str
    q: Union[None, float, str, Tuple] = None
    weights: dict = field(default_factory=lambda: {"scheme": "geometric",
                                                   "ratio": 0.9})
    utility: dict = field(default_factory=lambda: {"kind": "beta",
                                                   "alpha_range": [0.5, 5.0],
                                                   "beta_range": [0.5, 5.0]})
    delta: float = 0.1
    sigma: float = 1.0
    support: Optional[Tuple[float, float]] = None
    instance_seed: int = 0
    run_seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    snapshot_every: int = 0
    version: int = 1

    def __post_init__(self):
        if self.version != 1:
            raise ConfigError(f"unsupported config version {self.version!r}")
        try:
            Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown family {self.family!r}") from None
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        object.__setattr__(self, "k", _int_or_tuple(self.k, "k"))
        object.__setattr__(self, "T", _int_or_tuple(self.T, "T"))
        for k in _as_tuple(self.k):
            if not 1 <= k <= self.n:
                raise ConfigError(f"need 1 <= k <= n, got k={k}")
        for T in _as_tuple(self.T):
            if T < 0:
                raise ConfigError("T must be nonnegative")
        if isinstance(self.q, (list, tuple)):
            object.__setattr__(self, "q", tuple(parse_q(x) for x in self.q))
        else:
            object.__setattr__(self, "q", parse_q(self.q))
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        if self.sigma <= 0.0:
            raise ConfigError("sigma must be positive")
        if self.support is not None:
            object.__setattr__(self, "support",
                               (float(self.support[0]), float(self.support[1])))
        if not self.run_seeds:
            raise ConfigError("need at least one run seed")
        object.__setattr__(self, "run_seeds",
                           tuple(int(s) for s in self.run_seeds))
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be nonnegative")

    def is_scalar(self) -> bool:
        return not any(isinstance(v, tuple) for v in (self.k, self.T, self.q))

    def require_scalar(self) -> None:
        if not self.is_scalar():
            raise ConfigError("this operation needs a scalar config; "
                              "use cells() to enumerate the sweep grid")

    def cells(self):
        """Enumerate scalar configs over the k/T/q grid."""
        ks = _as_tuple(self.k)
        Ts = _as_tuple(self.T)
        qs = self.q if isinstance(self.q, tuple) else (self.q,)
        for T, k, q in itertools.product(Ts, ks, qs):
            yield dataclasses.replace(self, k=k, T=T, q=q)

    def weight_vector(self) -> np.ndarray:
        return make_weights(self.weights, self.n)

    def welfare_spec(self) -> WelfareSpec:
        self.require_scalar()
        fam = Family(self.family)
        q = None if fam is Family.GINI else self.q
        return WelfareSpec(fam, self.weight_vector(), q)

    def utility_model(self) -> UtilityModel:
        u = self.utility
        kind = u.get("kind", "beta")
        if kind != "beta":
            raise ConfigError(f"unknown utility kind {kind!r}")
        floor = float(u.get("floor", 0.1))
        scale = float(u.get("scale", 0.9))
        if "alpha" in u or "beta" in u:
            alpha = np.asarray(u.get("alpha", []), dtype=float)
            beta = np.asarray(u.get("beta", []), dtype=float)
            if alpha.size != self.n or beta.size != self.n:
                raise ConfigError(f"explicit Beta parameters need {self.n} values")
            return UtilityModel(alpha, beta, floor=floor, scale=scale)
        rng = np.random.default_rng(self.instance_seed)
        return UtilityModel.random(
            self.n, rng,
            alpha_range=tuple(u.get("alpha_range", (0.5, 5.0))),
            beta_range=tuple(u.get("beta_range", (0.5, 5.0))),
            floor=floor, scale=scale)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["q"] = _q_json(self.q)
        out["k"] = list(self.k) if isinstance(self.k, tuple) else self.k
        out["T"] = list(self.T) if isinstance(self.T, tuple) else self.T
        out["run_seeds"] = list(self.run_seeds)
        out["support"] = list(self.support) if self.support else None
        return out


def _q_json(q):
    if isinstance(q, tuple):
        return [_q_json(x) for x in q]
    if q == NEG_INF:
        return "-inf"
    return q


def _as_tuple(v) -> tuple:
    return v if isinstance(v, tuple) else (v,)


def _int_or_tuple(v, name: str):
    if isinstance(v, (list, tuple)):
        if not v:
            raise ConfigError(f"{name} sweep must be nonempty")
        return tuple(int(x) for x in v)
    return int(v)


_ALLOWED_KEYS = {
    "version", "n", "k", "T", "family", "q", "weights", "utility", "delta",
    "sigma", "support", "instance_seed", "run_seeds", "snapshot_every",
}


def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return 1


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config.

    Unknown keys are rejected; error messages carry path:line positions.
    """
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    unknown = sorted(set(data) - _ALLOWED_KEYS)
    if unknown:
        key = unknown[0]
        raise ConfigError(f"{path}:{_line_of(text, key)}: unknown key {key!r}")
    missing = [k for k in ("version", "n", "k", "T", "family") if k not in data]
    if missing:
        raise ConfigError(f"{path}:1: missing required key {missing[0]!r}")
    kwargs = dict(data)
    if "run_seeds" in kwargs:
        kwargs["run_seeds"] = tuple(kwargs["run_seeds"])
    if "support" in kwargs and kwargs["support"] is not None:
        kwargs["support"] = tuple(kwargs["support"])
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None
