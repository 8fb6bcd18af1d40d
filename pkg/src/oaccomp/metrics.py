"""Noise-aware distance metrics and the misdetection tail bounds behind them.

Each metric is a non-decreasing function of the separation ``d = |r1 - r2|``.
Designers work with the squared separation ``s = d**2`` (it is quadratic in
the modulation vector) and with ``log D`` so that exponential metrics stay
finite; :meth:`DistanceMetric.log_of_sq` and :meth:`DistanceMetric.dlog_dsq`
provide that view.

``sigma`` is a noise *variance* throughout, following ``exp(d**2 / (4 sigma))``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, gamma as gamma_fn, gammaincc

from .errors import InvalidParam

_TINY = 1e-300


class MetricKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    AWGN_EXP = "awgn_exp"
    GND_EXP = "gnd_exp"
    HEAVY_TAIL_POWER = "heavy_tail_power"
    STABLE_POWER = "stable_power"


_METRIC_PARAMS = {
    MetricKind.EUCLIDEAN: (),
    MetricKind.AWGN_EXP: ("sigma",),
    MetricKind.GND_EXP: ("alpha", "beta"),
    MetricKind.HEAVY_TAIL_POWER: ("gamma", "eta"),
    MetricKind.STABLE_POWER: ("alpha_stable", "eta"),
}


def _check_params(kind, params: dict) -> None:
    for name, value in params.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise InvalidParam(f"{kind.value}: parameter {name} must be positive, got {value!r}")
    if params.get("eta", 1.0) > 1.0:
        raise InvalidParam(f"{kind.value}: eta must lie in (0, 1]")
    if "alpha_stable" in params and params["alpha_stable"] >= 2.0:
        raise InvalidParam(f"{kind.value}: alpha_stable must lie in (0, 2)")


@dataclass(frozen=True)
class DistanceMetric:
    kind: MetricKind
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = _METRIC_PARAMS[self.kind]
        if set(self.params) != set(expected):
            raise InvalidParam(f"{self.kind.value} expects parameters {expected}, got {sorted(self.params)}")
        _check_params(self.kind, self.params)

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted(self.params.items()))))

    # constructors -----------------------------------------------------------
    @classmethod
    def euclidean(cls) -> "DistanceMetric":
        return cls(MetricKind.EUCLIDEAN, {})

    @classmethod
    def awgn_exp(cls, sigma: float) -> "DistanceMetric":
        return cls(MetricKind.AWGN_EXP, {"sigma": sigma})

    @classmethod
    def gnd_exp(cls, alpha: float, beta: float) -> "DistanceMetric":
        return cls(MetricKind.GND_EXP, {"alpha": alpha, "beta": beta})

    @classmethod
    def laplace_exp(cls, alpha: float = 1.0) -> "DistanceMetric":
        return cls.gnd_exp(alpha, 1.0)

    @classmethod
    def heavy_tail_power(cls, gamma: float, eta: float = 1.0) -> "DistanceMetric":
        return cls(MetricKind.HEAVY_TAIL_POWER, {"gamma": gamma, "eta": eta})

    @classmethod
    def stable_power(cls, alpha_stable: float, eta: float = 1.0) -> "DistanceMetric":
        return cls(MetricKind.STABLE_POWER, {"alpha_stable": alpha_stable, "eta": eta})

    # serialisation ----------------------------------------------------------
    def to_json(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params)}

    @classmethod
    def from_json(cls, data: dict) -> "DistanceMetric":
        try:
            kind = MetricKind(data["kind"])
        except (KeyError, ValueError):
            raise InvalidParam(f"unknown metric kind {data.get('kind')!r}") from None
        return cls(kind, {k: float(v) for k, v in data.get("params", {}).items()})

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind.value
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind.value}({inner})"

    # evaluation -------------------------------------------------------------
    def __call__(self, r1: complex, r2: complex) -> float:
        return distance(self, r1, r2)

    def of_separation(self, d):
        """``D`` as a function of the separation ``d >= 0`` (vectorised)."""
        d = np.abs(np.asarray(d, dtype=float))
        p = self.params
        k = self.kind
        with np.errstate(divide="ignore", over="ignore"):
            if k is MetricKind.EUCLIDEAN:
                out = d**2
            elif k is MetricKind.AWGN_EXP:
                out = np.exp(d**2 / (4.0 * p["sigma"]))
            elif k is MetricKind.GND_EXP:
                out = d ** (p["beta"] - 1.0) * np.exp((d / p["alpha"]) ** p["beta"])
            elif k is MetricKind.HEAVY_TAIL_POWER:
                c = (2.0 * p["gamma"]) ** (-2.0 / p["eta"])
                out = c * d ** (2.0 / p["eta"])
            else:
                out = d ** (p["alpha_stable"] / p["eta"])
        return out

    def log_of_sq(self, s):
        """``log D`` as a function of the squared separation ``s = d**2``."""
        s = np.maximum(np.asarray(s, dtype=float), _TINY)
        p = self.params
        k = self.kind
        if k is MetricKind.EUCLIDEAN:
            return np.log(s)
        if k is MetricKind.AWGN_EXP:
            return s / (4.0 * p["sigma"])
        if k is MetricKind.GND_EXP:
            beta = p["beta"]
            return 0.5 * (beta - 1.0) * np.log(s) + (s / p["alpha"] ** 2) ** (0.5 * beta)
        if k is MetricKind.HEAVY_TAIL_POWER:
            eta = p["eta"]
            return -(2.0 / eta) * math.log(2.0 * p["gamma"]) + np.log(s) / eta
        return 0.5 * p["alpha_stable"] / p["eta"] * np.log(s)

    def dlog_dsq(self, s):
        """Derivative of :meth:`log_of_sq` with respect to ``s``."""
        s = np.maximum(np.asarray(s, dtype=float), _TINY)
        p = self.params
        k = self.kind
        if k is MetricKind.EUCLIDEAN:
            return 1.0 / s
        if k is MetricKind.AWGN_EXP:
            return np.full_like(s, 1.0 / (4.0 * p["sigma"]))
        if k is MetricKind.GND_EXP:
            beta, a2 = p["beta"], p["alpha"] ** 2
            return 0.5 * (beta - 1.0) / s + 0.5 * beta / a2 * (s / a2) ** (0.5 * beta - 1.0)
        if k is MetricKind.HEAVY_TAIL_POWER:
            return 1.0 / (p["eta"] * s)
        return 0.5 * p["alpha_stable"] / (p["eta"] * s)

    def sq_for_log(self, target):
        """Smallest squared separation ``s`` with ``log D(s) >= target`` (vectorised)."""
        t = np.asarray(target, dtype=float)
        p = self.params
        k = self.kind
        if k is MetricKind.EUCLIDEAN:
            return np.exp(t)
        if k is MetricKind.AWGN_EXP:
            return np.maximum(4.0 * p["sigma"] * t, 0.0)
        if k is MetricKind.HEAVY_TAIL_POWER:
            eta = p["eta"]
            return np.exp(eta * (t + (2.0 / eta) * math.log(2.0 * p["gamma"])))
        if k is MetricKind.STABLE_POWER:
            return np.exp(2.0 * p["eta"] * t / p["alpha_stable"])
        # GND: monotone for beta >= 1, invert by bisection on log s
        lo = np.full(t.shape, -700.0)
        hi = np.full(t.shape, 700.0)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            ok = self.log_of_sq(np.exp(mid)) >= t
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return np.exp(hi)

    @property
    def monotone(self) -> bool:
        """True when ``D`` is non-decreasing in the separation."""
        return not (self.kind is MetricKind.GND_EXP and self.params["beta"] < 1.0)


def distance(metric: DistanceMetric, r1: complex, r2: complex) -> float:
    return float(metric.of_separation(abs(complex(r1) - complex(r2))))


def stable_tail_constant(alpha_stable: float) -> float:
    """Tail constant ``C_alpha`` with ``P(Z > a) ~ C_alpha a**-alpha``; report-only."""
    return 2.0 * math.gamma(alpha_stable) * math.sin(math.pi * alpha_stable / 2.0) / math.pi


# ---------------------------------------------------------------------------
# tail bounds
# ---------------------------------------------------------------------------


def q_function(x):
    """Gaussian tail ``Q(x) = P(N(0,1) > x)`` via ``erfc``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def arctan_surrogate_gap(x):
    """``1/arctan(1/x) - x``, the slack of the linear lower bound on ``1/arctan(1/x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InvalidParam("arctan_surrogate_gap needs x > 0")
    u = 1.0 / x
    direct = 1.0 / np.arctan(u) - x
    # cancellation-free series for large x: 1/arctan(u) = 1/u + u/3 - 4u^3/45 + ...
    series = u / 3.0 - 4.0 * u**3 / 45.0 + 44.0 * u**5 / 945.0
    out = np.where(x > 1e3, series, direct)
    return float(out) if out.ndim == 0 else out


class TailKind(enum.Enum):
    GAUSSIAN_UNION = "gaussian_union"
    GAUSSIAN_CHERNOFF = "gaussian_chernoff"
    GND = "gnd"
    CAUCHY = "cauchy"
    STABLE = "stable"


@dataclass(frozen=True)
class TailBound:
    """Upper bound on ``P(r_i -> r_j)`` as a function of the separation.

    Parameters: ``sigma`` (variance) for the Gaussian bounds, ``alpha``/``beta``
    for GND, ``gamma`` for Cauchy, ``alpha_stable`` for stable tails.
    """

    kind: TailKind
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_params(self.kind, self.params)

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted(self.params.items()))))

    def __call__(self, d):
        return tail_bound(self, d)


def tail_bound(model: TailBound, d):
    """Closed-form misdetection bound at separation ``d``, clamped to ``[0, 1]``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise InvalidParam("separation must be non-negative")
    p = model.params
    k = model.kind
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if k is TailKind.GAUSSIAN_UNION:
            out = q_function(d / math.sqrt(2.0 * p["sigma"]))
        elif k is TailKind.GAUSSIAN_CHERNOFF:
            out = np.exp(-(d**2) / (4.0 * p["sigma"]))
        elif k is TailKind.GND:
            alpha, beta = p["alpha"], p["beta"]
            z = d / alpha
            if beta >= 1.0:
                out = np.where(
                    d > 0,
                    z ** (1.0 - beta) * np.exp(-(z**beta)) / (2.0 * gamma_fn(1.0 / beta)),
                    np.inf if beta > 1.0 else 0.5,
                )
            else:
                # the integral inequality needs beta >= 1; use the exact tail
                out = 0.5 * gammaincc(1.0 / beta, z**beta)
        elif k is TailKind.CAUCHY:
            out = np.where(d > 0, np.arctan(2.0 * p["gamma"] / d) / math.pi, 0.5)
        else:
            a = p["alpha_stable"]
            out = stable_tail_constant(a) * (d / 2.0) ** (-a)
    out = np.clip(np.nan_to_num(out, nan=1.0, posinf=1.0), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
