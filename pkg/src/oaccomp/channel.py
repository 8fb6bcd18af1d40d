"""Multiple-access channel: noise models, fading, power control and superposition."""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidParam, ZeroChannel
from .function_model import ConstraintSet, InputProfile

ZERO_CHANNEL_TOL = 1e-12
PSD_TOL = 1e-9


class NoiseKind(enum.Enum):
    COMPLEX_GAUSSIAN = "complex_gaussian"
    GND = "gnd"
    LAPLACE = "laplace"
    COMPLEX_CAUCHY = "complex_cauchy"


_NOISE_PARAMS = {
    NoiseKind.COMPLEX_GAUSSIAN: ("sigma2",),
    NoiseKind.GND: ("alpha", "beta"),
    NoiseKind.LAPLACE: ("alpha",),
    NoiseKind.COMPLEX_CAUCHY: ("gamma",),
}


@dataclass(frozen=True)
class NoiseModel:
    """Additive receiver noise.

    Gaussian noise is circular with total variance ``sigma2``.  GND, Laplace
    and Cauchy noise draw the real and imaginary parts independently; each
    Cauchy component has scale ``gamma / 2``.  ``sigma2 = 0`` gives a
    noiseless channel.
    """

    kind: NoiseKind
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = _NOISE_PARAMS[self.kind]
        if set(self.params) != set(expected):
            raise InvalidParam(f"{self.kind.value} expects parameters {expected}, got {sorted(self.params)}")
        for name, v in self.params.items():
            ok = math.isfinite(v) and (v >= 0 if name == "sigma2" else v > 0)
            if not ok:
                raise InvalidParam(f"{self.kind.value}: bad {name}={v!r}")

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted(self.params.items()))))

    @classmethod
    def gaussian(cls, sigma2: float) -> "NoiseModel":
        return cls(NoiseKind.COMPLEX_GAUSSIAN, {"sigma2": float(sigma2)})

    @classmethod
    def gnd(cls, alpha: float, beta: float) -> "NoiseModel":
        return cls(NoiseKind.GND, {"alpha": float(alpha), "beta": float(beta)})

    @classmethod
    def laplace(cls, alpha: float) -> "NoiseModel":
        return cls(NoiseKind.LAPLACE, {"alpha": float(alpha)})

    @classmethod
    def cauchy(cls, gamma: float) -> "NoiseModel":
        return cls(NoiseKind.COMPLEX_CAUCHY, {"gamma": float(gamma)})

    @property
    def finite_variance(self) -> bool:
        return self.kind is not NoiseKind.COMPLEX_CAUCHY

    @property
    def is_zero(self) -> bool:
        return self.kind is NoiseKind.COMPLEX_GAUSSIAN and self.params["sigma2"] == 0.0

    def with_scale(self, value: float) -> "NoiseModel":
        """Copy with the primary scale replaced (``sigma`` std for Gaussian, ``gamma`` for Cauchy)."""
        if self.kind is NoiseKind.COMPLEX_GAUSSIAN:
            return NoiseModel.gaussian(value**2)
        if self.kind is NoiseKind.COMPLEX_CAUCHY:
            return NoiseModel.cauchy(value)
        if self.kind is NoiseKind.LAPLACE:
            return NoiseModel.laplace(value)
        return NoiseModel.gnd(value, self.params["beta"])

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params)}

    @classmethod
    def from_json(cls, data: dict) -> "NoiseModel":
        try:
            kind = NoiseKind(data["kind"])
        except (KeyError, ValueError):
            raise InvalidParam(f"unknown noise kind {data.get('kind')!r}") from None
        return cls(kind, {k: float(v) for k, v in data.get("params", {}).items()})

    def sample(self, rng: np.random.Generator, size=None):
        return sample_noise(self, rng, size)


def _gnd_component(rng: np.random.Generator, alpha: float, beta: float, size) -> np.ndarray:
    # |Z| = alpha * G**(1/beta), G ~ Gamma(1/beta, 1), symmetric sign
    g = rng.gamma(1.0 / beta, 1.0, size=size)
    sign = np.where(rng.random(size=size) < 0.5, -1.0, 1.0)
    return sign * alpha * g ** (1.0 / beta)


def sample_noise(model: NoiseModel, rng: np.random.Generator, size=None):
    """Draw complex noise; returns a scalar when ``size`` is None."""
    shape = () if size is None else size
    p = model.params
    if model.kind is NoiseKind.COMPLEX_GAUSSIAN:
        s = math.sqrt(p["sigma2"] / 2.0)
        z = s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    elif model.kind in (NoiseKind.GND, NoiseKind.LAPLACE):
        beta = p.get("beta", 1.0)
        z = _gnd_component(rng, p["alpha"], beta, shape) + 1j * _gnd_component(rng, p["alpha"], beta, shape)
    else:
        s = p["gamma"] / 2.0
        z = s * (rng.standard_cauchy(shape) + 1j * rng.standard_cauchy(shape))
    return complex(z) if size is None else z


# ---------------------------------------------------------------------------
# fading
# ---------------------------------------------------------------------------


class FadingKind(enum.Enum):
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"
    FIXED = "fixed"


def check_covariance(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=complex)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch("covariance must be square")
    if not np.allclose(cov, cov.conj().T, atol=1e-12):
        raise InvalidParam("covariance must be Hermitian")
    if np.linalg.eigvalsh(cov).min() < -PSD_TOL:
        raise InvalidParam("covariance must be positive semidefinite")
    return cov


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


@dataclass(frozen=True, eq=False)
class FadingModel:
    """Per-node channel gains ``h`` with covariance ``E[h h^H]``.

    ``Rayleigh``: ``h ~ CN(0, scatter)``.  ``Rician(kappa)``:
    ``h = sqrt(kappa/(kappa+1)) los + sqrt(1/(kappa+1)) CN(0, scatter)``.
    ``Fixed``: deterministic ``h``.  With ``inversion`` each node applies
    ``p_k = conj(h_k) / |h_k|**2``.
    """

    kind: FadingKind
    scatter: Optional[np.ndarray] = None
    kappa: float = 0.0
    los: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    inversion: bool = False

    def __post_init__(self) -> None:
        if self.kind is FadingKind.FIXED:
            if self.h is None:
                raise InvalidParam("fixed fading needs h")
        else:
            if self.scatter is None:
                raise InvalidParam("stochastic fading needs a scatter covariance")
            check_covariance(self.scatter)
            if self.kappa < 0:
                raise InvalidParam("kappa must be non-negative")

    @classmethod
    def rayleigh(cls, covariance, inversion: bool = False) -> "FadingModel":
        return cls(FadingKind.RAYLEIGH, scatter=np.asarray(covariance, dtype=complex), inversion=inversion)

    @classmethod
    def rician(cls, kappa: float, scatter, los=None, inversion: bool = False) -> "FadingModel":
        scatter = np.asarray(scatter, dtype=complex)
        los = np.ones(scatter.shape[0], dtype=complex) if los is None else np.asarray(los, dtype=complex)
        return cls(FadingKind.RICIAN, scatter=scatter, kappa=float(kappa), los=los, inversion=inversion)

    @classmethod
    def fixed(cls, h, inversion: bool = True) -> "FadingModel":
        return cls(FadingKind.FIXED, h=np.asarray(h, dtype=complex), inversion=inversion)

    @property
    def K(self) -> int:
        return len(self.h) if self.kind is FadingKind.FIXED else self.scatter.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        """``E[h h^H]``."""
        if self.kind is FadingKind.FIXED:
            return np.outer(self.h, self.h.conj())
        if self.kind is FadingKind.RAYLEIGH:
            return self.scatter
        k = self.kappa
        return k / (k + 1) * np.outer(self.los, self.los.conj()) + self.scatter / (k + 1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size x K`` channel draws."""
        if self.kind is FadingKind.FIXED:
            return np.broadcast_to(self.h, (size, self.K)).copy()
        L = _psd_sqrt(self.scatter)
        w = (rng.standard_normal((size, self.K)) + 1j * rng.standard_normal((size, self.K))) / math.sqrt(2.0)
        h = w @ L.T
        if self.kind is FadingKind.RICIAN:
            k = self.kappa
            h = math.sqrt(k / (k + 1)) * self.los + math.sqrt(1.0 / (k + 1)) * h
        return h

    def to_json(self) -> dict:
        def cm(a):
            return None if a is None else [[[float(v.real), float(v.imag)] for v in row] for row in np.atleast_2d(a)]

        out = {"generator": self.kind.value, "inversion": self.inversion}
        if self.kind is FadingKind.FIXED:
            out["h"] = [[float(v.real), float(v.imag)] for v in self.h]
        else:
            out["covariance"] = cm(self.scatter)
        if self.kind is FadingKind.RICIAN:
            out["kappa"] = self.kappa
            out["los"] = [[float(v.real), float(v.imag)] for v in self.los]
        return out

    @classmethod
    def from_json(cls, data: dict, base_dir=None) -> "FadingModel":
        gen = data.get("generator")
        inversion = bool(data.get("inversion", False))

        def vec(v):
            return np.array([complex(a, b) for a, b in v])

        def mat(m):
            if isinstance(m, str):
                path = m if base_dir is None else os.path.join(base_dir, m)
                return load_covariance_csv(path)
            arr = np.asarray(m)
            if arr.ndim == 3:
                return arr[..., 0] + 1j * arr[..., 1]
            return arr.astype(complex)

        if gen == "fixed":
            return cls.fixed(vec(data["h"]), inversion=inversion)
        if gen == "rayleigh":
            return cls.rayleigh(mat(data["covariance"]), inversion=inversion)
        if gen == "rician":
            los = vec(data["los"]) if "los" in data else None
            return cls.rician(float(data["kappa"]), mat(data["covariance"]), los=los, inversion=inversion)
        raise InvalidParam(f"unknown fading generator {gen!r}")


def load_covariance_csv(path) -> np.ndarray:
    """Comma-separated matrix; complex entries written as ``1+2j``."""
    cov = np.loadtxt(path, delimiter=",", dtype=complex, ndmin=2)
    return check_covariance(cov)


def inversion_gains(h: np.ndarray) -> np.ndarray:
    """Channel-inversion transmit coefficients ``p_k = conj(h_k) / |h_k|**2``."""
    h = np.asarray(h, dtype=complex)
    if np.any(np.abs(h) < ZERO_CHANNEL_TOL):
        raise ZeroChannel("channel inversion on a zero channel")
    return h.conj() / (h.real**2 + h.imag**2)


# ---------------------------------------------------------------------------
# transmission
# ---------------------------------------------------------------------------


def node_levels(counts: np.ndarray) -> np.ndarray:
    """Rows of level indices per node (nondecreasing), one row per count vector."""
    counts = np.atleast_2d(counts)
    return np.array([np.repeat(np.arange(counts.shape[1]), c) for c in counts])


def transmit_many(
    x: np.ndarray,
    counts: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator,
    fading: Optional[FadingModel] = None,
) -> np.ndarray:
    """Received samples for a batch of count vectors (``N x q``)."""
    x = np.asarray(x, dtype=complex)
    counts = np.atleast_2d(counts)
    if counts.shape[1] != x.size:
        raise DimensionMismatch(f"modulation vector has {x.size} entries, profiles have {counts.shape[1]}")
    n = counts.shape[0]
    if fading is None:
        clean = counts @ x
    else:
        levels = node_levels(counts)
        if levels.shape[1] != fading.K:
            raise DimensionMismatch(f"profiles have K={levels.shape[1]}, fading model has K={fading.K}")
        h = fading.sample(rng, n)
        if fading.inversion:
            inversion_gains(h)  # raises on zero channels
            clean = counts @ x
        else:
            clean = np.sum(h * x[levels], axis=1)
    if noise.is_zero:
        return clean.astype(complex)
    return clean + sample_noise(noise, rng, n)


def transmit(
    x: Sequence[complex],
    profile: InputProfile,
    noise: NoiseModel,
    rng: np.random.Generator,
    fading: Optional[FadingModel] = None,
) -> complex:
    return complex(transmit_many(np.asarray(x), np.array([profile.counts]), noise, rng, fading)[0])


# ---------------------------------------------------------------------------
# fading Gram matrices
# ---------------------------------------------------------------------------


def fading_gram(covariance: np.ndarray | FadingModel, profile_i: InputProfile, profile_j: InputProfile) -> np.ndarray:
    """``G`` with ``E|r_i - r_j|**2 = x^H G x`` for the nondecreasing node expansion.

    ``r_i - r_j = h^T Bt x`` with ``Bt = B_i - B_j``, so
    ``E|r_i - r_j|**2 = x^H Bt^T conj(E[h h^H]) Bt x``.
    """
    cov = covariance.covariance if isinstance(covariance, FadingModel) else np.asarray(covariance, dtype=complex)
    Bt = profile_i.selection_matrix() - profile_j.selection_matrix()
    if cov.shape != (Bt.shape[0], Bt.shape[0]):
        raise DimensionMismatch(f"covariance is {cov.shape}, network has K={Bt.shape[0]}")
    G = Bt.T @ cov.conj() @ Bt
    return 0.5 * (G + G.conj().T)


def fading_grams(covariance: np.ndarray | FadingModel, constraints: ConstraintSet) -> np.ndarray:
    """Stacked ``P x q x q`` Gram matrices for every pair of a constraint set."""
    cov = covariance.covariance if isinstance(covariance, FadingModel) else np.asarray(covariance, dtype=complex)
    sel = np.array([p.selection_matrix() for p in constraints.profiles])
    if cov.shape != (sel.shape[1], sel.shape[1]):
        raise DimensionMismatch(f"covariance is {cov.shape}, network has K={sel.shape[1]}")
    Bt = sel[constraints.i] - sel[constraints.j]
    G = np.einsum("pkq,kl,plr->pqr", Bt, cov.conj(), Bt)
    return 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
