"""Decoding received samples back to function values.

The receiver knows the noise-free superimposed constellation: every profile
maps to a point ``r_i = <a_i, x>`` and a value ``f_i``.  A sample ``y`` is
decoded to the most likely point (nearest point for Gaussian and GND noise,
the exact per-component likelihood for Cauchy noise) and the tabular mapper
returns that point's value.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .channel import NoiseKind, NoiseModel
from .errors import InvalidParam, OverlapViolation
from .function_model import InputProfile, superimposed_points, values_equal

MERGE_TOL = 1e-9
_CHUNK = 4096


@dataclass(frozen=True)
class Codebook:
    """Distinct superimposed points with their function values.

    ``points[k]`` and ``values[k]`` describe merged point ``k``; points are
    ordered by first appearance in the profile list, and
    ``profile_point[i]`` is the point carrying profile ``i``.
    """

    points: np.ndarray
    values: np.ndarray
    profile_point: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "f"])
            for r, f in zip(self.points, self.values):
                w.writerow([repr(float(r.real)), repr(float(r.imag)), repr(float(f))])

    def as_dict(self) -> dict[complex, float]:
        return {complex(r): float(f) for r, f in zip(self.points, self.values)}


def build_codebook(x, profiles: Sequence[InputProfile], tol: float = MERGE_TOL) -> Codebook:
    """Merge coincident points; coincident points with different values are an overlap."""
    if not profiles:
        raise InvalidParam("need at least one profile")
    r = superimposed_points(x, profiles)
    f = np.array([p.value for p in profiles])
    n = len(r)
    # union-find over pairs closer than tol
    parent = np.arange(n)

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree = cKDTree(np.column_stack([r.real, r.imag]))
    for i, j in sorted(tree.query_pairs(tol, p=2.0)):
        if not values_equal(f[i], f[j]):
            raise OverlapViolation(
                f"profiles {profiles[i].counts} and {profiles[j].counts} map to the same point "
                f"{complex(r[i]):.6g} but have values {f[i]:g} and {f[j]:g}"
            )
        a, b = root(i), root(j)
        if a != b:
            parent[max(a, b)] = min(a, b)
    roots = np.array([root(i) for i in range(n)])
    first, inverse = np.unique(roots, return_inverse=True)
    # np.unique sorts the roots, and each root is its group's smallest index,
    # so merged points come out in order of first appearance
    return Codebook(points=r[first].copy(), values=f[first].copy(), profile_point=inverse.reshape(-1))


def _cost_matrix(points: np.ndarray, y: np.ndarray, noise: Optional[NoiseModel], min_distance: bool) -> np.ndarray:
    dr = y.real[:, None] - points.real[None, :]
    di = y.imag[:, None] - points.imag[None, :]
    if noise is not None and noise.kind is NoiseKind.COMPLEX_CAUCHY and not min_distance:
        s = noise.params["gamma"] / 2.0
        return np.log1p((dr / s) ** 2) + np.log1p((di / s) ** 2)
    return dr * dr + di * di


def decode_many(
    codebook: Codebook,
    y,
    noise: Optional[NoiseModel] = None,
    min_distance: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Decoded values and point indices for an array of received samples.

    Gaussian, GND and Laplace noise use the nearest point; Cauchy noise uses
    the exact likelihood unless ``min_distance`` is set (faster, suboptimal).
    Ties go to the lowest point index.
    """
    if len(codebook) == 0:
        raise InvalidParam("empty codebook")
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    idx = np.empty(y.size, dtype=np.int64)
    for lo in range(0, y.size, _CHUNK):
        cost = _cost_matrix(codebook.points, y[lo : lo + _CHUNK], noise, min_distance)
        idx[lo : lo + _CHUNK] = np.argmin(cost, axis=1)
    return codebook.values[idx], idx


def decode(codebook: Codebook, y: complex, noise: Optional[NoiseModel] = None, min_distance: bool = False) -> tuple[float, int]:
    vals, idx = decode_many(codebook, [y], noise, min_distance)
    return float(vals[0]), int(idx[0])


def gaussian_ml_index(codebook: Codebook, y, sigma2: float) -> np.ndarray:
    """Brute-force maximiser of the circular Gaussian likelihood (reference decoder)."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    loglik = -np.abs(y[:, None] - codebook.points[None, :]) ** 2 / sigma2 - np.log(np.pi * sigma2)
    return np.argmax(loglik, axis=1)


def quantize_output(fhat: float, levels: Sequence[float]) -> float:
    """Nearest level; exact ties go to the smaller level."""
    lv = np.asarray(levels, dtype=float)
    if lv.size == 0:
        raise InvalidParam("levels must be nonempty")
    k = int(np.searchsorted(lv, fhat))
    if k == 0:
        return float(lv[0])
    if k == lv.size:
        return float(lv[-1])
    lo, hi = lv[k - 1], lv[k]
    return float(lo if fhat - lo <= hi - fhat else hi)
