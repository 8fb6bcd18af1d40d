"""Aggregation functions over quantized inputs and the overlap-avoidance constraints.

A network of ``K`` nodes shares one modulation lookup table ``x`` with ``q``
entries.  Because the target function is symmetric, only the multiset of
transmitted levels matters, so every input combination is summarised by a
count vector ``a`` (``a[l]`` nodes sent level ``l``) and produces the
noise-free superimposed point ``<a, x>``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import CombinatorialBlowup, DimensionMismatch, InvalidParam, NonSymmetricFunction

DEFAULT_PROFILE_CAP = 2_000_000
VALUE_RTOL = 1e-9

ScalarMap = Callable[[float], float]


class FunctionKind(enum.Enum):
    SUM = "sum"
    PRODUCT = "product"
    MAX = "max"
    ARITHMETIC_MEAN = "arithmetic_mean"
    GEOMETRIC_MEAN = "geometric_mean"
    CUSTOM = "custom"


def _geometric_mean(values: Sequence[float]) -> float:
    p = math.prod(values)
    if p == 0.0:
        return 0.0
    k = len(values)
    if p < 0.0:
        if k % 2 == 0:
            raise InvalidParam("geometric mean of a negative product with even K is not real")
        return -((-p) ** (1.0 / k))
    return p ** (1.0 / k)


_BUILTIN: dict[FunctionKind, Callable[[Sequence[float]], float]] = {
    FunctionKind.SUM: math.fsum,
    FunctionKind.PRODUCT: math.prod,
    FunctionKind.MAX: max,
    FunctionKind.ARITHMETIC_MEAN: lambda v: math.fsum(v) / len(v),
    FunctionKind.GEOMETRIC_MEAN: _geometric_mean,
}


@dataclass(frozen=True)
class AggregationFunction:
    """``f(s_1..s_K) = outer(g(inner(s_1), ..., inner(s_K)))`` with symmetric ``g``.

    Inputs are sorted before ``g`` is applied, so the built-in kinds are
    bit-exactly invariant under permutations of their arguments.
    """

    kind: FunctionKind
    inner_map: Optional[ScalarMap] = None
    outer_map: Optional[ScalarMap] = None
    custom: Optional[Callable[[Sequence[float]], float]] = None
    symmetric: bool = True

    def __post_init__(self) -> None:
        if self.kind is FunctionKind.CUSTOM and self.custom is None:
            raise InvalidParam("custom aggregation functions need a callable")

    @classmethod
    def from_name(cls, name: str) -> "AggregationFunction":
        try:
            kind = FunctionKind(name.lower())
        except ValueError:
            raise InvalidParam(f"unknown function kind {name!r}") from None
        return cls(kind)

    @property
    def name(self) -> str:
        return self.kind.value

    def __call__(self, inputs: Sequence[float]) -> float:
        vals = [float(v) for v in inputs]
        if self.inner_map is not None:
            vals = [float(self.inner_map(v)) for v in vals]
        vals.sort()
        if self.kind is FunctionKind.CUSTOM:
            out = float(self.custom(vals))
        else:
            out = float(_BUILTIN[self.kind](vals))
        if self.outer_map is not None:
            out = float(self.outer_map(out))
        return out


@dataclass(frozen=True)
class QuantizedAlphabet:
    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.levels) < 1:
            raise InvalidParam("alphabet needs at least one level")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidParam("alphabet levels must be strictly increasing")

    @classmethod
    def uniform(cls, q: int, offset: float = 0.0) -> "QuantizedAlphabet":
        if q < 1:
            raise InvalidParam("q must be positive")
        return cls(tuple(float(offset + l) for l in range(q)))

    @property
    def q(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class InputProfile:
    counts: tuple[int, ...]
    value: float

    @property
    def K(self) -> int:
        return sum(self.counts)

    @property
    def q(self) -> int:
        return len(self.counts)

    def node_levels(self) -> np.ndarray:
        """Level index per node, in nondecreasing order (the canonical expansion)."""
        return np.repeat(np.arange(self.q), self.counts)

    def selection_matrix(self) -> np.ndarray:
        """``K x q`` 0/1 matrix with one row per node selecting its level."""
        levels = self.node_levels()
        B = np.zeros((len(levels), self.q))
        B[np.arange(len(levels)), levels] = 1.0
        return B


def num_profiles(K: int, q: int) -> int:
    return math.comb(K + q - 1, q - 1)


def enumerate_profiles(
    func: AggregationFunction,
    K: int,
    alphabet: QuantizedAlphabet,
    cap: int = DEFAULT_PROFILE_CAP,
) -> list[InputProfile]:
    """All multisets of ``K`` levels, one :class:`InputProfile` each.

    Profiles come out in lexicographic order of their sorted level tuples
    ``(l_1 <= ... <= l_K)``, i.e. ``(0,..,0), (0,..,1), ...``.
    """
    q = alphabet.q
    if K < 1:
        raise InvalidParam("K must be >= 1")
    if q < 2:
        raise InvalidParam("q must be >= 2")
    if not func.symmetric:
        raise NonSymmetricFunction("profile enumeration assumes a symmetric function")
    n = num_profiles(K, q)
    if n > cap:
        raise CombinatorialBlowup(f"C({K + q - 1},{q - 1}) = {n} profiles exceeds cap {cap}")
    levels = alphabet.levels
    out = []
    for tup in itertools.combinations_with_replacement(range(q), K):
        counts = [0] * q
        for l in tup:
            counts[l] += 1
        out.append(InputProfile(tuple(counts), func([levels[l] for l in tup])))
    return out


def values_equal(a: float, b: float) -> bool:
    return abs(a - b) <= VALUE_RTOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class ConstraintSet:
    """Every pair of profiles whose function values differ.

    ``b[p] = counts[i[p]] - counts[j[p]]`` and ``gap[p] = |f_i - f_j|``.
    """

    profiles: tuple[InputProfile, ...]
    i: np.ndarray
    j: np.ndarray
    b: np.ndarray
    gap: np.ndarray
    function: Optional[str] = None
    levels: Optional[tuple[float, ...]] = None
    _dedup: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def K(self) -> int:
        return self.profiles[0].K

    @property
    def q(self) -> int:
        return self.profiles[0].q

    def __len__(self) -> int:
        return len(self.gap)

    @property
    def counts(self) -> np.ndarray:
        return np.array([p.counts for p in self.profiles], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.profiles])

    def pairs(self) -> Iterator[tuple[int, int, np.ndarray, float]]:
        for p in range(len(self)):
            yield int(self.i[p]), int(self.j[p]), self.b[p], float(self.gap[p])

    def unique_directions(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct difference vectors (up to sign) with their largest gap.

        Identical ``b`` gives identical separation, so only the largest gap
        can bind in a max-min problem.
        """
        if "b" not in self._dedup:
            b = self.b.copy()
            if len(b):
                # sign-normalise: first nonzero entry positive
                first = np.argmax(b != 0, axis=1)
                sign = np.sign(b[np.arange(len(b)), first])
                b *= sign[:, None]
            uniq, inv = np.unique(b, axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            gmax = np.zeros(len(uniq))
            np.maximum.at(gmax, inv, self.gap)
            self._dedup["b"] = (uniq, gmax)
        return self._dedup["b"]

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "q": self.q,
            "function": self.function,
            "profiles": [{"counts": list(p.counts), "value": p.value} for p in self.profiles],
            "pairs": [{"i": int(a), "j": int(c), "gap": float(g)} for a, c, g in zip(self.i, self.j, self.gap)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConstraintSet":
        profiles = [InputProfile(tuple(p["counts"]), float(p["value"])) for p in data["profiles"]]
        return build_constraints(profiles, function=data.get("function"))


def build_constraints(
    profiles: Sequence[InputProfile],
    function: Optional[AggregationFunction | str] = None,
    alphabet: Optional[QuantizedAlphabet] = None,
) -> ConstraintSet:
    if not profiles:
        raise InvalidParam("need at least one profile")
    K, q = profiles[0].K, profiles[0].q
    if any(p.K != K or p.q != q for p in profiles):
        raise DimensionMismatch("all profiles must share K and q")
    counts = np.array([p.counts for p in profiles], dtype=np.int64)
    vals = np.array([p.value for p in profiles])
    ii, jj = np.triu_indices(len(profiles), k=1)
    fi, fj = vals[ii], vals[jj]
    scale = np.maximum(1.0, np.maximum(np.abs(fi), np.abs(fj)))
    differ = np.abs(fi - fj) > VALUE_RTOL * scale
    ii, jj = ii[differ], jj[differ]
    if isinstance(function, AggregationFunction):
        function = function.name
    return ConstraintSet(
        profiles=tuple(profiles),
        i=ii,
        j=jj,
        b=counts[ii] - counts[jj],
        gap=np.abs(vals[ii] - vals[jj]),
        function=function,
        levels=alphabet.levels if alphabet is not None else None,
    )


def superimpose(x: Sequence[complex], profile: InputProfile | Sequence[int]) -> complex:
    """Noise-free received point ``sum_l a_l x_l``."""
    counts = profile.counts if isinstance(profile, InputProfile) else profile
    x = np.asarray(x, dtype=complex)
    a = np.asarray(counts, dtype=float)
    if x.shape != a.shape:
        raise DimensionMismatch(f"modulation vector has {x.size} entries, profile has {a.size}")
    return complex(a @ x)


def superimposed_points(x: Sequence[complex], profiles: Sequence[InputProfile]) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    counts = np.array([p.counts for p in profiles], dtype=float)
    if counts.shape[1] != x.size:
        raise DimensionMismatch(f"modulation vector has {x.size} entries, profiles have {counts.shape[1]}")
    return counts @ x
