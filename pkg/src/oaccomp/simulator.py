"""Monte-Carlo estimates of the end-to-end computation error.

One trial draws an input profile, sends its superimposed point through the
channel, decodes the sample and records ``f_hat - f``.  Every run owns a
counter-based random stream derived from its seed, so results are
bit-reproducible; sweeps give each grid point its own child stream and
compare designs on common random numbers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull
from scipy.special import ndtr

from .channel import FadingModel, NoiseKind, NoiseModel, transmit_many
from .errors import InvalidParam
from .function_model import InputProfile
from .receiver import Codebook, build_codebook, decode_many


class InputLaw(enum.Enum):
    PROFILES = "profiles"  # every multiset equally likely
    TUPLES = "tuples"  # every node draws its level uniformly and independently


def profile_probabilities(profiles: Sequence[InputProfile], law: InputLaw | str = InputLaw.PROFILES) -> np.ndarray:
    law = InputLaw(law)
    n = len(profiles)
    if law is InputLaw.PROFILES:
        return np.full(n, 1.0 / n)
    # multinomial weights K! / prod(a_l!) / q**K, computed in log space
    lw = np.array([math.lgamma(p.K + 1) - sum(math.lgamma(c + 1) for c in p.counts) for p in profiles])
    w = np.exp(lw - lw.max())
    return w / w.sum()


def child_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """``n`` independent child sequences; unlike ``spawn`` this does not mutate ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,), pool_size=ss.pool_size) for k in range(n)]


def make_rng(seed) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimulationConfig:
    x: np.ndarray
    profiles: tuple[InputProfile, ...]
    noise: NoiseModel
    trials: int = 10_000
    seed: int | np.random.SeedSequence = 0
    fading: Optional[FadingModel] = None
    input_law: InputLaw = InputLaw.PROFILES
    min_distance: bool = False  # Cauchy only: nearest point instead of the exact likelihood

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise InvalidParam("trials must be >= 1")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=complex))
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "input_law", InputLaw(self.input_law))


@dataclass(frozen=True)
class SimulationResult:
    mse: float
    mae: float
    mse_stderr: float
    mae_stderr: float
    trials: int

    @property
    def stderr(self) -> float:
        return self.mse_stderr


def _mean_and_stderr(v: np.ndarray) -> tuple[float, float]:
    # np.sum uses pairwise summation, so totals do not depend on accumulation order heuristics
    n = v.size
    mean = float(np.sum(v) / n)
    if n < 2:
        return mean, math.inf
    var = float(np.sum((v - mean) ** 2) / (n - 1))
    return mean, math.sqrt(var / n)


def run_mse(config: SimulationConfig, codebook: Optional[Codebook] = None) -> SimulationResult:
    """Monte-Carlo MSE and MAE of the computed function value."""
    cb = codebook if codebook is not None else build_codebook(config.x, config.profiles)
    rng = make_rng(config.seed)
    probs = profile_probabilities(config.profiles, config.input_law)
    pick = rng.choice(len(config.profiles), size=config.trials, p=probs)
    counts = np.array([p.counts for p in config.profiles], dtype=float)[pick]
    f_true = np.array([p.value for p in config.profiles])[pick]
    y = transmit_many(config.x, counts, config.noise, rng, config.fading)
    f_hat, _ = decode_many(cb, y, config.noise, config.min_distance)
    err = f_hat - f_true
    mse, mse_se = _mean_and_stderr(err * err)
    mae, mae_se = _mean_and_stderr(np.abs(err))
    return SimulationResult(mse, mae, mse_se, mae_se, config.trials)


def to_db(v) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


class SweepAxis(enum.Enum):
    SIGMA = "sigma"  # Gaussian noise variance, the same sigma as in exp(d**2 / (4 sigma))
    STD = "std"  # Gaussian noise standard deviation: z ~ CN(0, std**2)
    GAMMA = "gamma"  # Cauchy scale: z = z1 + j z2, z1, z2 ~ Cauchy(0, gamma / 2)


def _noise_at(axis: SweepAxis, value: float, base: NoiseModel) -> NoiseModel:
    if axis in (SweepAxis.SIGMA, SweepAxis.STD):
        if base.kind is not NoiseKind.COMPLEX_GAUSSIAN:
            raise InvalidParam(f"a {axis.value} sweep needs Gaussian noise")
        return NoiseModel.gaussian(value if axis is SweepAxis.SIGMA else value**2)
    if base.kind is not NoiseKind.COMPLEX_CAUCHY:
        raise InvalidParam("a gamma sweep needs Cauchy noise")
    return NoiseModel.cauchy(value)


@dataclass
class SweepResult:
    axis: str
    values: np.ndarray
    mse: Optional[np.ndarray]
    mse_stderr: Optional[np.ndarray]
    mae: np.ndarray
    mae_stderr: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def infinite_variance(self) -> bool:
        return bool(self.metadata.get("infinite_variance", False))

    @property
    def reported(self) -> str:
        """Error measure reported for this sweep: MAE when the noise has no variance."""
        return "mae" if self.infinite_variance else "mse"

    def primary(self) -> tuple[np.ndarray, np.ndarray]:
        if self.infinite_variance:
            return self.mae, self.mae_stderr
        return self.mse, self.mse_stderr

    def to_json(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in a]

        out = {
            "axis": self.axis,
            "values": arr(self.values),
            "mae": arr(self.mae),
            "mae_stderr": arr(self.mae_stderr),
            "mae_db": arr(to_db(self.mae)),
            "metadata": self.metadata,
        }
        if self.mse is not None:
            out.update(mse=arr(self.mse), mse_stderr=arr(self.mse_stderr), mse_db=arr(to_db(self.mse)))
        return out


def sweep(base: SimulationConfig, axis: SweepAxis | str, grid: Sequence[float], metadata: Optional[dict] = None) -> SweepResult:
    """One :func:`run_mse` per grid point, each on its own child stream of ``base.seed``.

    Cauchy sweeps keep only the MAE; their metadata carries ``infinite_variance``.
    """
    axis = SweepAxis(axis)
    values = np.sort(np.asarray(grid, dtype=float))
    if values.size == 0:
        raise InvalidParam("sweep grid must be nonempty")
    if np.any(values < 0):
        raise InvalidParam("noise scales must be non-negative")
    children = child_seeds(base.seed, values.size)
    cb = build_codebook(base.x, base.profiles)
    res = []
    for v, ss in zip(values, children):
        cfg = replace(base, noise=_noise_at(axis, float(v), base.noise), seed=ss)
        res.append(run_mse(cfg, cb))
    infinite = axis is SweepAxis.GAMMA
    meta = dict(metadata or {})
    meta.update(
        K=base.profiles[0].K,
        q=base.profiles[0].q,
        trials=base.trials,
        input_law=base.input_law.value,
        noise=base.noise.kind.value,
        infinite_variance=infinite,
    )
    return SweepResult(
        axis=axis.value,
        values=values,
        mse=None if infinite else np.array([r.mse for r in res]),
        mse_stderr=None if infinite else np.array([r.mse_stderr for r in res]),
        mae=np.array([r.mae for r in res]),
        mae_stderr=np.array([r.mae_stderr for r in res]),
        metadata=meta,
    )


@dataclass
class Comparison:
    """Per grid point ranking of several designs (best first).

    ``significant[k][m]`` tells whether the design ranked ``m`` is separated
    from the one ranked ``m + 1`` by non-overlapping 3-standard-error intervals.
    """

    labels: list[str]
    sweeps: list[SweepResult]
    ranking: list[list[int]]
    significant: list[list[bool]]

    @property
    def values(self) -> np.ndarray:
        return self.sweeps[0].values

    def better(self, a: int, b: int, k: int, nsigma: float = 3.0) -> bool:
        """Design ``a`` beats ``b`` at grid point ``k`` with separated intervals."""
        return separated(self.sweeps[a], self.sweeps[b], k, nsigma)

    def table(self) -> str:
        name = self.sweeps[0].reported.upper()
        lines = [f"{self.sweeps[0].axis:>10s}  " + "  ".join(f"{l:>22s}" for l in self.labels) + "  ranking"]
        for k, v in enumerate(self.values):
            cells = []
            for s in self.sweeps:
                m, se = s.primary()
                cells.append(f"{m[k]:12.5g} +- {se[k]:7.2g}")
            order = self.ranking[k]
            rank = ""
            for m, d in enumerate(order):
                rank += self.labels[d]
                if m + 1 < len(order):
                    rank += " < " if self.significant[k][m] else " ~ "
            lines.append(f"{v:10.4g}  " + "  ".join(f"{c:>22s}" for c in cells) + "  " + rank)
        return f"{name} by design\n" + "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "labels": self.labels,
            "sweeps": [s.to_json() for s in self.sweeps],
            "ranking": self.ranking,
            "significant": self.significant,
        }


def separated(a: SweepResult, b: SweepResult, k: int, nsigma: float = 3.0) -> bool:
    """``a`` is lower than ``b`` at point ``k`` and their ``nsigma`` intervals do not overlap."""
    ma, sa = a.primary()
    mb, sb = b.primary()
    return bool(ma[k] + nsigma * sa[k] < mb[k] - nsigma * sb[k])


def compare_designs(
    designs: Sequence,
    base: SimulationConfig,
    axis: SweepAxis | str,
    grid: Sequence[float],
    labels: Optional[Sequence[str]] = None,
) -> Comparison:
    """Sweep every design on the same random streams and rank them per grid point.

    ``designs`` holds modulation vectors or objects with an ``x`` attribute.
    """
    xs = [np.asarray(getattr(d, "x", d), dtype=complex) for d in designs]
    if not xs:
        raise InvalidParam("need at least one design")
    labels = list(labels) if labels is not None else [f"design{k}" for k in range(len(xs))]
    sweeps = [sweep(replace(base, x=x), axis, grid, {"design": lab}) for x, lab in zip(xs, labels)]
    ranking, significant = [], []
    for k in range(len(sweeps[0].values)):
        m = [s.primary()[0][k] for s in sweeps]
        order = sorted(range(len(xs)), key=lambda d: (m[d], d))
        ranking.append(order)
        significant.append([separated(sweeps[order[i]], sweeps[order[i + 1]], k) for i in range(len(order) - 1)])
    return Comparison(labels, sweeps, ranking, significant)


# ---------------------------------------------------------------------------
# analytic references
# ---------------------------------------------------------------------------


def collinear_gaussian_mse(codebook: Codebook, priors: np.ndarray, sigma2: float) -> float:
    """Exact nearest-point MSE for a collinear codebook under circular Gaussian noise.

    Decision regions on the line are the intervals between midpoints, and
    only the noise component along the line matters (variance ``sigma2 / 2``).
    """
    pts = codebook.points
    n = len(pts)
    if n == 1:
        return 0.0
    span = pts - pts[0]
    u = span[np.argmax(np.abs(span))]
    u = u / abs(u)
    t = (np.conj(u) * span).real
    if np.max(np.abs((np.conj(u) * span).imag)) > 1e-9 * max(1.0, np.max(np.abs(t))):
        raise InvalidParam("codebook is not collinear")
    order = np.argsort(t)
    ts = t[order]
    edges = np.concatenate([[-np.inf], 0.5 * (ts[1:] + ts[:-1]), [np.inf]])
    s = math.sqrt(sigma2 / 2.0)
    pw = np.zeros(n)  # prior weight per merged point
    np.add.at(pw, codebook.profile_point, priors)
    f = codebook.values[order]
    total = 0.0
    for a in range(n):
        i = order[a]
        if s == 0.0:
            continue
        p = ndtr((edges[1:] - t[i]) / s) - ndtr((edges[:-1] - t[i]) / s)
        total += pw[i] * float(np.sum(p * (f - codebook.values[i]) ** 2))
    return total


def far_field_weights(codebook: Codebook) -> np.ndarray:
    """Limit probabilities of decoding each point as circular noise grows without bound.

    The nearest point to a far-away sample is the hull vertex extreme in the
    sample's direction, so each vertex receives its exterior angle over
    ``2 pi``; a collinear codebook splits evenly between its two ends.
    """
    pts = codebook.points
    n = len(pts)
    w = np.zeros(n)
    if n == 1:
        w[0] = 1.0
        return w
    xy = np.column_stack([pts.real, pts.imag])
    try:
        hull = ConvexHull(xy)
        verts = hull.vertices  # counter-clockwise
    except Exception:
        verts = None
    if verts is None or len(verts) < 3:
        span = pts - pts[0]
        u = span[np.argmax(np.abs(span))]
        t = (np.conj(u) * span).real
        w[int(np.argmin(t))] += 0.5
        w[int(np.argmax(t))] += 0.5
        return w
    m = len(verts)
    for k in range(m):
        prev, cur, nxt = xy[verts[k - 1]], xy[verts[k]], xy[verts[(k + 1) % m]]
        e_in = cur - prev
        e_out = nxt - cur
        turn = math.atan2(e_in[0] * e_out[1] - e_in[1] * e_out[0], float(e_in @ e_out))
        w[verts[k]] = turn / (2.0 * math.pi)
    return w


def far_field_mse(codebook: Codebook, priors: np.ndarray) -> float:
    """MSE in the far-field limit, where the decoded point no longer depends on the input."""
    w = far_field_weights(codebook)
    f_true = codebook.values[codebook.profile_point]
    d = f_true[:, None] - codebook.values[None, :]
    return float(np.sum(priors[:, None] * w[None, :] * d * d))
