"""Max-min constellation design.

For every constrained pair ``p`` the squared separation ``s_p(x)`` is
``|<b_p, x>|**2`` (perfect power control) or ``x^H G_p x`` (expected
separation under stochastic fading).  A design maximizes

    min_p  log D(s_p(x)) - e * log(gap_p)      subject to  ||x||**2 <= 1,

which is the log of the largest ``lambda`` with ``D(r_i, r_j) >= lambda *
gap**e`` for all pairs.  For the exponential AWGN metric the same problem
read additively gives ``|r_i - r_j|**2 >= 4 sigma e log(gap) + t``, i.e. the
``8 sigma mu + t`` form for ``e = 2``.

Every difference vector ``b_p`` sums to zero, so adding a constant to all
entries of ``x`` leaves every separation unchanged; the solvers therefore
keep ``x`` centred and spend the whole power budget on separation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .channel import FadingModel, fading_grams
from .errors import DimensionMismatch, Infeasible, InvalidParam, SolverDiverged, WrongFunction
from .function_model import ConstraintSet
from .metrics import DistanceMetric, MetricKind

FEASIBILITY_TOL = 1e-6
POWER_TOL = 1e-9


# ---------------------------------------------------------------------------
# problem / result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignProblem:
    constraints: ConstraintSet
    metric: DistanceMetric = field(default_factory=DistanceMetric.euclidean)
    fading: Optional[FadingModel] = None
    gap_exponent: float = 2.0
    form: str = "ratio"  # "ratio": margin is lambda; "additive": margin is t (AWGN metric only)

    def __post_init__(self) -> None:
        if self.form not in ("ratio", "additive"):
            raise InvalidParam(f"unknown problem form {self.form!r}")
        if self.form == "additive" and self.metric.kind is not MetricKind.AWGN_EXP:
            raise InvalidParam("the additive form is defined for the AWGN exponential metric only")
        if self.gap_exponent <= 0:
            raise InvalidParam("gap exponent must be positive")
        if not self.metric.monotone:
            raise InvalidParam("design needs a metric that is non-decreasing in the separation (GND beta >= 1)")


@dataclass
class SolverConfig:
    restarts: int = 32
    seed: int = 0
    max_iter: int = 20_000
    stall_iters: int = 50
    stall_tol: float = 1e-10
    temperatures: tuple = (3.0, 1.0, 0.3, 0.1, 0.03, 0.01)
    stage_iters: int = 300
    polish: bool = True
    polish_top: int = 4
    use_lifting: bool = False
    lifting_randomizations: int = 200
    feasibility_tol: float = FEASIBILITY_TOL

    @classmethod
    def from_json(cls, data: dict) -> "SolverConfig":
        d = dict(data)
        if "temperatures" in d:
            d["temperatures"] = tuple(d["temperatures"])
        return cls(**d)


@dataclass
class DesignResult:
    x: np.ndarray
    margin: float
    feasible: bool
    per_pair_slack: np.ndarray
    min_separation: float
    report: dict = field(default_factory=dict)

    @property
    def method(self) -> str:
        return self.report.get("method", "")

    def to_json(self) -> dict:
        margin = self.margin if math.isfinite(self.margin) else ("inf" if self.margin > 0 else "-inf")
        return {
            "x": [[float(v.real), float(v.imag)] for v in self.x],
            "margin": margin,
            "feasible": bool(self.feasible),
            "min_separation": float(self.min_separation),
            "method": self.method,
            "seed": self.report.get("seed"),
            "report": {k: v for k, v in self.report.items() if k not in ("method", "seed")},
        }


# ---------------------------------------------------------------------------
# feasibility and evaluation
# ---------------------------------------------------------------------------


def _as_vector(x, q: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex).reshape(-1)
    if x.size != q:
        raise DimensionMismatch(f"modulation vector has {x.size} entries, expected q={q}")
    return x


def pair_separations(x, constraints: ConstraintSet) -> np.ndarray:
    """``|<b_ij, x>|`` for every constrained pair."""
    x = _as_vector(x, constraints.q)
    return np.abs(constraints.b @ x)


def verify_feasibility(x, constraints: ConstraintSet, tol: float = FEASIBILITY_TOL) -> tuple[bool, float]:
    """Whether every pair with distinct outputs is separated by more than ``tol``."""
    sep = pair_separations(x, constraints)
    if sep.size == 0:
        return True, math.inf
    m = float(sep.min())
    return bool(m > tol), m


def canonicalize(x) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real and non-negative."""
    x = np.asarray(x, dtype=complex)
    k = int(np.argmax(np.abs(x)))
    if abs(x[k]) == 0:
        return x.copy()
    return x * (abs(x[k]) / x[k])


class _Quadratics:
    """Squared separations ``s_p(x)`` for a batch of column vectors ``X`` (q x R)."""

    def __init__(self, b: Optional[np.ndarray] = None, G: Optional[np.ndarray] = None):
        self.b = None if b is None else np.asarray(b, dtype=float)
        self.G = None if G is None else np.asarray(G, dtype=complex)

    def __len__(self) -> int:
        return len(self.b) if self.b is not None else len(self.G)

    def sq(self, X: np.ndarray):
        if self.b is not None:
            U = self.b @ X
            return U.real**2 + U.imag**2, U
        GX = np.einsum("pqr,rR->pqR", self.G, X)
        return np.einsum("qR,pqR->pR", X.conj(), GX).real, GX

    def grad(self, W: np.ndarray, cache) -> np.ndarray:
        """``sum_p W[p] * grad s_p`` as a complex q x R array (d/dRe + i d/dIm)."""
        if self.b is not None:
            return 2.0 * self.b.T @ (W * cache)
        return 2.0 * np.einsum("pR,pqR->qR", W, cache)

    def jac(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Per-pair gradients for a single vector: ``len(idx) x q`` complex."""
        if self.b is not None:
            bb = self.b[idx]
            return 2.0 * bb * (bb @ x)[:, None]
        return 2.0 * np.einsum("pqr,r->pq", self.G[idx], x)


def _reduced_system(problem: DesignProblem) -> tuple[_Quadratics, np.ndarray]:
    """Deduplicated quadratics and their (largest) gaps."""
    cs = problem.constraints
    if problem.fading is None:
        b, gap = cs.unique_directions()
        return _Quadratics(b=b), gap
    G = fading_grams(problem.fading, cs)
    key = np.round(np.concatenate([G.real, G.imag], axis=1).reshape(len(G), -1), 12)
    uniq, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    gmax = np.zeros(len(uniq))
    np.maximum.at(gmax, inv, cs.gap)
    return _Quadratics(G=G[first]), gmax


def _scores_from_sq(problem: DesignProblem, s: np.ndarray, log_gap: np.ndarray) -> np.ndarray:
    return problem.metric.log_of_sq(s) - problem.gap_exponent * log_gap


def _to_margin(problem: DesignProblem, min_score: float) -> float:
    if problem.form == "additive":
        return 4.0 * problem.metric.params["sigma"] * min_score
    return math.exp(min_score) if min_score < 709 else math.inf


def evaluate_design(x, problem: DesignProblem, tol: float = FEASIBILITY_TOL) -> DesignResult:
    """Margin, per-pair slack and feasibility of a given modulation vector."""
    cs = problem.constraints
    x = _as_vector(x, cs.q)
    if len(cs) == 0:
        return DesignResult(x, math.inf, True, np.zeros(0), math.inf, {"method": "evaluate"})
    if problem.fading is None:
        s = np.abs(cs.b @ x) ** 2
    else:
        G = fading_grams(problem.fading, cs)
        s = np.einsum("q,pqr,r->p", x.conj(), G, x).real
    log_gap = np.log(cs.gap)
    scores = _scores_from_sq(problem, s, log_gap)
    min_score = float(scores.min())
    margin = _to_margin(problem, min_score)
    e = problem.gap_exponent
    with np.errstate(over="ignore", invalid="ignore"):
        if problem.form == "additive":
            sigma = problem.metric.params["sigma"]
            slack = s - 4.0 * sigma * e * log_gap - margin
        else:
            # slack in the lambda form, D - lambda * gap**e; scaled by gap**e to stay finite
            slack = (np.exp(scores - min_score) - 1.0) * margin * cs.gap**e
            slack = np.where(np.isnan(slack), np.inf, slack)
    ok, min_sep = verify_feasibility(x, cs, tol)
    power_ok = float(np.vdot(x, x).real) <= 1.0 + POWER_TOL
    feasible = bool(ok and power_ok and (slack.min() >= -FEASIBILITY_TOL))
    return DesignResult(x, margin, feasible, slack, min_sep, {"method": "evaluate", "min_score": min_score})


# ---------------------------------------------------------------------------
# projected first-order ascent on batches of restarts
# ---------------------------------------------------------------------------


def _project(X: np.ndarray) -> np.ndarray:
    """Centre each column and put it on the unit sphere (the metrics are monotone in scale)."""
    X = X - X.mean(axis=0, keepdims=True)
    n = np.linalg.norm(X, axis=0)
    n = np.where(n > 0, n, 1.0)
    return X / n


def _ascend(
    fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    X: np.ndarray,
    max_iter: int,
    stall_iters: int,
    stall_tol: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Maximize ``fun`` columnwise with normalized projected-gradient steps.

    Steps that do not increase the objective are rejected and the step size
    halves; accepted steps grow it by 1.5.
    """
    X = _project(X)
    F, G = fun(X)
    R = X.shape[1]
    eta = np.full(R, 0.2)
    hist = [F.copy()]
    it = 0
    for it in range(1, max_iter + 1):
        gn = np.linalg.norm(G, axis=0)
        gn = np.where(gn > 0, gn, 1.0)
        Xn = _project(X + eta * G / gn)
        Fn, Gn = fun(Xn)
        if not np.all(np.isfinite(Xn)):
            raise SolverDiverged("non-finite iterate")
        acc = np.isfinite(Fn) & (Fn >= F)
        X = np.where(acc, Xn, X)
        F = np.where(acc, Fn, F)
        G = np.where(acc, Gn, G)
        eta = np.where(acc, np.minimum(eta * 1.5, 1.0), eta * 0.5)
        hist.append(F.copy())
        if len(hist) > stall_iters:
            old = hist.pop(0)
            if np.all(F - old <= stall_tol * (1.0 + np.abs(F))) or np.all(eta < 1e-15):
                break
    return X, F, it


def _init_batch(q: int, restarts: int, seed: int) -> tuple[np.ndarray, list[int]]:
    streams = np.random.SeedSequence(seed).spawn(restarts)
    cols = []
    for ss in streams:
        rng = np.random.Generator(np.random.Philox(ss))
        v = rng.standard_normal(q) + 1j * rng.standard_normal(q)
        cols.append(v / max(1.0, np.linalg.norm(v)))
    return np.array(cols).T, list(range(restarts))


def _lse_cols(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise log-sum-exp and softmax weights."""
    m = z.max(axis=0)
    e = np.exp(z - m)
    tot = e.sum(axis=0)
    return m + np.log(tot), e / tot


def _softmin_objective(problem: DesignProblem, quad: _Quadratics, log_gap: np.ndarray, tau: float):
    metric = problem.metric

    def fun(X):
        s, cache = quad.sq(X)
        sc = _scores_from_sq(problem, s, log_gap[:, None])
        lse, W = _lse_cols(-sc / tau)
        W = W * metric.dlog_dsq(s)
        return -tau * lse, quad.grad(W, cache)

    return fun


def _subset(quad: _Quadratics, idx: np.ndarray) -> _Quadratics:
    if quad.b is not None:
        return _Quadratics(b=quad.b[idx])
    return _Quadratics(G=quad.G[idx])


def _stage(problem, quad, log_gap, X, tau, budget, solver, chunk=100):
    """One temperature stage, restricted to the pairs that can carry softmin weight.

    Pairs scoring more than ``40 tau`` above a column's minimum have weight
    below ``exp(-40)``; the working set is refreshed every ``chunk`` steps.
    """
    used = 0
    while used < budget:
        s, _ = quad.sq(X)
        sc = _scores_from_sq(problem, s, log_gap[:, None])
        cut = sc.min(axis=0) + 40.0 * tau + 1e-12
        idx = np.flatnonzero(np.any(sc <= cut[None, :], axis=1))
        fun = _softmin_objective(problem, _subset(quad, idx), log_gap[idx], tau)
        n_steps = min(chunk, budget - used)
        X, _, n = _ascend(fun, X, n_steps, solver.stall_iters, solver.stall_tol)
        used += n
        if n < n_steps:
            # stalled: stop if the working set is still complete
            s, _ = quad.sq(X)
            sc = _scores_from_sq(problem, s, log_gap[:, None])
            cut = sc.min(axis=0) + 30.0 * tau
            if np.all(np.isin(np.flatnonzero(np.any(sc <= cut[None, :], axis=1)), idx)):
                break
    return X, used


def _min_scores(problem: DesignProblem, quad: _Quadratics, log_gap: np.ndarray, X: np.ndarray) -> np.ndarray:
    s, _ = quad.sq(X)
    return _scores_from_sq(problem, s, log_gap[:, None]).min(axis=0)


def _polish(problem: DesignProblem, quad: _Quadratics, log_gap: np.ndarray, x: np.ndarray, max_rounds: int = 200):
    """Trust-region sequential LP on ``max t s.t. score_p(x) >= t`` over the near-binding pairs.

    Each round linearizes the scores at ``x``, keeps the step tangent to the
    centred unit sphere and solves the LP with HiGHS; the step is accepted
    only if the true minimum score improves.
    """
    q = x.size
    metric = problem.metric
    e = problem.gap_exponent
    all_idx = np.arange(len(quad))

    def scores_and_grads(xv):
        s, _ = quad.sq(xv[:, None])
        s = s[:, 0]
        sc = metric.log_of_sq(s) - e * log_gap
        g = quad.jac(xv, all_idx) * metric.dlog_dsq(s)[:, None]
        return sc, np.hstack([g.real, g.imag])

    x = _project(x[:, None])[:, 0]
    sc, J = scores_and_grads(x)
    t = float(sc.min())
    radius = 0.05
    for _ in range(max_rounds):
        if radius < 1e-12:
            break
        reach = np.abs(J).sum(axis=1) * radius
        idx = np.flatnonzero(sc - reach <= t + reach.max())
        n = 2 * q + 1
        # variables (delta_re, delta_im, t); maximize t
        c = np.zeros(n)
        c[-1] = -1.0
        A_ub = np.hstack([-J[idx], np.ones((len(idx), 1))])
        b_ub = sc[idx]
        xr = np.concatenate([x.real, x.imag])
        A_eq = np.zeros((3, n))
        A_eq[0, :q] = 1.0
        A_eq[1, q : 2 * q] = 1.0
        A_eq[2, : 2 * q] = xr
        bounds = [(-radius, radius)] * (2 * q) + [(None, None)]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.zeros(3), bounds=bounds, method="highs")
        if res.status != 0:
            radius *= 0.25
            continue
        xn = _project((x + res.x[:q] + 1j * res.x[q : 2 * q])[:, None])[:, 0]
        scn, Jn = scores_and_grads(xn)
        tn = float(scn.min())
        predicted = float(res.x[-1]) - t
        if tn > t:
            x, sc, J, t = xn, scn, Jn, tn
            if predicted <= 1e-14 * (1.0 + abs(t)):
                break
            radius = min(2.0 * radius, 0.5) if tn - t >= 0.25 * predicted else radius
        else:
            if predicted <= 1e-14 * (1.0 + abs(t)):
                break
            radius *= 0.25
    return x, t


# ---------------------------------------------------------------------------
# lifting relaxation
# ---------------------------------------------------------------------------


def _lifting_candidates(problem: DesignProblem, quad: _Quadratics, gap: np.ndarray, n_random: int, seed: int) -> list[np.ndarray]:
    """Semidefinite relaxation over ``X = x x^H`` followed by eigen/randomized rounding."""
    import cvxpy as cp

    q = problem.constraints.q
    log_gap = np.log(gap)
    metric = problem.metric
    e = problem.gap_exponent
    Gs = quad.G if quad.G is not None else np.einsum("pq,pr->pqr", quad.b, quad.b).astype(complex)

    X = cp.Variable((q, q), hermitian=True)
    ones = np.ones(q)
    sep = cp.hstack([cp.real(cp.trace(Gp @ X)) for Gp in Gs])
    base = [X >> 0, cp.real(cp.trace(X)) <= 1, cp.real(ones @ X @ ones) == 0]

    def solve(cons, objective):
        prob = cp.Problem(cp.Maximize(objective), base + cons)
        for solver in ("CLARABEL", "SCS"):
            try:
                prob.solve(solver=solver)
                if prob.status in ("optimal", "optimal_inaccurate"):
                    return X.value
            except cp.error.SolverError:
                continue
        return None

    theta = cp.Variable()
    k = metric.kind
    if k is MetricKind.AWGN_EXP:
        c = 4.0 * metric.params["sigma"] * e * log_gap
        Xv = solve([sep >= theta + c], theta)
    elif k is MetricKind.GND_EXP:
        # bisection on the log-margin, each step a linear-ratio SDP
        lo, hi = -50.0, 50.0
        Xv = None
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            req = metric.sq_for_log(mid + e * log_gap)
            cand = solve([sep >= cp.multiply(theta, req)], theta)
            if cand is not None and float(np.min(np.einsum("pqr,rq->p", Gs, cand).real / req)) >= 1.0 - 1e-7:
                lo, Xv = mid, cand
            else:
                hi = mid
    else:
        # log D = a log s + const: the constraint is s_p >= lambda' * gap_p**(e/a)
        a = {MetricKind.EUCLIDEAN: 1.0,
             MetricKind.HEAVY_TAIL_POWER: 1.0 / metric.params.get("eta", 1.0),
             MetricKind.STABLE_POWER: 0.5 * metric.params.get("alpha_stable", 1.0) / metric.params.get("eta", 1.0)}[k]
        w = np.exp(e * log_gap / a)
        w = w / w.max()
        Xv = solve([sep >= cp.multiply(theta, w)], theta)
    if Xv is None:
        return []
    Xv = 0.5 * (Xv + Xv.conj().T)
    vals, vecs = np.linalg.eigh(Xv)
    cands = [vecs[:, -1] * math.sqrt(max(vals[-1], 0.0))]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed).spawn(1)[0]))
    L = vecs * np.sqrt(np.clip(vals, 0.0, None))
    for _ in range(n_random):
        xi = (rng.standard_normal(q) + 1j * rng.standard_normal(q)) / math.sqrt(2.0)
        cands.append(L @ xi)
    return cands


# ---------------------------------------------------------------------------
# public design routines
# ---------------------------------------------------------------------------


def _degenerate_result(q: int, method: str, seed) -> DesignResult:
    x = np.zeros(q, dtype=complex)
    x[0] = 1.0
    return DesignResult(x, math.inf, True, np.zeros(0), math.inf, {"method": method, "seed": seed, "degenerate": True})


def _select(problem: DesignProblem, candidates: list[tuple[np.ndarray, str, int]], tol: float) -> tuple[DesignResult, int]:
    """Pick the verified candidate with the largest margin (then smallest power, then index)."""
    best = None
    n_feasible = 0
    for idx, (x, method, restart) in enumerate(candidates):
        x = canonicalize(x)
        res = evaluate_design(x, problem, tol)
        if not res.feasible:
            continue
        n_feasible += 1
        key = (-round(res.report["min_score"], 12), round(float(np.vdot(x, x).real), 12), idx)
        if best is None or key < best[0]:
            res.report.update(method=method, restart=restart)
            best = (key, res)
    if best is None:
        raise Infeasible("no restart produced a modulation vector separating all distinct outputs")
    return best[1], n_feasible


def design(problem: DesignProblem, solver: Optional[SolverConfig] = None) -> DesignResult:
    """Best modulation vector found for the max-min problem."""
    solver = solver or SolverConfig()
    cs = problem.constraints
    q = cs.q
    if len(cs) == 0:
        return _degenerate_result(q, "constant", solver.seed)
    quad, gap = _reduced_system(problem)
    log_gap = np.log(gap)

    X, _ = _init_batch(q, solver.restarts, solver.seed)
    X = _project(X)
    s0, _ = quad.sq(X)
    sc0 = _scores_from_sq(problem, s0, log_gap[:, None])
    finite = sc0[np.isfinite(sc0)]
    scale = max(1e-3, float(np.median(np.abs(finite - np.median(finite))))) if finite.size else 1.0

    iters = 0
    per_stage = max(1, min(solver.stage_iters, solver.max_iter // len(solver.temperatures)))
    for rel in solver.temperatures:
        X, n = _stage(problem, quad, log_gap, X, rel * scale, per_stage, solver)
        iters += n

    mins = _min_scores(problem, quad, log_gap, X)
    order = np.argsort(-mins, kind="stable")
    candidates = [(X[:, r], "smoothed-ascent", int(r)) for r in range(X.shape[1])]
    if solver.polish:
        seen = []
        for r in order:
            if len(seen) >= solver.polish_top:
                break
            if any(np.isclose(mins[r], m, rtol=1e-6, atol=1e-9) for m in seen):
                continue
            seen.append(mins[r])
            xp, _ = _polish(problem, quad, log_gap, X[:, r])
            candidates.append((xp, "smoothed-ascent+slp", int(r)))
    if solver.use_lifting:
        for k, xc in enumerate(_lifting_candidates(problem, quad, gap, solver.lifting_randomizations, solver.seed)):
            xc = _project(xc[:, None])[:, 0]
            candidates.append((xc, "lifting", k))
            if k == 0 and solver.polish:
                xp, _ = _polish(problem, quad, log_gap, xc)
                candidates.append((xp, "lifting+slp", k))

    result, n_feasible = _select(problem, candidates, solver.feasibility_tol)
    result.report.update(
        seed=solver.seed,
        iterations=iters,
        restarts=solver.restarts,
        feasible_candidates=n_feasible,
        final_objective=result.report["min_score"],
        metric=problem.metric.to_json(),
        gap_exponent=problem.gap_exponent,
        form=problem.form,
        pairs=len(cs),
        reduced_pairs=len(quad),
    )
    return result


def pam_oracle(constraints: ConstraintSet, q: Optional[int] = None) -> DesignResult:
    """Closed-form PAM design ``x = [0, 1, ..., q-1] / ||.||`` for the sum function.

    Every pair then satisfies ``|r_i - r_j|**2 = lambda * |f_i - f_j|**2`` with
    ``lambda = 1 / ||[0..q-1]||**2``.
    """
    q = constraints.q if q is None else q
    if q != constraints.q:
        raise DimensionMismatch(f"constraints have q={constraints.q}, got q={q}")
    if constraints.function not in (None, "sum"):
        raise WrongFunction(f"PAM oracle needs the sum function, got {constraints.function!r}")
    lv = np.arange(q, dtype=float)
    if not np.allclose(constraints.counts @ lv, constraints.values, rtol=0, atol=1e-9):
        raise WrongFunction("profile values are not sums of levels 0..q-1")
    norm2 = float(lv @ lv)
    x = (lv / math.sqrt(norm2)).astype(complex)
    lam = 1.0 / norm2
    sep2 = np.abs(constraints.b @ x) ** 2
    slack = sep2 - lam * constraints.gap**2
    ok, min_sep = verify_feasibility(x, constraints)
    return DesignResult(x, lam, ok, slack, min_sep, {"method": "pam-closed-form", "iterations": 0})


# ---------------------------------------------------------------------------
# smoothed MSE surrogate
# ---------------------------------------------------------------------------


def _weighted_pairs(constraints: ConstraintSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct (b, gap) pairs with multiplicities; sums over them equal sums over all pairs."""
    cs = constraints
    b = cs.b.astype(float)
    first = np.argmax(b != 0, axis=1)
    b = b * np.sign(b[np.arange(len(b)), first])[:, None]
    key = np.hstack([b, np.round(cs.gap, 12)[:, None]])
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    return uniq[:, :-1], uniq[:, -1], counts.astype(float)


def worst_case_objective(x, constraints: ConstraintSet, nu: float) -> float:
    """``J_max = max_p ( -|<b_p, x>| + 2 nu log gap_p )``."""
    sep = pair_separations(x, constraints)
    return float(np.max(-sep + 2.0 * nu * np.log(constraints.gap)))


def lse_objective(x, constraints: ConstraintSet, nu: float) -> float:
    """``nu * log sum_p exp(A_p / nu)`` with ``A_p = -|<b_p, x>| + 2 nu log gap_p``."""
    sep = pair_separations(x, constraints)
    A = -sep + 2.0 * nu * np.log(constraints.gap)
    return float(nu * logsumexp(A / nu))


def smoothed_mse_design(problem: DesignProblem, nu: float, solver: Optional[SolverConfig] = None) -> DesignResult:
    """Minimize the log-sum-exp MSE surrogate for sub-exponential noise of parameter ``nu``.

    The objective is ``nu * log sum_p exp(A_p(x) / nu)``, which is within
    ``nu * log(#pairs)`` of ``max_p A_p(x)``.  The metric of ``problem`` is
    not used: the surrogate fixes the separation to ``|<b_p, x>|``.
    """
    if not nu > 0:
        raise InvalidParam("nu must be positive")
    solver = solver or SolverConfig()
    cs = problem.constraints
    q = cs.q
    if len(cs) == 0:
        return _degenerate_result(q, "constant", solver.seed)
    b, gap, mult = _weighted_pairs(cs)
    quad = _Quadratics(b=b)
    log_w = np.log(mult)
    c = 2.0 * nu * np.log(gap)

    def fun(X):
        s, U = quad.sq(X)
        d = np.sqrt(s + 1e-300)
        A = -d + c[:, None]
        z = A / nu + log_w[:, None]
        lse = nu * logsumexp(z, axis=0)
        W = np.exp(z - (lse / nu)[None, :])
        # d(-lse)/ds = W * (1 / (2 d))
        return -lse, quad.grad(W / (2.0 * d), U)

    X, _ = _init_batch(q, solver.restarts, solver.seed)
    X, F, iters = _ascend(fun, X, solver.max_iter, solver.stall_iters, solver.stall_tol)
    order = sorted(range(X.shape[1]), key=lambda r: (-F[r], r))
    x = canonicalize(X[:, order[0]])
    obj = lse_objective(x, cs, nu)
    jmax = worst_case_objective(x, cs, nu)
    ok, min_sep = verify_feasibility(x, cs, solver.feasibility_tol)
    A = -pair_separations(x, cs) + 2.0 * nu * np.log(cs.gap)
    return DesignResult(
        x,
        -jmax,
        ok,
        jmax - A,
        min_sep,
        {
            "method": "smoothed-mse",
            "seed": solver.seed,
            "iterations": iters,
            "restarts": solver.restarts,
            "surrogate_objective": obj,
            "worst_case_objective": jmax,
            "nu": nu,
        },
    )


def maxmin_subexponential(constraints: ConstraintSet, nu: float, solver: Optional[SolverConfig] = None) -> DesignResult:
    """Max-min counterpart of the surrogate: maximize ``min_p |<b_p, x>| - 2 nu log gap_p``.

    This is the Laplace-type metric ``exp(|d| / nu)`` with gap exponent 2.
    """
    problem = DesignProblem(constraints, DistanceMetric.gnd_exp(nu, 1.0), gap_exponent=2.0)
    res = design(problem, solver)
    res.report["worst_case_objective"] = worst_case_objective(res.x, constraints, nu)
    return res
