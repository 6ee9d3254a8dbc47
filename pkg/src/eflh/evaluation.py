"""Regret metrics with offline oracles, and numeric checks of the analysis inequalities.

Interval lengths here count rounds: the interval [s, t] has length t - s + 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Ball, ConfigurationError, EFLHError, LossStep, project
from .experts import learner_for, regret_bound
from .meta import HEDGE, GameTrace, meta_alpha
from .schedule import Kind, ScheduleKind, witness_intervals


class OracleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ComparatorPath:
    points: np.ndarray
    norm: str = "l2"

    def __post_init__(self):
        if self.norm not in ("l1", "l2"):
            raise ConfigurationError("norm must be 'l1' or 'l2'")
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))


def path_length(path: ComparatorPath) -> float:
    if len(path.points) == 0:
        raise ValueError("empty path")
    steps = np.diff(path.points, axis=0)
    ord_ = 1 if path.norm == "l1" else 2
    return float(np.sum(np.linalg.norm(steps, ord=ord_, axis=1))) if len(steps) else 0.0


# ---------------------------------------------------------------------------
# offline oracles
# ---------------------------------------------------------------------------


def _isotropic_minimum(domain: Ball, a: float, b: np.ndarray, const: float):
    """Minimise a ||x||^2 + b.x + const over the ball (a >= 0)."""
    if a > 0:
        x = project(domain, -b / (2.0 * a))
    else:
        nb = float(np.linalg.norm(b))
        x = domain.center.copy() if nb == 0 else domain.center - domain.radius * b / nb
    return x, float(a * (x @ x) + b @ x + const)


def _pgd(steps: Sequence[LossStep], domain: Ball, restarts: int, seed: int, tol: float, max_iter: int):
    def f(x):
        return math.fsum(s.value(x) for s in steps)

    def grad(x):
        return np.sum([s.grad(x) for s in steps], axis=0)

    rng = np.random.default_rng(seed)
    starts = [domain.center.copy()] + list(domain.sample(rng, max(restarts - 1, 0)))
    best = None
    for x in starts:
        L = 1.0
        g = grad(x)
        converged = False
        for it in range(max_iter):
            # local Lipschitz test on gradients; function differences drown in rounding near the optimum
            while True:
                y = project(domain, x - g / L)
                d = y - x
                gy = grad(y)
                if (gy - g) @ d <= L * (d @ d) * (1 + 1e-12):
                    break
                L *= 2.0
            gm = L * float(np.linalg.norm(d))
            x, g = y, gy
            L = max(L / 2.0, 1e-12)
            if gm <= tol:
                converged = True
                break
        fx = f(x)
        if best is None or fx < best[1]:
            best = (x, fx, converged, it + 1)
    return best


def best_fixed_point(
    steps: Sequence[LossStep],
    domain: Ball,
    method: str = "auto",
    restarts: int = 10,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 20000,
):
    """Best fixed decision for the summed losses.

    Returns (point, total_loss, quality). Losses exposing a quadratic or linear closed
    form are solved exactly (their sum is an isotropic quadratic); otherwise projected
    gradient descent with restarts is used and non-convergence adds a warning.
    """
    if len(steps) == 0:
        raise ValueError("empty interval")
    if method == "auto" and all(s.params for s in steps):
        a, b, const = 0.0, np.zeros(domain.dim), 0.0
        for s in steps:
            if s.params[0] == "quadratic":
                c = s.params[1]
                a += 1.0
                b = b - 2.0 * c
                const += float(c @ c)
            else:
                b = b + s.params[1]
                const += s.params[2]
        x, v = _isotropic_minimum(domain, a, b, const)
        return x, v, {"method": "analytic", "exact": True}
    x, v, ok, iters = _pgd(steps, domain, restarts, seed, tol, max_iter)
    quality = {"method": "pgd", "exact": False, "converged": ok, "iterations": iters}
    if not ok:
        quality["warning"] = f"projected gradient did not reach tolerance {tol} in {max_iter} iterations"
        warnings.warn(quality["warning"], OracleWarning)
    return x, v, quality


class _PrefixOracle:
    """O(1) interval minima for a LossStream via prefix sums of its closed form."""

    def __init__(self, stream):
        self.domain = stream.domain
        self.family = stream.family
        pad = lambda a: np.concatenate([np.zeros((1,) + a.shape[1:]), np.cumsum(a, axis=0)])
        if stream.family == "quadratic":
            self.S = pad(stream.centers)
            self.Q = pad(np.einsum("ij,ij->i", stream.centers, stream.centers))
        else:
            self.Gs = pad(stream.grads_)
            self.B = pad(stream.offsets)

    def minima(self, s, t) -> np.ndarray:
        """Minimum over the ball of sum_{u=s..t} l_u(x), vectorised over arrays s, t (1-based)."""
        s = np.asarray(s)
        t = np.asarray(t)
        c0, R = self.domain.center, self.domain.radius
        if self.family == "quadratic":
            n = (t - s + 1).astype(float)
            S = self.S[t] - self.S[s - 1]
            Q = self.Q[t] - self.Q[s - 1]
            m = S / n[:, None] - c0
            norm = np.linalg.norm(m, axis=1)
            scale = np.where(norm > R, R / np.maximum(norm, 1e-300), 1.0)
            x = c0 + m * scale[:, None]
            return n * np.einsum("ij,ij->i", x, x) - 2.0 * np.einsum("ij,ij->i", x, S) + Q
        Gs = self.Gs[t] - self.Gs[s - 1]
        B = self.B[t] - self.B[s - 1]
        return B + Gs @ c0 - R * np.linalg.norm(Gs, axis=1)


def interval_regrets(trace: GameTrace, stream, length: int, starts: Optional[np.ndarray] = None) -> np.ndarray:
    """Regret of the played sequence over every interval of ``length`` rounds (or the given starts)."""
    T = trace.T
    if not 1 <= length <= T:
        raise ValueError("length must lie in [1, T]")
    cum = np.concatenate([[0.0], np.cumsum(trace.losses)])
    s = np.arange(1, T - length + 2) if starts is None else np.asarray(starts)
    t = s + length - 1
    return (cum[t] - cum[s - 1]) - _PrefixOracle(stream).minima(s, t)


def static_regret(trace: GameTrace, stream) -> float:
    return float(interval_regrets(trace, stream, trace.T)[0])


def _stratified_starts(T: int, length: int, n: int, rng: np.random.Generator) -> np.ndarray:
    hi = T - length + 1
    if hi <= n:
        return np.arange(1, hi + 1)
    edges = np.linspace(1, hi + 1, n + 1)
    lo = np.floor(edges[:-1]).astype(int)
    up = np.maximum(np.floor(edges[1:]).astype(int), lo + 1)
    return np.unique(rng.integers(lo, up))


def adaptive_regret_sweep(
    trace: GameTrace,
    stream,
    lengths: Sequence[int],
    exhaustive_max_T: int = 1024,
    n_starts: int = 256,
    seed: int = 0,
    exhaustive: Optional[bool] = None,
) -> dict[int, float]:
    """Max interval regret for each requested length (exhaustive for small T, else stratified)."""
    T = trace.T
    exhaustive = T <= exhaustive_max_T if exhaustive is None else exhaustive
    rng = np.random.default_rng(seed)
    out = {}
    for k in lengths:
        k = int(k)
        if k > T:
            raise ValueError(f"length {k} exceeds horizon {T}")
        starts = None if exhaustive else _stratified_starts(T, k, n_starts, rng)
        out[k] = float(np.max(interval_regrets(trace, stream, k, starts)))
    return out


def dynamic_regret(trace: GameTrace, stream, path: ComparatorPath) -> float:
    if len(path.points) != trace.T:
        raise ValueError("comparator path must have one point per round")
    comp = math.fsum(stream.value(t, path.points[t - 1]) for t in range(1, trace.T + 1))
    return float(math.fsum(trace.losses) - comp)


def stream_path(stream, norm: str = "l2") -> ComparatorPath:
    return ComparatorPath(stream.comparator, norm)


# ---------------------------------------------------------------------------
# bounds tied to the theory
# ---------------------------------------------------------------------------


def basic_interval_bound(length, constants) -> np.ndarray:
    """36 G D sqrt(log T) |I|^(3/4)."""
    return 36.0 * constants.G * constants.D * math.sqrt(constants.log_T) * np.power(length, 0.75)


def full_scale(length, constants, epsilon: float):
    """G D sqrt(log T) |I|^((1+eps)/2); the leading constant is unknown."""
    return constants.G * constants.D * math.sqrt(constants.log_T) * np.power(length, (1 + epsilon) / 2)


def full_regret_ratio(regret, length, constants, epsilon: float):
    """regret / full_scale; ratios above FULL_RATIO_LIMIT are flagged."""
    return regret / full_scale(length, constants, epsilon)


FULL_RATIO_LIMIT = 48.0


def basic_bound_violations(trace: GameTrace, stream, min_length: int = 8):
    """Every interval of at least ``min_length`` rounds whose regret exceeds the basic interval bound."""
    bad = []
    worst = -math.inf
    for k in range(min_length, trace.T + 1):
        r = interval_regrets(trace, stream, k)
        b = float(basic_interval_bound(k, stream.constants))
        worst = max(worst, float(r.max()) / b)
        for s in np.flatnonzero(r > b):
            bad.append({"s": int(s) + 1, "length": k, "regret": float(r[s]), "bound": b})
    return bad, worst


def expert_regrets(trace: GameTrace, stream):
    """(entry, n, regret, bound) of every expert over its played rounds vs the best fixed point there."""
    oracle = _PrefixOracle(stream)
    kind = learner_for(stream.loss_class, trace.variant)
    rows = []
    for key, entry in trace.entries.items():
        ell = trace.expert_losses[key]
        n = len(ell)
        if n == 0:
            continue
        s, t = entry.birth, entry.birth + n - 1
        best = float(oracle.minima(np.array([s]), np.array([t]))[0])
        rows.append((entry, n, math.fsum(ell) - best, regret_bound(kind, stream.constants, stream.domain.dim, n)))
    return rows


def witness_meta_regrets(trace: GameTrace, stream, schedule: ScheduleKind, min_length: int = 8):
    """Meta-regret against the covered expert on every coverage-witness interval [i, t].

    Rows are (entry, t, regret, bound). The bound is (2/alpha)(log |I| + log T) for the
    hedge engine and 3GD sqrt(t-i) + 3GD sqrt(log T (t-i)) for signed weights.
    """
    c = stream.constants
    cum = np.concatenate([[0.0], np.cumsum(trace.losses)])
    alpha = meta_alpha(stream) if trace.variant == HEDGE else None
    prefix = {}
    rows = []
    for entry, t in witness_intervals(schedule, trace.T, min_length):
        i = entry.birth
        if entry.key not in prefix:
            prefix[entry.key] = np.concatenate([[0.0], np.cumsum(trace.expert_losses[entry.key])])
        regret = (cum[t] - cum[i - 1]) - prefix[entry.key][t - i + 1]
        if trace.variant == HEDGE:
            bound = 2.0 / alpha * (math.log(t - i + 1) + math.log(c.T))
        else:
            gap = c.G * c.D
            bound = 3 * gap * math.sqrt(t - i) + 3 * gap * math.sqrt(c.log_T * (t - i))
        rows.append((entry, t, float(regret), bound))
    return rows


def segment_prefix_average_regret(trace: GameTrace, stream, lengths: Sequence[int]) -> dict[int, float]:
    """Mean over stationary segments of (regret over the segment's first n rounds) / n.

    Uses only segments at least n rounds long; the comparator is the segment minimizer.
    """
    oracle = _PrefixOracle(stream)
    cum = np.concatenate([[0.0], np.cumsum(trace.losses)])
    out = {}
    for n in lengths:
        vals = []
        for a, b in stream.boundaries:
            if b - a + 1 >= n:
                t = a + n - 1
                best = float(oracle.minima(np.array([a]), np.array([t]))[0])
                vals.append((cum[t] - cum[a - 1] - best) / n)
        if vals:
            out[int(n)] = float(np.mean(vals))
    return out


# ---------------------------------------------------------------------------
# technical inequalities
# ---------------------------------------------------------------------------

SLACK_TOL = -1e-12


def _one_minus_pow(u, p):
    """1 - (1 - u)^p computed without cancellation, u in [0, 1]."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return -np.expm1(p * np.log1p(-u))


def lemma_tech_slack(x) -> np.ndarray:
    """6 x^(3/4) - 6 (x - sqrt(x)/2)^(3/4) - (sqrt(x)/2)^(1/2)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError("x must be >= 1")
    return 6.0 * x**0.75 * _one_minus_pow(0.5 / np.sqrt(x), 0.75) - np.sqrt(np.sqrt(x) / 2.0)


def check_lemma_tech(x):
    ok = lemma_tech_slack(x) >= SLACK_TOL
    return bool(ok) if np.ndim(ok) == 0 else ok


def lemma_tech_new_slack(x, epsilon: float) -> np.ndarray:
    """8 x^((1+e)/2) - 8 (x - x^(1-e)/2)^((1+e)/2) - (x/2)^((1-e)/2)."""
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError("x must be >= 1")
    p = (1 + epsilon) / 2
    return 8.0 * x**p * _one_minus_pow(0.5 * x**-epsilon, p) - (x / 2.0) ** ((1 - epsilon) / 2)


def check_lemma_tech_new(x, epsilon: float):
    ok = lemma_tech_new_slack(x, epsilon) >= SLACK_TOL
    return bool(ok) if np.ndim(ok) == 0 else ok


def exp_recursion_slack(x, epsilon: float) -> np.ndarray:
    """x^(e(1+e)) - (x^(1+e) - x)^e - e/2, the recursion step for the exp-concave case."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError("x must be >= 1")
    return x ** (epsilon * (1 + epsilon)) * _one_minus_pow(x**-epsilon, epsilon) - epsilon / 2


def power_recursion_slack(y, alpha: float, beta: float) -> np.ndarray:
    """(2/beta)[R(y) - R(y - x(y))] - r(x(y)) with r = x^alpha, R = x^beta, x(y) = y^((1-beta)/(1-alpha))."""
    if not (0 <= alpha <= 0.5 and alpha < beta < 1):
        raise ValueError("need 0 <= alpha <= 1/2 and alpha < beta < 1")
    y = np.asarray(y, dtype=float)
    q = (1 - beta) / (1 - alpha)
    x = y**q
    gain = y**beta * _one_minus_pow(x / y, beta)
    return 2.0 / beta * gain - x**alpha


def recursion_dp(n: int, C1: float, C2: float, y_max: int) -> np.ndarray:
    """Smallest R on 0..y_max with R(y) = R(y - x(y)) + C1 sqrt(x(y)), x(y) = floor(min(C2 y^(1/n), y/2)) (at least 1)."""
    y = np.arange(y_max + 1)
    step = np.maximum(np.floor(np.minimum(C2 * y ** (1.0 / n), y / 2.0)), 1).astype(np.int64)
    R = np.zeros(y_max + 1)
    for v in range(1, y_max + 1):
        x = step[v]
        R[v] = R[v - x] + C1 * math.sqrt(x)
    return R


def check_recursion_bounds(
    n: int,
    C1: float,
    C2: float,
    y_max: int,
    alpha: float = 0.5,
    beta: float = 0.75,
    epsilon: float = 0.3,
    grid_size: int = 10_000,
    x_max: float = 1e6,
) -> dict:
    """(a) the minimal recursion solution dominates C1/(2 sqrt C2) y^(1 - 1/(2n));
    (b) the power-law recursion inequalities hold on a log grid up to ``x_max``."""
    if y_max < 16 or grid_size < 16:
        raise ConfigurationError("grid too small (need at least 16 points)")
    R = recursion_dp(n, C1, C2, y_max)
    y = np.arange(1, y_max + 1)
    lower = C1 / (2 * math.sqrt(C2)) * y ** (1 - 1 / (2 * n))
    dp_slack = R[1:] - lower
    grid = np.geomspace(1.0, x_max, grid_size)
    pr = power_recursion_slack(grid, alpha, beta)
    ex = exp_recursion_slack(grid, epsilon)
    return {
        "dp": {"n": n, "C1": C1, "C2": C2, "y_max": y_max, "min_slack": float(dp_slack.min()),
               "ok": bool(dp_slack.min() >= SLACK_TOL)},
        "power_recursion": {"alpha": alpha, "beta": beta, "points": grid_size, "min_slack": float(pr.min()),
                  "ok": bool(pr.min() >= SLACK_TOL)},
        "exp_recursion": {"epsilon": epsilon, "points": grid_size, "min_slack": float(ex.min()),
                          "ok": bool(ex.min() >= SLACK_TOL)},
        "ok": bool(dp_slack.min() >= SLACK_TOL and pr.min() >= SLACK_TOL and ex.min() >= SLACK_TOL),
    }


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def default_lengths(T: int) -> list[int]:
    out = []
    k = 8
    while k < T:
        out.append(k)
        k *= 2
    out.append(T)
    return out


def build_report(trace: GameTrace, stream, config: dict, epsilon: Optional[float] = None,
                 lengths: Optional[Sequence[int]] = None, seed: int = 0) -> dict:
    """Report dict with fixed top-level fields (see README for the schema)."""
    c = stream.constants
    lengths = default_lengths(trace.T) if lengths is None else list(lengths)
    sa = adaptive_regret_sweep(trace, stream, lengths, seed=seed)
    violations = list(trace.violations)
    table = []
    for k, r in sa.items():
        bound = ratio = None
        if trace.algo == "eflh-basic":
            bound = float(basic_interval_bound(k, c))
            ratio = r / bound
        elif trace.algo == "eflh-full":
            bound = FULL_RATIO_LIMIT * float(full_scale(k, c, epsilon))
            ratio = float(full_regret_ratio(r, k, c, epsilon))
            if ratio > FULL_RATIO_LIMIT:
                violations.append({"kind": "full-ratio", "length": k, "ratio": ratio, "fatal": False})
        table.append({"k": k, "max_regret": r, "bound": bound, "ratio": ratio})
    if trace.algo == "eflh-basic":
        bad = [row for row in table if row["k"] >= 8 and row["max_regret"] > row["bound"]]
        for row in bad:
            violations.append({"kind": "basic-bound", "length": row["k"], "regret": row["max_regret"], "fatal": True})
    path = stream_path(stream, "l1" if trace.algo == "eflh-exp" else "l2")
    dyn = dynamic_regret(trace, stream, path)
    P = path_length(path)
    scaling = None
    if trace.algo == "eflh-exp" and P > 0:
        scaling = dyn / (trace.T ** (1 / 3 + epsilon) * P ** (2 / 3) / epsilon)
    return {
        "config": config,
        "static_regret": static_regret(trace, stream),
        "sa_table": table,
        "dynamic": {"regret": dyn, "path_length": P, "scaling_ratio": scaling},
        "oracle_quality": {"method": "analytic-prefix-sums", "family": stream.family, "exact": True},
        "violations": violations,
    }
