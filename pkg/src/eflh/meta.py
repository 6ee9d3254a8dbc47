"""Meta-algorithms combining alive experts, and the main game loop.

Two weighting engines are provided:

* signed multiplicative weights (EFLH basic/full and the FLH baseline): each weight is
  multiplied by ``1 + rate_j * (loss(x_t) - loss(x_t^j))`` with a per-expert rate
  clamped at ``1/(2GD)``; the prediction normalises by the weight total.
* Hedge with mixing (EFLH exp-concave): exponential reweighting by ``exp(-alpha loss)``,
  and a newborn expert receives mass ``1/(t+1)``. Kept in log-space.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import ConfigurationError, ContractError, LifecycleError, LossClass, ProblemConstants, loss_gap_bound
from .experts import ExpertInstance, LearnerKind, learner_for, spawn_expert
from .schedule import ActiveSetIndex, Kind, ScheduleEntry, ScheduleKind, tower_classes

SIGNED = "signed-mw"
HEDGE = "hedge"

ALGORITHMS = ("eflh-basic", "eflh-full", "eflh-exp", "flh-baseline", "ogd")

GAP_TOL = 1e-9
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Algorithm:
    name: str
    schedule: ScheduleKind
    variant: str

    @classmethod
    def from_name(cls, name: str, epsilon: Optional[float] = None) -> "Algorithm":
        if name == "eflh-basic":
            return cls(name, ScheduleKind.basic(), SIGNED)
        if name == "eflh-full":
            return cls(name, ScheduleKind.full(_need_eps(name, epsilon)), SIGNED)
        if name == "eflh-exp":
            return cls(name, ScheduleKind.largest(_need_eps(name, epsilon)), HEDGE)
        if name == "flh-baseline":
            return cls(name, ScheduleKind.dyadic(), SIGNED)
        if name == "ogd":
            return cls(name, ScheduleKind.single(), SIGNED)
        raise ConfigurationError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")


def _need_eps(name, epsilon):
    if epsilon is None:
        raise ConfigurationError(f"{name} requires --epsilon")
    return epsilon


def clamped_rate(scale: float, constants: ProblemConstants) -> float:
    """(1/GD) min(1/2, sqrt(log T / scale))."""
    return min(0.5, math.sqrt(constants.log_T / scale)) / loss_gap_bound(constants)


def init_weight(entry: ScheduleEntry, constants: ProblemConstants, variant: str = SIGNED, t: Optional[int] = None) -> float:
    """Initial weight of a newborn expert; ``t`` is its birth round (hedge only)."""
    if variant == HEDGE:
        return 1.0 / (entry.birth if t is None else t)
    return clamped_rate(entry.scale, constants)


def predict(weights, points, normalized: bool = False) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    X = np.asarray(points, dtype=float)
    if w.size == 0:
        raise LifecycleError("no active experts")
    if X.ndim == 1:
        X = X[:, None]
    if not normalized:
        w = w / w.sum()  # normalise first so a lone expert is reproduced exactly
    return w @ X


def signed_mw_update(weights, meta_loss: float, expert_losses, rates, gap_bound: float) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    gaps = meta_loss - np.asarray(expert_losses, dtype=float)
    worst = float(np.max(np.abs(gaps))) if gaps.size else 0.0
    if worst > gap_bound + GAP_TOL:
        raise ContractError(
            f"loss gap {worst:.6g} exceeds G*D = {gap_bound:.6g}; the loss is not G-Lipschitz on the domain"
        )
    mult = 1.0 + np.asarray(rates, dtype=float) * gaps
    return w * np.clip(mult, 0.5, 1.5)


def hedge_update_log(log_weights, expert_losses, alpha: float) -> np.ndarray:
    z = np.asarray(log_weights, dtype=float) - alpha * np.asarray(expert_losses, dtype=float)
    return z - logsumexp(z)


def hedge_update(weights, expert_losses, alpha: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lw = np.log(np.asarray(weights, dtype=float))
    return np.exp(hedge_update_log(lw, expert_losses, alpha))


def mix_new_expert_log(survivor_log_w, n_new: int, t_next: int) -> tuple[np.ndarray, Optional[float]]:
    """Renormalise survivors, then give a single newborn mass 1/t_next.

    Returns (survivor log-weights, newborn log-weight or None).
    """
    lw = np.asarray(survivor_log_w, dtype=float)
    if n_new > 1:
        raise ContractError(f"{n_new} experts spawned at round {t_next}; hedge mixing admits at most one")
    if lw.size:
        lw = lw - logsumexp(lw)
    if n_new == 0:
        return lw, None
    if lw.size == 0:
        return lw, 0.0
    return lw + math.log1p(-1.0 / t_next), -math.log(t_next)


def mix_new_expert(survivor_weights, n_new: int, t_next: int) -> np.ndarray:
    """Weights after mixing; a newborn (if any) is appended last."""
    with np.errstate(divide="ignore"):
        lw = np.log(np.asarray(survivor_weights, dtype=float))
    lw, new = mix_new_expert_log(lw, n_new, t_next)
    out = np.exp(lw)
    return out if new is None else np.append(out, math.exp(new))


def pseudo_weight_total(weights, rates) -> float:
    """Sum of weights divided by their own clamped rates (live experts only)."""
    return float(np.sum(np.asarray(weights, float) / np.asarray(rates, float)))


def pseudo_weight_factor(schedule: ScheduleKind, T: int) -> int:
    """Largest number of experts spawned in a single round; the pseudo-weight total
    stays below this factor times t."""
    K = schedule.kind
    if K in (Kind.BASIC, Kind.SINGLE):
        return 1
    if K is Kind.DYADIC:
        return int(math.floor(math.log2(T))) + 1
    return len(tower_classes(T, schedule.epsilon))


@dataclass
class MetaWeights:
    variant: str
    keys: list = field(default_factory=list)
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))  # log-weights for hedge

    def weights(self) -> np.ndarray:
        return np.exp(self.values) if self.variant == HEDGE else self.values

    def as_dict(self) -> dict:
        return dict(zip(self.keys, self.weights().tolist()))


@dataclass
class GameTrace:
    algo: str
    variant: str
    T: int
    predictions: np.ndarray
    losses: np.ndarray
    n_active: np.ndarray
    spawn_count: np.ndarray
    pseudo_weight: Optional[np.ndarray]
    entries: dict
    expert_losses: dict
    weight_digests: list
    violations: list = field(default_factory=list)

    def __len__(self):
        return self.T

    @property
    def cum_loss(self) -> np.ndarray:
        return np.cumsum(self.losses)

    def expert_loss_series(self, key) -> np.ndarray:
        """Losses of one expert over its alive rounds birth .. min(death, T)."""
        return self.expert_losses[key]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "algo", "prediction", "loss", "cum_loss", "n_active", "pseudo_weight_total", "spawn_count"])
        cum = self.cum_loss
        for i in range(self.T):
            pw = "" if self.pseudo_weight is None else repr(float(self.pseudo_weight[i]))
            w.writerow([
                i + 1,
                self.algo,
                ";".join(repr(float(v)) for v in self.predictions[i]),
                repr(float(self.losses[i])),
                repr(float(cum[i])),
                int(self.n_active[i]),
                pw,
                int(self.spawn_count[i]),
            ])
        return buf.getvalue()

    def digest(self) -> str:
        h = hashlib.sha256(self.to_csv().encode())
        for d in self.weight_digests:
            h.update(d.encode())
        return h.hexdigest()


def _weight_digest(keys, w) -> str:
    h = hashlib.sha1(repr(keys).encode())
    h.update(np.ascontiguousarray(w, dtype=float).tobytes())
    return h.hexdigest()[:16]


def meta_alpha(stream) -> float:
    """Exp-concavity used by the hedge engine; strongly convex losses map to lambda/G^2."""
    c = stream.constants
    if stream.loss_class is LossClass.EXP_CONCAVE:
        if c.alpha is None:
            raise ConfigurationError("exp-concave stream without alpha")
        return c.alpha
    if stream.loss_class is LossClass.STRONGLY_CONVEX:
        return c.lam / c.G**2
    raise ConfigurationError("eflh-exp needs exp-concave or strongly convex losses")


def run_game(algo, stream, epsilon: Optional[float] = None, monitor: bool = True) -> GameTrace:
    """Play ``algo`` against a loss stream for its full horizon.

    Per round: collect expert points, predict, observe losses, step each expert on the
    gradient at its own point, update meta weights, then prune/spawn for the next round.
    """
    if isinstance(algo, str):
        algo = Algorithm.from_name(algo, epsilon)
    c: ProblemConstants = stream.constants
    T, domain = c.T, stream.domain
    variant = algo.variant
    alpha = meta_alpha(stream) if variant == HEDGE else None
    kind = learner_for(stream.loss_class, variant)
    gap = loss_gap_bound(c)
    pw_factor = pseudo_weight_factor(algo.schedule, T)

    active = ActiveSetIndex(algo.schedule, T)
    experts: dict[tuple, ExpertInstance] = {}
    weights: dict[tuple, float] = {}
    rates: dict[tuple, float] = {}

    d = domain.dim
    preds = np.zeros((T, d))
    losses = np.zeros(T)
    n_active = np.zeros(T, dtype=np.int64)
    spawn_count = np.zeros(T, dtype=np.int64)
    pseudo = np.zeros(T) if variant == SIGNED and algo.schedule.kind is not Kind.SINGLE else None
    entries: dict = {}
    exp_losses: dict = {}
    digests: list = []
    violations: list = []

    def add(entry: ScheduleEntry, t: int):
        experts[entry.key] = spawn_expert(entry.birth, entry.lifespan, kind, domain, c, stream.loss_class, entry.key)
        entries[entry.key] = entry
        exp_losses[entry.key] = []
        rates[entry.key] = clamped_rate(entry.scale, c)

    _, born = active.advance(1)
    for e in born:
        add(e, 1)
    if variant == HEDGE:
        for e in born:
            weights[e.key] = -math.log(len(born))
    else:
        for e in born:
            weights[e.key] = init_weight(e, c)
    spawn_count[0] = len(born)

    for t in range(1, T + 1):
        keys = [e.key for e in active]
        if not keys:
            raise LifecycleError(f"active set empty at round {t}")
        X = np.array([experts[k].x for k in keys])
        w = np.array([weights[k] for k in keys])
        r = np.array([rates[k] for k in keys])
        if variant == HEDGE:
            x_t = predict(np.exp(w), X, normalized=True)
        else:
            x_t = predict(w, X)
        ell = stream.value(t, x_t)
        ell_e = stream.values(t, X)
        G_e = stream.grads(t, X)

        preds[t - 1] = x_t
        losses[t - 1] = ell
        n_active[t - 1] = len(keys)
        digests.append(_weight_digest(keys, w))
        if pseudo is not None:
            pseudo[t - 1] = pseudo_weight_total(w, r)
            if monitor and pseudo[t - 1] > pw_factor * t + 1e-6:
                violations.append({
                    "kind": "pseudo-weight",
                    "t": t,
                    "value": float(pseudo[t - 1]),
                    "bound": float(pw_factor * t),
                    "fatal": True,
                })
        if monitor and not domain.contains(x_t):
            violations.append({"kind": "infeasible-prediction", "t": t, "fatal": True})

        for j, k in enumerate(keys):
            exp_losses[k].append(float(ell_e[j]))
            experts[k].step(G_e[j])

        if variant == HEDGE:
            w = hedge_update_log(w, ell_e, alpha)
        else:
            w = signed_mw_update(w, ell, ell_e, r, gap)
        for j, k in enumerate(keys):
            weights[k] = float(w[j])

        if t == T:
            break
        removed, born = active.advance(t + 1)
        for e in removed:
            del experts[e.key], weights[e.key]
            exp_losses[e.key] = np.asarray(exp_losses[e.key])
        for e in born:
            add(e, t + 1)
        spawn_count[t] = len(born)
        if variant == HEDGE:
            surv = [e.key for e in active if e.key in weights]
            lw, new = mix_new_expert_log([weights[k] for k in surv], len(born), t + 1)
            for k, v in zip(surv, lw):
                weights[k] = float(v)
            if new is not None:
                weights[born[0].key] = new
            if monitor:
                total = math.fsum(math.exp(weights[e.key]) for e in active)
                if abs(total - 1.0) > SIMPLEX_TOL:
                    violations.append({"kind": "simplex", "t": t + 1, "value": total, "fatal": True})
        else:
            for e in born:
                weights[e.key] = init_weight(e, c)

    for k, v in exp_losses.items():
        exp_losses[k] = np.asarray(v)
    return GameTrace(
        algo.name, variant, T, preds, losses, n_active, spawn_count, pseudo,
        entries, exp_losses, digests, violations,
    )
