"""Base learners run as experts: lifespan-tuned OGD and Online Newton Step."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import Ball, ConfigurationError, LifecycleError, LossClass, ProblemConstants, project


class LearnerKind(str, enum.Enum):
    OGD_CONVEX = "ogd-convex"
    OGD_STRONGLY_CONVEX = "ogd-strongly-convex"
    ONS = "ons"


_COMPATIBLE = {
    LearnerKind.OGD_CONVEX: {LossClass.CONVEX, LossClass.STRONGLY_CONVEX, LossClass.EXP_CONCAVE},
    LearnerKind.OGD_STRONGLY_CONVEX: {LossClass.STRONGLY_CONVEX},
    LearnerKind.ONS: {LossClass.EXP_CONCAVE, LossClass.STRONGLY_CONVEX},
}


def learner_for(loss_class: LossClass, meta: str = "signed-mw") -> LearnerKind:
    """Default expert algorithm for a loss class and meta variant."""
    loss_class = LossClass(loss_class)
    if meta == "hedge":
        if loss_class is LossClass.EXP_CONCAVE:
            return LearnerKind.ONS
        if loss_class is LossClass.STRONGLY_CONVEX:
            return LearnerKind.OGD_STRONGLY_CONVEX
        raise ConfigurationError("hedge meta-algorithm needs exp-concave or strongly convex losses")
    return LearnerKind.OGD_CONVEX


@dataclass
class OnsState:
    A: np.ndarray
    gamma: float
    eps0: float


def ons_parameters(constants: ProblemConstants) -> tuple[float, float]:
    """(gamma, eps0) of the standard ONS recipe: gamma = min(1/(4GD), alpha)/2, eps0 = 1/(gamma D)^2."""
    if constants.alpha is None:
        raise ConfigurationError("ONS needs an exp-concavity parameter alpha")
    gamma = 0.5 * min(1.0 / (4.0 * constants.G * constants.D), constants.alpha)
    eps0 = 1.0 / (gamma**2 * constants.D**2)
    return gamma, eps0


@dataclass
class ExpertInstance:
    birth: int
    lifespan: int
    kind: LearnerKind
    domain: Ball
    constants: ProblemConstants
    x: np.ndarray
    age: int = 0
    ons: Optional[OnsState] = None
    key: tuple = field(default=())

    @property
    def death(self) -> int:
        return self.birth + self.lifespan - 1

    def alive_at(self, t: int) -> bool:
        return self.birth <= t <= self.death

    def predict(self) -> np.ndarray:
        return self.x

    def step(self, g) -> "ExpertInstance":
        if self.kind is LearnerKind.ONS:
            return ons_step(self, g)
        return ogd_step(self, g)


def spawn_expert(
    birth: int,
    lifespan: int,
    kind: LearnerKind,
    domain: Ball,
    constants: ProblemConstants,
    loss_class: Optional[LossClass] = None,
    key: tuple = (),
) -> ExpertInstance:
    if lifespan < 1:
        raise ConfigurationError(f"lifespan must be >= 1, got {lifespan}")
    kind = LearnerKind(kind)
    if loss_class is not None and LossClass(loss_class) not in _COMPATIBLE[kind]:
        raise ConfigurationError(f"{kind.value} cannot run on {LossClass(loss_class).value} losses")
    if kind is LearnerKind.OGD_STRONGLY_CONVEX and constants.lam is None:
        raise ConfigurationError("strongly convex OGD needs lambda")
    ons = None
    if kind is LearnerKind.ONS:
        gamma, eps0 = ons_parameters(constants)
        ons = OnsState(eps0 * np.eye(domain.dim), gamma, eps0)
    return ExpertInstance(birth, int(lifespan), kind, domain, constants, domain.center.copy(), 0, ons, key or (birth,))


def _check_alive(e: ExpertInstance):
    if e.age >= e.lifespan:
        raise LifecycleError(f"expert born at {e.birth} with lifespan {e.lifespan} is deceased")


def ogd_rate(e: ExpertInstance) -> float:
    """Step size used for the *next* update (call after incrementing age)."""
    c = e.constants
    if e.kind is LearnerKind.OGD_STRONGLY_CONVEX:
        return 1.0 / (c.lam * e.age)
    return c.D / (c.G * math.sqrt(e.lifespan))


def ogd_step(e: ExpertInstance, g) -> ExpertInstance:
    if e.kind is LearnerKind.ONS:
        raise ConfigurationError("ogd_step called on an ONS expert")
    _check_alive(e)
    g = np.asarray(g, dtype=float)
    e.age += 1
    e.x = project(e.domain, e.x - ogd_rate(e) * g)
    return e


def project_a_norm(domain: Ball, z, A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """argmin over the ball of (y - z)^T A (y - z).

    Interior points are returned unchanged. Otherwise the KKT point
    y = c + (A + mu I)^{-1} A (z - c) is found by a scalar root solve on mu.
    """
    z = np.asarray(z, dtype=float)
    v = z - domain.center
    R = domain.radius
    if float(np.linalg.norm(v)) <= R:
        return z.copy()
    if domain.dim == 1 or R == 0.0:
        return project(domain, z)
    lam, Q = np.linalg.eigh(A)
    w = Q.T @ v

    def excess(mu):
        return float(np.linalg.norm(lam * w / (lam + mu))) - R

    hi = float(lam.max()) * float(np.linalg.norm(w)) / R
    mu = brentq(excess, 0.0, hi, xtol=tol * max(1.0, hi), rtol=1e-15, maxiter=500)
    y = Q @ (lam * w / (lam + mu))
    # root tolerance can leave the point a hair outside
    return project(domain, domain.center + y)


def ons_step(e: ExpertInstance, g) -> ExpertInstance:
    if e.kind is not LearnerKind.ONS or e.ons is None:
        raise ConfigurationError("ons_step called on a non-ONS expert")
    _check_alive(e)
    g = np.atleast_1d(np.asarray(g, dtype=float))
    st = e.ons
    st.A = st.A + np.outer(g, g)
    e.age += 1
    if not np.any(g):
        return e
    z = e.x - np.linalg.solve(st.A, g) / st.gamma
    e.x = project_a_norm(e.domain, z, st.A)
    return e


def regret_bound(kind: LearnerKind, constants: ProblemConstants, dim: int, n: int) -> float:
    """Upper bound on a learner's regret over its first n rounds.

    OGD (convex): 1.5 G D sqrt(n). Strongly convex OGD: (G^2/lambda)(1 + log n).
    ONS: 5 (1/alpha + G D) d max(1, log n); the max keeps the bound positive for n < e.
    """
    if n < 1:
        raise ValueError("interval length must be >= 1")
    c = constants
    kind = LearnerKind(kind)
    if kind is LearnerKind.OGD_CONVEX:
        return 1.5 * c.G * c.D * math.sqrt(n)
    if kind is LearnerKind.OGD_STRONGLY_CONVEX:
        return c.G**2 / c.lam * (1.0 + math.log(n))
    return 5.0 * (1.0 / c.alpha + c.G * c.D) * dim * max(1.0, math.log(n))


def expert_regret_bound(e: ExpertInstance, n: int) -> float:
    return regret_bound(e.kind, e.constants, e.domain.dim, n)
