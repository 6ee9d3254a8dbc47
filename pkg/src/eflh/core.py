"""Problem constants, ball domains and the per-round loss abstraction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class EFLHError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(EFLHError, ValueError):
    pass


class ConfigurationError(EFLHError, ValueError):
    pass


class LifecycleError(EFLHError, RuntimeError):
    pass


class ContractError(EFLHError, RuntimeError):
    """A runtime invariant the analysis relies on was broken (exit code 2 in the CLI)."""


class LossClass(str, enum.Enum):
    CONVEX = "convex"
    STRONGLY_CONVEX = "strongly-convex"
    EXP_CONCAVE = "exp-concave"


@dataclass(frozen=True)
class ProblemConstants:
    G: float
    D: float
    T: int
    alpha: Optional[float] = None
    lam: Optional[float] = None
    epsilon: Optional[float] = None

    def __post_init__(self):
        if not self.G > 0:
            raise ConfigurationError(f"G must be positive, got {self.G}")
        if not self.D > 0:
            raise ConfigurationError(f"D must be positive, got {self.D}")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigurationError(f"T must be a positive integer, got {self.T}")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if self.lam is not None and not self.lam > 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if self.epsilon is not None and not 0 < self.epsilon < 0.5:
            raise ConfigurationError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")

    @property
    def log_T(self) -> float:
        # floored at log 2 so that T = 1 still yields positive learning rates
        return math.log(max(self.T, 2))


def loss_gap_bound(constants: ProblemConstants) -> float:
    """Largest possible |l(x) - l(y)| over the domain for a G-Lipschitz loss."""
    return constants.G * constants.D


@dataclass(frozen=True)
class Ball:
    """Euclidean ball; the only domain shape implemented."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.ndim != 1:
            raise DimensionError("ball center must be a vector")
        object.__setattr__(self, "center", c)
        if not self.radius >= 0:
            raise ConfigurationError(f"radius must be nonnegative, got {self.radius}")

    @classmethod
    def origin(cls, dim: int, radius: float = 1.0) -> "Ball":
        return cls(np.zeros(dim), radius)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(x, float) - self.center)) <= self.radius + tol

    def project(self, p) -> np.ndarray:
        return project(self, p)

    def sample(self, rng: np.random.Generator, n: int, radius: Optional[float] = None) -> np.ndarray:
        """Uniform samples from the (optionally shrunk) ball, shape (n, dim)."""
        r = self.radius if radius is None else radius
        z = rng.standard_normal((n, self.dim))
        z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-300)
        u = rng.random(n) ** (1.0 / self.dim)
        return self.center + r * u[:, None] * z


# Alias kept so call sites can read in terms of the general concept.
ConvexDomain = Ball


_BOUNDARY_ULPS = 8 * np.finfo(float).eps


def project(domain: Ball, p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != domain.center.shape:
        raise DimensionError(f"point has shape {p.shape}, domain has dimension {domain.dim}")
    v = p - domain.center
    n = float(np.linalg.norm(v))
    # points within a few ulps of the sphere count as on it, which makes projection exactly idempotent
    if n <= domain.radius * (1.0 + _BOUNDARY_ULPS):
        return p.copy()
    return domain.center + v * (domain.radius / n)


@dataclass(frozen=True)
class LossStep:
    """One round of the game: value and gradient oracles plus a curvature tag.

    ``params`` optionally exposes the closed form (``("quadratic", center)`` or
    ``("linear", g, b)``) so offline oracles can solve interval problems exactly.
    """

    t: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    loss_class: LossClass = LossClass.CONVEX
    curvature: Optional[float] = None
    params: tuple = field(default=(), compare=False)

    def __call__(self, x) -> float:
        return self.value(x)


def quadratic_step(t: int, center, loss_class=LossClass.STRONGLY_CONVEX, curvature=2.0) -> LossStep:
    c = np.asarray(center, dtype=float)

    def value(x):
        d = np.asarray(x, float) - c
        return float(d @ d)

    def grad(x):
        return 2.0 * (np.asarray(x, float) - c)

    return LossStep(t, value, grad, LossClass(loss_class), curvature, ("quadratic", c))


def linear_step(t: int, g, b: float) -> LossStep:
    g = np.asarray(g, dtype=float)

    def value(x):
        return float(g @ np.asarray(x, float) + b)

    def grad(x):
        return g.copy()

    return LossStep(t, value, grad, LossClass.CONVEX, None, ("linear", g, float(b)))
