"""Seeded shifting-environment loss streams with known per-round minimizers."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Ball, ConfigurationError, LossClass, LossStep, ProblemConstants, linear_step, quadratic_step

KINDS = ("piecewise-quadratic", "piecewise-linear", "drifting-quadratic", "exp-concave")

CENTER_SHRINK = 0.8


@dataclass
class ScenarioConfig:
    """Scenario description; also the JSON file schema (unknown keys are rejected).

    ``segments`` lists ``[length, vector]`` pairs. The vector is the quadratic center
    for quadratic kinds and the gradient for ``piecewise-linear``. When omitted,
    ``n_segments`` vectors are drawn from ``seed`` and lengths come from
    ``segment_lengths`` or an even split of T.
    """

    T: int
    d: int = 2
    radius: float = 1.0
    kind: str = "piecewise-quadratic"
    segments: Optional[list] = None
    n_segments: int = 1
    segment_lengths: Optional[list] = None
    seed: int = 0
    lam: Optional[float] = None
    alpha: Optional[float] = None
    grad_scale: float = 1.0
    drift_cycles: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown scenario kind {self.kind!r}")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigurationError("T must be a positive integer")
        if self.d < 1 or self.radius <= 0:
            raise ConfigurationError("need d >= 1 and radius > 0")
        if self.segments is not None:
            if len(self.segments) == 0:
                raise ConfigurationError("segment list is empty")
            if sum(int(n) for n, _ in self.segments) != self.T:
                raise ConfigurationError("segment lengths must sum to T")
        elif self.kind != "drifting-quadratic":
            if self.n_segments < 1:
                raise ConfigurationError("need at least one segment")
            if self.segment_lengths is not None:
                if len(self.segment_lengths) != self.n_segments or sum(self.segment_lengths) != self.T:
                    raise ConfigurationError("segment_lengths must have n_segments entries summing to T")
        if self.lam is not None and not 0 < self.lam <= 2.0:
            raise ConfigurationError("lambda of ||x - c||^2 is at most 2")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _even_lengths(T: int, n: int) -> list[int]:
    base, extra = divmod(T, n)
    return [base + (i < extra) for i in range(n)]


def _segments(cfg: ScenarioConfig, domain: Ball, linear: bool):
    if cfg.segments is not None:
        lengths = [int(n) for n, _ in cfg.segments]
        vecs = np.array([np.atleast_1d(np.asarray(v, float)) for _, v in cfg.segments])
        if vecs.shape[1] != cfg.d:
            raise ConfigurationError("segment vectors must have dimension d")
        if not linear and np.any(np.linalg.norm(vecs - domain.center, axis=1) > domain.radius + 1e-12):
            raise ConfigurationError("segment centers must lie inside the domain")
        return lengths, vecs
    rng = np.random.default_rng(cfg.seed)
    lengths = list(cfg.segment_lengths) if cfg.segment_lengths else _even_lengths(cfg.T, cfg.n_segments)
    if linear:
        z = rng.standard_normal((cfg.n_segments, cfg.d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        vecs = cfg.grad_scale * z
    else:
        vecs = domain.sample(rng, cfg.n_segments, CENTER_SHRINK * domain.radius)
    return lengths, vecs


def quadratic_alpha(G: float, D: float) -> float:
    """Exp-concavity of ||x - c||^2 on a ball: 2 / (1 + 2 G D)."""
    return 2.0 / (1.0 + 2.0 * G * D)


@dataclass
class LossStream:
    config: ScenarioConfig
    domain: Ball
    constants: ProblemConstants
    loss_class: LossClass
    family: str  # "quadratic" | "linear"
    centers: Optional[np.ndarray] = None  # (T, d) quadratic centers
    grads_: Optional[np.ndarray] = None  # (T, d) linear gradients
    offsets: Optional[np.ndarray] = None  # (T,) linear offsets
    comparator: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    boundaries: list = field(default_factory=list)  # (start, end) of each stationary segment, 1-based inclusive

    @property
    def T(self) -> int:
        return self.constants.T

    def value(self, t: int, x) -> float:
        x = np.asarray(x, float)
        if self.family == "quadratic":
            d = x - self.centers[t - 1]
            return float(d @ d)
        return float(self.grads_[t - 1] @ x + self.offsets[t - 1])

    def values(self, t: int, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.family == "quadratic":
            D = X - self.centers[t - 1]
            return np.einsum("ij,ij->i", D, D)
        return X @ self.grads_[t - 1] + self.offsets[t - 1]

    def grads(self, t: int, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.family == "quadratic":
            return 2.0 * (X - self.centers[t - 1])
        return np.broadcast_to(self.grads_[t - 1], X.shape).copy()

    def step(self, t: int) -> LossStep:
        if self.family == "quadratic":
            return quadratic_step(t, self.centers[t - 1], self.loss_class, self.constants.lam)
        return linear_step(t, self.grads_[t - 1], self.offsets[t - 1])

    def steps(self, s: int = 1, t: Optional[int] = None) -> list[LossStep]:
        t = self.T if t is None else t
        return [self.step(u) for u in range(s, t + 1)]

    def digest(self) -> str:
        h = hashlib.sha256(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        for arr in (self.centers, self.grads_, self.offsets, self.comparator):
            if arr is not None:
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _boundaries(lengths):
    out, start = [], 1
    for n in lengths:
        if n > 0:
            out.append((start, start + n - 1))
        start += n
    return out


def _quadratic_stream(cfg: ScenarioConfig, loss_class: LossClass, centers: np.ndarray, bounds) -> LossStream:
    domain = Ball.origin(cfg.d, cfg.radius)
    D = domain.diameter
    G = 2.0 * D
    lam = 2.0 if cfg.lam is None else cfg.lam
    alpha = quadratic_alpha(G, D)
    if cfg.alpha is not None:
        # sound iff 2 >= alpha * 4 * max ||x - c||^2 over the ball
        reach = domain.radius + float(np.max(np.linalg.norm(centers - domain.center, axis=1)))
        if cfg.alpha > 1.0 / (2.0 * reach**2) + 1e-12:
            raise ConfigurationError(f"alpha={cfg.alpha} is not a valid exp-concavity constant here")
        alpha = cfg.alpha
    constants = ProblemConstants(G=G, D=D, T=cfg.T, alpha=alpha, lam=lam)
    return LossStream(cfg, domain, constants, loss_class, "quadratic", centers=centers,
                      comparator=centers.copy(), boundaries=bounds)


def gen_piecewise_quadratic(cfg: ScenarioConfig, loss_class: LossClass = LossClass.STRONGLY_CONVEX) -> LossStream:
    """l_t(x) = ||x - c_seg(t)||^2; strongly convex with lambda = 2, minimizer c_seg(t)."""
    domain = Ball.origin(cfg.d, cfg.radius)
    lengths, vecs = _segments(cfg, domain, linear=False)
    centers = np.repeat(vecs, lengths, axis=0)
    return _quadratic_stream(cfg, loss_class, centers, _boundaries(lengths))


def gen_exp_concave(cfg: ScenarioConfig) -> LossStream:
    """The quadratic stream declared exp-concave with alpha = 2/(1 + 2GD)."""
    return gen_piecewise_quadratic(cfg, LossClass.EXP_CONCAVE)


def gen_drifting_quadratic(cfg: ScenarioConfig) -> LossStream:
    """Center moves on a circle of radius 0.8 R (first two coordinates)."""
    t = np.arange(cfg.T)
    phase = 2.0 * math.pi * cfg.drift_cycles * t / cfg.T
    centers = np.zeros((cfg.T, cfg.d))
    centers[:, 0] = CENTER_SHRINK * cfg.radius * np.cos(phase)
    if cfg.d > 1:
        centers[:, 1] = CENTER_SHRINK * cfg.radius * np.sin(phase)
    return _quadratic_stream(cfg, LossClass.STRONGLY_CONVEX, centers, [(u, u) for u in range(1, cfg.T + 1)])


def gen_piecewise_linear(cfg: ScenarioConfig) -> LossStream:
    """l_t(x) = g.(x - center) + R ||g||: nonnegative on the ball, zero at center - R g/||g||."""
    domain = Ball.origin(cfg.d, cfg.radius)
    lengths, vecs = _segments(cfg, domain, linear=True)
    norms = np.linalg.norm(vecs, axis=1)
    offsets_seg = domain.radius * norms - vecs @ domain.center
    mins = np.array([
        domain.center - domain.radius * g / n if n > 0 else domain.center.copy() for g, n in zip(vecs, norms)
    ])
    G = float(norms.max()) if norms.max() > 0 else 1.0
    constants = ProblemConstants(G=G, D=domain.diameter, T=cfg.T)
    return LossStream(
        cfg, domain, constants, LossClass.CONVEX, "linear",
        grads_=np.repeat(vecs, lengths, axis=0),
        offsets=np.repeat(offsets_seg, lengths),
        comparator=np.repeat(mins, lengths, axis=0),
        boundaries=_boundaries(lengths),
    )


def generate(cfg: ScenarioConfig) -> LossStream:
    if cfg.kind == "piecewise-quadratic":
        return gen_piecewise_quadratic(cfg)
    if cfg.kind == "exp-concave":
        return gen_exp_concave(cfg)
    if cfg.kind == "drifting-quadratic":
        return gen_drifting_quadratic(cfg)
    return gen_piecewise_linear(cfg)
