"""Expert lifespans, spawning and pruning for the tower schedules and the dyadic baseline.

Aliveness convention: an entry born at ``t`` with lifespan ``L`` is alive on rounds
``t .. t + L - 1`` inclusive and is deceased at round ``u`` once ``t + L - 1 < u``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .core import ConfigurationError, EFLHError


class ScheduleRangeError(EFLHError, ValueError):
    pass


class Kind(str, enum.Enum):
    BASIC = "basic"
    FULL = "full"
    LARGEST = "largest"
    DYADIC = "dyadic"
    SINGLE = "single"  # one expert over the whole horizon (plain OGD)


@dataclass(frozen=True)
class ScheduleKind:
    kind: Kind
    epsilon: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.FULL, Kind.LARGEST):
            if self.epsilon is None or not self.epsilon > 0:
                raise ConfigurationError(f"{self.kind.value} schedule needs epsilon > 0")

    @classmethod
    def basic(cls):
        return cls(Kind.BASIC)

    @classmethod
    def full(cls, epsilon: float):
        return cls(Kind.FULL, epsilon)

    @classmethod
    def largest(cls, epsilon: float):
        return cls(Kind.LARGEST, epsilon)

    @classmethod
    def dyadic(cls):
        return cls(Kind.DYADIC)

    @classmethod
    def single(cls):
        return cls(Kind.SINGLE)


@dataclass(frozen=True)
class ScheduleEntry:
    """An expert slot. ``scale`` is the length used in the meta learning rate
    (the lifespan itself, or l_k for the towers whose lifespan is 4 l_k)."""

    birth: int
    k: int
    lifespan: int
    scale: int = field(default=0)

    def __post_init__(self):
        if self.lifespan < 1:
            raise ConfigurationError("lifespan must be >= 1")
        if self.scale == 0:
            object.__setattr__(self, "scale", self.lifespan)

    @property
    def death(self) -> int:
        return self.birth + self.lifespan - 1

    @property
    def key(self) -> tuple[int, int]:
        return (self.birth, self.k)

    def alive_at(self, t: int) -> bool:
        return self.birth <= t <= self.death


def two_adic(t: int) -> int:
    return (t & -t).bit_length() - 1


def basic_class(t: int) -> int:
    """Tower level of the expert born at t (0 for odd t)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    v = two_adic(t)
    if v == 0:
        return 0
    # largest k >= 1 with 2^(2^k - 1) | t
    return (v + 1).bit_length() - 1


def basic_lifespan(t: int) -> int:
    k = basic_class(t)
    return 4 if k == 0 else 2 ** (2**k + 1)


def _dec(x) -> Decimal:
    return Decimal(repr(float(x))) if not isinstance(x, Decimal) else x


def _tower_half(k: int, epsilon: float) -> Decimal:
    """2^((1+eps)^k) / 2 evaluated with 60 significant digits."""
    with localcontext() as ctx:
        ctx.prec = 60
        e = (Decimal(1) + _dec(epsilon)) ** k
        return Decimal(2) ** e / 2


def l_k(k: int, epsilon: float, T: Optional[int] = None) -> int:
    if k < 1:
        raise ScheduleRangeError("class index must be >= 1")
    half = _tower_half(k, epsilon)
    if T is not None and half > T:
        raise ScheduleRangeError(f"class {k} is not admissible at horizon {T} (eps={epsilon})")
    return int(half.to_integral_value(rounding="ROUND_FLOOR")) + 1


@lru_cache(maxsize=256)
def tower_classes(T: int, epsilon: float) -> tuple[tuple[int, int], ...]:
    """Admissible (k, l_k) pairs, i.e. those with 2^((1+eps)^k)/2 <= T.

    Class 1 is always kept so that horizons too short for any class still get an expert.
    """
    out = [(1, l_k(1, epsilon))]
    k = 2
    while _tower_half(k, epsilon) <= T:
        out.append((k, l_k(k, epsilon)))
        k += 1
    return tuple(out)


def max_class_count(T: int, epsilon: float) -> float:
    """log_{1+eps} log2(2T) + 1, the bound on the number of admissible classes."""
    return math.log(math.log2(2 * T)) / math.log1p(epsilon) + 1


def spawns_at(t: int, kind: ScheduleKind, T: int) -> list[ScheduleEntry]:
    if not 1 <= t:
        raise ValueError("t must be >= 1")
    K = kind.kind
    if K is Kind.BASIC:
        L = basic_lifespan(t)
        return [ScheduleEntry(t, basic_class(t), L, L)]
    if K is Kind.SINGLE:
        return [ScheduleEntry(1, 0, T, T)] if t == 1 else []
    if K is Kind.DYADIC:
        out = []
        j = 0
        while 2**j <= T:
            if (t - 1) % (2**j) == 0:
                out.append(ScheduleEntry(t, j, 2**j, 2**j))
            j += 1
        return out
    classes = tower_classes(T, kind.epsilon)
    hits = [ScheduleEntry(t, k, 4 * l, l) for k, l in classes if (t - 1) % l == 0]
    if K is Kind.LARGEST and t > 1:
        # t = 1 keeps the full initial set {(1,1), (1,2), ...}
        return hits[-1:]
    return hits


class ActiveSetIndex:
    """Alive entries at a given round, sorted by (birth, k)."""

    def __init__(self, kind: ScheduleKind, T: int, entries=(), t: int = 0):
        self.kind = kind
        self.T = T
        self.t = t
        self.entries: list[ScheduleEntry] = sorted(entries, key=lambda e: e.key)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def advance(self, t: int) -> tuple[list[ScheduleEntry], list[ScheduleEntry]]:
        """Move to round t in place; returns (removed, added)."""
        removed = [e for e in self.entries if e.death < t]
        kept = [e for e in self.entries if e.death >= t]
        added = spawns_at(t, self.kind, self.T)
        self.entries = sorted(kept + added, key=lambda e: e.key)
        self.t = t
        return removed, added


def prune(s: ActiveSetIndex, t: int) -> ActiveSetIndex:
    out = ActiveSetIndex(s.kind, s.T, s.entries, s.t)
    out.advance(t)
    return out


def replay(kind: ScheduleKind, T: int) -> Iterator[ActiveSetIndex]:
    """Yield the active set for t = 1..T (the same object, mutated each round)."""
    s = ActiveSetIndex(kind, T)
    for t in range(1, T + 1):
        s.advance(t)
        yield s


def _birth_lifespan_arrays(kind: ScheduleKind, T: int):
    K = kind.kind
    if K is Kind.BASIC:
        t = np.arange(1, T + 1, dtype=np.int64)
        v = np.log2(t & -t).astype(np.int64)
        k = np.where(v == 0, 0, np.floor(np.log2(v + 1)).astype(np.int64))
        L = np.where(k == 0, 4, 2 ** (2**k + 1))
        return t, L, np.where(k == 0, 4, L)
    if K is Kind.SINGLE:
        return np.array([1]), np.array([T]), np.array([T])
    births, lifes, klass = [], [], []
    if K is Kind.DYADIC:
        j = 0
        while 2**j <= T:
            b = np.arange(1, T + 1, 2**j, dtype=np.int64)
            births.append(b)
            lifes.append(np.full(b.shape, 2**j))
            klass.append(np.full(b.shape, 2**j))
            j += 1
    else:
        classes = tower_classes(T, kind.epsilon)
        for idx, (k, l) in enumerate(classes):
            b = np.arange(1, T + 1, l, dtype=np.int64)
            if K is Kind.LARGEST:
                # keep births where no larger class also divides t - 1
                keep = np.ones(b.shape, bool)
                for _, l2 in classes[idx + 1 :]:
                    keep &= (b - 1) % l2 != 0
                keep |= b == 1
                b = b[keep]
            births.append(b)
            lifes.append(np.full(b.shape, 4 * l))
            klass.append(np.full(b.shape, k))
    return np.concatenate(births), np.concatenate(lifes), np.concatenate(klass)


def active_counts(kind: ScheduleKind, T: int, per_class: bool = False):
    """|S_t| for t = 1..T via a difference array (no game simulation).

    With ``per_class`` returns a dict class-id -> counts, where the class id is the
    lifespan for basic/dyadic and k for the towers.
    """
    births, lifes, klass = _birth_lifespan_arrays(kind, T)

    def count(b, L):
        diff = np.zeros(T + 2, dtype=np.int64)
        np.add.at(diff, b, 1)
        np.add.at(diff, np.minimum(b + L, T + 1), -1)
        return np.cumsum(diff)[1 : T + 1]

    if not per_class:
        return count(births, lifes)
    return {int(c): count(births[klass == c], lifes[klass == c]) for c in np.unique(klass)}


def _bracket_ok(kind: ScheduleKind, length: np.ndarray, back: np.ndarray) -> np.ndarray:
    """True where a birth ``back`` rounds before t lies in the coverage bracket of an
    interval with t - s = ``length``."""
    length = np.asarray(length)
    back = np.asarray(back)
    if kind.epsilon is None or kind.kind in (Kind.BASIC, Kind.DYADIC, Kind.SINGLE):
        # back >= sqrt(length)/2  <=>  4 back^2 >= length, exact in integers
        return 4 * back.astype(np.int64) ** 2 >= length
    return 2.0 * back >= np.power(length.astype(float), 1.0 - kind.epsilon) * (1 - 1e-12)


def _is_tight(e: ScheduleEntry, t: int) -> bool:
    return e.lifespan <= 4 * (t - e.birth) and t - e.birth <= e.lifespan


def _preference(e: ScheduleEntry, t: int):
    return (not _is_tight(e, t), e.lifespan, -e.birth, e.k)


def coverage_witness(s: int, t: int, kind: ScheduleKind, T: int) -> Optional[ScheduleEntry]:
    """An entry born in the coverage bracket of [s, t] that is alive throughout [birth, t].

    Preference: witnesses with lifespan/4 <= t - birth <= lifespan, then the shortest
    lifespan, then the latest birth. Returns None when no witness exists.
    """
    if not 1 <= s < t <= T:
        raise ValueError("need 1 <= s < t <= T")
    best = None
    for i in range(s, t + 1):
        if not _bracket_ok(kind, np.array(t - s), np.array(t - i)):
            break
        for e in spawns_at(i, kind, T):
            if e.death >= t and (best is None or _preference(e, t) < _preference(best, t)):
                best = e
    return best


def coverage_violations(kind: ScheduleKind, T: int, min_length: int = 8, limit: int = 10):
    """Exhaustively list intervals [s, t] (t - s >= min_length) without a witness."""
    bad = []
    for t, active in enumerate(replay(kind, T), start=1):
        if t - min_length < 1:
            continue
        births = np.unique([e.birth for e in active])  # all alive at t, so alive on [birth, t]
        s = np.arange(1, t - min_length + 1)
        idx = np.searchsorted(births, s)
        ok = idx < births.size
        back = np.where(ok, t - births[np.minimum(idx, births.size - 1)], -1)
        ok &= _bracket_ok(kind, t - s, back) & (back >= 0)
        for s_bad in s[~ok][: max(0, limit - len(bad))]:
            bad.append((int(s_bad), t))
        if len(bad) >= limit:
            break
    return bad


def witness_intervals(kind: ScheduleKind, T: int, min_length: int = 8) -> list[tuple[ScheduleEntry, int]]:
    """Distinct (entry, t) pairs that coverage_witness selects for some [s, t], t - s >= min_length."""
    out = []
    for t, active in enumerate(replay(kind, T), start=1):
        smax = t - min_length
        if smax < 1:
            continue
        claimed = np.zeros(smax + 1, dtype=bool)
        claimed[0] = True
        s = np.arange(smax + 1)
        for e in sorted(active, key=lambda e: _preference(e, t)):
            mask = (~claimed) & (s <= e.birth) & _bracket_ok(kind, t - s, np.full(s.shape, t - e.birth))
            if mask.any():
                claimed |= mask
                out.append((e, t))
            if claimed.all():
                break
    return out
