"""Dyson interaction: parameters, couplings, tail sums, Hamiltonians and the half-line potential.

Conventions used throughout the package:

* spins take values +1/-1; a configuration over a window of ``n`` sites is an
  integer whose bit ``k`` is set iff the spin at site ``lo + k`` is +1;
* the pair coupling is ``J_ij = beta * |i - j| ** -alpha`` and the Hamiltonian is
  ``H = -sum J_ij s_i s_j - h sum s_i`` (ferromagnetic for beta >= 0);
* ``tail(s) = sum_{j >= s} j ** -alpha`` is the workhorse for every off-window
  contribution.
"""

from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "RegimeWarning",
    "ModelParams",
    "TailSums",
    "tail_sums",
    "tail_sum",
    "zeta",
    "Side",
    "Window",
    "BCKind",
    "BoundaryCondition",
    "SpinConfig",
    "pair_coupling",
    "HamiltonianValue",
    "hamiltonian",
    "PotentialValue",
    "potential_phi",
    "spins_of",
    "bits_of",
]

EXACT_CAPACITY = 24
DEFAULT_HORIZON = 10_000

# Bernoulli numbers B_2 .. B_16 for the Euler-Maclaurin remainder.
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)
_EM_START = 32


class RegimeWarning(UserWarning):
    """Parameters outside the regime where the long-range results are stated."""


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    h: float

    def __post_init__(self):
        for name in ("alpha", "beta", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1 for summable couplings, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not (1.5 < self.alpha <= 2.0):
            warnings.warn(
                f"alpha={self.alpha} lies outside (3/2, 2]", RegimeWarning, stacklevel=3
            )

    def with_field(self, h: float) -> "ModelParams":
        return ModelParams(self.alpha, self.beta, h)

    def flipped(self) -> "ModelParams":
        return ModelParams(self.alpha, self.beta, -self.h)

    @property
    def tails(self) -> "TailSums":
        return tail_sums(self.alpha)


def _em_tail(s: np.ndarray, alpha: float) -> np.ndarray:
    """Euler-Maclaurin evaluation of sum_{j>=s} j^-alpha for s >= _EM_START."""
    s = np.asarray(s, dtype=np.float64)
    out = s ** (1.0 - alpha) / (alpha - 1.0) + 0.5 * s ** (-alpha)
    # d^(2k-1)/dx^(2k-1) x^-alpha = -(alpha)_(2k-1) x^(-alpha-2k+1)
    rising = alpha
    fact = 2.0
    for k, b in enumerate(_BERNOULLI, start=1):
        out += b / fact * rising * s ** (-alpha - 2 * k + 1)
        rising *= (alpha + 2 * k - 1) * (alpha + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    return out


def tail_sum(s, alpha: float):
    """``sum_{j >= s} j ** -alpha`` for integer ``s >= 1`` (scalar or array)."""
    if not alpha > 1:
        raise ValueError(f"tail sums diverge for alpha={alpha} <= 1")
    arr = np.atleast_1d(np.asarray(s, dtype=np.int64))
    if np.any(arr < 1):
        raise ValueError("tail sums are defined for s >= 1")
    out = np.empty(arr.shape, dtype=np.float64)
    big = arr >= _EM_START
    out[big] = _em_tail(arr[big], alpha)
    if np.any(~big):
        head = np.arange(1, _EM_START, dtype=np.float64) ** (-alpha)
        # suffix sums of the head, smallest terms first
        suffix = np.cumsum(head[::-1])[::-1] + _em_tail(np.array([_EM_START]), alpha)[0]
        out[~big] = suffix[arr[~big] - 1]
    return out if np.ndim(s) else float(out[0])


def zeta(alpha: float) -> float:
    """Riemann zeta at ``alpha > 1`` (absolute error well below 1e-12)."""
    if not alpha > 1:
        raise ValueError(f"zeta diverges at alpha={alpha} <= 1")
    return tail_sum(1, alpha)


@dataclass(frozen=True)
class TailSums:
    alpha: float
    horizon: int
    zeta_alpha: float
    partial_tails: np.ndarray = field(repr=False)
    tail_error_bound: float

    def tail(self, s):
        """``sum_{j >= s} j^-alpha``; cached up to ``horizon + 1``, computed beyond."""
        arr = np.asarray(s)
        if arr.ndim == 0:
            s = int(s)
            if 1 <= s <= self.horizon + 1:
                return float(self.partial_tails[s])
            return tail_sum(s, self.alpha)
        if arr.size and arr.min() >= 1 and arr.max() <= self.horizon + 1:
            return self.partial_tails[arr]
        return tail_sum(arr, self.alpha)

    def squared_tail_sum(self) -> float:
        """``sum_{s >= 1} tail(s)^2``; finite iff alpha > 3/2."""
        if self.alpha <= 1.5:
            return math.inf
        body = float(np.sum(self.partial_tails[1:] ** 2))
        # tail(s)^2 ~ s^(2-2a)/(a-1)^2 for s past the horizon
        n = self.horizon + 1
        rest = n ** (3 - 2 * self.alpha) / ((self.alpha - 1) ** 2 * (2 * self.alpha - 3))
        return body + rest


@functools.lru_cache(maxsize=32)
def tail_sums(alpha: float, horizon: int = DEFAULT_HORIZON) -> TailSums:
    s = np.arange(0, horizon + 2)
    tails = np.empty(horizon + 2)
    tails[0] = np.nan
    tails[1:] = tail_sum(s[1:], alpha)
    tails.setflags(write=False)
    # next Euler-Maclaurin term at the switch-over point bounds the truncation
    err = abs(-3617 / 510) * _EM_START ** (-alpha - 15)
    return TailSums(alpha, horizon, float(tails[1]), tails, err)


class Side(enum.Enum):
    TWO_SIDED = "two_sided"
    RIGHT_HALF = "right_half"
    LEFT_HALF = "left_half"


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int
    side: Side = Side.TWO_SIDED

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")
        if self.side is Side.RIGHT_HALF and self.lo < 0:
            raise ValueError("right half-line windows live on sites >= 0")
        if self.side is Side.LEFT_HALF and self.hi > -1:
            raise ValueError("left half-line windows live on sites <= -1")

    @classmethod
    def right(cls, size: int) -> "Window":
        """Sites ``0 .. size-1`` approximating the right half-line."""
        return cls(0, size - 1, Side.RIGHT_HALF)

    @classmethod
    def left(cls, size: int) -> "Window":
        """Sites ``-size .. -1`` approximating the left half-line."""
        return cls(-size, -1, Side.LEFT_HALF)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def index(self, site: int) -> int:
        if not self.lo <= site <= self.hi:
            raise IndexError(f"site {site} outside window [{self.lo}, {self.hi}]")
        return site - self.lo

    @property
    def open_left(self) -> bool:
        """Whether the approximated lattice continues left of ``lo``."""
        return self.side is not Side.RIGHT_HALF

    @property
    def open_right(self) -> bool:
        return self.side is not Side.LEFT_HALF

    def reflected(self) -> "Window":
        side = {Side.TWO_SIDED: Side.TWO_SIDED, Side.RIGHT_HALF: Side.LEFT_HALF,
                Side.LEFT_HALF: Side.RIGHT_HALF}[self.side]
        # the reflection of Z_+ onto -N is i -> -i-1; on Z it is i -> -i
        if self.side is Side.TWO_SIDED:
            return Window(-self.hi, -self.lo, side)
        return Window(-self.hi - 1, -self.lo - 1, side)


class BCKind(enum.Enum):
    FREE = "free"
    ALL_PLUS = "all_plus"
    ALL_MINUS = "all_minus"
    FIXED = "fixed"


@dataclass(frozen=True)
class BoundaryCondition:
    """Spins outside a window.

    For ``FIXED``, ``left[d-1]`` is the spin at ``lo - d`` and ``right[d-1]`` the
    spin at ``hi + d``; sites past the given arrays carry no spin (free).
    """

    kind: BCKind = BCKind.FREE
    left: tuple = ()
    right: tuple = ()

    def __post_init__(self):
        if self.kind is not BCKind.FIXED and (self.left or self.right):
            raise ValueError("only fixed boundary conditions carry explicit spins")
        for s in self.left + self.right:
            if s not in (1, -1):
                raise ValueError("boundary spins must be +1 or -1")

    @classmethod
    def free(cls):
        return cls(BCKind.FREE)

    @classmethod
    def plus(cls):
        return cls(BCKind.ALL_PLUS)

    @classmethod
    def minus(cls):
        return cls(BCKind.ALL_MINUS)

    @classmethod
    def fixed(cls, left: Sequence[int] = (), right: Sequence[int] = ()):
        return cls(BCKind.FIXED, tuple(int(s) for s in left), tuple(int(s) for s in right))

    @classmethod
    def aligned(cls, h: float):
        """All spins along the field outside the window (free at zero field)."""
        if h > 0:
            return cls.plus()
        if h < 0:
            return cls.minus()
        return cls.free()

    def flipped(self) -> "BoundaryCondition":
        if self.kind is BCKind.ALL_PLUS:
            return BoundaryCondition.minus()
        if self.kind is BCKind.ALL_MINUS:
            return BoundaryCondition.plus()
        if self.kind is BCKind.FIXED:
            return BoundaryCondition.fixed([-s for s in self.left], [-s for s in self.right])
        return self

    def reflected(self) -> "BoundaryCondition":
        if self.kind is BCKind.FIXED:
            return BoundaryCondition.fixed(self.right, self.left)
        return self

    @property
    def sign(self) -> int:
        return {BCKind.ALL_PLUS: 1, BCKind.ALL_MINUS: -1}.get(self.kind, 0)


@dataclass(frozen=True)
class SpinConfig:
    bits: int
    n: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"bits {self.bits} do not fit {self.n} sites")

    @classmethod
    def from_spins(cls, spins: Sequence[int]) -> "SpinConfig":
        return cls(bits_of(spins), len(spins))

    @property
    def spins(self) -> np.ndarray:
        return spins_of(self.bits, self.n)

    def flipped(self) -> "SpinConfig":
        return SpinConfig(self.bits ^ ((1 << self.n) - 1), self.n)

    def reversed(self) -> "SpinConfig":
        return SpinConfig.from_spins(self.spins[::-1])


def spins_of(bits, n: int) -> np.ndarray:
    """Spin array(s) for integer configuration(s); bit 1 maps to +1."""
    bits = np.asarray(bits, dtype=np.int64)
    shifts = np.arange(n, dtype=np.int64)
    return (((bits[..., None] >> shifts) & 1) * 2 - 1).astype(np.int8)


def bits_of(spins) -> int:
    spins = np.asarray(spins)
    if spins.size and not np.all(np.abs(spins) == 1):
        raise ValueError("spins must be +1 or -1")
    return int(sum(1 << k for k, s in enumerate(spins) if s > 0))


def pair_coupling(i: int, j: int, p: ModelParams) -> float:
    if i == j:
        raise ValueError("self-coupling is undefined")
    return p.beta * abs(i - j) ** (-p.alpha)


class HamiltonianValue(NamedTuple):
    energy: float
    remainder_bound: float


def boundary_field(w: Window, bc: BoundaryCondition, p: ModelParams,
                   horizon: int = DEFAULT_HORIZON) -> tuple[np.ndarray, float]:
    """Field on each window site produced by the spins outside the window.

    Returns ``(field, remainder)``; ``remainder`` bounds the dropped couplings
    per site for fixed conditions truncated at ``horizon``.
    """
    n = w.size
    out = np.zeros(n)
    if bc.kind is BCKind.FREE or p.beta == 0:
        return out, 0.0
    tails = p.tails
    k = np.arange(n)
    if bc.kind in (BCKind.ALL_PLUS, BCKind.ALL_MINUS):
        if w.open_left:
            out += p.beta * tails.tail(k + 1)
        if w.open_right:
            out += p.beta * tails.tail(n - k)
        return bc.sign * out, 0.0
    sides = 0
    if w.open_left and bc.left:
        sides += 1
        spins = np.asarray(bc.left[:horizon], dtype=np.float64)
        d = np.arange(1, len(spins) + 1)
        for idx in range(n):
            dist = d + idx
            keep = dist <= horizon
            out[idx] += p.beta * np.sum(spins[keep] * dist[keep] ** (-p.alpha))
    if w.open_right and bc.right:
        sides += 1
        spins = np.asarray(bc.right[:horizon], dtype=np.float64)
        d = np.arange(1, len(spins) + 1)
        for idx in range(n):
            dist = d + (n - 1 - idx)
            keep = dist <= horizon
            out[idx] += p.beta * np.sum(spins[keep] * dist[keep] ** (-p.alpha))
    remainder = sides * p.beta * tails.tail(horizon + 1)
    return out, remainder


def hamiltonian(w: Window, cfg: SpinConfig, bc: BoundaryCondition, p: ModelParams,
                horizon: int = DEFAULT_HORIZON) -> HamiltonianValue:
    """Energy of ``cfg`` on ``w`` given the boundary condition.

    Pair terms are summed by increasing distance, then left to right, so the
    result does not depend on how callers batch their work.
    """
    if cfg.n != w.size:
        raise ValueError(f"config has {cfg.n} sites, window has {w.size}")
    if horizon < w.size:
        raise ValueError("horizon must cover the window")
    s = cfg.spins.astype(np.float64)
    n = w.size
    energy = 0.0
    for d in range(1, n):
        jd = p.beta * d ** (-p.alpha)
        for i in range(n - d):
            energy -= jd * s[i] * s[i + d]
    for i in range(n):
        energy -= p.h * s[i]
    bfield, per_site = boundary_field(w, bc, p, horizon)
    for i in range(n):
        energy -= bfield[i] * s[i]
    return HamiltonianValue(energy, n * per_site)


class PotentialValue(NamedTuple):
    value: float
    truncation_bound: float


def potential_phi(prefix: "SpinConfig | Sequence[int]", p: ModelParams,
                  tail: BoundaryCondition | BCKind = BCKind.FREE) -> PotentialValue:
    """Half-line potential ``h x0 + beta sum_n x0 x_n n^-alpha`` on a finite prefix.

    Coordinates past the prefix are replaced by the tail: nothing (free) or a
    constant +1/-1 field summed in closed form.
    """
    kind = tail.kind if isinstance(tail, BoundaryCondition) else BCKind(tail)
    if kind is BCKind.FIXED:
        raise ValueError("potential tails must be free, all_plus or all_minus")
    if isinstance(prefix, SpinConfig):
        prefix = prefix.spins
    x = np.asarray(prefix, dtype=np.float64)
    m = x.size
    if m == 0:
        raise ValueError("empty prefix")
    x0 = x[0]
    val = p.h * x0
    if m > 1:
        n = np.arange(1, m)
        val += p.beta * float(np.sum(x0 * x[1:] * n ** (-p.alpha)))
    rest = p.beta * p.tails.tail(m)
    if kind is BCKind.ALL_PLUS:
        val += x0 * rest
    elif kind is BCKind.ALL_MINUS:
        val -= x0 * rest
    return PotentialValue(val, rest if kind is BCKind.FREE else 0.0)
