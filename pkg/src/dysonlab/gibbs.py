"""Finite-volume Gibbs measures: exact enumeration, coupled half-line pairs and heat-bath sampling.

Exact tables are built by splitting the configuration index into a high and a
low half, so a 24-site window costs a handful of 4096 x 4096 array passes.
Everything that feeds a reported number runs in a fixed order regardless of
the ``threads`` argument.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import (
    EXACT_CAPACITY,
    BCKind,
    BoundaryCondition,
    ModelParams,
    Side,
    Window,
    boundary_field,
    spins_of,
)

__all__ = [
    "Estimate",
    "FiniteGibbsMeasure",
    "CoupledMeasure",
    "Schedule",
    "SampleRun",
    "Target",
    "MeasureApprox",
    "ProductBackend",
    "ESSCollapseError",
    "exact_measure",
    "log_weights",
    "window_couplings",
    "conditional_kernel",
    "local_field",
    "expectation",
    "glauber_sample",
    "product_measure",
    "half_line",
    "two_sided",
    "cross_couplings",
    "logsumexp",
    "jackknife",
    "effective_sample_size",
]

# Row blocks for the split enumeration; fixed so thread count never changes results.
_BLOCK_ROWS = 256
_ETA_BATCH = 4096


class Estimate(NamedTuple):
    value: float
    stderr: float


class ESSCollapseError(RuntimeError):
    """Importance weights degenerated below the accepted effective sample size."""

    def __init__(self, ess: float, n: int, minimum: float):
        super().__init__(f"effective sample size {ess:.1f} of {n} draws is below {minimum}")
        self.ess = ess
        self.n = n
        self.minimum = minimum


def logsumexp(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    m = float(np.max(x))
    if not math.isfinite(m):
        return m
    # numpy reduces contiguous float arrays pairwise, which keeps the error bounded
    return m + math.log(float(np.sum(np.exp(x - m))))


def _spin_matrix(n: int) -> np.ndarray:
    return spins_of(np.arange(1 << n), n).astype(np.float64)


def _local_log_weight(s: np.ndarray, J: np.ndarray, f: np.ndarray) -> np.ndarray:
    """sum_{i<j} J_ij s_i s_j + sum_i f_i s_i over rows of ``s``; distance-major order."""
    n = s.shape[1]
    out = np.zeros(s.shape[0])
    for d in range(1, n):
        for i in range(n - d):
            if J[i, i + d] != 0.0:
                out += J[i, i + d] * (s[:, i] * s[:, i + d])
    for i in range(n):
        if f[i] != 0.0:
            out += f[i] * s[:, i]
    return out


def log_weights(J: np.ndarray, field: np.ndarray, threads: int = 1) -> np.ndarray:
    """``-H`` for every configuration of ``len(field)`` spins.

    ``H = -sum_{i<j} J_ij s_i s_j - sum_i field_i s_i``; entry ``x`` of the result
    belongs to the configuration whose bit ``k`` encodes site ``k``.
    """
    J = np.asarray(J, dtype=np.float64)
    f = np.asarray(field, dtype=np.float64)
    n = f.size
    if J.shape != (n, n):
        raise ValueError("coupling matrix and field disagree on the number of sites")
    a = n // 2
    b = n - a
    s_lo = _spin_matrix(a)
    s_hi = _spin_matrix(b)
    e_lo = _local_log_weight(s_lo, J[:a, :a], f[:a])
    e_hi = _local_log_weight(s_hi, J[a:, a:], f[a:])
    # v[i] holds the field that the high half exerts on low site i
    v = np.zeros((a, 1 << b))
    for i in range(a):
        for j in range(b):
            if J[i, a + j] != 0.0:
                v[i] += J[i, a + j] * s_hi[:, j]
    out = np.empty((1 << b, 1 << a))

    def fill(start: int):
        stop = min(start + _BLOCK_ROWS, 1 << b)
        blk = out[start:stop]
        blk[:] = e_hi[start:stop, None] + e_lo[None, :]
        for i in range(a):
            blk += v[i, start:stop, None] * s_lo[None, :, i]

    starts = range(0, 1 << b, _BLOCK_ROWS)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(fill, starts))
    else:
        for st in starts:
            fill(st)
    return out.ravel()


def window_couplings(w: Window, p: ModelParams) -> np.ndarray:
    n = w.size
    d = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        J = np.where(d > 0, p.beta * d ** (-p.alpha), 0.0)
    return J


def _bit_reverse_perm(n: int) -> np.ndarray:
    x = np.arange(1 << n)
    out = np.zeros_like(x)
    for k in range(n):
        out |= ((x >> k) & 1) << (n - 1 - k)
    return out


def _bit_means(probs: np.ndarray, n: int) -> np.ndarray:
    """``P(bit k = 1)`` for each k."""
    out = np.empty(n)
    for k in range(n):
        out[k] = probs.reshape(-1, 2, 1 << k)[:, 1, :].sum()
    return out


def _parity_signs(n: int, mask: int) -> np.ndarray:
    """sigma_A over all configurations, A given as a bit mask of sites."""
    x = np.arange(1 << n, dtype=np.uint32)
    minus = np.bitwise_count(~x & np.uint32(mask)) & 1
    return 1.0 - 2.0 * minus


@dataclass(frozen=True)
class FiniteGibbsMeasure:
    window: Window
    bc: BoundaryCondition
    params: ModelParams
    probs: np.ndarray = field(repr=False)
    log_partition: float

    @property
    def n(self) -> int:
        return self.window.size

    def mask(self, sites: Sequence[int]) -> int:
        m = 0
        for s in sites:
            m ^= 1 << self.window.index(int(s))
        return m

    def expectation(self, sites: Sequence[int]) -> float:
        sites = list(sites)
        if not sites:
            return 1.0
        return float(np.dot(self.probs, _parity_signs(self.n, self.mask(sites))))

    def magnetizations(self) -> np.ndarray:
        """``<sigma_i>`` for every site of the window, in site order."""
        return 2.0 * _bit_means(self.probs, self.n) - 1.0

    def magnetization(self, site: int) -> float:
        return float(self.magnetizations()[self.window.index(site)])

    def cylinder_prob(self, sites: Sequence[int], spins: Sequence[int]) -> float:
        sel = self.cylinder_indicator(sites, spins)
        return float(self.probs[sel].sum())

    def cylinder_indicator(self, sites: Sequence[int], spins: Sequence[int]) -> np.ndarray:
        x = np.arange(1 << self.n)
        sel = np.ones(x.size, dtype=bool)
        for s, v in zip(sites, spins):
            bit = (x >> self.window.index(int(s))) & 1
            sel &= bit == (1 if v > 0 else 0)
        return sel

    def marginal(self, sites: Sequence[int]) -> np.ndarray:
        """Probability table over ``sites``; bit k of the index is ``sites[k]``."""
        x = np.arange(1 << self.n)
        idx = np.zeros_like(x)
        for k, s in enumerate(sites):
            idx |= ((x >> self.window.index(int(s))) & 1) << k
        return np.bincount(idx, weights=self.probs, minlength=1 << len(sites))

    def spin_table(self) -> np.ndarray:
        return _spin_matrix(self.n)

    def reflected(self) -> "FiniteGibbsMeasure":
        """Image under the lattice reflection (``i -> -i`` on Z, ``i -> -i-1`` between half-lines)."""
        perm = _bit_reverse_perm(self.n)
        return FiniteGibbsMeasure(self.window.reflected(), self.bc.reflected(), self.params,
                                  self.probs[perm], self.log_partition)

    def tilted(self, field_: np.ndarray) -> "FiniteGibbsMeasure":
        """Measure proportional to ``probs * exp(sum_i field_i s_i)``."""
        lw = log_weights(np.zeros((self.n, self.n)), field_)
        with np.errstate(divide="ignore"):
            logp = np.log(self.probs) + lw
        lz = logsumexp(logp)
        return FiniteGibbsMeasure(self.window, self.bc, self.params, np.exp(logp - lz),
                                  self.log_partition + lz)


def exact_measure(w: Window, bc: BoundaryCondition, p: ModelParams, *,
                  couplings: np.ndarray | None = None, extra_field: np.ndarray | None = None,
                  threads: int = 1) -> FiniteGibbsMeasure:
    """Exact Gibbs table on ``w`` with outside spins from ``bc``.

    ``couplings`` overrides the in-window Dyson couplings (used for interactions
    with bonds removed); ``extra_field`` adds a per-site field.
    """
    if w.size > EXACT_CAPACITY:
        raise OverflowError(f"exact enumeration is capped at {EXACT_CAPACITY} sites, got {w.size}")
    J = window_couplings(w, p) if couplings is None else np.asarray(couplings, dtype=np.float64)
    bfield, _ = boundary_field(w, bc, p)
    f = p.h + bfield
    if extra_field is not None:
        f = f + np.asarray(extra_field, dtype=np.float64)
    lw = log_weights(J, f, threads=threads)
    lz = logsumexp(lw)
    return FiniteGibbsMeasure(w, bc, p, np.exp(lw - lz), lz)


def local_field(i: int, p: ModelParams, left: Sequence[int] = (), right: Sequence[int] = (),
                tail: BCKind | str = BCKind.FREE) -> float:
    """``h + sum_j J_ij s_j`` with ``left[d-1]`` at ``i-d`` and ``right[d-1]`` at ``i+d``.

    Sites beyond the given arrays follow ``tail`` on both sides.
    """
    kind = BCKind(tail)
    if kind is BCKind.FIXED:
        raise ValueError("tail beyond the given boundary must be free, all_plus or all_minus")
    total = p.h
    for arr in (left, right):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.size:
            d = np.arange(1, arr.size + 1)
            total += p.beta * float(np.sum(arr * d ** (-p.alpha)))
        if kind is not BCKind.FREE:
            sign = 1.0 if kind is BCKind.ALL_PLUS else -1.0
            total += sign * p.beta * p.tails.tail(arr.size + 1)
    return total


def conditional_kernel(i: int, p: ModelParams, left: Sequence[int] = (),
                       right: Sequence[int] = (), tail: BCKind | str = BCKind.FREE) -> float:
    """Probability that the spin at ``i`` is +1 given everything else."""
    return 0.5 * (1.0 + math.tanh(local_field(i, p, left, right, tail)))


# ---------------------------------------------------------------------------
# coupled half-line pairs


@dataclass
class CoupledMeasure:
    """Measure proportional to ``left(xi) * right(eta) * exp(sum_ij cross_ij xi_i eta_j)``.

    ``left`` and ``right`` are exact tables on adjacent windows; ``cross`` is
    indexed by (left bit, right bit). With ``cross = 0`` this is the product.
    The left sum is done exactly for every right configuration by splitting
    the left bits in two halves and contracting with one matrix product.
    """

    left: FiniteGibbsMeasure
    right: FiniteGibbsMeasure
    cross: np.ndarray
    _g1: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.cross = np.asarray(self.cross, dtype=np.float64)
        if self.cross.shape != (self.left.n, self.right.n):
            raise ValueError("cross couplings do not match the two windows")

    @property
    def sites(self) -> np.ndarray:
        return np.concatenate([self.left.window.sites, self.right.window.sites])

    def _contract(self, left_values: np.ndarray):
        """Per right configuration: ``log-scale`` and ``sum_xi left_values(xi) e^{xi.cross.eta}``."""
        nl, nr = self.left.n, self.right.n
        lo = nl // 2
        hi = nl - lo
        P = np.asarray(left_values, dtype=np.float64).reshape(1 << hi, 1 << lo)
        s_lo = _spin_matrix(lo)
        s_hi = _spin_matrix(hi)
        total = 1 << nr
        scale = np.empty(total)
        vals = np.empty(total)
        for start in range(0, total, _ETA_BATCH):
            stop = min(start + _ETA_BATCH, total)
            eta = spins_of(np.arange(start, stop), nr).astype(np.float64)
            u = eta @ self.cross.T
            e_lo = u[:, :lo] @ s_lo.T
            e_hi = u[:, lo:] @ s_hi.T
            m_lo = e_lo.max(axis=1)
            m_hi = e_hi.max(axis=1)
            x_lo = np.exp(e_lo - m_lo[:, None])
            x_hi = np.exp(e_hi - m_hi[:, None])
            vals[start:stop] = np.einsum("bl,bl->b", x_hi @ P, x_lo)
            scale[start:stop] = m_lo + m_hi
        return scale, vals

    def _base(self):
        if self._g1 is None:
            scale, vals = self._contract(self.left.probs)
            with np.errstate(divide="ignore"):
                logw = np.log(self.right.probs) + scale + np.log(vals)
            self._g1 = (scale, vals, logsumexp(logw))
        return self._g1

    @property
    def log_normalizer(self) -> float:
        """``log E_{left x right}[exp(xi.cross.eta)]``."""
        return self._base()[2]

    def right_density(self) -> np.ndarray:
        """``E_left[exp(xi.cross.eta)] / E[exp(xi.cross.eta)]`` for every right configuration."""
        scale, vals, lz = self._base()
        return np.exp(scale - lz) * vals

    def right_marginal(self) -> np.ndarray:
        return self.right.probs * self.right_density()

    def _right_weights(self, left_values: np.ndarray) -> np.ndarray:
        scale, _, lz = self._base()
        _, vals = self._contract(left_values)
        return self.right.probs * np.exp(scale - lz) * vals

    def expectation(self, sites: Sequence[int]) -> float:
        lsites = [s for s in sites if s < self.right.window.lo]
        rsites = [s for s in sites if s >= self.right.window.lo]
        if lsites:
            lvals = self.left.probs * _parity_signs(self.left.n, self.left.mask(lsites))
            w = self._right_weights(lvals)
        else:
            w = self.right_marginal()
        if rsites:
            w = w * _parity_signs(self.right.n, self.right.mask(rsites))
        return float(w.sum())

    def magnetizations(self) -> np.ndarray:
        """Spin means over the joint window, left sites first."""
        right = 2.0 * _bit_means(self.right_marginal(), self.right.n) - 1.0
        s = _spin_matrix(self.left.n)
        left = np.array([self._right_weights(self.left.probs * s[:, k]).sum()
                         for k in range(self.left.n)])
        return np.concatenate([left, right])

    def magnetization(self, site: int) -> float:
        if site >= self.right.window.lo:
            return float(2.0 * _bit_means(self.right_marginal(), self.right.n)[
                self.right.window.index(site)] - 1.0)
        k = self.left.window.index(site)
        s = _spin_matrix(self.left.n)
        return float(self._right_weights(self.left.probs * s[:, k]).sum())

    def pair_table(self, left_sites: Sequence[int]) -> np.ndarray:
        """``E[sigma_l sigma_r]`` for ``l`` in ``left_sites`` and every right site."""
        s = _spin_matrix(self.left.n)
        out = np.empty((len(left_sites), self.right.n))
        for row, site in enumerate(left_sites):
            w = self._right_weights(self.left.probs * s[:, self.left.window.index(site)])
            total = w.sum()
            out[row] = 2.0 * _bit_means(w, self.right.n) - total
        return out


def half_line(size: int, p: ModelParams, bc: BoundaryCondition, side: Side = Side.RIGHT_HALF,
              threads: int = 1) -> FiniteGibbsMeasure:
    """Exact approximant of the half-line Gibbs state; the left one by reflection."""
    right = exact_measure(Window.right(size), bc.reflected() if side is Side.LEFT_HALF else bc,
                          p, threads=threads)
    if side is Side.RIGHT_HALF:
        return right
    if side is Side.LEFT_HALF:
        return right.reflected()
    raise ValueError("half_line needs a half-line side")


def cross_couplings(L: int, R: int, p: ModelParams, mask: np.ndarray | None = None) -> np.ndarray:
    """Cross bonds between sites ``-L..-1`` (rows, bit order) and ``0..R`` (columns)."""
    i = L - np.arange(L)  # left bit k is site -(L-k)
    j = np.arange(R + 1)
    J = p.beta * (i[:, None] + j[None, :]).astype(np.float64) ** (-p.alpha)
    if mask is not None:
        J = np.where(mask, J, 0.0)
    return J


def two_sided(L: int, R: int, p: ModelParams, bc: BoundaryCondition,
              nu_minus: FiniteGibbsMeasure | None = None,
              nu_plus: FiniteGibbsMeasure | None = None, threads: int = 1) -> CoupledMeasure:
    """Exact Gibbs measure on ``[-L, R]`` as a coupled pair of half-line tables.

    Outside spins from ``bc`` act on both halves: each half already sees its own
    outer side, the far side enters as an extra field.
    """
    if bc.kind is BCKind.FIXED:
        raise ValueError("two-sided coupling supports free, all_plus and all_minus")
    nu_minus = nu_minus or half_line(L, p, bc, Side.LEFT_HALF, threads)
    nu_plus = nu_plus or half_line(R + 1, p, bc, Side.RIGHT_HALF, threads)
    left, right = nu_minus, nu_plus
    if bc.sign and p.beta:
        tails = p.tails
        i = L - np.arange(L)
        left = left.tilted(bc.sign * p.beta * tails.tail(i + R + 1))
        j = np.arange(R + 1)
        right = right.tilted(bc.sign * p.beta * tails.tail(j + L + 1))
    return CoupledMeasure(left, right, cross_couplings(L, R, p))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class Schedule:
    sweeps: int
    burn_in: int = 0
    thinning: int = 1

    def __post_init__(self):
        if self.sweeps < self.burn_in:
            raise ValueError("sweeps must be at least burn_in")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")


@dataclass
class SampleRun:
    window: Window
    seed: int
    sweeps: int
    burn_in: int
    thinning: int
    samples: np.ndarray = field(repr=False)
    estimator_errors: dict = field(default_factory=dict)
    log_weights: np.ndarray | None = field(default=None, repr=False)
    params: ModelParams | None = None

    def observable(self, sites: Sequence[int]) -> np.ndarray:
        if not sites:
            return np.ones(len(self.samples))
        cols = [self.window.index(int(s)) for s in sites]
        return np.prod(self.samples[:, cols].astype(np.float64), axis=1)


def jackknife(x: np.ndarray, blocks: int = 20) -> Estimate:
    """Mean with a blocked jackknife standard error (robust to autocorrelation)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size // blocks * blocks
    if n == 0:
        return Estimate(float(np.mean(x)) if x.size else math.nan, math.inf)
    sums = x[:n].reshape(blocks, -1).sum(axis=1)
    total = sums.sum()
    size = n // blocks
    loo = (total - sums) / (n - size)
    mean = float(x.mean())
    var = (blocks - 1) / blocks * float(np.sum((loo - loo.mean()) ** 2))
    return Estimate(mean, math.sqrt(var))


def effective_sample_size(log_w: np.ndarray) -> float:
    w = np.exp(log_w - np.max(log_w))
    return float(w.sum() ** 2 / np.sum(w * w))


def glauber_sample(w: Window, bc: BoundaryCondition, p: ModelParams, schedule: Schedule,
                   seed: int) -> SampleRun:
    """Heat-bath chain: sites updated left to right each sweep, one sample per ``thinning`` sweeps."""
    rng = np.random.Generator(np.random.PCG64(seed))
    J = window_couplings(w, p)
    bfield, _ = boundary_field(w, bc, p)
    f = p.h + bfield
    n = w.size
    s = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    h_loc = f + J @ s
    kept = []
    for sweep in range(schedule.sweeps):
        u = rng.random(n)
        for i in range(n):
            new = 1.0 if u[i] < 0.5 * (1.0 + math.tanh(h_loc[i])) else -1.0
            if new != s[i]:
                h_loc += J[:, i] * (new - s[i])
                s[i] = new
        if sweep >= schedule.burn_in and (sweep - schedule.burn_in) % schedule.thinning == 0:
            kept.append(s.copy())
    samples = np.array(kept, dtype=np.int8).reshape(-1, n)
    run = SampleRun(w, seed, schedule.sweeps, schedule.burn_in, schedule.thinning, samples,
                    params=p)
    for k, site in enumerate(w.sites):
        run.estimator_errors[f"sigma_{site}"] = jackknife(samples[:, k]).stderr
    return run


# ---------------------------------------------------------------------------
# measure approximations


class Target(enum.Enum):
    MU = "mu"
    NU_PLUS = "nu_plus"
    NU_MINUS = "nu_minus"
    NU_ZERO = "nu_zero"


@dataclass(frozen=True)
class ProductBackend:
    minus: "MeasureApprox"
    plus: "MeasureApprox"


@dataclass(frozen=True)
class MeasureApprox:
    target: Target
    backend: object
    margin: int = 0

    @property
    def params(self) -> ModelParams:
        b = self.backend
        if isinstance(b, ProductBackend):
            return b.plus.params
        if isinstance(b, CoupledMeasure):
            return b.right.params
        return b.params

    @property
    def window_sites(self) -> np.ndarray:
        b = self.backend
        if isinstance(b, ProductBackend):
            return np.concatenate([b.minus.window_sites, b.plus.window_sites])
        if isinstance(b, CoupledMeasure):
            return b.sites
        return b.window.sites

    @property
    def is_exact(self) -> bool:
        b = self.backend
        if isinstance(b, ProductBackend):
            return b.minus.is_exact and b.plus.is_exact
        return isinstance(b, (FiniteGibbsMeasure, CoupledMeasure))


def expectation(m: MeasureApprox, sites: Sequence[int]) -> Estimate:
    """``<sigma_A>`` with a standard error (zero for exact backends)."""
    sites = [int(s) for s in sites]
    window = set(int(s) for s in m.window_sites)
    if any(s not in window for s in sites):
        raise IndexError(f"sites {sites} not all inside the approximation window")
    b = m.backend
    if isinstance(b, (FiniteGibbsMeasure, CoupledMeasure)):
        return Estimate(b.expectation(sites), 0.0)
    if isinstance(b, ProductBackend):
        lset = set(int(s) for s in b.minus.window_sites)
        a = expectation(b.minus, [s for s in sites if s in lset])
        c = expectation(b.plus, [s for s in sites if s not in lset])
        err = math.hypot(a.value * c.stderr, c.value * a.stderr)
        return Estimate(a.value * c.value, err)
    if isinstance(b, SampleRun):
        obs = b.observable(sites)
        if b.log_weights is None:
            return jackknife(obs)
        return _weighted(obs, b.log_weights)
    raise TypeError(f"unsupported backend {type(b).__name__}")


def _weighted(obs: np.ndarray, log_w: np.ndarray, blocks: int = 20) -> Estimate:
    w = np.exp(log_w - log_w.max())
    value = float(np.dot(w, obs) / w.sum())
    n = obs.size // blocks * blocks
    ws = w[:n].reshape(blocks, -1)
    os_ = (w[:n] * obs[:n]).reshape(blocks, -1)
    num = os_.sum() - os_.sum(axis=1)
    den = ws.sum() - ws.sum(axis=1)
    loo = num / den
    var = (blocks - 1) / blocks * float(np.sum((loo - loo.mean()) ** 2))
    return Estimate(value, math.sqrt(var))


def product_measure(nu_minus: MeasureApprox, nu_plus: MeasureApprox) -> MeasureApprox:
    """The independent product of a left and a right half-line approximation."""
    if nu_minus.params != nu_plus.params:
        raise ValueError("half-line approximations disagree on model parameters")
    if max(nu_minus.window_sites) >= min(nu_plus.window_sites):
        raise ValueError("the minus half must lie strictly left of the plus half")
    return MeasureApprox(Target.NU_ZERO, ProductBackend(nu_minus, nu_plus),
                         min(nu_minus.margin, nu_plus.margin))

