"""Intermediate interactions: cross bonds restored one at a time.

Cross bonds join a left site -i (i >= 1) and a right site j (j >= 0). Removing
all of them splits the chain into two independent half-lines (the product
measure nu0); restoring the first k in a fixed order gives nu^(k). On exact
windows every nu^(k) is a ``CoupledMeasure`` whose cross matrix keeps exactly
the restored bonds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dobrushin import OscillationVector, cbar_matrix, cbar_prefactor
from .gibbs import (
    CoupledMeasure,
    ESSCollapseError,
    Estimate,
    FiniteGibbsMeasure,
    SampleRun,
    cross_couplings,
    effective_sample_size,
    logsumexp,
)
from .model import ModelParams, Side, Window

__all__ = [
    "PreconditionError",
    "CrossBondOrder",
    "DensityEstimate",
    "LadderStep",
    "EntropyPoint",
    "enumerate_cross_bonds",
    "w_truncated",
    "w_truncated_bondwise",
    "bond_mask",
    "ladder_measure",
    "density_ratio_step",
    "ladder",
    "direct_normalizer",
    "relative_entropy_sequence",
    "w_oscillation",
    "gcb_sandwich",
    "intermediate_contraction",
    "MIN_ESS",
]

MIN_ESS = 100.0


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class CrossBondOrder:
    """Cross bonds (i, j) meaning {-i, j}, sorted by max(i, j) then (i, j)."""

    bonds: tuple[tuple[int, int], ...]
    prefix_marks: dict

    def prefix(self, N: int) -> tuple[tuple[int, int], ...]:
        return self.bonds[: self.prefix_marks[N]]


def enumerate_cross_bonds(N_max: int) -> CrossBondOrder:
    if N_max < 1:
        raise ValueError("N_max must be at least 1")
    bonds = sorted(((i, j) for i in range(1, N_max + 1) for j in range(N_max + 1)),
                   key=lambda b: (max(b), b))
    marks = {}
    for N in range(1, N_max + 1):
        k = N * (N + 1)
        head = set(bonds[:k])
        want = {(i, j) for i in range(1, N + 1) for j in range(N + 1)}
        if head != want:
            raise AssertionError(f"prefix property fails at N={N}")
        marks[N] = k
    return CrossBondOrder(tuple(bonds), marks)


def _check_window(N: int, left: np.ndarray, right: np.ndarray):
    if N > min(left.size, right.size - 1):
        raise IndexError(f"N={N} needs at least {N} left and {N + 1} right sites")


def w_truncated(N: int, left: Sequence[int], right: Sequence[int], p: ModelParams) -> float:
    """W_[N] = -beta sum_{i=1..N} sum_{j=0..N} s_{-i} s_j (i+j)^-alpha.

    ``left[k]`` is the spin at site -(len(left) - k); ``right[j]`` the spin at j.
    """
    xi = np.asarray(left, dtype=np.float64)
    eta = np.asarray(right, dtype=np.float64)
    _check_window(N, xi, eta)
    L = xi.size
    total = 0.0
    for i in range(1, N + 1):
        si = xi[L - i]
        for j in range(N + 1):
            total -= p.beta * si * eta[j] * (i + j) ** (-p.alpha)
    return total


def w_truncated_bondwise(N: int, left: Sequence[int], right: Sequence[int], p: ModelParams) -> float:
    """Same quantity accumulated along the bond order, grouped by distance."""
    xi = np.asarray(left, dtype=np.float64)
    eta = np.asarray(right, dtype=np.float64)
    _check_window(N, xi, eta)
    by_dist: dict[int, float] = {}
    for i, j in enumerate_cross_bonds(N).prefix(N):
        by_dist[i + j] = by_dist.get(i + j, 0.0) + xi[xi.size - i] * eta[j]
    return -p.beta * math.fsum(v * d ** (-p.alpha) for d, v in sorted(by_dist.items()))


def bond_mask(bonds: Sequence[tuple[int, int]], L: int, R: int) -> np.ndarray:
    """Boolean cross mask in (left bit, right bit) layout for the listed bonds."""
    m = np.zeros((L, R + 1), dtype=bool)
    for i, j in bonds:
        if i > L or j > R:
            raise IndexError(f"bond (-{i}, {j}) leaves the window")
        m[L - i, j] = True
    return m


def ladder_measure(bonds: Sequence[tuple[int, int]], nu_minus: FiniteGibbsMeasure,
                   nu_plus: FiniteGibbsMeasure, p: ModelParams) -> CoupledMeasure:
    """nu^(k) on the window of the two half-line tables, restoring ``bonds``."""
    L, R = nu_minus.n, nu_plus.n - 1
    return CoupledMeasure(nu_minus, nu_plus, cross_couplings(L, R, p, bond_mask(bonds, L, R)))


@dataclass(frozen=True)
class DensityEstimate:
    k_or_N: int
    numerator: Estimate
    value: float
    log_value: float
    log_mode: bool = True


@dataclass(frozen=True)
class LadderStep:
    k: int
    bond: tuple[int, int]
    coupling: float
    pair_mean: float
    normalizer: float


def density_ratio_step(k: int, order: CrossBondOrder, nu_prev: CoupledMeasure, p: ModelParams) -> LadderStep:
    """Normaliser of d nu^(k) / d nu^(k-1): E[exp(J u v)] = cosh J + sinh J E[u v]."""
    i, j = order.bonds[k - 1]
    J = p.beta * (i + j) ** (-p.alpha)
    uv = nu_prev.expectation([-i, j])
    return LadderStep(k, (i, j), J, uv, math.cosh(J) + math.sinh(J) * uv)


def ladder(N: int, nu_minus: FiniteGibbsMeasure, nu_plus: FiniteGibbsMeasure,
           p: ModelParams) -> list[LadderStep]:
    """All steps k = 1..k_N, each evaluated under the exact nu^(k-1)."""
    order = enumerate_cross_bonds(N)
    steps = []
    for k in range(1, order.prefix_marks[N] + 1):
        prev = ladder_measure(order.bonds[: k - 1], nu_minus, nu_plus, p)
        steps.append(density_ratio_step(k, order, prev, p))
    return steps


def direct_normalizer(N: int, nu_minus: FiniteGibbsMeasure, nu_plus: FiniteGibbsMeasure,
                      p: ModelParams) -> float:
    """log of the integral of exp(-W_[N]) against the product measure, computed in one pass."""
    order = enumerate_cross_bonds(N)
    return ladder_measure(order.prefix(N), nu_minus, nu_plus, p).log_normalizer


def _mean_minus_w(measure: CoupledMeasure, N: int, p: ModelParams) -> float:
    """Integral of -W_[N] = beta sum s_{-i} s_j (i+j)^-alpha under ``measure``."""
    table = measure.pair_table([-i for i in range(1, N + 1)])
    i = np.arange(1, N + 1)[:, None]
    j = np.arange(N + 1)[None, :]
    return float(np.sum(p.beta * (i + j) ** (-p.alpha) * table[:, : N + 1]))


@dataclass(frozen=True)
class EntropyPoint:
    N: int
    mean_minus_w: Estimate  # integral of -W under nu^(k_N)
    log_normalizer: Estimate  # log integral of exp(-W) under nu0
    entropy: Estimate
    ess: float | None = None


def relative_entropy_sequence(N_list: Sequence[int], p: ModelParams, backend) -> list[EntropyPoint]:
    """Integral of f log f against nu0 via -E_{nu^(k)} W - log E_{nu0} exp(-W), for each N.

    ``backend`` is a pair of exact half-line tables ``(nu_minus, nu_plus)`` or a
    pair of ``SampleRun`` objects holding independent draws from the two halves.
    """
    out = []
    left, right = backend
    if isinstance(left, FiniteGibbsMeasure):
        for N in N_list:
            order = enumerate_cross_bonds(N)
            m = ladder_measure(order.prefix(N), left, right, p)
            a = _mean_minus_w(m, N, p)
            b = m.log_normalizer
            out.append(EntropyPoint(N, Estimate(a, 0.0), Estimate(b, 0.0), Estimate(a - b, 0.0)))
        return out
    if isinstance(left, SampleRun):
        n = min(len(left.samples), len(right.samples))
        xi = left.samples[:n].astype(np.float64)
        eta = right.samples[:n].astype(np.float64)
        for N in N_list:
            L = xi.shape[1]
            i = np.arange(1, N + 1)
            Jm = p.beta * (i[:, None] + np.arange(N + 1)[None, :]) ** (-p.alpha)
            minus_w = np.einsum("si,ij,sj->s", xi[:, L - i], Jm, eta[:, : N + 1])
            ess = effective_sample_size(minus_w)
            if ess < MIN_ESS:
                raise ESSCollapseError(ess, n, MIN_ESS)
            lz = logsumexp(minus_w) - math.log(n)
            w = np.exp(minus_w - minus_w.max())
            a = float(np.dot(w, minus_w) / w.sum())
            a_err, b_err = _jackknife_pair(minus_w)
            out.append(EntropyPoint(N, Estimate(a, a_err), Estimate(lz, b_err),
                                    Estimate(a - lz, math.hypot(a_err, b_err)), ess))
        return out
    raise TypeError("backend must hold exact tables or sample runs")


def _jackknife_pair(minus_w: np.ndarray, blocks: int = 20) -> tuple[float, float]:
    n = minus_w.size // blocks * blocks
    x = minus_w[:n].reshape(blocks, -1)
    est_a, est_b = [], []
    for b in range(blocks):
        rest = np.delete(x, b, axis=0).ravel()
        w = np.exp(rest - rest.max())
        est_a.append(float(np.dot(w, rest) / w.sum()))
        est_b.append(logsumexp(rest) - math.log(rest.size))
    f = (blocks - 1) / blocks
    return (math.sqrt(f * float(np.sum((np.array(est_a) - np.mean(est_a)) ** 2))),
            math.sqrt(f * float(np.sum((np.array(est_b) - np.mean(est_b)) ** 2))))


def w_oscillation(N: int, p: ModelParams, left_only: bool = False) -> OscillationVector:
    """Per-site oscillation of W_[N]: delta_{-i} = 2 beta sum_j (i+j)^-alpha and symmetrically for j."""
    i = np.arange(1, N + 1)
    j = np.arange(N + 1)
    M = 2.0 * p.beta * (i[:, None] + j[None, :]).astype(np.float64) ** (-p.alpha)
    left_vals = M.sum(axis=1)[::-1]  # sites -N..-1
    if left_only:
        return OscillationVector(-i[::-1], left_vals)
    sites = np.concatenate([-i[::-1], j])
    return OscillationVector(sites, np.concatenate([left_vals, M.sum(axis=0)]))


def gcb_sandwich(N: int, p: ModelParams, nu_minus: FiniteGibbsMeasure, nu_plus: FiniteGibbsMeasure
                 ) -> tuple[float, float, float]:
    """(lower, direct, upper) for log E_{nu0} exp(-W_[N]).

    Bounds are -E_{nu0} W -+ D ||delta W||^2 with D = 4 / (1 - c)^2.
    """
    pref = cbar_prefactor(p)
    c = pref * 2.0 * p.tails.zeta_alpha
    if p.beta > 0 and c >= 1.0:
        raise PreconditionError(f"strong-field contraction {c:.4g} is not below 1")
    D = 4.0 / (1.0 - c) ** 2
    osc = w_oscillation(N, p).l2_norm_sq
    order = enumerate_cross_bonds(N)
    m_minus = nu_minus.magnetizations()
    m_plus = nu_plus.magnetizations()
    L = nu_minus.n
    i = np.arange(1, N + 1)
    Jm = p.beta * (i[:, None] + np.arange(N + 1)[None, :]) ** (-p.alpha)
    mean_minus_w = float(np.sum(Jm * np.outer(m_minus[L - i], m_plus[: N + 1])))
    direct = ladder_measure(order.prefix(N), nu_minus, nu_plus, p).log_normalizer
    return mean_minus_w - D * osc, direct, mean_minus_w + D * osc


def intermediate_contraction(k: int, L: int, R: int, p: ModelParams) -> tuple[float, float]:
    """(c-bar of nu^(k)'s interaction on [-L, R], c-bar of the full interaction)."""
    w = Window(-L, R, Side.TWO_SIDED)
    order = enumerate_cross_bonds(max(L, R))
    n = w.size
    keep = np.ones((n, n), dtype=bool)
    restored = set(order.bonds[:k])
    for i in range(1, L + 1):
        for j in range(R + 1):
            if (i, j) not in restored:
                keep[w.index(-i), w.index(j)] = keep[w.index(j), w.index(-i)] = False
    return cbar_matrix(w, p, keep).cbar_rowsum_max, cbar_matrix(w, p).cbar_rowsum_max
