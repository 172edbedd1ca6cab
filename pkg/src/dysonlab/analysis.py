"""Experiments on the split chain: decay of one-point gaps, cross-sum boundedness,
cylinder averages of the half-line density, correlation-inequality audits and
the Bernoulli-product dichotomy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dobrushin import (
    DobrushinData,
    PowerFit,
    cbar_matrix,
    cbar_prefactor,
    cross_removal_gap,
    dbar_matrix,
    fit_power_law,
    infinite_row_bound,
)
from .gibbs import (
    BoundaryCondition,
    CoupledMeasure,
    FiniteGibbsMeasure,
    Schedule,
    cross_couplings,
    exact_measure,
    glauber_sample,
    half_line,
    jackknife,
    two_sided,
)
from .intermediate import bond_mask, enumerate_cross_bonds
from .model import BCKind, ModelParams, Side, Window, spins_of, tail_sum, zeta

__all__ = [
    "TSequence",
    "Claim3Report",
    "CylinderScan",
    "AuditReport",
    "KakutaniReport",
    "ProductPotentialModel",
    "default_bc",
    "t_ceiling",
    "t_sequence",
    "claim3_scan",
    "cylinder_scan",
    "inequality_audit",
    "kakutani_experiment",
    "plateau",
]

CEILING_HALF_WIDTH = 1024


def default_bc(p: ModelParams) -> BoundaryCondition:
    """Outer boundary for windowed half-lines: aligned with the field, free at h = 0."""
    return BoundaryCondition.aligned(p.h)


def _alternative_bcs(bc: BoundaryCondition) -> list[BoundaryCondition]:
    opts = [BoundaryCondition.free(), BoundaryCondition.plus(), BoundaryCondition.minus()]
    return [b for b in opts if b.kind is not bc.kind]


def plateau(values: Sequence[float], rel_tol: float) -> tuple[bool, float]:
    """Every increment in the last quarter is at most ``rel_tol`` times the running total.

    Returns the verdict and the worst relative increment seen there.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    start = max(1, n - max(1, n // 4))
    worst = 0.0
    for k in range(start, n):
        scale = abs(v[k])
        inc = abs(v[k] - v[k - 1])
        worst = max(worst, inc / scale if scale > 0 else (0.0 if inc == 0 else math.inf))
    return bool(worst <= rel_tol), float(worst)


# ---------------------------------------------------------------------------
# t_n


def _resolvent_window(p: ModelParams, half_width: int) -> DobrushinData | None:
    w = Window(-half_width, half_width - 1, Side.TWO_SIDED)
    data = cbar_matrix(w, p)
    if not data.contracting:
        return None
    return dbar_matrix(data, fit=False)


def t_ceiling(ns: Sequence[int], p: ModelParams, half_width: int = CEILING_HALF_WIDTH) -> np.ndarray | None:
    """2 (D-bar b)_n on Z, with D-bar restricted to [-H, H-1] and the rest bounded by row mass.

    ``None`` outside the strong-field contraction region.
    """
    if p.beta == 0:
        return np.zeros(len(ns))
    data = _resolvent_window(p, half_width)
    if data is None:
        return None
    sites = data.window.sites
    b = cross_removal_gap(sites, p)
    b_max = max(float(b.max()), 0.5 * p.beta * p.tails.tail(half_width))
    rows = data.dbar[[data.window.index(int(n)) for n in ns]]
    return 2.0 * infinite_row_bound(rows, b, b_max, data.cbar_rowsum_max)


@dataclass
class TSequence:
    params: ModelParams
    n: np.ndarray
    t: np.ndarray
    err: np.ndarray
    ceiling: np.ndarray | None
    fit: PowerFit | None
    fit_range: tuple[int, int]
    mu0: float
    bc: str
    backend: str
    sensitivity: dict = field(default_factory=dict)

    @property
    def below_ceiling(self) -> bool | None:
        if self.ceiling is None:
            return None
        return bool(np.all(self.t - 3.0 * self.err <= self.ceiling + 1e-12))


def _exact_pieces(L: int, R: int, p: ModelParams, bc: BoundaryCondition, threads: int):
    nu_plus = half_line(R + 1, p, bc, Side.RIGHT_HALF, threads)
    nu_minus = nu_plus.reflected() if R + 1 == L else half_line(L, p, bc, Side.LEFT_HALF, threads)
    mu = two_sided(L, R, p, bc, nu_minus, nu_plus, threads)
    return nu_minus, nu_plus, mu


def t_sequence(n_max: int, p: ModelParams, L: int, R: int, *, bc: BoundaryCondition | None = None,
               fit_range: tuple[int, int] | None = None, backend: str = "exact",
               sensitivity: bool = False, schedule: Schedule | None = None, seed: int = 0,
               threads: int = 1) -> TSequence:
    """t_n = |nu0(sigma_n) - mu(sigma_0)| for n = -n_max..n_max on the window [-L, R].

    The fit uses n in ``fit_range`` on the right half (default 1..n_max), regressing
    log t_n on log(n + 1).
    """
    if n_max > R or n_max > L:
        raise IndexError(f"n_max={n_max} does not fit the windows L={L}, R={R}")
    bc = bc or default_bc(p)
    ns = np.arange(-n_max, n_max + 1)
    if backend == "exact":
        nu_minus, nu_plus, mu = _exact_pieces(L, R, p, bc, threads)
        mu0 = mu.magnetization(0)
        mp = nu_plus.magnetizations()
        mm = nu_minus.magnetizations()
        vals = np.array([mp[n] if n >= 0 else mm[L + n] for n in ns])
        err = np.zeros(ns.size)
        mu_err = 0.0
    elif backend == "mc":
        schedule = schedule or Schedule(20000, 2000, 1)
        runs = _mc_runs(L, R, p, bc, schedule, seed)
        mu_est = jackknife(runs["mu"].samples[:, L].astype(np.float64))
        mu0, mu_err = mu_est.value, mu_est.stderr
        vals = np.empty(ns.size)
        err = np.empty(ns.size)
        for k, n in enumerate(ns):
            run = runs["plus"] if n >= 0 else runs["minus"]
            e = jackknife(run.samples[:, run.window.index(int(n))].astype(np.float64))
            vals[k], err[k] = e.value, math.hypot(e.stderr, mu_err)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    t = np.abs(vals - mu0)
    lo, hi = fit_range or (1, n_max)
    sel = (ns >= lo) & (ns <= hi)
    fit = fit_power_law(ns[sel] + 1.0, t[sel]) if p.beta > 0 and np.all(t[sel] > 0) else None
    ceiling = t_ceiling(ns, p)
    out = TSequence(p, ns, t, err, ceiling, fit, (lo, hi), mu0, bc.kind.value, backend)
    if sensitivity and backend == "exact":
        for alt in _alternative_bcs(bc):
            a_minus, a_plus, a_mu = _exact_pieces(L, R, p, alt, threads)
            m0 = a_mu.magnetization(0)
            mp, mm = a_plus.magnetizations(), a_minus.magnetizations()
            alt_t = np.abs(np.array([mp[n] if n >= 0 else mm[L + n] for n in ns]) - m0)
            out.sensitivity[alt.kind.value] = alt_t
    return out


def _mc_runs(L: int, R: int, p: ModelParams, bc: BoundaryCondition, schedule: Schedule, seed: int) -> dict:
    seeds = np.random.SeedSequence(seed).generate_state(3)
    return {
        "plus": glauber_sample(Window.right(R + 1), bc, p, schedule, int(seeds[0])),
        "minus": glauber_sample(Window.left(L), bc, p, schedule, int(seeds[1])),
        "mu": glauber_sample(Window(-L, R, Side.TWO_SIDED), bc, p, schedule, int(seeds[2])),
    }


# ---------------------------------------------------------------------------
# cross sums


@dataclass
class Claim3Report:
    params: ModelParams
    N: np.ndarray
    cov_sums: np.ndarray
    gap_sums: np.ndarray
    cov_terms: np.ndarray = field(repr=False)
    follmer_ceiling: np.ndarray | None = field(repr=False)
    rel_tol: float = 1e-3

    @property
    def cov_plateau(self) -> tuple[bool, float]:
        return plateau(self.cov_sums, self.rel_tol)

    @property
    def gap_plateau(self) -> tuple[bool, float]:
        return plateau(self.gap_sums, self.rel_tol)

    @property
    def gap_monotone(self) -> bool:
        return bool(np.all(np.diff(self.gap_sums) >= -1e-10))

    @property
    def cov_monotone(self) -> bool:
        return bool(np.all(np.diff(self.cov_sums) >= -1e-10))

    @property
    def follmer_ok(self) -> bool | None:
        if self.follmer_ceiling is None:
            return None
        return bool(np.all(np.abs(self.cov_terms) <= self.follmer_ceiling + 1e-12))

    @property
    def gap_increment_decay(self) -> PowerFit | None:
        inc = np.diff(self.gap_sums)
        n = self.N[1:]
        half = n.size // 2
        if half < 2 or np.any(inc[half:] <= 0):
            return None
        return fit_power_law(n[half:], inc[half:])


def _follmer_ceiling(N_max: int, p: ModelParams) -> np.ndarray | None:
    """Bound on |cov_mu(sigma_-i, sigma_j)| by the infinite D-bar entry, for i=1..N, j=0..N."""
    data = _resolvent_window(p, CEILING_HALF_WIDTH)
    if data is None:
        return None
    c = data.cbar_rowsum_max
    out = np.empty((N_max, N_max + 1))
    for i in range(1, N_max + 1):
        r = data.window.index(-i)
        row = data.dbar[r]
        slack = max(1.0 / (1.0 - c) - float(row.sum()), 0.0)
        for j in range(N_max + 1):
            out[i - 1, j] = row[data.window.index(j)] + slack
    return out


def claim3_scan(N_max: int, p: ModelParams, L: int, R: int, *, bc: BoundaryCondition | None = None,
                rel_tol: float = 1e-3, threads: int = 1) -> Claim3Report:
    """Partial sums over i=1..N, j=0..N of beta (i+j)^-alpha times cov_mu and times the mean gap."""
    if N_max > L or N_max > R:
        raise IndexError("N_max exceeds the window")
    bc = bc or default_bc(p)
    nu_minus, nu_plus, mu = _exact_pieces(L, R, p, bc, threads)
    mags = mu.magnetizations()
    m0 = mags[L]
    left_sites = [-i for i in range(1, N_max + 1)]
    pairs = mu.pair_table(left_sites)[:, : N_max + 1]
    ml = np.array([mags[L - i] for i in range(1, N_max + 1)])
    mr = mags[L: L + N_max + 1]
    cov = pairs - np.outer(ml, mr)
    nl = nu_minus.magnetizations()
    nr = nu_plus.magnetizations()
    gap = m0 ** 2 - np.outer(np.array([nl[L - i] for i in range(1, N_max + 1)]), nr[: N_max + 1])
    i = np.arange(1, N_max + 1)[:, None]
    j = np.arange(N_max + 1)[None, :]
    K = p.beta * (i + j).astype(np.float64) ** (-p.alpha)
    Ns = np.arange(1, N_max + 1)
    cs = np.array([float(np.sum((K * cov)[:N, : N + 1])) for N in Ns])
    gs = np.array([float(np.sum((K * gap)[:N, : N + 1])) for N in Ns])
    ceiling = _follmer_ceiling(N_max, p) if p.beta > 0 else np.zeros_like(cov)
    return Claim3Report(p, Ns, cs, gs, cov, ceiling, rel_tol)


# ---------------------------------------------------------------------------
# cylinder averages


@dataclass
class CylinderScan:
    params: ModelParams
    n: np.ndarray
    average: np.ndarray
    error: np.ndarray
    lower_bound: np.ndarray  # closed form with the finite-N inner sum i = R..N
    lower_bound_limit: np.ndarray  # same with i = R..infinity
    jensen_bound: np.ndarray  # before the FKG and R, kappa simplifications
    c9: float
    R: int
    kappa: float
    mu0: float
    N: int
    exploratory: bool
    flipped: bool = False
    growth_fit: tuple[float, float] = (math.nan, math.nan)
    half_slopes: tuple[float, float] = (math.nan, math.nan)

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.average) > 0))

    @property
    def dominates_bound(self) -> bool:
        return bool(np.all(self.average + 3.0 * self.error >= self.lower_bound))

    @property
    def stable_growth(self) -> bool:
        """Both half-range slopes of log A_n against n^(2-alpha) positive and within a factor 2."""
        a, b = self.half_slopes
        return a > 0 and b > 0 and max(a, b) <= 2.0 * min(a, b)


def cylinder_scan(n_max: int, N: int, p: ModelParams, L: int, R: int, *,
                  bc: BoundaryCondition | None = None, threads: int = 1) -> CylinderScan:
    """A_n = average of the density f_+^(N) over the cylinder of n+1 leading plus spins.

    f_+^(N)(eta) = E_{nu_-}[exp(-W_[N](., eta))] / E_{nu0}[exp(-W_[N])] is computed
    for every right configuration; the cylinder average is exact. For h < 0
    the flipped model is scanned, which equals the scan over minus cylinders.
    """
    if n_max >= R:
        raise IndexError("n_max must stay below the right window size")
    if N > L or N > R:
        raise IndexError("N exceeds the window")
    flipped = p.h < 0
    if flipped:
        p = p.flipped()
    bc = bc or default_bc(p)
    nu_minus, nu_plus, mu = _exact_pieces(L, R, p, bc, threads)
    mask = bond_mask(enumerate_cross_bonds(N).prefix(N), L, R)
    coupled = CoupledMeasure(nu_minus, nu_plus, cross_couplings(L, R, p, mask))
    dens = coupled.right_density()
    probs = nu_plus.probs
    x = np.arange(probs.size)
    ns = np.arange(n_max + 1)
    avg = np.empty(ns.size)
    for k, n in enumerate(ns):
        full = (1 << (n + 1)) - 1
        sel = (x & full) == full
        avg[k] = float(np.dot(probs[sel], dens[sel]) / probs[sel].sum())
    mu0 = mu.magnetization(0)
    nl = nu_minus.magnetizations()
    nr = nu_plus.magnetizations()
    i = np.arange(1, N + 1)
    nl_i = nl[L - i]
    K = p.beta * (i[:, None] + np.arange(N + 1)[None, :]).astype(np.float64) ** (-p.alpha)
    # C9 measured: worst ratio between the density and its mean-field exponent
    if p.beta > 0:
        eta = spins_of(x, R + 1)[:, : N + 1].astype(np.float64)
        expo = (eta - nr[: N + 1]) @ (K.T @ nl_i)
        logr = np.log(dens) - expo
        c9 = float(math.exp(max(logr.max(), -logr.min())))
    else:
        c9 = 1.0
    R_idx = next((k for k in range(1, L + 1) if nl[L - k] >= mu0 / 2.0), None)
    if R_idx is None:
        raise ArithmeticError("no left site reaches half the bulk magnetisation inside the window")
    kappa = float(nr.max())
    pref = p.beta * (1.0 - kappa) * mu0 / 2.0
    tails = p.tails
    lb, lb_inf, jb = [], [], []
    for n in ns:
        j = np.arange(n + 1)
        finite = float(np.sum(tails.tail(R_idx + j) - tails.tail(N + j + 1))) if R_idx <= N else 0.0
        infinite = float(np.sum(tails.tail(R_idx + j)))
        lb.append(math.exp(pref * finite) / c9)
        lb_inf.append(math.exp(pref * infinite) / c9)
        jb.append(math.exp(float(np.sum(K[:, : n + 1] * np.outer(nl_i, 1.0 - nr[: n + 1])))) / c9)
    scan = CylinderScan(p, ns, avg, np.zeros(ns.size), np.array(lb), np.array(lb_inf), np.array(jb),
                        c9, R_idx, kappa, mu0, N, exploratory=cbar_prefactor(p) * 2.0 * zeta(p.alpha) >= 1.0,
                        flipped=flipped)
    if p.beta > 0 and n_max >= 4:
        xs = ns.astype(np.float64) ** (2.0 - p.alpha)
        ly = np.log(avg)
        scan.growth_fit = tuple(float(v) for v in np.polyfit(xs, ly, 1))
        mid = (n_max + 1) // 2
        first = np.polyfit(xs[1: mid + 1], ly[1: mid + 1], 1)[0]
        second = np.polyfit(xs[mid:], ly[mid:], 1)[0]
        scan.half_slopes = (float(first), float(second))
    return scan


# ---------------------------------------------------------------------------
# correlation inequalities


def _walsh_means(probs: np.ndarray, n: int) -> np.ndarray:
    """E[sigma_A] for every subset mask A, by a fast Walsh-Hadamard transform."""
    v = probs.astype(np.float64).copy()
    for k in range(n):
        v = v.reshape(-1, 2, 1 << k)
        a = v[:, 0, :] + v[:, 1, :]
        b = v[:, 1, :] - v[:, 0, :]
        v = np.stack([a, b], axis=1).reshape(-1)
    return v


@dataclass
class AuditReport:
    checks: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    worst_margin: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def inequality_audit(w_max: int, p_grid: Iterable[ModelParams], *, tol: float = 1e-12,
                     t_grid: Sequence[float] = (0.0, 0.25, 0.5, 1.0, 2.0),
                     bcs: Sequence[BoundaryCondition] = (BoundaryCondition.free(), BoundaryCondition.plus())
                     ) -> AuditReport:
    """GKS-1, GKS-2, the exponential corollary and FKG against cylinder indicators.

    Every subset pair of every window of 2..w_max sites is checked for each
    parameter point with h >= 0 and each listed boundary condition.
    """
    rep = AuditReport()
    for key in ("gks1", "gks2", "corollary", "fkg"):
        rep.checks[key] = 0
        rep.worst_margin[key] = math.inf

    def record(kind, margin, witness):
        rep.checks[kind] += int(np.size(margin))
        worst = float(np.min(margin))
        rep.worst_margin[kind] = min(rep.worst_margin[kind], worst)
        if worst < -tol:
            rep.violations.append({"check": kind, "margin": worst, **witness})

    for p in p_grid:
        if p.h < 0:
            raise ValueError("the audit covers h >= 0 only")
        for bc in bcs:
            for n in range(2, w_max + 1):
                w = Window.right(n)
                m = exact_measure(w, bc, p)
                means = _walsh_means(m.probs, n)
                wit = {"alpha": p.alpha, "beta": p.beta, "h": p.h, "bc": bc.kind.value, "size": n}
                masks = np.arange(1 << n)
                record("gks1", means[1:], wit)
                sym = means[np.bitwise_xor.outer(masks, masks)]
                gks2 = sym - np.outer(means, means)
                if np.min(gks2) < -tol:
                    a, b = np.unravel_index(int(np.argmin(gks2)), gks2.shape)
                    wit = {**wit, "A": int(a), "B": int(b)}
                record("gks2", gks2, wit)
                for t in t_grid:
                    # E[s_B e^{t s_A}] - E[s_B] E[e^{t s_A}] with e^{t s} = cosh t + s sinh t
                    lhs = math.cosh(t) * means[None, :] + math.sinh(t) * sym
                    rhs = means[None, :] * (math.cosh(t) + math.sinh(t) * means[:, None])
                    record("corollary", lhs - rhs, {**wit, "t": t})
                spins = spins_of(masks, n).astype(np.float64)
                for cyl in range(n):
                    full = (1 << (cyl + 1)) - 1
                    ind = ((masks & full) == full).astype(np.float64)
                    pc = float(np.dot(m.probs, ind))
                    cov = (m.probs * ind) @ spins - pc * (m.probs @ spins)
                    record("fkg", cov, {**wit, "cylinder": cyl})
    return rep


# ---------------------------------------------------------------------------
# Bernoulli products


@dataclass(frozen=True)
class ProductPotentialModel:
    """Site n carries Bernoulli(p_n) with p_n = e^{beta S_n} / (2 cosh beta S_n), S_n = sum_{i<=n} i^-alpha."""

    alpha: float
    beta: float

    def partial(self, n: np.ndarray) -> np.ndarray:
        return zeta(self.alpha) - tail_sum(np.asarray(n) + 1, self.alpha)

    def p_n(self, n: np.ndarray) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh(self.beta * self.partial(n)))

    @property
    def p_inf(self) -> float:
        return 0.5 * (1.0 + math.tanh(self.beta * zeta(self.alpha)))

    def gap(self, n: np.ndarray) -> np.ndarray:
        """p_inf - p_n without cancellation."""
        z = zeta(self.alpha)
        s = self.partial(n)
        return np.sinh(self.beta * tail_sum(np.asarray(n) + 1, self.alpha)) / (
            2.0 * math.cosh(self.beta * z) * np.cosh(self.beta * s))

    def log_affinity(self, n: np.ndarray) -> np.ndarray:
        """a_n = -log(sqrt(p p_n) + sqrt((1-p)(1-p_n))) = -log1p(-H^2)."""
        d = self.gap(n)
        pinf = self.p_inf
        pn = self.p_n(n)
        r1 = d / (math.sqrt(pinf) + np.sqrt(pn))
        r2 = d / (math.sqrt(1.0 - pinf) + np.sqrt(1.0 - pn))
        h2 = 0.5 * (r1 ** 2 + r2 ** 2)
        return -np.log1p(-h2)


@dataclass
class KakutaniReport:
    alpha: float
    beta: float
    n_max: int
    record_n: np.ndarray
    a_n: np.ndarray
    partial_sums: np.ndarray
    ratio_gap: tuple[float, float]  # band of a_n / (p_n - p_inf)^2 on [1e2, n_max]
    ratio_power: tuple[float, float]  # band of a_n / n^(2-2alpha)
    gap_limit: float
    drift_gap: float
    drift_power: float
    last_decade_increment: float
    monotone: bool
    verdict: str
    plateau_tol: float

    @property
    def plateau(self) -> bool:
        return self.last_decade_increment <= self.plateau_tol

    @property
    def bands_bounded(self) -> bool:
        lo1, hi1 = self.ratio_gap
        lo2, hi2 = self.ratio_power
        return 0 < lo1 <= hi1 < math.inf and 0 < lo2 <= hi2 < math.inf


def kakutani_experiment(n_max: int, alpha: float, beta: float, plateau_tol: float = 1e-6) -> KakutaniReport:
    if alpha <= 1 or beta <= 0:
        raise ValueError("need alpha > 1 and beta > 0")
    m = ProductPotentialModel(alpha, beta)
    n = np.arange(1, n_max + 1)
    a = m.log_affinity(n)
    sums = np.cumsum(a)
    band = n >= min(100, n_max)
    r_gap = a[band] / m.gap(n[band]) ** 2
    r_pow = a[band] / n[band].astype(np.float64) ** (2.0 - 2.0 * alpha)
    pinf = m.p_inf
    decade = max(1, n_max // 10)
    last_inc = float(sums[-1] - sums[decade - 1])
    rec = np.unique(np.round(np.logspace(0, math.log10(n_max), 25)).astype(np.int64))
    verdict = ("convergent: absolutely continuous" if 2.0 * alpha - 2.0 > 1.0
               else "divergent: mutually singular")
    return KakutaniReport(
        alpha, beta, n_max, rec, a[rec - 1], sums[rec - 1],
        (float(r_gap.min()), float(r_gap.max())), (float(r_pow.min()), float(r_pow.max())),
        1.0 / (8.0 * pinf * (1.0 - pinf)),
        float(abs(r_gap[-1] - r_gap[0]) / r_gap[0]), float(abs(r_pow[-1] - r_pow[0]) / r_pow[0]),
        last_inc, bool(np.all(a > 0)), verdict, plateau_tol,
    )
