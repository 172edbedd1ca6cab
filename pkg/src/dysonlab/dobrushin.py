"""Dobrushin interdependence bounds for the Dyson chain.

Covers both uniqueness criteria, the closed-form matrix C-bar and its
resolvent D-bar = (I - C-bar)^-1, exact single-site interdependences, the
concentration constant and the comparison bound between two specifications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .gibbs import FiniteGibbsMeasure
from .model import ModelParams, Window, spins_of, zeta

__all__ = [
    "ContractionError",
    "OscillationVector",
    "DobrushinData",
    "UniquenessVerdict",
    "PowerFit",
    "oscillation",
    "duc_high_temperature",
    "duc_strong_field",
    "strong_field_rhs_generic",
    "uniqueness_verdict",
    "cbar_prefactor",
    "cbar_matrix",
    "exact_c_matrix",
    "dbar_matrix",
    "neumann_check",
    "fit_power_law",
    "gcb_check",
    "spec_comparison_bound",
    "infinite_row_bound",
    "convolution_profile",
    "cross_removal_gap",
    "best_contraction",
]


class ContractionError(ValueError):
    """Raised when a row-sum contraction coefficient is not below one."""


@dataclass(frozen=True)
class OscillationVector:
    sites: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("oscillations are nonnegative")

    @property
    def l2_norm_sq(self) -> float:
        return float(np.sum(np.asarray(self.values) ** 2))

    def at(self, site: int) -> float:
        idx = np.flatnonzero(self.sites == site)
        return float(self.values[idx[0]]) if idx.size else 0.0


def oscillation(table: np.ndarray, window: Window) -> OscillationVector:
    """delta_k F = sup |F(x) - F(x with spin k flipped)| for a function tabulated over configurations."""
    F = np.asarray(table, dtype=np.float64)
    n = window.size
    vals = np.empty(n)
    for k in range(n):
        v = F.reshape(-1, 2, 1 << k)
        vals[k] = float(np.max(np.abs(v[:, 1, :] - v[:, 0, :])))
    return OscillationVector(window.sites.copy(), vals)


# ---------------------------------------------------------------------------
# uniqueness criteria


@dataclass(frozen=True)
class UniquenessVerdict:
    high_temp_ok: bool
    strong_field_ok: bool
    high_temp_margin: float
    strong_field_margin: float
    generic_rhs: float
    closed_form_rhs: float
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.high_temp_ok or self.strong_field_ok


def duc_high_temperature(p: ModelParams) -> tuple[bool, float]:
    """beta <= 1/(2 zeta(alpha)); the margin is threshold minus beta."""
    threshold = 1.0 / (2.0 * zeta(p.alpha))
    return p.beta <= threshold, threshold - p.beta


def strong_field_rhs_generic(p: ModelParams, cutoff: int = 1000) -> float:
    """Right side of the general strong-field criterion, specialised to pair couplings.

    log sup_i { exp(1/2 sum_{A ni i, |A|>=2} delta(Phi_A)) * sum_{A ni i} (|A|-1) delta(Phi_A) }
    with delta(Phi_{ij}) = 2 beta |i-j|^-alpha. Singletons have |A|-1 = 0. The
    bond sum is taken explicitly up to ``cutoff`` and closed by tail sums.
    """
    if p.beta == 0:
        return -math.inf
    d = np.arange(1, cutoff + 1, dtype=np.float64)
    per_side = float(np.sum(2.0 * p.beta * d ** (-p.alpha))) + 2.0 * p.beta * p.tails.tail(cutoff + 1)
    total = 2.0 * per_side  # every site has bonds on both sides
    return 0.5 * total + math.log(total)


def duc_strong_field(p: ModelParams) -> tuple[bool, float, float, float]:
    """(ok, margin, generic_rhs, closed_form_rhs) for |h| > 2 beta zeta + log(4 beta zeta)."""
    if p.beta == 0:
        return True, math.inf, -math.inf, -math.inf
    bz = p.beta * zeta(p.alpha)
    closed = 2.0 * bz + math.log(4.0 * bz)
    generic = strong_field_rhs_generic(p)
    if abs(generic - closed) > 1e-10:
        raise ArithmeticError(f"generic and closed-form strong-field thresholds differ by {generic - closed:.3e}")
    return abs(p.h) > generic, abs(p.h) - generic, generic, closed


def uniqueness_verdict(p: ModelParams) -> UniquenessVerdict:
    ht, ht_margin = duc_high_temperature(p)
    sf, sf_margin, generic, closed = duc_strong_field(p)
    note = "beta = 0: independent spins" if p.beta == 0 else ""
    return UniquenessVerdict(ht, sf, ht_margin, sf_margin, generic, closed, note)


# ---------------------------------------------------------------------------
# C-bar and D-bar


class PowerFit(NamedTuple):
    exponent: float
    prefactor: float
    residual: float


def fit_power_law(x: np.ndarray, y: np.ndarray) -> PowerFit:
    """Least squares for log y = log A + k log x; residual is the RMS in log space."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    ly = np.log(np.asarray(y, dtype=np.float64))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return PowerFit(float(coef[0]), float(math.exp(coef[1])), float(math.sqrt(np.mean(res ** 2))))


@dataclass(frozen=True)
class DobrushinData:
    window: Window
    params: ModelParams
    cbar: np.ndarray
    cbar_rowsum_max: float
    dbar: np.ndarray | None = None
    jaffard_fit: PowerFit | None = None

    @property
    def gcb_constant(self) -> float:
        c = self.cbar_rowsum_max
        return 4.0 / (1.0 - c) ** 2 if c < 1 else math.inf

    @property
    def contracting(self) -> bool:
        return self.cbar_rowsum_max < 1.0


def cbar_prefactor(p: ModelParams) -> float:
    """2 beta exp(-|h| + 2 beta zeta(alpha)); C-bar_ij is this times |i-j|^-alpha."""
    if p.beta == 0:
        return 0.0
    return 2.0 * p.beta * math.exp(-abs(p.h) + 2.0 * p.beta * zeta(p.alpha))


def cbar_matrix(w: Window, p: ModelParams, keep: np.ndarray | None = None) -> DobrushinData:
    """C-bar on a window; the row-sum maximum includes both off-window tails.

    ``keep`` (symmetric boolean, window x window) removes in-window bonds to give
    C-bar of a sub-interaction: row i gets the prefactor
    exp(-|h| + sum of its remaining couplings), and only kept bonds appear.
    Bonds leaving the window are always kept.
    """
    n = w.size
    d = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        J = np.where(d > 0, p.beta * d ** (-p.alpha), 0.0)
    if keep is not None:
        k = np.asarray(keep, dtype=bool)
        J = np.where(k & k.T, J, 0.0)
    tails = p.tails
    idx = np.arange(n)
    outside = p.beta * (tails.tail(idx + 1) + tails.tail(n - idx))
    if keep is None:
        row_pref = np.full(n, cbar_prefactor(p) / p.beta if p.beta else 0.0)
    else:
        row_pref = 2.0 * np.exp(-abs(p.h) + J.sum(axis=1) + outside)
    C = row_pref[:, None] * J
    rowsum = C.sum(axis=1) + row_pref * outside
    return DobrushinData(w, p, C, float(rowsum.max()) if n else 0.0)


def dbar_matrix(data: DobrushinData, fit: bool = True) -> DobrushinData:
    """Attach D-bar = (I - C-bar)^-1 and the off-diagonal decay fit of its centre row."""
    if not data.contracting:
        raise ContractionError(f"row-sum bound {data.cbar_rowsum_max:.6g} is not below 1")
    n = data.window.size
    eye = np.eye(n)
    D = np.linalg.solve(eye - data.cbar, eye)
    D = 0.5 * (D + D.T)  # symmetric in exact arithmetic
    jf = _jaffard_fit(D) if fit and n >= 20 else None
    return DobrushinData(data.window, data.params, data.cbar, data.cbar_rowsum_max, D, jf)


def _jaffard_fit(D: np.ndarray) -> PowerFit | None:
    """Fit D_{c, c+d} ~ A (1+d)^k over the top decade of admissible distances.

    Sites in the outer 10% at each edge are excluded; both directions from the
    centre row are averaged.
    """
    n = D.shape[0]
    c = n // 2
    edge = int(math.ceil(0.1 * n))
    dmax = min(c - edge, n - 1 - edge - c)
    if dmax < 10:
        return None
    d = np.arange(max(1, int(math.ceil(dmax / 10))), dmax + 1)
    y = 0.5 * (D[c, c + d] + D[c, c - d])
    if np.any(y <= 0):
        return None
    return fit_power_law(1.0 + d, y)


def neumann_check(data: DobrushinData, terms: int) -> tuple[float, float]:
    """(max row-sum error of the partial Neumann sum, geometric bound c^(N+1)/(1-c))."""
    if data.dbar is None:
        raise ValueError("dbar not computed")
    n = data.window.size
    S = np.eye(n)
    P = np.eye(n)
    for _ in range(terms):
        P = P @ data.cbar
        S = S + P
    err = float(np.max(np.abs(data.dbar - S).sum(axis=1)))
    c = data.cbar_rowsum_max
    return err, c ** (terms + 1) / (1.0 - c)


def _tanh_gap(s: np.ndarray | float, J: float) -> np.ndarray:
    return np.tanh(np.asarray(s) + J) - np.tanh(np.asarray(s) - J)


def _min_abs_over(lo: np.ndarray, hi: np.ndarray) -> float:
    """min |s| over the union of intervals [lo_k, hi_k]."""
    inside = (lo <= 0) & (hi >= 0)
    if np.any(inside):
        return 0.0
    return float(np.min(np.minimum(np.abs(lo), np.abs(hi))))


def exact_c_matrix(w: Window, p: ModelParams, enumerate_limit: int = 12) -> np.ndarray:
    """Single-site interdependences C_ij of the Dyson specification on Z, read on ``w``.

    C_ij = sup |tanh(s + J_ij) - tanh(s - J_ij)| / 2 over achievable fields s from
    all sites other than i, j. The gap is even in s and decreasing in |s|, so the
    sup sits at the achievable field closest to zero. Sites outside the window
    add an interval of half-width beta*(tail to the left + tail to the right).
    Windows up to ``enumerate_limit`` sites enumerate the in-window spins; larger
    ones use the full interval [h - S, h + S].
    """
    n = w.size
    C = np.zeros((n, n))
    if p.beta == 0 or n < 2:
        return C
    tails = p.tails
    zeta2 = 2.0 * tails.zeta_alpha
    idx = np.arange(n)
    dist = np.abs(np.subtract.outer(idx, idx)).astype(np.float64)
    for i in range(n):
        off = p.beta * (tails.tail(i + 1) + tails.tail(n - i))
        others = [k for k in range(n) if k != i]
        for j in others:
            J = p.beta * dist[i, j] ** (-p.alpha)
            if n <= enumerate_limit:
                rest = [k for k in others if k != j]
                coup = p.beta * dist[i, rest] ** (-p.alpha)
                spins = spins_of(np.arange(1 << len(rest)), len(rest)).astype(np.float64)
                centres = p.h + spins @ coup
                s_star = _min_abs_over(centres - off, centres + off)
            else:
                S = p.beta * zeta2 - J
                s_star = _min_abs_over(np.array([p.h - S]), np.array([p.h + S]))
            C[i, j] = 0.5 * float(_tanh_gap(s_star, J))
    return C


def best_contraction(p: ModelParams) -> float | None:
    """Smallest available bound on the row sums of the true interdependence matrix.

    Uses C_ij <= tanh(J_ij) <= J_ij (row sum at most 2 beta zeta) and the strong
    field C-bar. ``None`` when neither is below one.
    """
    cands = [2.0 * p.beta * zeta(p.alpha), cbar_prefactor(p) * 2.0 * zeta(p.alpha)]
    c = min(cands)
    return c if c < 1.0 else None


# ---------------------------------------------------------------------------
# concentration and comparison


def gcb_check(measure: FiniteGibbsMeasure, F: np.ndarray, data: DobrushinData,
              osc: OscillationVector | None = None) -> tuple[float, float, bool]:
    """Exact check of E exp(F - E F) <= exp(D ||delta F||^2) with D = 4/(1 - c)^2."""
    F = np.asarray(F, dtype=np.float64)
    osc = osc or oscillation(F, measure.window)
    mean = float(np.dot(measure.probs, F))
    lhs = float(np.dot(measure.probs, np.exp(F - mean)))
    log_rhs = data.gcb_constant * osc.l2_norm_sq
    # compare in log space; the bound itself may exceed the float range
    rhs = math.exp(log_rhs) if log_rhs < 700.0 else math.inf
    return lhs, rhs, math.log(lhs) <= log_rhs + 1e-10


def spec_comparison_bound(b: np.ndarray, data: DobrushinData, f_osc: OscillationVector) -> float:
    """sum_{i,j} delta_i f * D-bar_ij * b_j over the window."""
    if data.dbar is None:
        raise ValueError("dbar not computed")
    sites = data.window.sites
    delta = np.array([f_osc.at(int(s)) for s in sites])
    return float(delta @ data.dbar @ np.asarray(b, dtype=np.float64))


def infinite_row_bound(dbar_rows: np.ndarray, b: np.ndarray, b_max: float, c_inf: float) -> np.ndarray:
    """Upper bound on (D b)_i for the infinite matrix, from its restriction to a window.

    The window resolvent is entrywise below the infinite one, and every row of
    the infinite resolvent sums to at most 1/(1 - c), so the missing mass is
    at most b_max * (1/(1 - c) - window row sum).
    """
    rows = np.atleast_2d(dbar_rows)
    inside = rows @ np.asarray(b, dtype=np.float64)
    missing = np.maximum(1.0 / (1.0 - c_inf) - rows.sum(axis=1), 0.0)
    return inside + b_max * missing


def convolution_profile(j: np.ndarray | int, alpha: float, cutoff: int = 1 << 20) -> np.ndarray:
    """sum_{s in Z} (1+|s-j|)^-alpha (1+|s|)^(1-alpha), direct sum over |s| <= cutoff."""
    js = np.atleast_1d(np.asarray(j, dtype=np.int64))
    s = np.arange(-cutoff, cutoff + 1, dtype=np.float64)
    base = (1.0 + np.abs(s)) ** (1.0 - alpha)
    out = np.empty(js.size)
    for k, jj in enumerate(js):
        out[k] = float(np.sum((1.0 + np.abs(s - jj)) ** (-alpha) * base))
    return out


def cross_removal_gap(sites: Sequence[int] | np.ndarray, p: ModelParams) -> np.ndarray:
    """b_s: largest single-site kernel gap between the full chain and the split chain.

    At a right site s >= 0 the removed bonds have total strength
    Delta = beta * tail(s + 1); at a left site -i it is beta * tail(i). The
    retained field ranges over [h - S, h + S] with S the remaining coupling
    mass. The gap |tanh(a + c) - tanh(a)| / 2 is largest at c = +-Delta with
    a as close to -c/2 as the range allows.
    """
    s = np.asarray(sites, dtype=np.int64)
    tails = p.tails
    out = np.empty(s.shape, dtype=np.float64)
    for k, site in enumerate(s.ravel()):
        if site >= 0:
            delta = p.beta * tails.tail(int(site) + 1)
            S = p.beta * (2.0 * tails.zeta_alpha - tails.tail(int(site) + 1))
        else:
            delta = p.beta * tails.tail(int(-site))
            S = p.beta * (2.0 * tails.zeta_alpha - tails.tail(int(-site)))
        best = 0.0
        for c in (delta, -delta):
            a = min(max(-c / 2.0, p.h - S), p.h + S)
            best = max(best, abs(math.tanh(a + c) - math.tanh(a)) / 2.0)
        out.ravel()[k] = best
    return out
