"""Truncated transfer operator of the one-sided Dyson potential.

Words have length m; bit k of a word index holds coordinate k (bit 1 = +1).
Extending a word w by a new symbol a gives the prefix a.w of length m + 1,
weighted by exp(phi(a.w)), and the truncated successor
w' = (a, w_0, ..., w_{m-2}) = ((w << 1) & mask) | bit(a).

The operator acts on functions by (L f)(w) = sum_a exp(phi(a.w)) f(w').
Written as a matrix T with T[w', w] = exp(phi(a.w)), L is the transpose of T,
and the eigenprobability is a positive vector with T nu = lambda nu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dobrushin import best_contraction
from .gibbs import FiniteGibbsMeasure
from .model import BCKind, ModelParams

__all__ = [
    "MAX_WORD",
    "ConvergenceError",
    "TransferTruncation",
    "SpectralResult",
    "ConsistencyReport",
    "build_transfer",
    "leading_eig",
    "pressure_sequence",
    "spin_flip_identity_check",
    "eigenprobability_consistency",
]

MAX_WORD = 22


class ConvergenceError(ArithmeticError):
    def __init__(self, msg: str, diagnostics: dict):
        super().__init__(f"{msg}: {diagnostics}")
        self.diagnostics = diagnostics


def _word_field(m: int, alpha: float) -> np.ndarray:
    """u(w) = sum_{n=1}^{m} w_{n-1} n^-alpha for every word, bits accumulated in order."""
    w = np.arange(1 << m, dtype=np.int64)
    u = np.zeros(w.size)
    for k in range(m):
        u += (2.0 * ((w >> k) & 1) - 1.0) * (k + 1.0) ** (-alpha)
    return u


@dataclass(frozen=True)
class TransferTruncation:
    m: int
    tail: BCKind
    params: ModelParams
    weights: np.ndarray = field(repr=False)  # [w, a]: a = 0 is spin -1, a = 1 is spin +1
    truncation_bound: float

    @property
    def size(self) -> int:
        return 1 << self.m

    def successors(self, a_bit: int) -> np.ndarray:
        w = np.arange(self.size, dtype=np.int64)
        return ((w << 1) & (self.size - 1)) | a_bit

    @property
    def matrix(self) -> sp.csc_matrix:
        """Sparse T with entry (w', w) = exp(phi(a.w)); two nonzeros per column."""
        n = self.size
        cols = np.repeat(np.arange(n), 2)
        rows = np.stack([self.successors(0), self.successors(1)], axis=1).ravel()
        return sp.csc_matrix((self.weights.ravel(), (rows, cols)), shape=(n, n))

    def apply(self, f: np.ndarray) -> np.ndarray:
        """(L f)(w) = sum_a exp(phi(a.w)) f(w')."""
        return self.weights[:, 0] * f[self.successors(0)] + self.weights[:, 1] * f[self.successors(1)]

    def apply_dual(self, g: np.ndarray) -> np.ndarray:
        """(T g)(w') = sum over the two predecessors w of w'."""
        n = self.size
        wp = np.arange(n, dtype=np.int64)
        a = wp & 1
        base = wp >> 1
        top = 1 << (self.m - 1)
        w0, w1 = base, base | top
        return self.weights[w0, a] * g[w0] + self.weights[w1, a] * g[w1]


def build_transfer(m: int, tail: BCKind | str, p: ModelParams) -> TransferTruncation:
    """Transfer truncation on words of length m with the given far tail."""
    if not 1 <= m <= MAX_WORD:
        raise OverflowError(f"word length must be in [1, {MAX_WORD}], got {m}")
    kind = BCKind(tail)
    if kind is BCKind.FIXED:
        raise ValueError("tail must be free, all_plus or all_minus")
    tails = p.tails
    tau = 0.0 if kind is BCKind.FREE else (1.0 if kind is BCKind.ALL_PLUS else -1.0) * p.beta * tails.tail(m + 1)
    g = p.h + p.beta * _word_field(m, p.alpha) + tau
    weights = np.stack([np.exp(-g), np.exp(g)], axis=1)
    return TransferTruncation(m, kind, p, weights, p.beta * tails.tail(m))


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    right_vec: np.ndarray = field(repr=False)
    left_vec: np.ndarray = field(repr=False)
    residual: float
    iterations: int

    @property
    def log_lambda(self) -> float:
        return math.log(self.lam)


def leading_eig(T: TransferTruncation, tol: float = 1e-12, max_iter: int = 20000) -> SpectralResult:
    """Power iteration for the principal eigenfunction (max-normalised) and eigenprobability (sum 1)."""
    n = T.size
    f = np.ones(n)
    g = np.full(n, 1.0 / n)
    lam_f = lam_g = math.nan
    for it in range(1, max_iter + 1):
        Lf = T.apply(f)
        new_f = float(Lf.max())
        f_next = Lf / new_f
        Tg = T.apply_dual(g)
        new_g = float(Tg.sum())
        g_next = Tg / new_g
        # the eigenvalue can settle long before the vectors (constant column sums)
        moved = max(float(np.max(np.abs(f_next - f))),
                    float(np.max(np.abs(g_next - g))) / float(g_next.max()))
        f, g = f_next, g_next
        done = (abs(new_f - lam_f) <= tol * new_f and abs(new_g - lam_g) <= tol * new_g
                and moved <= 100 * tol)
        lam_f, lam_g = new_f, new_g
        if done:
            residual = float(np.max(np.abs(T.apply(f) - lam_f * f)))
            if residual <= 1e-10 * max(1.0, lam_f):
                break
    else:
        raise ConvergenceError("power iteration did not converge",
                               {"iterations": max_iter, "lambda_right": lam_f, "lambda_left": lam_g})
    if np.any(f <= 0) or np.any(g <= 0):
        raise ConvergenceError("Perron vectors lost positivity", {"iterations": it})
    g = g / g.sum()
    return SpectralResult(lam_f, f, g, residual, it)


def pressure_sequence(m_max: int, tail: BCKind | str, p: ModelParams) -> list[tuple[int, float, float]]:
    """(m, log lambda_m, beta * tail(m)) for m = 1..m_max."""
    out = []
    for m in range(1, m_max + 1):
        r = leading_eig(build_transfer(m, tail, p))
        out.append((m, r.log_lambda, p.beta * p.tails.tail(m)))
    return out


def spin_flip_identity_check(m: int, p: ModelParams, tail: BCKind | str = BCKind.FREE) -> float:
    """max |T'[flip w', flip w] - T[w', w]| with T' built for the field -h and flipped tail."""
    if m > 12:
        raise OverflowError("spin-flip check is limited to m <= 12")
    kind = BCKind(tail)
    flipped_tail = {BCKind.ALL_PLUS: BCKind.ALL_MINUS, BCKind.ALL_MINUS: BCKind.ALL_PLUS}.get(kind, kind)
    T = build_transfer(m, kind, p)
    Tf = build_transfer(m, flipped_tail, p.flipped())
    mask = T.size - 1
    w = np.arange(T.size)
    # T[w', w] with w' = succ_a(w) corresponds to T'[succ_{1-a}(w ^ mask), w ^ mask]
    dev = np.abs(Tf.weights[w ^ mask][:, ::-1] - T.weights)
    return float(dev.max())


@dataclass(frozen=True)
class ConsistencyReport:
    depth: int
    discrepancies: np.ndarray  # max cylinder discrepancy for depth 0..depth
    transfer_bound: float | None
    gibbs_bound: float | None

    @property
    def max_discrepancy(self) -> float:
        return float(self.discrepancies.max())

    @property
    def combined_bound(self) -> float | None:
        if self.transfer_bound is None or self.gibbs_bound is None:
            return None
        return self.transfer_bound + self.gibbs_bound

    @property
    def ok(self) -> bool | None:
        cb = self.combined_bound
        return None if cb is None else self.max_discrepancy <= cb


def _cylinder_table(probs: np.ndarray, d: int) -> np.ndarray:
    idx = np.arange(probs.size) & ((1 << d) - 1)
    return np.bincount(idx, weights=probs, minlength=1 << d)


def eigenprobability_consistency(m: int, p: ModelParams, backend: FiniteGibbsMeasure,
                                 depth: int | None = None, tail: BCKind | str = BCKind.FREE,
                                 spectral: SpectralResult | None = None) -> ConsistencyReport:
    """Compare cylinder masses of the truncated eigenprobability with a half-line Gibbs table.

    Both approximate the half-line Gibbs state. Each error is bounded through
    the comparison theorem with the best available contraction c:
    for a cylinder on d sites the bound is sum_{i<d} sum_j D_ij b_j with
    row sums of D at most 1/(1 - c).
      * transfer: dropped bonds beyond range m shift any field by at most
        beta*tail(m+1) per side (twice that for a fixed-sign tail);
      * free window of size W: site j misses beta*tail(W - j) from beyond the
        window, sites outside the window are replaced by independent spins
        and miss at most 2 beta zeta.
    """
    if backend.window.lo != 0:
        raise ValueError("backend must be a right half-line window starting at 0")
    if backend.n < m:
        raise ValueError("backend window is shorter than the word length")
    depth = min(m, 10) if depth is None else depth
    kind = BCKind(tail)
    r = spectral or leading_eig(build_transfer(m, kind, p))
    disc = np.zeros(depth + 1)
    for d in range(1, depth + 1):
        a = _cylinder_table(r.left_vec, d)
        b = _cylinder_table(backend.probs, d)
        disc[d] = float(np.max(np.abs(a - b)))
    disc[0] = abs(r.left_vec.sum() - backend.probs.sum())
    c = best_contraction(p)
    if c is None or p.beta == 0:
        tb = gb = (0.0 if p.beta == 0 else None)
        return ConsistencyReport(depth, disc, tb, gb)
    tails = p.tails
    per_side = p.beta * tails.tail(m + 1)
    field_err = per_side * (1.0 if kind is BCKind.FREE else 2.0) + per_side
    b_transfer = min(1.0, field_err / 2.0)
    transfer_bound = depth * b_transfer / (1.0 - c)
    if backend.bc.kind is BCKind.FREE:
        W = backend.n
        b_in = 0.5 * p.beta * tails.tail(W - np.arange(depth))
        b_out = max(min(1.0, p.beta * tails.zeta_alpha), float(b_in.max()))
        # rows i < depth: D_ii >= 1 carries the local error, the rest is at most b_out
        gibbs_bound = float(np.sum(b_in)) + depth * b_out * (1.0 / (1.0 - c) - 1.0)
    else:
        gibbs_bound = None
    return ConsistencyReport(depth, disc, transfer_bound, gibbs_bound)
