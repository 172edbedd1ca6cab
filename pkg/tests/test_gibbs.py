import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dysonlab.gibbs import (
    CoupledMeasure,
    MeasureApprox,
    Schedule,
    Target,
    conditional_kernel,
    exact_measure,
    expectation,
    glauber_sample,
    half_line,
    log_weights,
    product_measure,
    two_sided,
    window_couplings,
)
from dysonlab.model import BCKind, BoundaryCondition, ModelParams, Side, SpinConfig, Window, hamiltonian, zeta
from oracles import brute_measure, plus_boundary_field, subset_mean

FREE = BoundaryCondition.free()


def test_single_spin():
    p = ModelParams(2, 0.0, 0.8)
    m = exact_measure(Window(0, 0), FREE, p)
    assert m.probs[1] == pytest.approx(math.exp(0.8) / (2 * math.cosh(0.8)), abs=1e-15)


def test_uniform_at_infinite_temperature():
    m = exact_measure(Window(0, 1), FREE, ModelParams(2, 0.0, 0.0))
    assert np.allclose(m.probs, 0.25, atol=1e-16)


def test_ten_sites_against_second_hamiltonian():
    p = ModelParams(2.0, 0.3, 0.2)
    m = exact_measure(Window(0, 9), FREE, p)
    probs, lz = brute_measure(10, 0, 2.0, 0.3, 0.2)
    assert m.log_partition == pytest.approx(lz, abs=1e-12)
    assert np.max(np.abs(m.probs - probs)) < 1e-13
    # pinned: brute-force oracle value of <sigma_5>
    assert m.magnetization(5) == pytest.approx(0.47260130629567176, abs=1e-13)


@pytest.mark.parametrize("kind", ["free", "all_plus", "all_minus"])
def test_probs_are_boltzmann_weights(kind):
    p = ModelParams(1.8, 0.45, -0.3)
    w = Window(-3, 4)
    bc = BoundaryCondition(BCKind(kind))
    m = exact_measure(w, bc, p)
    assert m.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(m.probs > 0)
    for idx in range(0, 256, 7):
        e = hamiltonian(w, SpinConfig(idx, 8), bc, p).energy
        assert m.probs[idx] == pytest.approx(math.exp(-e - m.log_partition), abs=1e-12)


def test_plus_boundary_against_mpmath_field():
    p = ModelParams(1.7, 0.35, 0.1)
    m = exact_measure(Window(2, 8), BoundaryCondition.plus(), p)
    probs, _ = brute_measure(7, 2, 1.7, 0.35, 0.1, plus_boundary_field(7, 1.7, 0.35))
    assert np.max(np.abs(m.probs - probs)) < 1e-13


def test_capacity():
    with pytest.raises(OverflowError):
        exact_measure(Window(0, 24), FREE, ModelParams(2, 0.1, 0))


def test_thread_count_is_bit_identical():
    p = ModelParams(2, 0.4, 0.3)
    w = Window(0, 15)
    J = window_couplings(w, p)
    f = np.full(16, 0.3)
    assert np.array_equal(log_weights(J, f, threads=1), log_weights(J, f, threads=4))


def test_conditional_kernel_examples():
    assert conditional_kernel(0, ModelParams(2, 0, 0.6), [1, -1], [1]) == pytest.approx((1 + math.tanh(0.6)) / 2)
    p = ModelParams(2, 1, 0)
    assert conditional_kernel(0, p, tail="all_plus") == pytest.approx((1 + math.tanh(2 * zeta(2))) / 2, abs=1e-13)
    assert conditional_kernel(0, p, [1, -1, 1], [-1, 1, -1]) == pytest.approx(0.5, abs=1e-15)


def test_expectation_examples():
    m = MeasureApprox(Target.MU, exact_measure(Window(-2, 2), FREE, ModelParams(2, 0.0, 1.0)))
    assert expectation(m, []).value == pytest.approx(1.0)
    assert expectation(m, [0]).value == pytest.approx(math.tanh(1.0), abs=1e-14)
    assert expectation(m, [0, 1]).value == pytest.approx(math.tanh(1.0) ** 2, abs=1e-14)
    assert math.tanh(1.0) ** 2 == pytest.approx(0.58002, abs=1e-5)
    with pytest.raises(IndexError):
        expectation(m, [5])


def test_glauber_independent_spins():
    run = glauber_sample(Window(0, 5), FREE, ModelParams(2, 0, 0.7), Schedule(4000, 200), seed=1)
    m = MeasureApprox(Target.MU, run)
    est = expectation(m, [2])
    assert abs(est.value - math.tanh(0.7)) <= 3 * est.stderr


def test_glauber_matches_exact_on_twelve_sites():
    p = ModelParams(2, 0.3, 0.5)
    w = Window(0, 11)
    exact = exact_measure(w, FREE, p).magnetization(0)
    run = glauber_sample(w, FREE, p, Schedule(20000, 1000), seed=11)
    est = expectation(MeasureApprox(Target.MU, run), [0])
    assert abs(est.value - exact) <= 3 * est.stderr


def test_glauber_deterministic():
    args = (Window(0, 7), FREE, ModelParams(2, 0.3, 0.1), Schedule(300, 10, 2))
    a = glauber_sample(*args, seed=5)
    b = glauber_sample(*args, seed=5)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, glauber_sample(*args, seed=6).samples)


def test_product_measure_factorises_and_differs_from_mu():
    p = ModelParams(2, 0.3, 1.0)
    bc = BoundaryCondition.aligned(p.h)
    nu_plus = half_line(8, p, bc)
    nu_minus = nu_plus.reflected()
    nu0 = product_measure(MeasureApprox(Target.NU_MINUS, nu_minus), MeasureApprox(Target.NU_PLUS, nu_plus))
    pair = expectation(nu0, [-1, 0]).value
    assert pair == pytest.approx(nu_minus.magnetization(-1) * nu_plus.magnetization(0), abs=1e-15)
    # mu on the 16-site window [-8, 7], by direct enumeration of the full window
    mu = exact_measure(Window(-8, 7), bc, p)
    gap = mu.expectation([-1, 0]) - pair
    assert gap > 1e-3
    coupled = two_sided(8, 7, p, bc)
    assert coupled.expectation([-1, 0]) == pytest.approx(mu.expectation([-1, 0]), abs=1e-13)


def test_product_at_zero_coupling_is_independent():
    p = ModelParams(2, 0.0, 0.4)
    nu_plus = half_line(4, p, FREE)
    nu0 = product_measure(MeasureApprox(Target.NU_MINUS, nu_plus.reflected()), MeasureApprox(Target.NU_PLUS, nu_plus))
    full = exact_measure(Window(-4, 3), FREE, p)
    for A in ([-4, 3], [-1, 0, 2], [-2]):
        assert expectation(nu0, A).value == pytest.approx(full.expectation(A), abs=1e-14)


@pytest.mark.parametrize("kind", ["free", "all_plus", "all_minus"])
def test_two_sided_equals_direct_enumeration(kind):
    p = ModelParams(1.8, 0.4, 0.3)
    bc = BoundaryCondition(BCKind(kind))
    c = two_sided(5, 6, p, bc)
    d = exact_measure(Window(-5, 6), bc, p)
    assert np.allclose(c.magnetizations(), d.magnetizations(), atol=1e-13)
    assert c.expectation([-3, 0, 4]) == pytest.approx(d.expectation([-3, 0, 4]), abs=1e-13)
    tab = c.pair_table([-1, -5])
    assert tab[1, 6] == pytest.approx(d.expectation([-5, 6]), abs=1e-13)


def test_left_half_is_reflected_right_half():
    p = ModelParams(1.9, 0.5, 0.2)
    a = half_line(7, p, BoundaryCondition.plus(), Side.LEFT_HALF)
    b = half_line(7, p, BoundaryCondition.plus()).reflected()
    assert np.allclose(a.probs, b.probs, atol=1e-15)


def test_dlr_consistency():
    p = ModelParams(2, 0.5, 0.2)
    w = Window(0, 6)
    m = exact_measure(w, FREE, p)
    n = 7
    # resample the middle pair {2, 3} from the kernel given everything else
    out = np.zeros_like(m.probs)
    mask = (1 << 2) | (1 << 3)
    J = window_couplings(w, p)
    s_all = np.array([[1 if (x >> k) & 1 else -1 for k in range(n)] for x in range(1 << n)], dtype=float)
    for x in range(1 << n):
        rest = x & ~mask
        cands = [rest | (b2 << 2) | (b3 << 3) for b2 in (0, 1) for b3 in (0, 1)]
        logw = np.array([0.5 * s_all[c] @ J @ s_all[c] + p.h * s_all[c].sum() for c in cands])
        w_ = np.exp(logw - logw.max())
        w_ /= w_.sum()
        for c, q in zip(cands, w_):
            out[c] += m.probs[x] * q
    assert np.max(np.abs(out - m.probs)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.floats(1.55, 2.0), st.floats(0, 1.2), st.floats(0, 2),
       st.sampled_from(["free", "all_plus"]), st.data())
def test_gks(n, a, b, h, kind, data):
    m = exact_measure(Window(0, n - 1), BoundaryCondition(BCKind(kind)), ModelParams(a, b, h))
    A = data.draw(st.lists(st.integers(0, n - 1), unique=True))
    B = data.draw(st.lists(st.integers(0, n - 1), unique=True))
    ma, mb = m.expectation(A), m.expectation(B)
    sym = sorted(set(A) ^ set(B))
    assert ma >= -1e-12
    assert m.expectation(sym) >= ma * mb - 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.floats(1.55, 2.0), st.floats(0, 1), st.floats(-2, 2),
       st.sampled_from(["free", "all_plus", "all_minus"]), st.data())
def test_spin_flip_covariance(n, a, b, h, kind, data):
    p = ModelParams(a, b, h)
    bc = BoundaryCondition(BCKind(kind))
    A = data.draw(st.lists(st.integers(0, n - 1), unique=True))
    m1 = exact_measure(Window(0, n - 1), bc, p).expectation(A)
    m2 = exact_measure(Window(0, n - 1), bc.flipped(), p.flipped()).expectation(A)
    assert m1 == pytest.approx((-1) ** len(A) * m2, abs=1e-12)


def test_coupled_measure_density_integrates_to_one():
    p = ModelParams(2, 0.3, 1.0)
    nu = half_line(6, p, FREE)
    from dysonlab.gibbs import cross_couplings

    c = CoupledMeasure(nu.reflected(), nu, cross_couplings(6, 5, p))
    assert float(np.dot(nu.probs, c.right_density())) == pytest.approx(1.0, abs=1e-13)
    assert brute_check_subset(c)


def brute_check_subset(c: CoupledMeasure) -> bool:
    """Full joint table against the coupled contraction on a few observables."""
    L, R1 = c.left.n, c.right.n
    joint = np.outer(c.left.probs, c.right.probs)
    xs = np.array([[1 if (x >> k) & 1 else -1 for k in range(L)] for x in range(1 << L)], dtype=float)
    ys = np.array([[1 if (y >> k) & 1 else -1 for k in range(R1)] for y in range(1 << R1)], dtype=float)
    joint = joint * np.exp(xs @ c.cross @ ys.T)
    joint /= joint.sum()
    got = c.expectation([-1, 0])
    want = float(np.sum(joint * np.outer(xs[:, L - 1], ys[:, 0])))
    return abs(got - want) < 1e-13 and abs(subset_mean(joint.sum(axis=0), R1, [2]) - c.magnetization(2)) < 1e-13
