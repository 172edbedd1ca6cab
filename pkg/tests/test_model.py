import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dysonlab.model import (
    BCKind,
    BoundaryCondition,
    ModelParams,
    Side,
    SpinConfig,
    Window,
    hamiltonian,
    pair_coupling,
    potential_phi,
    tail_sum,
    zeta,
)
from oracles import brute_energy, hurwitz_tail

# zeta(1.8) to 16 digits: mpmath, cross-checked against a 1e7-term direct sum with an integral tail
ZETA_18 = 1.882229618102822

alphas = st.floats(1.55, 2.0)
betas = st.floats(0.0, 1.0)
fields = st.floats(-3.0, 3.0)


def test_zeta_closed_form():
    assert zeta(2.0) == pytest.approx(math.pi ** 2 / 6, abs=1e-14)


def test_zeta_pinned():
    assert zeta(1.8) == pytest.approx(ZETA_18, abs=1e-13)


def test_zeta_domain():
    with pytest.raises(ValueError):
        zeta(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5000), st.floats(1.05, 4.0))
def test_tail_sum_matches_hurwitz(s, alpha):
    assert tail_sum(s, alpha) == pytest.approx(hurwitz_tail(s, alpha), rel=1e-12)


def test_tail_sum_vectorised_agrees_with_scalar():
    s = np.array([1, 5, 31, 32, 33, 1000])
    vec = tail_sum(s, 1.7)
    assert np.allclose(vec, [tail_sum(int(x), 1.7) for x in s], rtol=0, atol=0)


def test_pair_coupling_examples():
    assert pair_coupling(0, 1, ModelParams(2, 1, 0)) == 1.0
    assert pair_coupling(-2, 2, ModelParams(2, 1, 0)) == 1 / 16
    assert pair_coupling(0, 3, ModelParams(1.8, 0.5, 0)) == pytest.approx(0.5 * 3 ** -1.8, rel=1e-15)
    with pytest.raises(ValueError):
        pair_coupling(4, 4, ModelParams(2, 1, 0))


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.3, 0.0)
    with pytest.raises(ValueError):
        ModelParams(2.0, -0.1, 0.0)


def test_hamiltonian_examples():
    p = ModelParams(2, 0.9, 0.7)
    w1 = Window(0, 0)
    assert hamiltonian(w1, SpinConfig.from_spins([1]), BoundaryCondition.free(), p).energy == pytest.approx(-0.7)
    w2 = Window(0, 1)
    e = hamiltonian(w2, SpinConfig.from_spins([1, -1]), BoundaryCondition.free(), ModelParams(2, 1, 0)).energy
    assert e == pytest.approx(1.0, abs=1e-15)
    e = hamiltonian(w1, SpinConfig.from_spins([1]), BoundaryCondition.plus(), ModelParams(2, 1, 0)).energy
    assert e == pytest.approx(-2 * math.pi ** 2 / 6, abs=1e-13)


def test_hamiltonian_matches_brute_force_fixed_bc():
    p = ModelParams(1.8, 0.4, 0.3)
    w = Window(0, 5)
    left, right = (1, -1, 1), (-1, -1)
    bc = BoundaryCondition.fixed(left, right)
    outside = {-1: 1, -2: -1, -3: 1, 6: -1, 7: -1}
    rng = np.random.default_rng(3)
    for _ in range(10):
        s = rng.choice([-1, 1], size=6)
        got = hamiltonian(w, SpinConfig.from_spins(s), bc, p).energy
        assert got == pytest.approx(brute_energy(list(s), 0, 1.8, 0.4, 0.3, outside), abs=1e-12)


def test_hamiltonian_reports_truncation():
    p = ModelParams(2, 0.5, 0)
    bc = BoundaryCondition.fixed([1] * 50, [1] * 50)
    val = hamiltonian(Window(0, 3), SpinConfig.from_spins([1, 1, 1, 1]), bc, p, horizon=20)
    assert val.remainder_bound == pytest.approx(4 * 2 * 0.5 * hurwitz_tail(21, 2.0), rel=1e-12)


def test_potential_examples():
    assert potential_phi([1], ModelParams(2, 0, 0.4)).value == pytest.approx(0.4)
    assert potential_phi([1, 1], ModelParams(2, 1, 0)).value == pytest.approx(1.0)
    v = potential_phi([1, -1, 1], ModelParams(2, 1, 0.5), BCKind.ALL_PLUS)
    # 0.5 - 1 + 1/4 + sum_{n>=3} n^-2 = zeta(2) - 3/2
    assert v.value == pytest.approx(math.pi ** 2 / 6 - 1.5, abs=1e-14)
    assert potential_phi(SpinConfig.from_spins([1, -1, 1]), ModelParams(2, 1, 0.5), BCKind.ALL_PLUS).value == v.value


configs = st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=9)


@settings(max_examples=80, deadline=None)
@given(configs, alphas, betas, fields, st.sampled_from(["free", "all_plus", "all_minus"]))
def test_global_spin_flip_exact(spins, a, b, h, kind):
    p = ModelParams(a, b, h)
    w = Window(-3, -3 + len(spins) - 1)
    bc = BoundaryCondition(BCKind(kind))
    cfg = SpinConfig.from_spins(spins)
    e1 = hamiltonian(w, cfg, bc, p).energy
    e2 = hamiltonian(w, cfg.flipped(), bc.flipped(), p.flipped()).energy
    assert e1 == e2


@settings(max_examples=80, deadline=None)
@given(configs, alphas, betas, fields)
def test_phi_tail_difference(spins, a, b, h):
    p = ModelParams(a, b, h)
    d = potential_phi(spins, p, BCKind.ALL_PLUS).value - potential_phi(spins, p, BCKind.ALL_MINUS).value
    assert d == pytest.approx(2 * spins[0] * b * tail_sum(len(spins), a), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(configs, alphas, betas, fields, st.integers(-5, 5),
       st.lists(st.sampled_from([-1, 1]), max_size=4), st.lists(st.sampled_from([-1, 1]), max_size=4))
def test_reflection_invariance(spins, a, b, h, lo, left, right):
    p = ModelParams(a, b, h)
    w = Window(lo, lo + len(spins) - 1)
    bc = BoundaryCondition.fixed(left, right)
    e1 = hamiltonian(w, SpinConfig.from_spins(spins), bc, p).energy
    e2 = hamiltonian(w.reflected(), SpinConfig.from_spins(spins).reversed(), bc.reflected(), p).energy
    assert e1 == pytest.approx(e2, abs=1e-12)


def test_window_reflection_of_half_lines():
    assert Window.right(4).reflected() == Window.left(4)
    assert Window(0, 3, Side.RIGHT_HALF).reflected().sites.tolist() == [-4, -3, -2, -1]
