import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dysonlab.gibbs import half_line
from dysonlab.model import BCKind, BoundaryCondition, ModelParams, potential_phi, spins_of, tail_sum
from dysonlab.transfer import (
    build_transfer,
    eigenprobability_consistency,
    leading_eig,
    pressure_sequence,
    spin_flip_identity_check,
)
from oracles import dense_power, dense_transfer


def test_single_letter_field_only():
    T = build_transfer(1, "free", ModelParams(2, 0, 0.7))
    assert leading_eig(T).lam == pytest.approx(2 * math.cosh(0.7), rel=1e-14)


def test_column_sums_at_zero_potential():
    M = build_transfer(1, "free", ModelParams(1.6, 0, 0)).matrix.toarray()
    assert np.allclose(M.sum(axis=0), 2.0)


def test_dense_oracle_m8():
    p = ModelParams(2, 0.3, 0.5)
    r = leading_eig(build_transfer(8, "free", p))
    ref = dense_power(dense_transfer(8, 2, 0.3, 0.5))
    assert r.lam == pytest.approx(ref, rel=1e-11)
    # pinned from the oracle run
    assert r.lam == pytest.approx(2.796054441560547, rel=1e-12)


@pytest.mark.parametrize("tail,sign", [("all_plus", 1), ("all_minus", -1)])
def test_dense_oracle_with_tails(tail, sign):
    r = leading_eig(build_transfer(6, tail, ModelParams(1.8, 0.4, 0.2)))
    M = dense_transfer(6, 1.8, 0.4, 0.2, sign)
    assert r.lam == pytest.approx(max(abs(np.linalg.eigvals(M))), rel=1e-11)


def test_zero_field_symmetric_oracle():
    # at h = 0 the spectrum is symmetric under the joint flip; compare with a dense eigensolver
    r = leading_eig(build_transfer(7, "free", ModelParams(2, 0.3, 0.0)))
    assert r.lam == pytest.approx(max(abs(np.linalg.eigvals(dense_transfer(7, 2, 0.3, 0.0)))), rel=1e-11)


def test_infinite_temperature_eigenvectors():
    r = leading_eig(build_transfer(6, "free", ModelParams(2, 0, 1.0)))
    assert r.lam == pytest.approx(2 * math.cosh(1.0), rel=1e-14)
    assert r.lam == pytest.approx(3.0861613, abs=1e-7)
    assert np.max(np.abs(r.right_vec - 1.0)) <= 1e-10


def test_weights_match_potential():
    p = ModelParams(1.9, 0.45, -0.3)
    T = build_transfer(5, "all_plus", p)
    for w in (0, 5, 17, 31):
        word = list(spins_of(w, 5))
        for bit, a in ((0, -1), (1, 1)):
            phi = potential_phi([a] + word, p, BCKind.ALL_PLUS).value
            assert math.log(T.weights[w, bit]) == pytest.approx(phi, abs=1e-13)


@pytest.mark.parametrize("m", [3, 6, 9])
def test_structure_and_perron_vectors(m):
    p = ModelParams(2, 0.3, 0.4)
    T = build_transfer(m, "free", p)
    M = T.matrix
    nnz_per_col = np.diff(M.indptr)
    assert np.all(nnz_per_col == 2) and np.all(M.data > 0)
    r = leading_eig(T)
    assert r.residual <= 1e-10
    assert np.all(r.right_vec > 0) and np.all(r.left_vec > 0)
    assert r.left_vec.sum() == pytest.approx(1.0, abs=1e-12)
    assert r.right_vec.max() == pytest.approx(1.0)
    assert np.allclose(T.apply_dual(r.left_vec), r.lam * r.left_vec, atol=1e-10)
    assert T.truncation_bound == pytest.approx(0.3 * tail_sum(m, 2.0))


def test_primitive_for_small_m():
    M = build_transfer(5, "free", ModelParams(2, 0.3, 0.1)).matrix.toarray()
    assert np.all(np.linalg.matrix_power(M, 5) > 0)


def test_pressure_sequence():
    for m, ll, _ in pressure_sequence(5, "free", ModelParams(2, 0, 0.4)):
        assert ll == pytest.approx(math.log(2 * math.cosh(0.4)), abs=1e-13)
    for _, ll, _ in pressure_sequence(3, "free", ModelParams(2, 0, 0)):
        assert ll == pytest.approx(math.log(2), abs=1e-14)
    p = ModelParams(2, 0.3, 0.5)
    l12 = leading_eig(build_transfer(12, "free", p)).log_lambda
    l16 = leading_eig(build_transfer(16, "free", p)).log_lambda
    assert abs(l12 - l16) <= 2 * 0.3 * tail_sum(12, 2.0)


def test_spin_flip_identity():
    assert spin_flip_identity_check(8, ModelParams(1.8, 0.4, 0.9)) <= 1e-14
    assert spin_flip_identity_check(8, ModelParams(1.8, 0.4, 0.9), "all_plus") <= 1e-14
    assert spin_flip_identity_check(6, ModelParams(2, 0, 1.3)) <= 1e-14
    # h = 0: the operator is its own flip
    T = build_transfer(6, "free", ModelParams(2, 0.5, 0))
    mask = T.size - 1
    w = np.arange(T.size)
    assert np.array_equal(T.weights[w ^ mask][:, ::-1], T.weights)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.floats(1.55, 2), st.floats(0, 0.8), st.floats(0, 2))
def test_plus_tail_raises_lambda(m, a, b, h):
    p = ModelParams(a, b, h)
    lf = leading_eig(build_transfer(m, "free", p)).lam
    lp = leading_eig(build_transfer(m, "all_plus", p))
    assert lp.lam >= lf * (1 - 1e-12)
    assert lp.right_vec[(1 << m) - 1] >= lp.right_vec.max() * (1 - 1e-12)


def test_consistency_trivial_cases():
    p = ModelParams(2, 0, 0.6)
    rep = eigenprobability_consistency(6, p, half_line(10, p, BoundaryCondition.free()), depth=4)
    assert rep.max_discrepancy <= 1e-14
    assert rep.discrepancies[0] == pytest.approx(0.0, abs=1e-14)


def test_consistency_within_truncation_bounds():
    p = ModelParams(2, 0.3, 1.0)
    rep = eigenprobability_consistency(14, p, half_line(20, p, BoundaryCondition.free()), depth=4)
    assert rep.ok
    assert rep.max_discrepancy < 5e-3
