import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrtface.omp import omp_solve
from oracles import lstsq_residual, omp_problem


def test_single_atom(rng):
    D = rng.standard_normal((8, 5))
    code = omp_solve(D, D[:, 2], 3)
    assert code.support == (2,)
    np.testing.assert_allclose(code.coefficients, [1.0])
    assert code.residual_norm <= 1e-12


def test_orthogonal_signal_dead_stop():
    D = np.zeros((4, 3))
    D[:2, :] = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]
    y = np.array([0.0, 0.0, 3.0, 4.0])
    code = omp_solve(D, y, 2)
    assert code.support == ()
    assert code.residual_norm == pytest.approx(5.0)


def test_all_zero_dictionary():
    code = omp_solve(np.zeros((3, 4)), [1.0, 2.0, 2.0], 2)
    assert code.support == () and code.residual_norm == pytest.approx(3.0)


def test_zero_columns_skipped(rng):
    D = rng.standard_normal((6, 4))
    D[:, 1] = 0
    code = omp_solve(D, rng.standard_normal(6), 4)
    assert 1 not in code.support


def test_tie_breaks_to_lowest_index():
    D = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    code = omp_solve(D, [1.0, 0.0], 1)
    assert code.support == (0,)


def test_column_scale_does_not_bias_selection():
    D = np.array([[100.0, 0.0], [0.0, 1.0]])
    code = omp_solve(D, [0.5, 1.0], 1)
    assert code.support == (1,)


def test_input_validation(rng):
    with pytest.raises(ValueError):
        omp_solve(rng.standard_normal((4, 3)), np.ones(5), 1)
    with pytest.raises(ValueError):
        omp_solve(rng.standard_normal((4, 3)), np.ones(4), 0)


@pytest.mark.parametrize("seed", range(10))
def test_planted_support_recovery(seed):
    D, x, support = omp_problem(seed)
    code = omp_solve(D, D @ x, 4)
    assert set(code.support) == set(support.tolist())
    assert np.abs(code.dense(60) - x).max() <= 1e-8


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s_max=st.integers(1, 12))
def test_invariants(seed, s_max):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((10, 15))
    y = rng.standard_normal(10)
    code = omp_solve(D, y, s_max)
    assert len(code.support) <= s_max and len(set(code.support)) == len(code.support)
    assert code.residual_norm == pytest.approx(
        np.linalg.norm(y - D @ code.dense(15)), abs=1e-10)
    hist = np.array(code.residual_history)
    assert np.all(np.diff(hist) <= 1e-12)
    # least-squares optimality on the final support
    if code.support:
        r = y - D @ code.dense(15)
        assert np.abs(D[:, list(code.support)].T @ r).max() <= 1e-8


def test_representable_signal_exact(rng):
    D = rng.standard_normal((12, 20))
    y = D[:, [3, 7, 11]] @ np.array([1.0, -2.0, 0.5])
    assert omp_solve(D, y, 5).residual_norm <= 1e-8


def test_full_budget_matches_least_squares(rng):
    D = rng.standard_normal((15, 6))
    y = rng.standard_normal(15)
    assert omp_solve(D, y, 6).residual_norm == pytest.approx(lstsq_residual(D, y), rel=1e-9)
