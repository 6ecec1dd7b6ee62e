from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocklevy.drivers import (
    DriverKind, covariation_check, covariation_rate, drift_rate, index_patterns, lie_algebra_residual,
    n_entries, sample_increment, sample_increments,
)
from blocklevy.hyperlinalg import Field, adjoint, matmul

kinds = st.sampled_from(list(DriverKind))


def test_zero_step_gives_zero():
    for kind in DriverKind:
        g = sample_increment(kind, 2, 2, 0.0, seed=1)
        assert not np.any(g.data)


def test_negative_step_rejected():
    with pytest.raises(ValueError):
        sample_increments("so", 1, 2, -0.1, seed=0)
    with pytest.raises(ValueError):
        DriverKind.parse("gl")


@settings(max_examples=25, deadline=None)
@given(kinds, st.integers(1, 3), st.integers(1, 4), st.integers(0, 1000))
def test_exact_lie_algebra_membership(kind, n, m, seed):
    inc = sample_increments(kind, n, m, 0.3, seed, nsamples=3)
    assert lie_algebra_residual(kind, inc) == 0.0
    if kind is DriverKind.SO:
        assert not np.any(np.diagonal(inc, axis1=-2, axis2=-1))
    if kind is DriverKind.SP:
        assert not np.any(np.diagonal(inc[:, 0], axis1=-2, axis2=-1))


def test_so_entry_variance():
    dt = 0.2
    x = sample_increments("so", 2, 2, dt, seed=4, nsamples=100_000)[:, 0, 1]
    assert np.var(x) == pytest.approx(dt / 2, rel=0.05)


def test_entry_count():
    assert n_entries("so", 1, 4) == 6
    assert n_entries("u", 1, 4) == 16
    assert n_entries("sp", 1, 4) == 6 * 4 + 4 * 3


def test_covariation_examples():
    m = 3
    assert covariation_rate("so", 1, 2, 1, 2, 2, m) == Fraction(1, m)
    assert covariation_rate("so", 1, 2, 2, 1, 2, m) == Fraction(-1, m)
    assert covariation_rate("so", 1, 2, 1, 3, 2, m) == 0
    assert covariation_rate("sp", 1, 2, 1, 2, 2, m) == Fraction(-1, 2 * m)
    assert covariation_rate("sp", 1, 2, 2, 1, 2, m) == Fraction(-1, m)
    assert covariation_rate("sp", 4, 4, 4, 4, 2, m) == Fraction(-1, m)
    assert covariation_rate("u", 1, 2, 2, 1, 2, m) == Fraction(1, m)
    assert covariation_rate("u", 3, 3, 3, 3, 2, m) == Fraction(1, m)
    assert covariation_rate("u", 1, 2, 1, 2, 2, m) == 0
    with pytest.raises(IndexError):
        covariation_rate("so", 1, 7, 1, 2, 2, m)


def test_drift_examples():
    assert drift_rate("so", 1, 2) == Fraction(1, 2)
    assert drift_rate("so", 1, 1) == 0
    assert drift_rate("sp", 1, 1) == 1


@given(st.integers(1, 4), st.integers(1, 5))
def test_drift_closed_forms(n, m):
    assert drift_rate("so", n, m) == Fraction(n * m - 1, m)
    assert drift_rate("u", n, m) == n
    assert drift_rate("sp", n, m) == n


def test_patterns_cover_all_equalities():
    pats = index_patterns(6)
    assert len(pats) == 15
    shapes = {tuple(p.index(x) for x in p) for p in pats}
    assert len(shapes) == 15


@pytest.mark.parametrize("kind", list(DriverKind))
def test_empirical_covariations(kind):
    checks = covariation_check(kind, 2, 2, nsamples=100_000, seed=2)
    bad = [c for c in checks if not c.passed]
    assert not bad, bad


@pytest.mark.parametrize("kind", list(DriverKind))
def test_drift_rate_matches_second_moment(kind):
    n, m, dt = 2, 2, 0.05
    inc = sample_increments(kind, n, m, dt, seed=9, nsamples=50_000)
    if kind is DriverKind.U:
        inc = 1j * inc
    field = kind.field
    second = matmul(inc, adjoint(inc, field), field).mean(axis=0) / dt
    diag = np.real(np.diagonal(second[0] if field is Field.QUATERNION else second))
    np.testing.assert_allclose(diag, float(drift_rate(kind, n, m)), rtol=0.05)


def test_increments_stationary_and_independent():
    dt, k = 0.1, 40_000
    early = sample_increments("sp", 1, 2, dt, seed=3, nsamples=k, step=0)[:, :, 0, 1]
    late = sample_increments("sp", 1, 2, dt, seed=3, nsamples=k, step=57)[:, :, 0, 1]
    se = np.sqrt(2 / k) * dt / 8
    np.testing.assert_allclose(early.var(axis=0), late.var(axis=0), atol=4 * se)
    assert abs(early.mean()) < 4 * np.sqrt(dt / 8 / (4 * k))
    corr = np.corrcoef(early[:, 0], late[:, 0])[0, 1]
    assert abs(corr) < 4 / np.sqrt(k)
