import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocklevy import moment_flow
from blocklevy.moment_flow import (
    ClosureCapExceeded, GeneratorSystem, SolverDisagreement, apply_generator, apply_generator_expr, build_system,
    dimension_bound, limit_value, solve_moments, solve_moments_report,
)
from blocklevy.tables import TableExpr, adjoint_table, evaluate, parse_table

from strategies import random_element, shuffled, tables


def P(text, n=None):
    return parse_table(text, n)


def test_generator_examples():
    u = P("tr(u[1,1])")
    assert apply_generator(u) == TableExpr([(u, Fraction(-1, 2))])
    uu = P("tr(u[1,1] u[1,1])")
    assert apply_generator(uu) == TableExpr([(uu, -1), (P("tr(u[1,1]) tr(u[1,1])"), -1)])
    assert apply_generator(P("tr(u[1,1] u[1,1]*)")).is_zero()


def test_systems_for_small_seeds():
    s1 = build_system([P("tr(u[1,1])")])
    assert s1.dimension == 1
    s2 = build_system([P("tr(u[1,1] u[1,1])")])
    assert set(s2.basis) == {P("tr(u[1,1] u[1,1])"), P("tr(u[1,1]) tr(u[1,1])")}


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 2.5])
def test_closed_forms(t):
    assert limit_value(P("tr(u[1,1])"), t) == pytest.approx(math.exp(-t / 2), rel=1e-12, abs=1e-15)
    assert limit_value(P("tr(u[1,1] u[1,1])"), t) == pytest.approx(math.exp(-t) * (1 - t), rel=1e-9, abs=1e-14)


def _free_unitary_moment(k, t):
    # moments of free unitary Brownian motion, phi(U_t^k)
    return math.exp(-k * t / 2) * sum((-t) ** j / math.factorial(j) * k ** (j - 1) * math.comb(k, j + 1)
                                      for j in range(k))


@pytest.mark.parametrize("k", [3, 4, 5])
def test_free_unitary_moments(k):
    table = P("tr(" + " ".join(["u[1,1]"] * k) + ")")
    system = build_system([table])
    for t in (0.4, 1.0, 3.0):
        assert solve_moments(system, t)[system.index(table)] == pytest.approx(_free_unitary_moment(k, t), rel=1e-9,
                                                                                abs=1e-12)


def test_two_block_limits():
    n, t = 2, 1.0
    assert limit_value(P("tr(u[1,1])", n), t) == pytest.approx(math.exp(-1), rel=1e-12)
    assert limit_value(P("tr(u[1,1] u[2,2])", n), t) == pytest.approx(math.exp(-2), rel=1e-12)
    assert limit_value(P("tr(u[1,2] u[1,2]*)", n), t) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-12)


def test_zero_time_is_v0():
    system = build_system([P("tr(u[1,2] u[2,1] u[1,1]*)", 2)])
    np.testing.assert_array_equal(solve_moments(system, 0.0), [float(v) for v in system.v0])
    with pytest.raises(ValueError):
        solve_moments(system, -1.0)


def test_dimension_bound_values():
    assert dimension_bound(1, 1) == 2
    assert dimension_bound(2, 1) == 8
    assert dimension_bound(1, 2) == 2**2 * 2 * 1
    assert dimension_bound(3, 2) == 2**6 * 2**3 * (1 + 2 + 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_row_unitarity_annihilated(n):
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            expr = TableExpr((P(f"tr(u[{i},{s}] u[{j},{s}]*)", n), 1) for s in range(1, n + 1))
            assert apply_generator_expr(expr, n).is_zero()


@pytest.mark.parametrize("n", [2, 3])
def test_column_unitarity_vanishes_on_unitary_matrices(n):
    # the image is -n R_ij + delta_ij sum_k R_kk with R_ij = sum_s tr(u[s,i]* u[s,j]); it vanishes once
    # R_ij = delta_ij is imposed, which holds exactly for any unitary sample
    for kind in ("so", "u", "sp"):
        g = random_element(kind, n, 2, seed=n)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                expr = TableExpr((P(f"tr(u[{s},{i}]* u[{s},{j}])", n), 1) for s in range(1, n + 1))
                image = apply_generator_expr(expr, n)
                assert abs(sum(float(c) * evaluate(t, g) for t, c in image.items())) < 1e-12


@settings(max_examples=60, deadline=None)
@given(tables(max_order=5))
def test_order_preserved(table):
    assert all(t.order == table.order for t in apply_generator(table))


@settings(max_examples=60, deadline=None)
@given(tables(max_order=5), st.integers(0, 1000))
def test_independent_of_representative(table, seed):
    assert apply_generator(shuffled(table, seed)) == apply_generator(table)


@settings(max_examples=60, deadline=None)
@given(tables(max_order=5))
def test_commutes_with_adjoint(table):
    # reversing every trace and flipping all stars swaps the (0,0)/(1,1) and (0,1)/(1,0) rules
    assert apply_generator(adjoint_table(table)) == apply_generator(table).map_tables(adjoint_table)


@settings(max_examples=20, deadline=None)
@given(tables(max_order=3, n=2))
def test_closure_is_closed_and_bounded(table):
    system = build_system([table])
    basis = set(system.basis)
    for t in system.basis:
        assert set(apply_generator(t)) <= basis
    assert {t.order for t in basis} == {table.order}
    assert system.dimension <= dimension_bound(table.order, 2)
    assert system.within_bound()


def test_basis_order_independent_of_seed_order():
    seeds = [P("tr(u[1,2] u[2,1]*)", 2), P("tr(u[2,2]) tr(u[1,1])", 2)]
    a, b = build_system(seeds), build_system(seeds[::-1])
    assert a.basis == b.basis and a.b0 == b.b0


def test_text_dump_roundtrip():
    system = build_system([P("tr(u[1,2] u[2,1]*) tr(u[2,2])", 2)])
    text = system.to_text()
    back = GeneratorSystem.from_text(text)
    assert back.basis == system.basis and back.b0 == system.b0 and back.v0 == system.v0
    assert back.to_text() == text
    with pytest.raises(ValueError):
        GeneratorSystem.from_text(text.replace("entry", "entri", 1))


def test_cap():
    with pytest.raises(ClosureCapExceeded) as info:
        build_system([P("tr(u[1,2] u[2,1] u[1,2] u[2,1] u[1,1])", 2)], cap=10)
    assert info.value.cap == 10 and info.value.dimension > 10


def test_solvers_agree_and_disagreement_is_reported(monkeypatch):
    system = build_system([P("tr(u[1,2] u[2,1] u[1,1]*)", 2)])
    rep = solve_moments_report(system, 1.3)
    assert rep.max_rel_gap < 1e-9
    real_expm = moment_flow.expm
    monkeypatch.setattr(moment_flow, "expm", lambda a: real_expm(a) * (1 + 1e-6))
    with pytest.raises(SolverDisagreement):
        solve_moments(system, 1.3)


def test_mismatched_grid():
    with pytest.raises(ValueError):
        build_system([P("tr(u[1,1])", 1), P("tr(u[1,1])", 2)])
    with pytest.raises(ValueError):
        apply_generator(P("tr(u[1,1])", 2), 3)
