"""Unit tests for polynomials module."""

import math

import numpy as np
import pytest

from src.polynomials import (
    AffineMap,
    Monomial,
    Polynomial,
    Variable,
    affine_change_of_basis,
    differentiate,
    monomial_basis,
    sort_variables,
    substitute,
)

T = Variable("t", "time")
X = Variable("x")
Y = Variable("y")
X1, X2 = Variable("x1"), Variable("x2")
U = Variable("u", "control")


def var(v):
    return Polynomial.variable(v)


class TestArithmetic:
    def test_difference_of_squares(self):
        """(x + 1)(x - 1) is x^2 - 1."""
        x = var(X)
        assert (x + 1) * (x - 1) == x ** 2 - 1

    def test_adding_zero_is_identity(self):
        """p + 0 leaves p unchanged."""
        p = 3 * var(X) * var(Y) - 2
        assert p + Polynomial.zero() == p
        assert p + 0 == p

    def test_zero_coefficients_are_dropped(self):
        """Cancelling terms leave no stored monomial."""
        p = var(X) - var(X)
        assert p.is_zero
        assert len(p) == 0

    def test_degree_of_product(self):
        """deg(pq) = deg p + deg q for nonzero p and q."""
        p = var(X) ** 2 + var(Y)
        q = var(X) * var(Y) + 1
        assert (p * q).degree() == p.degree() + q.degree()

    def test_degree_of_sum_bounded(self):
        """deg(p + q) <= max(deg p, deg q), with cancellation lowering it."""
        p = var(X) ** 3 + var(Y)
        q = -(var(X) ** 3) + var(X)
        assert (p + q).degree() == 1

    def test_lotka_volterra_drift_component(self):
        """x1 - 2 x1 x2 is the prey drift with gamma = (1, 2, ...)."""
        gamma = (1.0, 2.0, 1.0, 2.0, 0.025)
        f1 = gamma[0] * var(X1) - gamma[1] * var(X1) * var(X2)
        assert f1.evaluate({X1: 1.0, X2: 0.25}) == pytest.approx(0.5)
        assert f1.coefficient(Monomial.from_mapping({X1: 1, X2: 1})) == -2.0

    def test_division_by_scalar(self):
        """Dividing by a scalar scales every coefficient."""
        p = (var(X) - 0.5) ** 2 / 10
        assert p.isclose(0.1 * var(X) ** 2 - 0.1 * var(X) + 0.025)

    def test_scalar_comparison(self):
        """A constant polynomial compares equal to its value."""
        assert Polynomial.constant(2.5) == 2.5

    def test_rejects_non_finite_coefficient(self):
        """NaN and infinite coefficients are rejected."""
        with pytest.raises(ValueError, match="Non-finite"):
            Polynomial({Monomial.of(X): math.inf})

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            var(X) ** -1


class TestOrdering:
    def test_variables_sort_by_kind_then_natural_name(self):
        """Time before states before controls; x2 before x10."""
        x10 = Variable("x10")
        assert sort_variables([U, x10, X2, T]) == (T, X2, x10, U)

    def test_terms_are_graded(self):
        """Terms are stored by increasing total degree."""
        p = var(X) ** 2 + var(Y) + 1
        degrees = [mono.degree for mono, _ in p.terms]
        assert degrees == sorted(degrees)

    def test_equality_is_order_independent(self):
        """Building the same polynomial in different orders gives equal objects."""
        p = var(X) * var(Y) + var(X) + 2
        q = 2 + var(X) + var(Y) * var(X)
        assert p == q
        assert hash(p) == hash(q)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="Unknown variable kind"):
            Variable("z", "parameter")


class TestDifferentiate:
    def test_cubic(self):
        """d/dx x^3 = 3x^2."""
        assert differentiate(var(X) ** 3, X) == 3 * var(X) ** 2

    def test_second_order_mixed(self):
        """d^2/dx^2 (x^2 y) = 2y."""
        assert differentiate(var(X) ** 2 * var(Y), X, order=2) == 2 * var(Y)

    def test_time_derivative(self):
        """d/dt (t x1) = x1."""
        assert (var(T) * var(X1)).differentiate(T) == var(X1)

    def test_absent_variable_gives_zero(self):
        assert differentiate(var(Y), X).is_zero

    def test_order_must_be_positive(self):
        """Order 0 is rejected."""
        with pytest.raises(ValueError, match="positive integer"):
            differentiate(var(X), X, order=0)

    def test_integrate_inverts_differentiate(self):
        """The antiderivative differentiates back to the original."""
        p = 3 * var(X) ** 2 * var(Y) + var(Y) - 4
        assert p.integrate(X).differentiate(X).isclose(p)


class TestSubstitute:
    def test_shift(self):
        """x1^2 with x1 -> x1 + 1 is x1^2 + 2x1 + 1."""
        p = substitute(var(X1) ** 2, {X1: var(X1) + 1})
        assert p == var(X1) ** 2 + 2 * var(X1) + 1

    def test_reaction_image(self):
        """w = x1 composed with the expression jump x1 -> x1 + 1."""
        w = var(X1)
        assert w.substitute({X1: var(X1) + 1, X2: var(X2)}) == var(X1) + 1

    def test_facet_restriction(self):
        """x1 x2 with x1 fixed at 1.5 is 1.5 x2."""
        assert substitute(var(X1) * var(X2), {X1: 1.5}) == 1.5 * var(X2)

    def test_degree_bound(self):
        """deg(p o q) <= deg p * max binding degree."""
        p = var(X) ** 2 * var(Y)
        q = substitute(p, {X: var(Y) ** 2 + 1})
        assert q.degree() <= p.degree() * 2

    def test_empty_bindings(self):
        p = var(X) + 1
        assert substitute(p, {}) is p


class TestBasis:
    def test_two_variables_degree_two(self):
        """C(4, 2) = 6 monomials {1, x, y, x^2, xy, y^2}."""
        basis = monomial_basis([X, Y], 2)
        assert len(basis) == 6
        assert basis[0] == Monomial()
        assert set(basis[1:3]) == {Monomial.of(X), Monomial.of(Y)}

    def test_degree_zero(self):
        """Any number of variables at degree 0 gives {1}."""
        assert monomial_basis([X, Y, U], 0) == [Monomial()]

    def test_three_variables_degree_four(self):
        """C(7, 4) = 35."""
        assert len(monomial_basis([X, Y, T], 4)) == 35

    @pytest.mark.parametrize("n,d", [(1, 3), (2, 4), (4, 2), (3, 6)])
    def test_binomial_count(self, n, d):
        variables = [Variable(f"z{i}") for i in range(n)]
        assert len(monomial_basis(variables, d)) == math.comb(n + d, d)

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            monomial_basis([X], -1)


class TestAffine:
    def test_interval_to_unit_maps_endpoints(self):
        """The local interval [-1, 1] lands on [lower, upper]."""
        amap = AffineMap.interval_to_unit(2.0, 6.0)
        assert amap.apply(-1.0) == 2.0
        assert amap.apply(1.0) == 6.0

    def test_inverse(self):
        amap = AffineMap(2.0, -3.0)
        assert amap.inverse().apply(amap.apply(1.7)) == pytest.approx(1.7)

    def test_zero_scale_rejected(self):
        """A zero scale is not invertible."""
        with pytest.raises(ValueError, match="nonzero scale"):
            AffineMap(0.0, 1.0)

    def test_change_of_basis_preserves_values(self):
        """p(a s + b) at s equals p at a s + b."""
        p = var(X) ** 3 - 2 * var(X) * var(Y) + 5
        amap = AffineMap.interval_to_unit(0.0, 1.5)
        q = affine_change_of_basis(p, {X: amap})
        for s in (-1.0, -0.3, 0.0, 0.8, 1.0):
            expected = p.evaluate({X: amap.apply(s), Y: 0.7})
            assert q.evaluate({X: s, Y: 0.7}) == pytest.approx(expected)

    def test_identity_maps_are_skipped(self):
        p = var(X) * var(Y)
        assert affine_change_of_basis(p, {X: AffineMap()}) == p


class TestEvaluation:
    def test_evaluate_requires_all_variables(self):
        """Missing variables raise ValueError."""
        with pytest.raises(ValueError, match="No value supplied"):
            (var(X) + var(Y)).evaluate({X: 1.0})

    def test_compile_matches_evaluate(self):
        """The vectorised evaluator agrees with pointwise evaluation."""
        p = var(X) ** 3 - 2 * var(X) * var(Y) + 0.5 * var(Y) ** 2 + 1
        fn = p.compile((X, Y))
        xs = np.linspace(-2, 2, 7)
        ys = np.linspace(0, 1, 7)
        expected = [p.evaluate({X: a, Y: b}) for a, b in zip(xs, ys)]
        np.testing.assert_allclose(fn(xs, ys), expected)

    def test_compile_broadcasts_constants(self):
        fn = Polynomial.constant(4.0).compile((X,))
        assert np.broadcast_to(fn(np.zeros(3)), (3,)).tolist() == [4.0, 4.0, 4.0]

    def test_compile_rejects_missing_variables(self):
        with pytest.raises(ValueError, match="Cannot compile"):
            var(Y).compile((X,))

    def test_collect_groups_by_control_monomial(self):
        """Collecting in u separates the control-affine structure."""
        p = var(X) ** 2 + var(X) * var(U) + 2 * var(U) ** 2
        groups = p.collect((U,))
        assert groups[Monomial()] == var(X) ** 2
        assert groups[Monomial.of(U)] == var(X)
        assert groups[Monomial.of(U, 2)] == Polynomial.constant(2.0)

    def test_from_exponents(self):
        """Term lists over declared variables build the expected polynomial."""
        p = Polynomial.from_exponents((X1, X2, U), [(1.0, [1, 0, 0]), (-2.0, [1, 1, 0])])
        assert p == var(X1) - 2 * var(X1) * var(X2)

    def test_from_exponents_length_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            Polynomial.from_exponents((X1, X2), [(1.0, [1, 0, 0])])
