from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elderuq.quadrature import (
    QuadratureError,
    build_rule,
    clenshaw_curtis_1d,
    gauss_legendre_1d,
    halton,
    halton_unit,
    smolyak_sparse,
    tensor_product,
)


def monomial_integral(powers):
    """Exact integral of prod x_j^k_j over [-1, 1]^M."""
    out = 1.0
    for k in powers:
        out *= 0.0 if k % 2 else 2.0 / (k + 1)
    return out


def van_der_corput(i, base):
    """Radical inverse in exact rational arithmetic."""
    out, denom = Fraction(0), base
    while i:
        i, d = divmod(i, base)
        out += Fraction(d, denom)
        denom *= base
    return out


def test_gauss_legendre_small_rules():
    r = gauss_legendre_1d(1)
    np.testing.assert_array_equal(r.nodes, [[0.0]])
    assert r.weights[0] == pytest.approx(2.0, rel=1e-15)
    r = gauss_legendre_1d(2)
    np.testing.assert_allclose(np.sort(r.nodes[:, 0]), [-1 / np.sqrt(3), 1 / np.sqrt(3)], rtol=1e-15)
    np.testing.assert_allclose(r.weights, [1.0, 1.0], rtol=1e-15)
    assert gauss_legendre_1d(3).integrate(lambda x: x[:, 0] ** 4) == pytest.approx(0.4, rel=1e-14)
    with pytest.raises(QuadratureError):
        gauss_legendre_1d(0)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13])
def test_gauss_legendre_exactness(n, rng):
    r = gauss_legendre_1d(n)
    for k in range(2 * n):
        assert r.integrate(lambda x: x[:, 0] ** k) == pytest.approx(monomial_integral([k]), abs=1e-14)
    coef = rng.normal(size=2 * n)
    poly = np.polynomial.Polynomial(coef)
    exact = poly.integ()(1.0) - poly.integ()(-1.0)
    assert r.integrate(lambda x: poly(x[:, 0])) == pytest.approx(exact, rel=1e-12, abs=1e-12)
    if n <= 6:
        # degree 2n is not integrated exactly
        assert abs(r.integrate(lambda x: x[:, 0] ** (2 * n)) - monomial_integral([2 * n])) > 1e-8


def test_clenshaw_curtis_levels():
    r0 = clenshaw_curtis_1d(0)
    np.testing.assert_array_equal(r0.nodes, [[0.0]])
    np.testing.assert_array_equal(r0.weights, [2.0])
    r1 = clenshaw_curtis_1d(1)
    np.testing.assert_allclose(r1.nodes[:, 0], [-1.0, 0.0, 1.0], atol=1e-16)
    np.testing.assert_allclose(r1.weights, [1 / 3, 4 / 3, 1 / 3], rtol=1e-14)


@pytest.mark.parametrize("level", range(0, 8))
def test_clenshaw_curtis_properties(level):
    r = clenshaw_curtis_1d(level)
    n = 1 if level == 0 else 2**level + 1
    assert r.size == n
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-14)
    assert np.all(r.weights > 0)
    if n > 1:
        expected = np.sort(np.cos(np.pi * np.arange(n) / (n - 1)))
        np.testing.assert_allclose(np.sort(r.nodes[:, 0]), expected, atol=1e-15)
    for k in range(n):
        assert r.integrate(lambda x: x[:, 0] ** k) == pytest.approx(monomial_integral([k]), abs=1e-13)


def test_clenshaw_curtis_nested():
    coarse = clenshaw_curtis_1d(3).nodes[:, 0]
    fine = clenshaw_curtis_1d(4).nodes[:, 0]
    assert all(np.min(np.abs(fine - x)) < 1e-15 for x in coarse)


def test_tensor_products():
    r = tensor_product([gauss_legendre_1d(1), gauss_legendre_1d(1)])
    np.testing.assert_array_equal(r.nodes, [[0.0, 0.0]])
    assert r.weights[0] == pytest.approx(4.0)
    r = tensor_product([gauss_legendre_1d(2)] * 2)
    assert r.size == 4
    np.testing.assert_allclose(r.weights, 1.0, rtol=1e-14)
    assert r.integrate(lambda x: x[:, 0] ** 2 * x[:, 1] ** 2) == pytest.approx(4 / 9, rel=1e-14)
    with pytest.raises(QuadratureError):
        tensor_product([])


@pytest.mark.parametrize("m, counts", [(3, [1, 7, 25, 69]), (5, [1, 11, 61, 241])])
def test_smolyak_counts(m, counts):
    assert [smolyak_sparse(m, l).size for l in range(4)] == counts


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_smolyak_level_zero(m):
    r = smolyak_sparse(m, 0)
    np.testing.assert_array_equal(r.nodes, np.zeros((1, m)))
    assert r.weights[0] == pytest.approx(2.0**m)


@pytest.mark.parametrize("m, level", [(2, 1), (2, 3), (3, 2), (3, 3), (4, 2), (5, 3)])
def test_smolyak_exactness(m, level):
    r = smolyak_sparse(m, level)
    assert r.weights.sum() == pytest.approx(2.0**m, rel=1e-13)
    assert np.all(np.abs(r.nodes) <= 1.0)
    # nested CC Smolyak of this level is exact for total degree 2 * level + 1
    deg = 2 * level + 1
    for powers in product(range(deg + 1), repeat=m):
        if sum(powers) > deg:
            continue
        got = r.integrate(lambda x: np.prod(x ** np.array(powers), axis=1))
        assert got == pytest.approx(monomial_integral(powers), abs=1e-12)


def test_smolyak_nodes_unique():
    r = smolyak_sparse(3, 3)
    assert len({tuple(np.round(n, 14)) for n in r.nodes}) == r.size


def test_halton_known_points():
    r = halton(1, 3)
    np.testing.assert_array_equal(r.nodes[:, 0], [0.0, -0.5, 0.5])
    r = halton(2, 1)
    np.testing.assert_allclose(r.nodes[0], [0.0, -1 / 3], rtol=0, atol=1e-16)
    assert halton(4, 0).size == 0


def test_halton_first_ten_match_oracle():
    r = halton(5, 10)
    unit = halton_unit(5, 10)
    for i in range(10):
        for d, b in enumerate([2, 3, 5, 7, 11]):
            u = float(van_der_corput(i + 1, b))
            assert unit[i, d] == u
            assert r.nodes[i, d] == 2.0 * u - 1.0
    np.testing.assert_array_equal(r.weights, np.full(10, 0.1))
    assert r.convention == "probability"


def test_halton_inside_open_cube():
    r = halton(6, 5000)
    assert np.all(np.abs(r.nodes) < 1.0)


def star_discrepancy_1d(u):
    u = np.sort(u)
    n = u.size
    i = np.arange(1, n + 1)
    return max(np.max(i / n - u), np.max(u - (i - 1) / n))


def test_halton_discrepancy_decreases():
    d = [star_discrepancy_1d(0.5 * (halton(1, n).nodes[:, 0] + 1)) for n in (16, 64, 256, 1024)]
    assert all(a > b for a, b in zip(d, d[1:]))


@given(st.integers(1, 4), st.integers(0, 3))
def test_probability_weights_sum_to_one(m, level):
    assert smolyak_sparse(m, level).probability_weights().sum() == pytest.approx(1.0, rel=1e-12)


def test_build_rule_dispatch():
    assert build_rule(3, "smolyak", level=3).size == 69
    assert build_rule(2, "tensor-cc", level=2).size == 25
    assert build_rule(2, "tensor-gl", n=4).size == 16
    assert build_rule(3, "halton", n=600).size == 600
    with pytest.raises(QuadratureError):
        build_rule(3, "sobol", n=8)
