import numpy as np
import pytest
from hypothesis import given, strategies as st

from elderuq.physics import (
    CalibrationError,
    DomainError,
    KozenyCarmanClosure,
    PhysicalParams,
    calibrate_kozeny_carman,
    darcy_velocity,
    density,
    diffusion_coefficient,
    gravity_vector,
    permeability,
)


@pytest.mark.parametrize("c, rho", [(0.0, 1000.0), (1.0, 1200.0), (0.5, 1100.0)])
def test_density_values(params, c, rho):
    assert density(c, params) == pytest.approx(rho, rel=1e-15)


def test_density_rejects_out_of_range(params):
    with pytest.raises(DomainError):
        density(-1e-3, params)
    with pytest.raises(DomainError):
        density(np.array([0.2, 1.01]), params)


@given(st.floats(0.0, 1.0))
def test_density_bounded_and_affine(c):
    p = PhysicalParams()
    rho = density(c, p)
    assert 1000.0 <= rho <= 1200.0
    assert rho - 1000.0 == pytest.approx(200.0 * c, abs=1e-12)


def test_calibration_table_values():
    # 4.845e-13 * (1 - 0.01) / 0.001, worked by hand
    kc = calibrate_kozeny_carman(0.1, 4.845e-13)
    assert kc.kappa_kc == pytest.approx(4.79655e-10, rel=1e-12)
    assert calibrate_kozeny_carman(0.5, 1.0).kappa_kc == pytest.approx(6.0, rel=1e-15)


@pytest.mark.parametrize("phi, k", [(0.1, 4.845e-13), (0.3, 2e-12), (0.05, 1e-14)])
def test_calibration_identity(phi, k):
    assert permeability(phi, calibrate_kozeny_carman(phi, k)) == pytest.approx(k, rel=1e-14)


@pytest.mark.parametrize("phi, k", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_calibration_errors(phi, k):
    with pytest.raises(CalibrationError):
        calibrate_kozeny_carman(phi, k)


def test_permeability_values():
    assert permeability(0.2, KozenyCarmanClosure(1.0)) == pytest.approx(0.008 / 0.96, rel=1e-14)
    assert permeability(1e-6, KozenyCarmanClosure(1.0)) < 1e-17
    with pytest.raises(DomainError):
        permeability(0.0, KozenyCarmanClosure(1.0))
    with pytest.raises(DomainError):
        permeability(1.0, KozenyCarmanClosure(1.0))


def test_permeability_monotone():
    phi = np.linspace(1e-3, 0.999, 2000)
    assert np.all(np.diff(permeability(phi, KozenyCarmanClosure(4.79655e-10))) > 0)


def test_darcy_table_example(params):
    g = gravity_vector(params)
    q = darcy_velocity(4.845e-13, 1e-3, np.zeros(2), 1000.0, g)
    assert q[0] == 0.0
    # -(K/mu) * rho * g = -4.845e-10 * 9810
    assert q[1] == pytest.approx(-4.752945e-6, rel=1e-12)


def test_darcy_unit_and_hydrostatic(params):
    q = darcy_velocity(1.0, 1.0, np.array([1.0, 0.0]), 1000.0, np.zeros(2))
    np.testing.assert_array_equal(q, [-1.0, 0.0])
    g = gravity_vector(params)
    assert np.all(darcy_velocity(1e-12, 1e-3, 1050.0 * g, 1050.0, g) == 0.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 10))
def test_darcy_linear(a, b, s):
    g = np.array([0.0, -9.81])
    q1 = darcy_velocity(2.0, 3.0, np.array([a, b]), 1000.0, g)
    q2 = darcy_velocity(2.0, 3.0, np.array([s * a, s * b]) + (1 - s) * 1000.0 * g, 1000.0, g)
    np.testing.assert_allclose(q2, s * q1, rtol=1e-9, atol=1e-9)


def test_diffusion_is_phi_times_dm(params):
    assert diffusion_coefficient(0.1, params) == pytest.approx(0.1 * 0.565e-6)


@pytest.mark.parametrize("field, value", [("viscosity", 0.0), ("mean_porosity", 1.0),
                                          ("density_brine", 900.0), ("gravity", -1.0)])
def test_params_validation(field, value):
    with pytest.raises(ValueError):
        PhysicalParams(**{field: value})
