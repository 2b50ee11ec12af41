"""Constitutive laws of the variable-density flow model.

All functions are pure and accept scalars or numpy arrays.
"""

from dataclasses import dataclass

import numpy as np

SECONDS_PER_YEAR = 3.1536e7


class DomainError(ValueError):
    """An argument lies outside the domain of a constitutive law."""


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of the Elder-type problem (SI units).

    Defaults are the values of the standard benchmark setup.
    """

    mean_porosity: float = 0.1
    molecular_diffusion: float = 0.565e-6
    mean_permeability: float = 4.845e-13
    gravity: float = 9.81
    density_pure: float = 1000.0
    density_brine: float = 1200.0
    viscosity: float = 1.0e-3

    def __post_init__(self):
        for name in ("molecular_diffusion", "mean_permeability", "viscosity",
                     "density_pure", "density_brine"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.gravity < 0:
            raise ValueError("gravity magnitude must be non-negative")
        if not 0 < self.mean_porosity < 1:
            raise ValueError("mean_porosity must lie in (0, 1)")
        if self.density_brine < self.density_pure:
            raise ValueError("brine must not be lighter than pure water")

    @property
    def density_contrast(self):
        return self.density_brine - self.density_pure


@dataclass(frozen=True)
class KozenyCarmanClosure:
    kappa_kc: float

    def __post_init__(self):
        if not self.kappa_kc > 0:
            raise ValueError("kappa_kc must be positive")


def density(c, params):
    """Linear equation of state rho(c) = rho0 + (rho1 - rho0) c."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise DomainError("mass fraction outside [0, 1]")
    rho = params.density_pure + params.density_contrast * c
    return rho if rho.ndim else float(rho)


def calibrate_kozeny_carman(mean_porosity, mean_permeability):
    """Choose kappa so that the closure reproduces the mean permeability at the mean porosity."""
    if not 0 < mean_porosity < 1:
        raise CalibrationError(f"degenerate mean porosity {mean_porosity}")
    if not mean_permeability > 0:
        raise CalibrationError(f"mean permeability must be positive, got {mean_permeability}")
    phi = mean_porosity
    return KozenyCarmanClosure(mean_permeability * (1.0 - phi * phi) / phi**3)


def permeability(phi, closure):
    """Kozeny-Carman-like permeability K = kappa phi^3 / (1 - phi^2)."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0.0) or np.any(phi >= 1.0):
        raise DomainError(f"porosity outside (0, 1): min={phi.min()}, max={phi.max()}")
    k = closure.kappa_kc * phi**3 / (1.0 - phi * phi)
    return k if k.ndim else float(k)


def gravity_vector(params, dim=2):
    g = np.zeros(dim)
    g[-1] = -params.gravity
    return g


def darcy_velocity(K, mu, grad_p, rho, gravity):
    """Darcy flux q = -(K / mu) (grad p - rho g).

    `grad_p` and `gravity` have the spatial dimension as their last axis.
    """
    grad_p = np.asarray(grad_p, dtype=float)
    gravity = np.asarray(gravity, dtype=float)
    K = np.asarray(K, dtype=float)[..., None]
    rho = np.asarray(rho, dtype=float)[..., None]
    return -(K / mu) * (grad_p - rho * gravity)


def diffusion_coefficient(phi, params):
    """Scalar coefficient of the isotropic tensor D = phi D_m I."""
    return np.asarray(phi, dtype=float) * params.molecular_diffusion
