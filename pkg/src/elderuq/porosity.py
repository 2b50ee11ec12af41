"""Parametric porosity fields phi(x, y, theta) with theta in [-1, 1]^M.

Every field is affine in theta: phi = base(x, y) + sum_i theta_i f_i(x, y).
"""

from dataclasses import dataclass, field

import numpy as np

LX, LY = 600.0, 150.0


class FieldDomainError(ValueError):
    pass


def _check_point(x, y, Lx=LX, Ly=LY):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-9
    if np.any(x < -tol * Lx) or np.any(x > Lx * (1 + tol)) or \
            np.any(y < -tol * Ly) or np.any(y > Ly * (1 + tol)):
        raise FieldDomainError("point outside the reservoir")
    return x, y


def _check_theta(theta, m):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (m,):
        raise FieldDomainError(f"expected {m} stochastic parameters, got shape {theta.shape}")
    if np.any(np.abs(theta) > 1.0):
        raise FieldDomainError("theta outside [-1, 1]^M")
    return theta


def porosity_smooth3(x, y, theta):
    """Smooth three-parameter field around 0.1 with amplitude 0.005 per mode."""
    x, y = _check_point(x, y)
    t = _check_theta(theta, 3)
    return 0.1 + 0.005 * (t[0] * np.cos(np.pi * x / 600.0)
                          + t[1] * np.sin(2 * np.pi * y / 150.0)
                          + t[2] * np.cos(4 * np.pi * x / 600.0))


LAYER_BOUNDS = (50.0, 120.0)
LAYER_BASE = (0.09, 0.06, 0.08)  # bottom, middle, top


def _layer_base(y, bounds=LAYER_BOUNDS, base=LAYER_BASE):
    # half-open intervals [0, b0), [b0, b1), [b1, Ly]
    idx = np.searchsorted(np.asarray(bounds), y, side="right")
    return np.asarray(base)[idx]


def porosity_layered5(x, y, theta):
    """Three-layer field with five sine-product modes of amplitude 0.01."""
    x, y = _check_point(x, y)
    t = _check_theta(theta, 5)
    pert = sum(t[i - 1] * np.sin(i * x * np.pi / 600.0) * np.sin(i * y * np.pi / 150.0)
               for i in range(1, 6))
    return _layer_base(y) + 0.01 * pert


def porosity_longwave3(x, y, theta):
    """Three-parameter field with long-wavelength modes.

    The arguments are taken literally as radians (no factor pi), so over the
    reservoir the modes vary only slightly.
    """
    x, y = _check_point(x, y)
    t = _check_theta(theta, 3)
    return 0.1 + 0.01 * (t[0] * np.cos(x / 1200.0) + t[1] * np.sin(y / 300.0)
                         + t[2] * np.sin(x / 2400.0))


_MODE_FUNCS = {
    "cos": np.cos,
    "sin": np.sin,
    "one": lambda z: np.ones_like(z),
}


@dataclass(frozen=True)
class Mode:
    """One term a * fx(kx * x) * fy(ky * y) of a generic expansion."""

    amplitude: float
    fx: str = "one"
    kx: float = 0.0
    fy: str = "one"
    ky: float = 0.0

    def __call__(self, x, y):
        return self.amplitude * _MODE_FUNCS[self.fx](self.kx * x) * _MODE_FUNCS[self.fy](self.ky * y)


@dataclass(frozen=True)
class PorosityFieldSpec:
    """Selects and parameterises a porosity field.

    ``variant`` is one of ``smooth3``, ``layered5``, ``longwave3`` or
    ``generic``.  The layer tables apply to ``layered5`` and ``generic``;
    ``modes`` is used by ``generic`` only.
    """

    variant: str = "smooth3"
    layer_bounds: tuple = LAYER_BOUNDS
    layer_base: tuple = LAYER_BASE
    modes: tuple = field(default_factory=tuple)
    Lx: float = LX
    Ly: float = LY

    def __post_init__(self):
        if self.variant not in ("smooth3", "layered5", "longwave3", "generic"):
            raise ValueError(f"unknown porosity variant {self.variant!r}")
        b = np.asarray(self.layer_bounds, dtype=float)
        if b.size and (np.any(np.diff(b) <= 0) or b[0] <= 0 or b[-1] >= self.Ly):
            raise ValueError("layer boundaries must be strictly increasing inside (0, Ly)")
        if len(self.layer_base) != b.size + 1:
            raise ValueError("need one base porosity per layer")
        if self.variant == "generic":
            if not self.modes:
                raise ValueError("generic porosity needs at least one mode")
            for m in self.modes:
                if m.fx not in _MODE_FUNCS or m.fy not in _MODE_FUNCS:
                    raise ValueError(f"unknown mode function in {m}")
        lo, hi = self.bounds()
        if lo <= 0 or hi >= 1:
            raise ValueError(f"porosity may leave (0, 1): worst-case range [{lo}, {hi}]")

    @property
    def dim(self):
        return {"smooth3": 3, "layered5": 5, "longwave3": 3}.get(self.variant, len(self.modes))

    def __call__(self, x, y, theta):
        if self.variant == "smooth3":
            return porosity_smooth3(x, y, theta)
        if self.variant == "layered5":
            return porosity_layered5(x, y, theta)
        if self.variant == "longwave3":
            return porosity_longwave3(x, y, theta)
        x, y = _check_point(x, y, self.Lx, self.Ly)
        t = _check_theta(theta, self.dim)
        out = _layer_base(y, self.layer_bounds, self.layer_base) + 0.0 * x
        for ti, mode in zip(t, self.modes):
            out = out + ti * mode(x, y)
        return out

    def bounds(self):
        """Worst-case (min, max) over the reservoir and theta in [-1, 1]^M."""
        if self.variant == "smooth3":
            return 0.1 - 0.015, 0.1 + 0.015
        if self.variant == "longwave3":
            return 0.1 - 0.03, 0.1 + 0.03
        if self.variant == "layered5":
            base, amp = LAYER_BASE, 0.05
        else:
            base = self.layer_base
            amp = sum(abs(m.amplitude) for m in self.modes)
        return min(base) - amp, max(base) + amp


def porosity_on_grid(spec, grid, theta):
    """Evaluate the field at the grid vertices and check admissibility."""
    phi = spec(grid.x, grid.y, theta)
    if np.any(phi <= 0.0) or np.any(phi >= 1.0):
        raise FieldDomainError(f"porosity left (0, 1): min={phi.min():.4g}, max={phi.max():.4g}")
    return phi
