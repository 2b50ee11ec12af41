"""Legendre polynomial chaos surrogates built by quadrature projection.

Basis functions are products of standard (unnormalised) Legendre
polynomials, ``Psi_beta(theta) = prod_j psi_{beta_j}(theta_j)``, orthogonal
under the uniform law on [-1, 1]^M with ``E[Psi_beta^2] = prod_j 1/(2 beta_j + 1)``.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .quadrature import PROBABILITY

DEFAULT_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


class SurrogateError(ValueError):
    pass


def legendre_1d(n, x):
    """Legendre polynomial of degree n by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if n < 0:
        raise ValueError("degree must be non-negative")
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p


def legendre_table(nmax, x):
    """Values psi_0..psi_nmax at x; shape ``(nmax + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1)
    return out


def psi(beta, theta):
    """Multivariate Legendre polynomial Psi_beta at theta (last axis = dimension)."""
    theta = np.asarray(theta, dtype=float)
    beta = tuple(beta)
    if theta.shape[-1] != len(beta):
        raise SurrogateError(f"multi-index of length {len(beta)} vs theta of dimension {theta.shape[-1]}")
    out = np.ones(theta.shape[:-1])
    for j, b in enumerate(beta):
        if b:
            out = out * legendre_1d(b, theta[..., j])
    return out if out.ndim else float(out)


STRATEGIES = ("total", "max", "product")


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    dim: int
    order: int
    strategy: str
    indices: np.ndarray  # (n_terms, dim) int

    def __len__(self):
        return self.indices.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self.indices)

    @property
    def norms(self):
        """Q_beta = E[Psi_beta^2] = prod_j 1 / (2 beta_j + 1)."""
        return np.prod(1.0 / (2.0 * self.indices + 1.0), axis=1)

    @property
    def total_degree(self):
        return self.indices.sum(axis=1)

    def position(self, beta):
        hits = np.flatnonzero((self.indices == np.asarray(beta)).all(axis=1))
        if not hits.size:
            raise KeyError(beta)
        return int(hits[0])

    def same_as(self, other):
        return (self.dim == other.dim and self.indices.shape == other.indices.shape
                and np.array_equal(self.indices, other.indices))

    def basis(self, theta):
        """Matrix of Psi_beta(theta_i), shape ``(n_points, n_terms)``."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.dim:
            raise SurrogateError(f"theta has dimension {theta.shape[1]}, expected {self.dim}")
        nmax = int(self.indices.max()) if self.indices.size else 0
        tab = legendre_table(nmax, theta)  # (nmax+1, N, M)
        out = np.ones((theta.shape[0], len(self)))
        for j in range(self.dim):
            out *= tab[self.indices[:, j], :, j].T
        return out


def build_multi_index_set(dim, order, strategy="total"):
    """Enumerate the truncated index set in lexicographic order.

    ``total``: sum(beta) <= order; ``max``: max(beta) <= order;
    ``product``: prod(beta_j + 1) <= order + 1 (hyperbolic cross).
    """
    if dim < 1 or order < 0:
        raise ValueError("need dim >= 1 and order >= 0")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown truncation strategy {strategy!r}")
    keep = {
        "total": lambda b: sum(b) <= order,
        "max": lambda b: max(b) <= order,
        "product": lambda b: np.prod([v + 1 for v in b]) <= order + 1,
    }[strategy]
    idx = [b for b in product(range(order + 1), repeat=dim) if keep(b)]
    return MultiIndexSet(dim, order, strategy, np.array(idx, dtype=int).reshape(-1, dim))


@dataclass(eq=False)
class SurrogateModel:
    """Coefficient fields c_beta(t, x) of a truncated gPC expansion.

    ``coefficients`` has shape ``(n_times, n_terms, n_points)``.
    """

    index_set: MultiIndexSet
    coefficients: np.ndarray
    times: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[1] != len(self.index_set):
            raise SurrogateError(f"coefficient array of shape {c.shape} does not match "
                                 f"{len(self.index_set)} basis terms")
        self.coefficients = c
        if self.times is None:
            self.times = np.arange(c.shape[0], dtype=float)
        self.times = np.asarray(self.times, dtype=float)

    @property
    def norms(self):
        return self.index_set.norms

    @property
    def n_times(self):
        return self.coefficients.shape[0]

    def time_index(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        return i

    def mean(self):
        """The first coefficient, shape ``(n_times, n_points)``."""
        return self.coefficients[:, 0, :].copy()

    def variance(self):
        q = self.norms[1:]
        return np.einsum("b,tbx->tx", q, self.coefficients[:, 1:, :] ** 2)

    def second_moment(self):
        return np.einsum("b,tbx->tx", self.norms, self.coefficients**2)

    def evaluate(self, theta, time_index=None, points=None):
        """Surrogate values at theta (``(M,)`` or ``(N, M)``).

        Returns ``(N, n_times, n_points)`` reduced over the selected time and
        points; a single theta drops the leading axis.
        """
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 1
        B = self.index_set.basis(theta)
        c = self.coefficients
        if time_index is not None:
            c = c[time_index]
            if points is not None:
                c = c[:, points]
            out = B @ c
        else:
            if points is not None:
                c = c[:, :, points]
            out = np.einsum("nb,tbx->ntx", B, c)
        return out[0] if single else out

    def _combine(self, other, a, b):
        if not self.index_set.same_as(other.index_set):
            raise SurrogateError("surrogates use different index sets")
        return SurrogateModel(self.index_set, a * self.coefficients + b * other.coefficients,
                              self.times.copy(), {"combined": True})

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, k):
        return SurrogateModel(self.index_set, k * self.coefficients, self.times.copy(), dict(self.provenance))

    __rmul__ = __mul__


def project_coefficients(values, rule, index_set, times=None, provenance=None):
    """Spectral projection of realization data onto the Legendre basis.

    ``values`` has one leading entry per rule node, followed by
    ``(n_times, n_points)`` or ``(n_points,)``.  Lebesgue-weight rules are
    rescaled by the uniform density 0.5^M; probability-weight rules are used
    as they are.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != rule.size:
        raise SurrogateError(f"{values.shape[0]} realizations for a rule with {rule.size} nodes")
    if rule.dim != index_set.dim:
        raise SurrogateError(f"rule dimension {rule.dim} vs index set dimension {index_set.dim}")
    if values.ndim == 1:
        values = values[:, None, None]
    elif values.ndim == 2:
        values = values[:, None, :]
    w = rule.weights if rule.convention == PROBABILITY else rule.weights * 0.5**rule.dim
    B = index_set.basis(rule.nodes) * w[:, None]  # (N, n_terms)
    # fixed-order reduction over nodes, per time level
    coef = np.stack([B.T @ values[:, k, :] for k in range(values.shape[1])])
    coef /= index_set.norms[None, :, None]
    prov = {"rule": rule.describe()}
    if provenance:
        prov.update(provenance)
    return SurrogateModel(index_set, coef, times, prov)


def surrogate_mean(model):
    return model.mean()


def surrogate_variance(model):
    return model.variance()


def surrogate_eval(model, theta, time_index=None, points=None):
    return model.evaluate(theta, time_index, points)


def qmc_moments(values, rule=None):
    """Plug-in sample mean and (biased) variance with equal weights 1/N."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n == 0:
        raise SurrogateError("no samples")
    if rule is not None:
        if rule.size != n:
            raise SurrogateError("sample count differs from rule size")
        w = rule.probability_weights()
    else:
        w = np.full(n, 1.0 / n)
    mean = np.tensordot(w, values, axes=1)
    var = np.tensordot(w, (values - mean) ** 2, axes=1)
    return mean, var


@dataclass
class PointStatistics:
    time: float
    x: float
    y: float
    vertex: int
    n_samples: int
    mean: float
    std: float
    quantile_levels: tuple
    quantiles: np.ndarray
    exceedance: list  # (threshold, probability)
    pdf_centers: np.ndarray = field(repr=False, default=None)
    pdf_density: np.ndarray = field(repr=False, default=None)
    pdf_widths: np.ndarray = field(repr=False, default=None)

    def row(self):
        return [self.time, self.x, self.y, self.mean, self.std, *self.quantiles]


def _pdf_histogram(samples, method="fd"):
    lo, hi = float(samples.min()), float(samples.max())
    if hi - lo <= 1e-14 * max(1.0, abs(lo)):
        # degenerate law: one bin holding all mass
        width = max(1e-12, 1e-9 * max(1.0, abs(lo)))
        edges = np.array([lo - 0.5 * width, lo + 0.5 * width])
        widths = np.diff(edges)
        return 0.5 * (edges[1:] + edges[:-1]), 1.0 / widths, widths
    if method == "kde":
        # Gaussian kernel on a thinned sample, renormalised on a uniform grid
        from scipy.stats import gaussian_kde
        kde = gaussian_kde(samples[:: max(1, samples.size // 20000)])
        edges = np.linspace(lo, hi, 201)
        centers = 0.5 * (edges[1:] + edges[:-1])
        widths = np.diff(edges)
        density = kde(centers)
        return centers, density / np.sum(density * widths), widths
    if method == "fd":
        q75, q25 = np.percentile(samples, [75, 25])
        iqr = q75 - q25
        if iqr > 0:
            width = 2.0 * iqr / samples.size ** (1.0 / 3.0)
            nbins = int(np.clip(np.ceil((hi - lo) / width), 1, 10000))
        else:
            nbins = int(np.ceil(np.log2(samples.size) + 1))
    else:
        nbins = int(method)
    counts, edges = np.histogram(samples, bins=nbins, range=(lo, hi))
    widths = np.diff(edges)
    density = counts / (samples.size * widths)
    return 0.5 * (edges[1:] + edges[:-1]), density, widths


def sample_point(model, time_index, vertex, n_samples, seed=0, chunk=200_000):
    """Draw n iid uniform thetas (Philox stream) and evaluate the surrogate at one vertex."""
    coef = model.coefficients[time_index, :, vertex]
    rng = np.random.Generator(np.random.Philox(seed))
    out = np.empty(n_samples)
    for start in range(0, n_samples, chunk):
        stop = min(n_samples, start + chunk)
        theta = rng.uniform(-1.0, 1.0, size=(stop - start, model.index_set.dim))
        out[start:stop] = model.index_set.basis(theta) @ coef
    return out


def point_statistics(model, time, point, grid=None, n_samples=10**6,
                     quantile_levels=DEFAULT_QUANTILES, thresholds=(), seed=0, pdf="fd"):
    """Sampling statistics of the surrogate at one space-time point.

    ``point`` is ``(x, y)`` when ``grid`` is given (nearest vertex) or a
    vertex index otherwise.  Quantiles are order statistics (inverse of the
    empirical CDF); exceedance probabilities count strict exceedances.
    """
    if len(model.index_set) == 0 or model.coefficients.size == 0:
        raise SurrogateError("empty surrogate")
    if n_samples < 1:
        raise SurrogateError("need at least one sample")
    if grid is not None:
        x, y = point
        vertex = grid.nearest_vertex(x, y)
        x, y = float(grid.x[vertex]), float(grid.y[vertex])
    else:
        vertex = int(point)
        x = y = float("nan")
    ti = model.time_index(time)
    s = sample_point(model, ti, vertex, n_samples, seed)
    levels = tuple(float(a) for a in quantile_levels)
    quant = np.quantile(s, levels, method="inverted_cdf")
    exceed = [(float(c), float(np.count_nonzero(s > c)) / n_samples) for c in thresholds]
    centers, density, widths = _pdf_histogram(s, pdf)
    return PointStatistics(
        time=float(model.times[ti]), x=x, y=y, vertex=vertex, n_samples=n_samples,
        mean=float(s.mean()), std=float(s.std()), quantile_levels=levels,
        quantiles=np.asarray(quant, dtype=float), exceedance=exceed,
        pdf_centers=centers, pdf_density=density, pdf_widths=widths,
    )


def approximation_error_estimate(fine, coarse, volumes=None):
    """L2(Theta) x L2(D) distance between two projections of the same expansion.

    Returns ``(error, truncation)`` arrays over stored times.  ``truncation``
    is the share of the fine model's variance carried by the terms of
    highest total degree, an indicator of how much the dropped terms matter.
    """
    if not fine.index_set.same_as(coarse.index_set):
        raise SurrogateError("models use different index sets")
    if fine.coefficients.shape != coarse.coefficients.shape:
        raise SurrogateError("coefficient arrays differ in shape")
    n_pts = fine.coefficients.shape[2]
    vol = np.ones(n_pts) if volumes is None else np.asarray(volumes, dtype=float)
    q = fine.norms
    diff2 = (fine.coefficients - coarse.coefficients) ** 2 @ vol  # (n_times, n_terms)
    err = np.sqrt(diff2 @ q)
    deg = fine.index_set.total_degree
    energy = (fine.coefficients**2 @ vol) * q  # (n_times, n_terms)
    top = deg == deg.max()
    var_total = energy[:, 1:].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        trunc = np.where(var_total > 0, energy[:, top & (deg > 0)].sum(axis=1) / var_total, 0.0)
    return err, trunc
