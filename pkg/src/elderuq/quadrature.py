"""Quadrature rules on the parameter cube [-1, 1]^M.

Deterministic rules (Gauss-Legendre, Clenshaw-Curtis, tensor products and
Smolyak sparse grids) carry Lebesgue weights that sum to 2^M.  Halton point
sets carry equal probability weights 1/N.
"""

from dataclasses import dataclass, field
from itertools import product
from math import comb

import numpy as np

LEBESGUE = "lebesgue"
PROBABILITY = "probability"


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray  # (N, M)
    weights: np.ndarray  # (N,)
    kind: str
    convention: str = LEBESGUE
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[0] != self.weights.shape[0]:
            raise QuadratureError("node and weight counts differ")

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def size(self):
        return self.nodes.shape[0]

    def __len__(self):
        return self.size

    def probability_weights(self):
        """Weights for expectations under the uniform law on [-1, 1]^M."""
        if self.convention == PROBABILITY:
            return self.weights
        return self.weights * 0.5 ** self.dim

    def integrate(self, f):
        """Apply the rule to a vectorised ``f(nodes) -> (N,)`` with the stored weights."""
        return float(np.dot(self.weights, f(self.nodes)))

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "size": self.size,
                "convention": self.convention, **self.info}


def gauss_legendre_1d(n):
    """n-point Gauss-Legendre rule, exact up to degree 2n - 1."""
    if n < 1:
        raise QuadratureError("Gauss-Legendre rule needs at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(x[:, None], w, "gauss-legendre", info={"n": n})


def cc_size(level):
    return 1 if level == 0 else 2**level + 1


def _cc_nodes_weights(level):
    n = cc_size(level)
    if n == 1:
        return np.zeros(1), np.full(1, 2.0)
    N = n - 1
    k = np.arange(n)
    x = -np.cos(np.pi * k / N)
    w = np.empty(n)
    j = np.arange(1, N // 2 + 1)
    b = np.where(2 * j == N, 1.0, 2.0)
    for kk in k:
        ck = 1.0 if kk in (0, N) else 2.0
        w[kk] = ck / N * (1.0 - np.sum(b / (4.0 * j * j - 1.0) * np.cos(2.0 * np.pi * j * kk / N)))
    x[np.abs(x) < 1e-15] = 0.0
    return x, w


def clenshaw_curtis_1d(level):
    """Nested Clenshaw-Curtis rule with 1 (level 0) or 2^level + 1 nodes.

    Nodes are the Chebyshev extrema in increasing order.
    """
    if level < 0:
        raise QuadratureError("level must be non-negative")
    x, w = _cc_nodes_weights(level)
    return QuadratureRule(x[:, None], w, "clenshaw-curtis", info={"level": level})


def tensor_product(rules):
    """Cartesian product of rules; weights multiply."""
    rules = list(rules)
    if not rules:
        raise QuadratureError("tensor product of no rules")
    nodes = rules[0].nodes
    weights = rules[0].weights
    for r in rules[1:]:
        n1, n2 = nodes.shape[0], r.nodes.shape[0]
        nodes = np.hstack([np.repeat(nodes, n2, axis=0), np.tile(r.nodes, (n1, 1))])
        weights = np.repeat(weights, n2) * np.tile(r.weights, n1)
    kinds = sorted({r.kind for r in rules})
    return QuadratureRule(nodes, weights, "tensor", info={"factors": kinds})


def _compositions(total, parts):
    """All tuples of ``parts`` non-negative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def smolyak_sparse(dim, level):
    """Smolyak sparse grid on nested Clenshaw-Curtis rules (combination technique).

    Level ``level`` combines tensor rules whose 1D levels sum to between
    ``level - dim + 1`` and ``level``.  Coinciding nodes are merged exactly
    through their integer positions on the finest 1D level.
    """
    if dim < 1 or level < 0:
        raise QuadratureError("need dim >= 1 and level >= 0")
    fine = 2**level  # 1D index range on the finest level: 0..fine
    one_d = {l: _cc_nodes_weights(l) for l in range(level + 1)}

    def positions(l):
        if l == 0:
            return np.array([fine // 2]) if level > 0 else np.array([0])
        return np.arange(cc_size(l)) * (2 ** (level - l))

    acc = {}
    for total in range(max(0, level - dim + 1), level + 1):
        coef = (-1) ** (level - total) * comb(dim - 1, level - total)
        for levels in _compositions(total, dim):
            pos = [positions(l) for l in levels]
            wts = [one_d[l][1] for l in levels]
            for idx in product(*(range(len(p)) for p in pos)):
                key = tuple(int(pos[d][i]) for d, i in enumerate(idx))
                w = coef * np.prod([wts[d][i] for d, i in enumerate(idx)])
                acc[key] = acc.get(key, 0.0) + w
    keys = sorted(acc)
    x_fine = one_d[level][0] if level > 0 else np.zeros(1)
    nodes = np.array([[x_fine[k] for k in key] for key in keys], dtype=float)
    weights = np.array([acc[k] for k in keys])
    return QuadratureRule(nodes, weights, "smolyak-cc", info={"level": level})


def first_primes(m):
    primes = []
    cand = 2
    while len(primes) < m:
        if all(cand % p for p in primes if p * p <= cand):
            primes.append(cand)
        cand += 1
    return primes


def radical_inverse(i, base):
    """Van der Corput radical inverse of the integer ``i`` in ``base``.

    Digits are reversed in integer arithmetic, so the result is the correctly
    rounded value of the exact rational.
    """
    num, den = 0, 1
    while i > 0:
        i, digit = divmod(i, base)
        num = num * base + digit
        den *= base
    return num / den


def halton_unit(dim, n, start=1):
    """First ``n`` Halton points in (0, 1)^dim, starting at index ``start``."""
    bases = first_primes(dim)
    pts = np.empty((n, dim))
    for d, b in enumerate(bases):
        pts[:, d] = [radical_inverse(i, b) for i in range(start, start + n)]
    return pts


def halton(dim, n):
    """Quasi-Monte Carlo rule: Halton points mapped to (-1, 1)^dim, weights 1/n.

    Index 0 (the origin of the unit cube) is skipped.
    """
    if dim < 1 or n < 0:
        raise QuadratureError("need dim >= 1 and n >= 0")
    nodes = 2.0 * halton_unit(dim, n) - 1.0 if n else np.zeros((0, dim))
    weights = np.full(n, 1.0 / n) if n else np.zeros(0)
    return QuadratureRule(nodes, weights, "halton", PROBABILITY, info={"n": n})


def build_rule(dim, kind, level=None, n=None):
    """Dispatch used by the campaign configuration."""
    if kind in ("smolyak", "smolyak-cc"):
        return smolyak_sparse(dim, level)
    if kind in ("tensor-cc", "full-cc"):
        return tensor_product([clenshaw_curtis_1d(level)] * dim)
    if kind in ("tensor-gl", "full-gl"):
        return tensor_product([gauss_legendre_1d(n)] * dim)
    if kind == "halton":
        return halton(dim, n)
    raise QuadratureError(f"unknown rule kind {kind!r}")
