"""The dual-pair measure nu(A) = int_A |x - y|^{-(n - eps p)} dx dy.

Masses of product regions are computed through the distribution of the
difference z = x - y.  For two axis-aligned boxes the density of z is a
product of one-dimensional trapezoids, so the 2n-dimensional singular
integral collapses to an n-dimensional one over piecewise-polynomial
densities.  Pieces touching the origin are split into pyramids with apex at
the origin, where the radial part integrates in closed form.  For balls the
density of z is the lens volume of two balls, which is radial when the balls
are concentric.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .params import ParameterSet

_GL_ORDER = 12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners have different dimensions")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return math.prod(max(0.0, b - a) for a, b in zip(self.lo, self.hi))

    @classmethod
    def cube(cls, corner, side: float) -> Box:
        corner = tuple(float(c) for c in corner)
        return cls(corner, tuple(c + side for c in corner))

    def shifted(self, offset) -> Box:
        return Box(tuple(a + o for a, o in zip(self.lo, offset)), tuple(b + o for b, o in zip(self.hi, offset)))


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.dim) * self.radius**self.dim


@dataclass(frozen=True)
class ProductBox:
    first: Box
    second: Box


@dataclass(frozen=True)
class ProductBall:
    first: Ball
    second: Ball


def diagonal_ball(center, radius: float) -> ProductBall:
    """The diagonal ball B(x, R) x B(x, R)."""
    if radius <= 0:
        raise ValueError("diagonal ball radius must be positive")
    ball = Ball(tuple(float(c) for c in center), float(radius))
    return ProductBall(ball, ball)


Region = ProductBox | ProductBall


# ------------------------------------------------------------ ball geometry


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    return n * unit_ball_volume(n)


def _cap_volume(n: int, radius: float, offset: float) -> float:
    """Volume of {x in B(0, radius) : x_1 > offset}."""
    if offset >= radius:
        return 0.0
    if offset <= -radius:
        return unit_ball_volume(n) * radius**n
    if offset < 0:
        return unit_ball_volume(n) * radius**n - _cap_volume(n, radius, -offset)
    frac = 1.0 - (offset / radius) ** 2
    return 0.5 * unit_ball_volume(n) * radius**n * special.betainc((n + 1) / 2, 0.5, frac)


def lens_volume(n: int, r1: float, r2: float, d: float) -> float:
    """Volume of the intersection of two balls with radii r1, r2 at center distance d."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return unit_ball_volume(n) * min(r1, r2) ** n
    a1 = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    return _cap_volume(n, r1, a1) + _cap_volume(n, r2, d - a1)


# ------------------------------------------------------- box pair integrals


def _axis_pieces(a: float, w: float, b: float, v: float):
    """Piecewise-linear density of x - y for x ~ U[a, a+w), y ~ U[b, b+v) (unnormalised).

    Returns (lo, hi, c0, c1) with density c0 + c1 * z on [lo, hi], already
    split at z = 0.
    """
    c = a - b
    short = min(w, v)
    z1, z4 = c - v, c + w
    z2, z3 = z1 + short, z4 - short
    pieces = []
    if z2 > z1:
        pieces.append((z1, z2, -z1, 1.0))
    if z3 > z2:
        pieces.append((z2, z3, short, 0.0))
    if z4 > z3:
        pieces.append((z3, z4, z4, -1.0))
    out = []
    for lo, hi, c0, c1 in pieces:
        if lo < 0.0 < hi:
            out.append((lo, 0.0, c0, c1))
            out.append((0.0, hi, c0, c1))
        else:
            out.append((lo, hi, c0, c1))
    return out


def _poly_coeffs(c0, c1, eta):
    """Coefficients in t of prod_a (c0_a + c1_a * t * eta_a), shape (n+1, Q)."""
    q = eta.shape[1]
    coeffs = np.zeros((len(c0) + 1, q))
    coeffs[0] = 1.0
    for a in range(len(c0)):
        shifted = np.zeros_like(coeffs)
        shifted[1:] = coeffs[:-1] * (c1[a] * eta[a])
        coeffs = coeffs * c0[a] + shifted
    return coeffs


def _graded_intervals(length: float, scale: float):
    """Split [0, length] geometrically starting at `scale` so near-singular faces stay smooth."""
    edges = [0.0]
    step = max(scale, 1e-300)
    while edges[-1] + step < length:
        edges.append(edges[-1] + step)
        step *= 2.0
    edges.append(length)
    return list(zip(edges[:-1], edges[1:]))


def _tensor_rule(intervals_per_axis):
    """Tensor Gauss-Legendre nodes (dim, Q) and weights (Q,) over products of intervals."""
    axis_nodes, axis_weights = [], []
    for intervals in intervals_per_axis:
        nodes, weights = [], []
        for lo, hi in intervals:
            half = 0.5 * (hi - lo)
            nodes.append(lo + half * (_GL_NODES + 1.0))
            weights.append(half * _GL_WEIGHTS)
        axis_nodes.append(np.concatenate(nodes))
        axis_weights.append(np.concatenate(weights))
    if not axis_nodes:
        return np.zeros((0, 1)), np.ones(1)
    grids = np.meshgrid(*axis_nodes, indexing="ij")
    wgrids = np.meshgrid(*axis_weights, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids])
    weights = np.prod(np.stack([g.ravel() for g in wgrids]), axis=0)
    return nodes, weights


def _corner_box_integral(upper, c0, c1, kappa: float) -> float:
    """int over [0, upper] of prod_a (c0_a + c1_a z_a) |z|^{-kappa} dz, upper > 0."""
    n = len(upper)
    total = []
    for i in range(n):
        others = [a for a in range(n) if a != i]
        intervals = [_graded_intervals(upper[a], upper[i]) for a in others]
        nodes, weights = _tensor_rule(intervals)
        eta = np.empty((n, weights.size))
        eta[i] = upper[i]
        for row, a in enumerate(others):
            eta[a] = nodes[row]
        coeffs = _poly_coeffs(c0, c1, eta)
        radial = sum(coeffs[m] / (n - kappa + m) for m in range(n + 1))
        norm = np.sqrt(np.sum(eta * eta, axis=0))
        total.append(upper[i] * np.dot(weights, radial * norm ** (-kappa)))
    return math.fsum(total)


def _far_box_integral(lower, upper, c0, c1, kappa: float) -> float:
    nodes, weights = _tensor_rule([[(lo, hi)] for lo, hi in zip(lower, upper)])
    dens = np.ones(weights.size)
    for a in range(len(lower)):
        dens *= c0[a] + c1[a] * nodes[a]
    norm = np.sqrt(np.sum(nodes * nodes, axis=0))
    return float(np.dot(weights, dens * norm ** (-kappa)))


def _orthant_box_integral(lower, upper, c0, c1, kappa: float, depth: int = 0) -> float:
    """Integral over a box contained in the closed positive orthant."""
    diam = math.dist(lower, upper)
    gap = math.sqrt(sum(x * x for x in lower))
    if diam == 0.0:
        return 0.0
    if gap >= 2.0 * diam:
        return _far_box_integral(lower, upper, c0, c1, kappa)
    if gap >= 0.5 * diam and depth < 6:
        mids = [0.5 * (lo + hi) for lo, hi in zip(lower, upper)]
        parts = []
        for choice in itertools.product((0, 1), repeat=len(lower)):
            lo = [lower[a] if c == 0 else mids[a] for a, c in enumerate(choice)]
            hi = [mids[a] if c == 0 else upper[a] for a, c in enumerate(choice)]
            parts.append(_orthant_box_integral(lo, hi, c0, c1, kappa, depth + 1))
        return math.fsum(parts)
    # inclusion-exclusion over boxes anchored at the origin
    parts = []
    n = len(lower)
    for choice in itertools.product((0, 1), repeat=n):
        corner = [lower[a] if c else upper[a] for a, c in enumerate(choice)]
        if min(corner) <= 0.0:
            continue
        sign = -1.0 if sum(choice) % 2 else 1.0
        parts.append(sign * _corner_box_integral(corner, c0, c1, kappa))
    return math.fsum(parts)


def box_pair_integral(first: Box, second: Box, kappa: float) -> float:
    """int_{first} int_{second} |x - y|^{-kappa} dy dx for kappa < n."""
    n = first.dim
    if second.dim != n:
        raise ValueError("boxes live in different dimensions")
    if kappa >= n:
        raise ValueError("kernel exponent must be below the dimension")
    widths1 = [b - a for a, b in zip(first.lo, first.hi)]
    widths2 = [b - a for a, b in zip(second.lo, second.hi)]
    if min(widths1 + widths2) <= 0.0:
        return 0.0
    scale = max(widths1 + widths2)
    if scale < 1e-150:
        raise FloatingPointError("region degenerates below floating resolution")
    per_axis = [
        _axis_pieces(a, w, b, v) for a, w, b, v in zip(first.lo, widths1, second.lo, widths2)
    ]
    parts = []
    for combo in itertools.product(*per_axis):
        lower, upper, c0, c1 = [], [], [], []
        for lo, hi, k0, k1 in combo:
            if hi <= 0.0:
                # reflect z -> -z so the piece sits in the positive half-line
                lower.append(-hi)
                upper.append(-lo)
                c0.append(k0)
                c1.append(-k1)
            else:
                lower.append(lo)
                upper.append(hi)
                c0.append(k0)
                c1.append(k1)
        parts.append(_orthant_box_integral(lower, upper, c0, c1, kappa))
    return max(0.0, math.fsum(parts))


def concentric_ball_integral(n: int, r1: float, r2: float, kappa: float) -> float:
    """int_{B(0,r1)} int_{B(0,r2)} |x - y|^{-kappa} by radial quadrature in |x - y|."""
    if kappa >= n:
        raise ValueError("kernel exponent must be below the dimension")
    top = r1 + r2

    def lens(rho):
        return lens_volume(n, r1, r2, rho)

    inner = abs(r1 - r2)
    pieces = []
    if inner > 0:
        # constant lens volume on [0, |r1-r2|]
        pieces.append(lens(0.0) * inner ** (n - kappa) / (n - kappa))
    if inner == 0:
        value, _ = integrate.quad(
            lens, 0.0, top, weight="alg", wvar=(n - 1 - kappa, 0.0), epsabs=0.0, epsrel=1e-12, limit=200
        )
    else:
        value, _ = integrate.quad(
            lambda rho: lens(rho) * rho ** (n - 1 - kappa), inner, top, epsabs=0.0, epsrel=1e-12, limit=200
        )
    pieces.append(value)
    return sphere_area(n) * math.fsum(pieces)


def _offset_ball_integral_2d(b1: Ball, b2: Ball, kappa: float) -> float:
    shift = np.subtract(b1.center, b2.center)
    d0 = float(np.hypot(*shift))
    top = d0 + b1.radius + b2.radius

    def angular(phi):
        e = np.array([math.cos(phi), math.sin(phi)])

        def radial(rho):
            return lens_volume(2, b1.radius, b2.radius, float(np.hypot(*(rho * e - shift))))

        val, _ = integrate.quad(radial, 0.0, top, weight="alg", wvar=(1 - kappa, 0.0), epsrel=1e-10, limit=200)
        return val

    val, _ = integrate.quad(angular, 0.0, 2 * math.pi, epsrel=1e-9, limit=200)
    return val


# ------------------------------------------------------------- the measure


@dataclass(frozen=True)
class QuadratureConfig:
    mc_samples: int = 200_000
    rel_tol: float = 1e-10


class NuMeasure:
    """Deterministic masses of product regions with a shared, lock-guarded cache."""

    def __init__(self, params: ParameterSet, quad: QuadratureConfig | None = None):
        self.params = params
        self.quad = quad or QuadratureConfig()
        self.kappa = params.n - params.eps * params.p
        if not 0 < self.kappa < params.n:
            raise ValueError("kernel exponent n - eps p must lie in (0, n)")
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def homogeneity(self) -> float:
        """Scaling exponent n + eps p of diagonal-ball masses."""
        return self.params.n + self.params.eps * self.params.p

    def mass(self, region: Region) -> float:
        key = region
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        value = self._compute(region)
        with self._lock:
            self._cache[key] = value
        return value

    def _compute(self, region: Region) -> float:
        n = self.params.n
        if isinstance(region, ProductBox):
            if region.first.dim != n:
                raise ValueError("region dimension does not match parameters")
            return box_pair_integral(region.first, region.second, self.kappa)
        if isinstance(region, ProductBall):
            b1, b2 = region.first, region.second
            if b1.radius <= 0 or b2.radius <= 0:
                return 0.0
            if b1.center == b2.center:
                return concentric_ball_integral(n, b1.radius, b2.radius, self.kappa)
            if n == 2:
                return _offset_ball_integral_2d(b1, b2, self.kappa)
            raise NotImplementedError("off-centre product balls are only supported for n = 2")
        raise TypeError(f"unsupported region {region!r}")

    def ball_constant(self) -> float:
        """Measured c(n, p, eps) = eps * nu(B(0,1) x B(0,1))."""
        return self.params.eps * self.mass(diagonal_ball((0.0,) * self.params.n, 1.0))

    def cell_pair_table(self, h: float, reach: int) -> np.ndarray:
        """nu(cell_0 x cell_z) for integer offsets z with |z|_inf <= reach.

        Indexed by ``z + reach`` along each axis.  Uses the symmetry of the
        kernel under coordinate reflections and permutations.
        """
        n = self.params.n
        key = ("cells", n, h, reach)
        if key in self._cache:
            return self._cache[key]
        size = 2 * reach + 1
        table = np.zeros((size,) * n)
        base = Box.cube((0.0,) * n, h)
        canonical: dict[tuple[int, ...], float] = {}
        for offset in itertools.product(range(-reach, reach + 1), repeat=n):
            sym = tuple(sorted(abs(o) for o in offset))
            if sym not in canonical:
                other = Box.cube(tuple(h * o for o in sym), h)
                canonical[sym] = box_pair_integral(base, other, self.kappa)
            table[tuple(o + reach for o in offset)] = canonical[sym]
        with self._lock:
            self._cache[key] = table
        return table

    # --------------------------------------------------------------- oracle

    def mc_oracle(self, region: Region, samples: int, seed: int) -> tuple[float, float]:
        """Monte Carlo estimate of nu(region) with its standard error.

        Separated factors are sampled uniformly (bounded kernel).  Touching or
        overlapping factors use importance sampling of z = y - x from a
        density proportional to |z|^{-kappa}, which keeps the estimator bounded.
        """
        if samples < 10_000:
            raise ValueError("the oracle needs at least 1e4 samples")
        rng = np.random.default_rng(seed)
        first, second = _factors(region)
        n = self.params.n
        vol1, vol2 = _volume(first), _volume(second)
        if vol1 == 0 or vol2 == 0:
            return 0.0, 0.0
        gap = _factor_gap(first, second)
        if gap > 0:
            x = _sample(first, samples, rng)
            y = _sample(second, samples, rng)
            vals = np.linalg.norm(x - y, axis=1) ** (-self.kappa) * vol1 * vol2
        else:
            reach = _max_pair_distance(first, second)
            x = _sample(first, samples, rng)
            radius = reach * rng.random(samples) ** (1.0 / (n - self.kappa))
            direction = rng.standard_normal((samples, n))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            y = x + radius[:, None] * direction
            normaliser = sphere_area(n) * reach ** (n - self.kappa) / (n - self.kappa)
            vals = _contains(second, y) * vol1 * normaliser
        estimate = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / math.sqrt(samples))
        return estimate, stderr

    # ----------------------------------------------------------- properties

    def doubling_check(self, x, big_radius: float, small_radius: float) -> tuple[float, float]:
        if small_radius <= 0 or big_radius < small_radius:
            raise ValueError("doubling check needs R >= r > 0")
        exact = (big_radius / small_radius) ** self.homogeneity
        if big_radius == small_radius:
            return 1.0, exact
        measured = self.mass(diagonal_ball(x, big_radius)) / self.mass(diagonal_ball(x, small_radius))
        return measured, exact

    def cube_ball_comparison(self, x, radius: float, a_frac: float, first: Box, second: Box) -> float:
        """nu(B(x,R) x B(x,R)) / nu(first x second) for cubes of side a_frac * R inside B(x,R)."""
        if a_frac > 1 or a_frac <= 0:
            raise ValueError("a_frac must lie in (0, 1]")
        side = a_frac * radius
        for box in (first, second):
            widths = [b - a for a, b in zip(box.lo, box.hi)]
            if any(abs(w - side) > 1e-12 * max(1.0, side) for w in widths):
                raise ValueError("cube side does not match a_frac * R")
            far = max(
                math.dist(x, corner) for corner in itertools.product(*zip(box.lo, box.hi))
            )
            if far > radius * (1 + 1e-12):
                raise ValueError("cube is not contained in the ball")
        return self.mass(diagonal_ball(x, radius)) / self.mass(ProductBox(first, second))


# ------------------------------------------------------------ oracle helpers


def _factors(region: Region):
    if isinstance(region, (ProductBox, ProductBall)):
        return region.first, region.second
    raise TypeError(f"unsupported region {region!r}")


def _volume(factor) -> float:
    return factor.volume


def _sample(factor, count: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(factor, Box):
        lo, hi = np.asarray(factor.lo), np.asarray(factor.hi)
        return lo + (hi - lo) * rng.random((count, factor.dim))
    n = factor.dim
    direction = rng.standard_normal((count, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = factor.radius * rng.random(count) ** (1.0 / n)
    return np.asarray(factor.center) + radius[:, None] * direction


def _contains(factor, pts: np.ndarray) -> np.ndarray:
    if isinstance(factor, Box):
        lo, hi = np.asarray(factor.lo), np.asarray(factor.hi)
        return np.all((pts >= lo) & (pts < hi), axis=1).astype(float)
    return (np.linalg.norm(pts - np.asarray(factor.center), axis=1) < factor.radius).astype(float)


def _bounds(factor):
    if isinstance(factor, Box):
        return np.asarray(factor.lo), np.asarray(factor.hi)
    c = np.asarray(factor.center)
    return c - factor.radius, c + factor.radius


def _factor_gap(first, second) -> float:
    if isinstance(first, Ball) and isinstance(second, Ball):
        return max(0.0, math.dist(first.center, second.center) - first.radius - second.radius)
    lo1, hi1 = _bounds(first)
    lo2, hi2 = _bounds(second)
    gaps = np.maximum(0.0, np.maximum(lo1 - hi2, lo2 - hi1))
    return float(np.linalg.norm(gaps))


def _max_pair_distance(first, second) -> float:
    lo1, hi1 = _bounds(first)
    lo2, hi2 = _bounds(second)
    spans = np.maximum(np.abs(hi1 - lo2), np.abs(hi2 - lo1))
    return float(np.linalg.norm(spans))
