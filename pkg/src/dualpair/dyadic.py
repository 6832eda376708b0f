"""Anchored dyadic cubes in R^n, their products in R^2n, and related geometry."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .measure import Box, NuMeasure, ProductBox, diagonal_ball
from .params import ParameterSet

FAITHFUL = "faithful"
DEFAULT_CUBE_CAP = 1_000_000


class ResolvabilityError(RuntimeError):
    """The requested cube family is too large to enumerate at this scale."""


# ----------------------------------------------------------------- geometry


@dataclass(frozen=True)
class Geometry:
    """Placement of the nested balls B(x0, rho0) < B(x0, beta) < B(x0, alpha).

    ``chi`` is ``None`` in faithful mode; otherwise it replaces the divisor
    n 40^(n+1) of the minimal side length, and ``ball_factor`` replaces the
    factor 24 in the radius of the diagonal balls that swallow nearly
    diagonal cubes.  ``admission`` picks the radius of the ball whose
    closure a cube must meet to be enumerated: ``"printed"`` uses
    (alpha - beta)/2, ``"covering"`` uses (alpha + beta)/2.
    """

    x0: tuple[float, ...]
    rho0: float
    beta: float
    alpha: float
    chi: float | None = None
    ball_factor: float = 24.0
    admission: str = "covering"

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(c) for c in self.x0))

    @property
    def n(self) -> int:
        return len(self.x0)

    @property
    def faithful(self) -> bool:
        return self.chi is None

    def validate(self):
        if not 0 < self.rho0 <= 1:
            raise ValueError("geometry needs 0 < rho0 <= 1")
        if not self.rho0 < self.beta < self.alpha < 1.5 * self.rho0:
            raise ValueError("geometry needs rho0 < beta < alpha < 3 rho0 / 2")
        if self.admission not in ("printed", "covering"):
            raise ValueError("admission must be 'printed' or 'covering'")
        if self.chi is not None and self.chi <= 0:
            raise ValueError("chi must be positive")

    @property
    def k0(self) -> int:
        return k0_level(self.alpha, self.beta, self.n, self.chi)

    @property
    def admission_radius(self) -> float:
        return admission_radius(self.alpha, self.beta, self.admission)

    def radius_cap(self) -> float:
        """Upper end of the exit-time radius range."""
        if self.faithful:
            return (self.alpha - self.beta) / 40.0**self.n
        return self.swallow_radius(self.k0 + 1)

    def radius_window(self) -> tuple[float, float]:
        """Radius range of the first threshold: [cap, rho0/2]."""
        cap = self.radius_cap()
        return cap, max(cap, self.rho0 / 2.0)

    def swallow_radius(self, level: int) -> float:
        """Radius of a diagonal ball around the nearest diagonal point that
        contains every nearly diagonal product cube of this level."""
        return self.ball_factor * math.sqrt(self.n) * 2.0**-level

    def exit_radii(self, finest_level: int) -> list[float]:
        """Decreasing radius lattice on which exit times are searched."""
        cap = self.radius_cap()
        radii = []
        for level in range(self.k0 + 1, finest_level + 1):
            r = self.swallow_radius(level)
            if r <= cap * (1 + 1e-12):
                radii.append(r)
        if not radii:
            radii.append(cap)
        return radii


def admission_radius(alpha: float, beta: float, admission: str = "covering") -> float:
    if admission == "printed":
        return (alpha - beta) / 2.0
    if admission == "covering":
        return (alpha + beta) / 2.0
    raise ValueError("admission must be 'printed' or 'covering'")


def _floor_log2(v: float) -> int:
    lg = math.log2(v)
    nearest = round(lg)
    if abs(lg - nearest) < 1e-12:
        return int(nearest)
    return math.floor(lg)


def k0_level(alpha: float, beta: float, n: int, chi: float | None = None) -> int:
    """Coarsest level: floor(-log2((alpha - beta)/divisor)) + 1."""
    if alpha <= beta:
        raise ValueError("k0_level needs alpha > beta")
    divisor = n * 40.0 ** (n + 1) if chi is None else float(chi)
    return _floor_log2(divisor / (alpha - beta)) + 1


# -------------------------------------------------------------------- cubes


def _interval_gap(a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> float:
    return max(0.0, b_lo - a_hi, a_lo - b_hi)


@dataclass(frozen=True)
class DyadicCube:
    """Half-open cube anchor + 2^-level (index + [0, 1)^n)."""

    anchor: tuple[float, ...]
    level: int
    index: tuple[int, ...]

    @property
    def side(self) -> float:
        return 2.0**-self.level

    @property
    def lo(self) -> tuple[float, ...]:
        return tuple(a + self.side * z for a, z in zip(self.anchor, self.index))

    @property
    def hi(self) -> tuple[float, ...]:
        return tuple(a + self.side * (z + 1) for a, z in zip(self.anchor, self.index))

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(a + self.side * (z + 0.5) for a, z in zip(self.anchor, self.index))

    def box(self) -> Box:
        return Box(self.lo, self.hi)

    def parent(self) -> DyadicCube:
        return DyadicCube(self.anchor, self.level - 1, tuple(z // 2 for z in self.index))

    def children(self) -> list[DyadicCube]:
        out = []
        for bits in itertools.product((0, 1), repeat=len(self.index)):
            out.append(DyadicCube(self.anchor, self.level + 1, tuple(2 * z + b for z, b in zip(self.index, bits))))
        return out

    def contains(self, other: DyadicCube) -> bool:
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((z >> shift) == w for z, w in zip(other.index, self.index))

    def distance(self, other: DyadicCube) -> float:
        """Euclidean distance between the closures."""
        gaps = [_interval_gap(a, b, c, d) for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)]
        return math.hypot(*gaps)

    def distance_to_point(self, x) -> float:
        gaps = [max(0.0, lo - c, c - hi) for lo, hi, c in zip(self.lo, self.hi, x)]
        return math.hypot(*gaps)


@dataclass(frozen=True)
class ProductCube:
    K1: DyadicCube
    K2: DyadicCube
    root_level: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.K1.level != self.K2.level:
            raise ValueError("factors of a product cube must share a level")

    @property
    def level(self) -> int:
        return self.K1.level

    @property
    def side(self) -> float:
        return self.K1.side

    def predecessor(self) -> ProductCube:
        if self.root_level is not None and self.level <= self.root_level:
            raise ValueError("a cube at the coarsest level has no predecessor")
        return ProductCube(self.K1.parent(), self.K2.parent(), self.root_level)

    def children(self) -> list[ProductCube]:
        return [ProductCube(a, b, self.root_level) for a in self.K1.children() for b in self.K2.children()]

    def projection(self, h: int) -> ProductCube:
        K = self.K1 if h == 1 else self.K2
        return ProductCube(K, K, self.root_level)

    def symm(self) -> ProductCube:
        return ProductCube(self.K2, self.K1, self.root_level)

    def factor_distance(self) -> float:
        return self.K1.distance(self.K2)

    def distance_to_diagonal(self) -> float:
        """min over the closed cube of |x - y| / sqrt 2, solved axis by axis."""
        total = 0.0
        for a, b, c, d in zip(self.K1.lo, self.K1.hi, self.K2.lo, self.K2.hi):
            # minimise (x - y)^2 / 2 over x in [a, b], y in [c, d]
            total += _interval_gap(a, b, c, d) ** 2 / 2.0
        return math.sqrt(total)

    def lo(self) -> tuple[float, ...]:
        return self.K1.lo + self.K2.lo

    def hi(self) -> tuple[float, ...]:
        return self.K1.hi + self.K2.hi

    def distance(self, other: ProductCube) -> float:
        """Distance between closures in R^2n."""
        gaps = [_interval_gap(a, b, c, d) for a, b, c, d in zip(self.lo(), self.hi(), other.lo(), other.hi())]
        return math.sqrt(sum(g * g for g in gaps))

    def contains(self, other: ProductCube) -> bool:
        return self.K1.contains(other.K1) and self.K2.contains(other.K2)

    def region(self) -> ProductBox:
        return ProductBox(self.K1.box(), self.K2.box())

    def near_diagonal(self) -> bool:
        """Predecessor factors closer than the side length."""
        pred = self.predecessor()
        return pred.factor_distance() < self.side

    def nearest_diagonal_point(self) -> tuple[float, ...]:
        """Diagonal point closest to the predecessor, axis by axis."""
        pred = self.predecessor()
        point = []
        for a, b, c, d in zip(pred.K1.lo, pred.K1.hi, pred.K2.lo, pred.K2.hi):
            lo, hi = max(a, c), min(b, d)
            point.append(0.5 * (lo + hi))  # midpoint of the overlap or of the gap
        return tuple(point)

    def geometry(self) -> dict:
        out = {
            "level": self.level,
            "pi1": self.projection(1),
            "pi2": self.projection(2),
            "dist_factors": self.factor_distance(),
            "dist_diag": self.distance_to_diagonal(),
            "symm": self.symm(),
        }
        out["predecessor"] = self.predecessor()
        return out


# -------------------------------------------------------------- enumeration


def enumerate_level(x0, radius: float, k: int) -> list[DyadicCube]:
    """Cubes of level k anchored at x0 whose closure meets the closed ball B(x0, radius)."""
    side = 2.0**-k
    reach = int(math.ceil(radius / side)) + 1
    n = len(x0)
    out = []
    for idx in itertools.product(range(-reach, reach), repeat=n):
        cube = DyadicCube(tuple(x0), k, idx)
        if cube.distance_to_point(x0) <= radius * (1 + 1e-12):
            out.append(cube)
    return out


@dataclass
class CubeCollection:
    level: int
    cubes: list[DyadicCube]

    @property
    def products_count(self) -> int:
        return len(self.cubes) ** 2

    def products(self, root_level: int | None = None):
        for a in self.cubes:
            for b in self.cubes:
                yield ProductCube(a, b, root_level)


def enumerate_cubes(geometry: Geometry, k: int, cap: int = DEFAULT_CUBE_CAP) -> CubeCollection:
    """The level-k family and (lazily) its products."""
    if k < geometry.k0:
        raise ValueError("enumerate_cubes needs k >= k0")
    side = 2.0**-k
    estimate = (2 * geometry.admission_radius / side + 2) ** geometry.n
    if estimate**2 > 64 * cap:
        raise ResolvabilityError(
            f"level {k} needs about {estimate**2:.3g} product cubes (cap {cap}); use a geometry scale chi"
        )
    cubes = enumerate_level(geometry.x0, geometry.admission_radius, k)
    if len(cubes) ** 2 > cap:
        raise ResolvabilityError(f"level {k} has {len(cubes) ** 2} product cubes, above the cap {cap}")
    return CubeCollection(k, cubes)


def covering_check(geometry: Geometry, k: int, points: np.ndarray) -> dict:
    """Check B(x0,beta) within the union of level-k cubes within B(x0,alpha) at sample points."""
    coll = enumerate_cubes(geometry, k)
    x0 = np.asarray(geometry.x0)
    inner = points[np.linalg.norm(points - x0, axis=1) < geometry.beta]
    counts = np.zeros(len(inner), dtype=int)
    for cube in coll.cubes:
        lo, hi = np.asarray(cube.lo), np.asarray(cube.hi)
        counts += np.all((inner >= lo) & (inner < hi), axis=1)
    farthest = max(
        (max(math.dist(geometry.x0, c) for c in itertools.product(*zip(cube.lo, cube.hi))) for cube in coll.cubes),
        default=0.0,
    )
    return {
        "points_checked": len(inner),
        "inner_covered_once": bool(np.all(counts == 1)),
        "max_multiplicity": int(counts.max()) if len(counts) else 0,
        "outer_radius": farthest,
        "outer_contained": farthest <= geometry.alpha + 1e-12,
    }


# ------------------------------------------------------- dimensional constants


def _offset_key(offset) -> tuple[int, ...]:
    return tuple(sorted(abs(int(o)) for o in offset))


def _unit_cube_pair_mass(measure: NuMeasure, offset) -> float:
    n = len(offset)
    base = Box.cube((0.0,) * n, 1.0)
    return measure.mass(ProductBox(base, Box.cube(tuple(float(o) for o in offset), 1.0)))


def _offsets_at_level(geometry: Geometry, k: int) -> set[tuple[int, ...]]:
    cubes = enumerate_level(geometry.x0, geometry.admission_radius, k)
    idx = np.array([c.index for c in cubes])
    if len(idx) == 0:
        return set()
    span = idx.max(axis=0) - idx.min(axis=0)
    ranges = [range(int(s) + 1) for s in span]
    return {_offset_key(o) for o in itertools.product(*ranges)}


def _offset_distance(offset) -> float:
    return math.hypot(*[max(0, abs(o) - 1) for o in offset])


def empirical_dim_constants(
    params: ParameterSet, geometry: Geometry, levels, eps_set=(0.05, 0.1, 0.2)
) -> dict:
    """Measured suprema behind the two dimensional-constant lemmas.

    Masses of product cubes are homogeneous of degree n + eps p, so every
    ratio depends only on the integer offset between the factors; cubes are
    therefore evaluated at unit side.  The first supremum runs over all
    offsets, the second only over offsets at distance >= one side, and the
    predecessor ratio over children of parents at distance >= one child side.
    """
    n, p = params.n, params.p
    offsets: set[tuple[int, ...]] = set()
    for k in levels:
        offsets |= _offsets_at_level(geometry, k)
    if not offsets:
        raise ValueError("no cubes enumerated at the requested levels")
    per_eps = {}
    for eps in eps_set:
        measure = NuMeasure(params.replace(eps=eps))
        diag = _unit_cube_pair_mass(measure, (0,) * n)
        first = second = 0.0
        for off in offsets:
            d = _offset_distance(off)
            if d == 0:
                continue
            m = _unit_cube_pair_mass(measure, off)
            first = max(first, (1.0 / eps) * d ** (n - eps * p) * m / diag)
            if d >= 1.0:
                second = max(second, eps * d ** (eps * p - n) * diag / m)
        cddd = _predecessor_ratio_sup(measure, offsets)
        per_eps[eps] = {"first": first, "second": second, "C_dd": first + second, "C_ddd": cddd}
    return {
        "per_eps": per_eps,
        "C_dd_hat": max(v["C_dd"] for v in per_eps.values()),
        "C_ddd_hat": max(v["C_ddd"] for v in per_eps.values()),
        "offsets": len(offsets),
    }


def _predecessor_ratio_sup(measure: NuMeasure, parent_offsets) -> float:
    """sup nu(parent pair)/nu(child pair) with parent distance >= child side.

    Parents have side 2, children side 1; the parent pair is
    [0,2)^n x (2 offset + [0,2)^n).
    """
    best = 0.0
    n = measure.params.n
    for off in parent_offsets:
        gap = 2.0 * _offset_distance(off)
        if gap < 1.0:
            continue
        parent = measure.mass(ProductBox(Box.cube((0.0,) * n, 2.0), Box.cube(tuple(2.0 * o for o in off), 2.0)))
        for b1 in itertools.product((0, 1), repeat=n):
            for b2 in itertools.product((0, 1), repeat=n):
                rel = tuple(2 * o + y - x for o, x, y in zip(off, b1, b2))
                child = _unit_cube_pair_mass(measure, rel)
                best = max(best, parent / child)
    return best


def near_diagonal_cd(params: ParameterSet, geometry: Geometry, levels=None) -> float:
    """eps * sup nu(B(x~, swallow radius)) / nu(K) over nearly diagonal cube configurations.

    This is the constant that makes a large average over a nearly diagonal
    cube force a large average over the ball that swallows it.  Scale
    invariance reduces the sup to the finitely many child placements inside
    touching or identical parents.
    """
    n = params.n
    measure = NuMeasure(params)
    level = 1 if levels is None else min(levels)
    side = 2.0**-level
    radius = geometry.swallow_radius(level)
    ball = measure.mass(diagonal_ball((0.0,) * n, radius))
    best = 0.0
    seen = set()
    for parent_off in itertools.product((-1, 0, 1), repeat=n):
        for b1 in itertools.product((0, 1), repeat=n):
            for b2 in itertools.product((0, 1), repeat=n):
                rel = _offset_key(tuple(2 * o + y - x for o, x, y in zip(parent_off, b1, b2)))
                if rel in seen:
                    continue
                seen.add(rel)
                K1 = Box.cube((0.0,) * n, side)
                K2 = Box.cube(tuple(side * r for r in rel), side)
                best = max(best, ball / measure.mass(ProductBox(K1, K2)))
    return params.eps * best
