"""Uniform cell grids and sampled functions with a small test catalog."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator


@dataclass(frozen=True)
class Grid:
    """Cubic box [lo, lo + cells*h)^n split into cells; samples live at cell centres."""

    n: int
    cells: int
    lo: float = -1.0
    h: float = 1.0 / 16

    @classmethod
    def symmetric(cls, n: int, cells: int, half_width: float = 1.0) -> Grid:
        return cls(n=n, cells=cells, lo=-half_width, h=2.0 * half_width / cells)

    @property
    def hi(self) -> float:
        return self.lo + self.cells * self.h

    @property
    def size(self) -> int:
        return self.cells**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.n

    def axis_centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.cells) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centres in C order, shape (size, n)."""
        axes = np.meshgrid(*([self.axis_centers()] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    def multi_index(self) -> np.ndarray:
        axes = np.meshgrid(*([np.arange(self.cells)] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    def contains_box(self, lo, hi) -> bool:
        tol = 1e-12 * max(1.0, abs(self.lo), abs(self.hi))
        return all(a >= self.lo - tol and b <= self.hi + tol for a, b in zip(lo, hi))

    def ball_inside(self, center, radius: float) -> bool:
        return all(c - radius >= self.lo - 1e-12 and c + radius <= self.hi + 1e-12 for c in center)

    def cells_in_ball(self, center, radius: float) -> np.ndarray:
        """Boolean mask of cells whose centres lie in the closed ball."""
        d = np.linalg.norm(self.centers() - np.asarray(center, dtype=float), axis=1)
        return d <= radius * (1.0 + 1e-12)

    def cells_in_box(self, lo, hi) -> np.ndarray:
        """Boolean mask of cells whose centres lie in the half-open box [lo, hi)."""
        c = self.centers()
        return np.all((c >= np.asarray(lo)) & (c < np.asarray(hi)), axis=1)

    def distance_to_outside(self) -> np.ndarray:
        """Distance from each cell centre to the complement of the box."""
        c = self.centers()
        return np.minimum(c - self.lo, self.hi - c).min(axis=1)

    def vertices(self) -> np.ndarray:
        """All cell corners, shape (count, n)."""
        axis = self.lo + np.arange(self.cells + 1) * self.h
        axes = np.meshgrid(*([axis] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)


@dataclass
class GridFunction:
    """Sampled function on a grid, extended by the constant ``outside`` beyond the box."""

    grid: Grid
    values: np.ndarray
    name: str = "custom"
    outside: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite samples")

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def scaled(self, factor: float) -> GridFunction:
        return GridFunction(self.grid, factor * self.values, f"{factor}*{self.name}", factor * self.outside)

    def exterior_jump(self) -> np.ndarray:
        """|u - outside| at the cell centres: what the far field of the box sees."""
        return np.abs(self.flat() - self.outside)

    def gradient_norm(self) -> np.ndarray:
        """|grad u| at cell centres: central differences inside, one-sided at the edges.

        Only samples inside the box enter, so the result describes u on the
        box and ignores the jump to the outside value.
        """
        order = 2 if self.grid.cells >= 3 else 1
        grads = np.gradient(self.values, self.grid.h, edge_order=order)
        if self.grid.n == 1:
            grads = [grads]
        return np.sqrt(sum(g**2 for g in grads)).ravel()

    def interpolator(self):
        axis = self.grid.axis_centers()
        return RegularGridInterpolator(
            (axis,) * self.grid.n, self.values, method="linear", bounds_error=False, fill_value=None
        )

    def __call__(self, points) -> np.ndarray:
        """Multilinear interpolation inside the box, the outside value beyond it."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all((pts >= self.grid.lo) & (pts <= self.grid.hi), axis=1)
        out = np.full(len(pts), float(self.outside))
        if inside.any():
            out[inside] = self.interpolator()(pts[inside])
        return out


# ------------------------------------------------------------------ catalog


def _bump_profile(r2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def bump(x: np.ndarray, radius: float = 1.0) -> np.ndarray:
    return _bump_profile(np.sum((x / radius) ** 2, axis=-1))


def power_cusp(x: np.ndarray, sigma_c: float = 0.5, radius: float = 1.0) -> np.ndarray:
    r = np.linalg.norm(x / radius, axis=-1)
    return r**sigma_c * _bump_profile(r * r)


def trig_random(x: np.ndarray, seed: int = 0, modes: int = 4, radius: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = x.shape[-1]
    freqs = rng.integers(-modes, modes + 1, size=(modes, n)) * math.pi
    phases = rng.uniform(0.0, 2 * math.pi, size=modes)
    amps = rng.standard_normal(modes) / np.arange(1, modes + 1)
    wave = sum(a * np.cos(x @ k + ph) for a, k, ph in zip(amps, freqs, phases))
    return wave * bump(x, radius) * math.e


CATALOG = ("bump", "power-cusp", "trig-random", "constant", "zero")


def make_catalog_function(name: str, grid: Grid, **options) -> GridFunction:
    """Sample a named test function at the cell centres of ``grid``.

    Options: ``radius`` (support radius of bump-type profiles), ``amplitude``,
    ``sigma_c`` for power-cusp, ``seed`` and ``modes`` for trig-random and ``c``
    for constant.  The constant is constant on all of R^n; the other entries
    vanish outside the box.
    """
    x = grid.centers()
    amplitude = float(options.get("amplitude", 1.0))
    radius = float(options.get("radius", 1.0))
    if name == "bump":
        vals = bump(x, radius)
    elif name == "power-cusp":
        vals = power_cusp(x, float(options.get("sigma_c", 0.5)), radius)
    elif name == "trig-random":
        vals = trig_random(x, int(options.get("seed", 0)), int(options.get("modes", 4)), radius)
    elif name == "constant":
        vals = np.full(len(x), float(options.get("c", 1.0)))
    elif name == "zero":
        vals = np.zeros(len(x))
    else:
        raise KeyError(f"unknown catalog function {name!r}; choose from {CATALOG}")
    label = name if not options else name + "(" + ",".join(f"{k}={v}" for k, v in sorted(options.items())) + ")"
    outside = amplitude * float(options.get("c", 1.0)) if name == "constant" else 0.0
    return GridFunction(grid, amplitude * vals, label, outside)
