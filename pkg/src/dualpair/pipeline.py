"""Level-set decomposition: Calderón–Zygmund selection, exit-time cover, cube sorting.

Pair quantities live on the 2n-dimensional array of cell pairs.  A dyadic
product cube of side 2^-k covers a block of (2^-k / h)^(2n) pair cells, so
cube averages are ratios of block sums, read off a pyramid of pooled sums.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    DyadicCube,
    Geometry,
    ProductCube,
    ResolvabilityError,
    enumerate_cubes,
)
from .fields import FunctionalEvaluator, PairKernel, counting_constant

# averages within this relative distance of the threshold count as ties (not selected)
TIE_RTOL = 1e-12


class RootAverageError(ValueError):
    """The average over a root cube already exceeds the selection threshold."""


# ------------------------------------------------------------------ pooling


def pool(arr: np.ndarray) -> np.ndarray:
    """Sum over 2 x ... x 2 blocks along every axis."""
    shape = []
    for s in arr.shape:
        if s % 2:
            raise ValueError("pooling needs even extents")
        shape.extend([s // 2, 2])
    return arr.reshape(shape).sum(axis=tuple(range(1, 2 * arr.ndim, 2)))


class Pyramid:
    """Pooled block sums of an array at every power-of-two block size."""

    def __init__(self, arr: np.ndarray):
        self.levels = [np.asarray(arr, dtype=float)]
        while min(self.levels[-1].shape) > 1 and all(s % 2 == 0 for s in self.levels[-1].shape):
            self.levels.append(pool(self.levels[-1]))

    def at(self, log: int, blocks: np.ndarray) -> np.ndarray:
        """Block sums at block size 2^log for block indices ``blocks`` (m, d)."""
        blocks = np.asarray(blocks, dtype=int)
        return self.levels[log][tuple(blocks.T)]


# ---------------------------------------------------------- CZ on any array


def cz_decompose(values: np.ndarray, weights: np.ndarray, root: tuple[int, ...], root_log: int, threshold: float):
    """Stopping blocks of the dyadic Calderón–Zygmund selection inside one root.

    ``values`` and ``weights`` are arrays over the finest cells; a block's
    average is sum(values * weights) / sum(weights).  ``root`` is the block
    index of the root at block size 2^root_log.  Returns a sorted list of
    (log, block index) pairs.
    """
    vp = Pyramid(values * weights)
    wp = Pyramid(weights)
    root = np.asarray(root, dtype=int)[None, :]
    mass = wp.at(root_log, root)
    if mass[0] <= 0:
        return []
    if vp.at(root_log, root)[0] / mass[0] > threshold * (1 + TIE_RTOL):
        raise RootAverageError("root average exceeds the threshold")
    d = values.ndim
    bits = np.array(list(itertools.product((0, 1), repeat=d)), dtype=int)
    alive = root
    selected = []
    for log in range(root_log - 1, -1, -1):
        kids = (2 * alive[:, None, :] + bits[None, :, :]).reshape(-1, d)
        w = wp.at(log, kids)
        v = vp.at(log, kids)
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = np.where(w > 0, v / np.where(w > 0, w, 1.0), 0.0)
        hit = avg > threshold * (1 + TIE_RTOL)
        selected.extend((log, tuple(int(c) for c in b)) for b in kids[hit])
        alive = kids[~hit & (w > 0)]
        if len(alive) == 0:
            break
    return sorted(selected)


def cz_oracle(values: np.ndarray, weights: np.ndarray, root: tuple[int, ...], root_log: int, threshold: float):
    """Plain recursive selection with direct block sums, for cross-checking."""

    def block(log, idx):
        size = 2**log
        sl = tuple(slice(i * size, (i + 1) * size) for i in idx)
        return sl

    def avg(log, idx):
        sl = block(log, idx)
        w = float(np.sum(weights[sl]))
        return (float(np.sum(values[sl] * weights[sl])) / w) if w > 0 else None

    if avg(root_log, root) is not None and avg(root_log, root) > threshold * (1 + TIE_RTOL):
        raise RootAverageError("root average exceeds the threshold")
    out = []

    def visit(log, idx):
        if log == 0:
            return
        for bits in itertools.product((0, 1), repeat=len(idx)):
            kid = tuple(2 * i + b for i, b in zip(idx, bits))
            a = avg(log - 1, kid)
            if a is None:
                continue
            if a > threshold * (1 + TIE_RTOL):
                out.append((log - 1, kid))
            else:
                visit(log - 1, kid)

    visit(root_log, tuple(root))
    return sorted(out)


# -------------------------------------------------------------- the run grid


@dataclass
class CubeArray:
    """Vectorised family of product cubes: level and the two factor indices."""

    level: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    def __len__(self):
        return len(self.level)

    @classmethod
    def empty(cls, n: int) -> CubeArray:
        return cls(np.zeros(0, dtype=int), np.zeros((0, n), dtype=int), np.zeros((0, n), dtype=int))

    def subset(self, mask) -> CubeArray:
        return CubeArray(self.level[mask], self.z1[mask], self.z2[mask])

    def keys(self) -> list[tuple]:
        return [(int(k), tuple(int(c) for c in a), tuple(int(c) for c in b)) for k, a, b in zip(self.level, self.z1, self.z2)]

    def side(self) -> np.ndarray:
        return 2.0 ** -self.level.astype(float)

    def cubes(self, anchor, root_level=None) -> list[ProductCube]:
        out = []
        for k, a, b in self.keys():
            out.append(ProductCube(DyadicCube(tuple(anchor), k, a), DyadicCube(tuple(anchor), k, b), root_level))
        return out


def factor_gap(z1: np.ndarray, z2: np.ndarray, side: np.ndarray) -> np.ndarray:
    """Euclidean distance between closed lattice cubes of equal side."""
    gap = np.maximum(np.abs(z1 - z2) - 1, 0) * side[:, None]
    return np.sqrt(np.sum(gap**2, axis=1))


class LevelSetRun:
    """Shared state for one function: kernel, evaluator, pyramids and cube lattice."""

    def __init__(self, kernel: PairKernel, geometry: Geometry, evaluator: FunctionalEvaluator | None = None):
        geometry.validate()
        self.kernel = kernel
        self.geometry = geometry
        self.grid = grid = kernel.grid
        self.evaluator = evaluator or FunctionalEvaluator(kernel)
        self.n = grid.n
        self.params = kernel.params
        self.exps = kernel.exps
        kg = -math.log2(grid.h)
        if abs(kg - round(kg)) > 1e-12:
            raise ValueError("grid spacing must be a power of two")
        self.kg = int(round(kg))
        self.k0 = geometry.k0
        if self.k0 > self.kg:
            raise ResolvabilityError(f"coarsest cube level {self.k0} is finer than the grid level {self.kg}")
        shift = (np.asarray(geometry.x0) - grid.lo) / grid.h
        if np.any(np.abs(shift - np.round(shift)) > 1e-9):
            raise ValueError("the cube anchor must be a grid vertex")
        self.anchor_cell = np.round(shift).astype(int)
        shape = grid.shape * 2
        self.shape2 = shape
        self.W = kernel.W.reshape(shape)
        self.Hp = (kernel.G * kernel.W).reshape(shape)
        self.Hg = (kernel.H**self.exps.gamma * kernel.W).reshape(shape)
        self.Hmat = kernel.H.reshape(shape)
        self.w_pyr = Pyramid(self.W)
        self.hp_pyr = Pyramid(self.Hp)
        self.hg_pyr = Pyramid(self.Hg)
        self.roots = enumerate_cubes(geometry, self.k0).cubes
        for c in self.roots:
            if not grid.contains_box(c.lo, c.hi):
                raise ValueError("root cubes leave the grid box; enlarge the box or shrink the geometry")
        self._psi_cache: dict = {}
        self._restricted: dict = {}

    # ----------------------------------------------------------- indexing

    def blocks(self, level: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(log block size, block index along the n cell axes) for factor cubes."""
        log = self.kg - level
        size = 2**log
        start = self.anchor_cell[None, :] + z * size[:, None]
        return log, start // size[:, None]

    def block_sums(self, pyr: Pyramid, cubes: CubeArray, proj: int | None = None) -> np.ndarray:
        """Block sums over product cubes (proj=None), or over pi_1 / pi_2 projections."""
        out = np.zeros(len(cubes))
        if len(cubes) == 0:
            return out
        a = cubes.z1 if proj in (None, 1) else cubes.z2
        b = cubes.z2 if proj in (None, 2) else cubes.z1
        if proj == 1:
            b = cubes.z1
        logs, ia = self.blocks(cubes.level, a)
        _, ib = self.blocks(cubes.level, b)
        for log in np.unique(logs):
            sel = logs == log
            out[sel] = pyr.at(int(log), np.concatenate([ia[sel], ib[sel]], axis=1))
        return out

    def averages(self, pyr: Pyramid, cubes: CubeArray, proj: int | None = None) -> np.ndarray:
        num = self.block_sums(pyr, cubes, proj)
        den = self.block_sums(self.w_pyr, cubes, proj)
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)

    def restricted_pyramid(self, key: str, level_kind: str, threshold: float) -> Pyramid:
        """Pyramid of ``key`` weighted kernel restricted to {kernel > threshold}."""
        tag = (key, level_kind, float(threshold))
        if tag not in self._restricted:
            base = {"Hp": self.Hp, "Hg": self.Hg, "W": self.W}[key]
            if level_kind == "H":
                keep = self.Hmat > threshold
            elif level_kind == "F":
                keep = self.kernel.F.reshape(self.shape2) > threshold
            else:
                raise KeyError(level_kind)
            self._restricted[tag] = Pyramid(np.where(keep, base, 0.0))
        return self._restricted[tag]

    def ball_pairs_mask(self, radius: float) -> np.ndarray:
        m = self.grid.cells_in_ball(self.geometry.x0, radius)
        return np.outer(m, m).reshape(self.shape2)

    def level_set_integral(self, key: str, radius: float, level_kind: str, threshold: float, power_key=None) -> float:
        """int over B(x0, radius)^2 cut to {kernel > threshold} of the weighted kernel."""
        mask = self.ball_pairs_mask(radius)
        if key == "Fp":
            F = self.kernel.F.reshape(self.shape2)
            vals = F**self.exps.p_lower_s * self.W
            keep = F > threshold
        else:
            vals = {"Hp": self.Hp, "Hg": self.Hg}[key]
            keep = (self.Hmat if level_kind == "H" else self.kernel.F.reshape(self.shape2)) > threshold
        return float(np.sum(vals[mask & keep]))

    # ---------------------------------------------------------------- psi

    def exit_candidates(self) -> np.ndarray:
        """Grid vertices inside the union of the closed root factor cubes."""
        verts = self.grid.vertices()
        keep = np.zeros(len(verts), dtype=bool)
        for c in self.roots:
            keep |= np.all((verts >= np.asarray(c.lo) - 1e-12) & (verts <= np.asarray(c.hi) + 1e-12), axis=1)
        return verts[keep]

    def psi_table(self, M_big: float) -> tuple[np.ndarray, list[float], np.ndarray]:
        key = float(M_big)
        if key not in self._psi_cache:
            cands = self.exit_candidates()
            radii = self.geometry.exit_radii(self.kg)
            xs = np.repeat(cands, len(radii), axis=0)
            rs = np.tile(radii, len(cands))
            psi = self.evaluator.psi(xs, rs, M_big).reshape(len(cands), len(radii))
            self._psi_cache[key] = (cands, radii, psi)
        return self._psi_cache[key]


# ------------------------------------------------------------ H_lambda family


@dataclass
class HLambda:
    lam: float
    cubes: CubeArray
    checks: dict
    root_averages: np.ndarray


def root_arrays(run: LevelSetRun) -> CubeArray:
    """All products of coarsest-level cubes."""
    n = run.n
    return CubeArray(
        np.full(len(run.roots) ** 2, run.k0),
        np.array([a.index for a in run.roots for _ in run.roots], dtype=int).reshape(-1, n),
        np.array([b.index for _ in run.roots for b in run.roots], dtype=int).reshape(-1, n),
    )


def root_threshold(run: LevelSetRun) -> float:
    """Smallest lambda whose height lambda^{p'} dominates every root average of H^{p'}."""
    avg = run.averages(run.hp_pyr, root_arrays(run))
    return float(avg.max(initial=0.0) ** (1 / run.exps.p_prime))


def build_H_lambda(run: LevelSetRun, lam: float, theorem_mode: bool = False, lambda2: float | None = None) -> HLambda:
    """Stopping cubes of H^{p'} at height lambda^{p'} over all roots of the coarsest level."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if theorem_mode and lambda2 is not None and lam < lambda2:
        raise ValueError("theorem mode needs lambda >= lambda_2")
    pp = run.exps.p_prime
    thr = lam**pp
    n = run.n
    root_arr = root_arrays(run)
    root_avg = run.averages(run.hp_pyr, root_arr)
    if np.any(root_avg > thr * (1 + 1e-12)):
        raise RootAverageError(
            f"lambda={lam:.6g} is below the root threshold {root_avg.max() ** (1 / pp):.6g}"
        )
    # run the selection on every root at once, level by level
    bits = np.array(list(itertools.product((0, 1), repeat=2 * n)), dtype=int)
    alive_level = run.k0
    alive = np.concatenate([root_arr.z1, root_arr.z2], axis=1)
    sel_level, sel_z = [], []
    while alive_level < run.kg and len(alive):
        kids = (2 * alive[:, None, :] + bits[None, :, :]).reshape(-1, 2 * n)
        lvl = np.full(len(kids), alive_level + 1)
        ca = CubeArray(lvl, kids[:, :n], kids[:, n:])
        avg = run.averages(run.hp_pyr, ca)
        hit = avg > thr
        sel_level.append(lvl[hit])
        sel_z.append(kids[hit])
        alive = kids[~hit]
        alive_level += 1
    if sel_z:
        z = np.concatenate(sel_z)
        lv = np.concatenate(sel_level)
    else:
        z = np.zeros((0, 2 * n), dtype=int)
        lv = np.zeros(0, dtype=int)
    order = np.lexsort(tuple(z.T[::-1]) + (lv,))
    cubes = CubeArray(lv[order], z[order, :n], z[order, n:])
    checks = audit_H_lambda(run, cubes, lam, root_arr)
    return HLambda(lam, cubes, checks, root_avg)


def _cover_count(run: LevelSetRun, cubes: CubeArray) -> np.ndarray:
    count = np.zeros(run.shape2, dtype=np.int32)
    for k, a, b in cubes.keys():
        size = 2 ** (run.kg - k)
        sa = run.anchor_cell + np.asarray(a) * size
        sb = run.anchor_cell + np.asarray(b) * size
        sl = tuple(slice(int(s), int(s) + size) for s in np.concatenate([sa, sb]))
        count[sl] += 1
    return count


def audit_H_lambda(run: LevelSetRun, cubes: CubeArray, lam: float, roots: CubeArray) -> dict:
    """Exhaustive property check of a stopping family."""
    pp = run.exps.p_prime
    thr = lam**pp
    avg = run.averages(run.hp_pyr, cubes)
    pred = CubeArray(cubes.level - 1, cubes.z1 // 2, cubes.z2 // 2)
    pavg = run.averages(run.hp_pyr, pred) if len(cubes) else np.zeros(0)
    count = _cover_count(run, cubes)
    root_cover = _cover_count(run, roots)
    inside_roots = root_cover > 0
    outside = inside_roots & (count == 0)
    beta_pairs = run.ball_pairs_mask(run.geometry.beta)
    level_pairs = run.Hmat > lam
    return {
        "count": len(cubes),
        "disjoint": bool(count.max(initial=0) <= 1),
        "lower_bound_ok": bool(np.all(avg > thr)),
        "predecessor_bound_ok": bool(np.all(pavg <= thr * (1 + 1e-12))),
        "outside_bound_ok": bool(np.all(run.Hmat[outside] <= lam)),
        "outside_pairs_checked": int(outside.sum()),
        "min_ratio_avg_over_threshold": float(avg.min() / thr) if len(avg) else None,
        "beta_level_pairs_outside_roots": int(np.sum(beta_pairs & level_pairs & ~inside_roots)),
    }


# ---------------------------------------------------------------- exit cover


@dataclass(frozen=True)
class DiagonalBall:
    center: tuple[float, ...]
    radius: float

    def dilate(self, factor: float) -> DiagonalBall:
        return DiagonalBall(self.center, factor * self.radius)


@dataclass
class Cover:
    lam: float
    kappa: float
    balls: list[DiagonalBall]
    exit_points: np.ndarray
    exit_radii: np.ndarray
    checks: dict = field(default_factory=dict)


def exit_cover(run: LevelSetRun, lam: float, kappa: float, M_big: float = 1.0) -> Cover:
    """Exit radii on the lattice, then greedy Vitali selection of 2-dilations."""
    cands, radii, psi = run.psi_table(M_big)
    level = kappa * lam
    radii_arr = np.asarray(radii)
    hit = psi >= level  # radii are in decreasing order
    in_d = hit.any(axis=1) & (psi > level).any(axis=1)
    first = np.argmax(hit, axis=1)
    pts = cands[in_d]
    rex = radii_arr[first[in_d]]
    order = sorted(range(len(pts)), key=lambda i: (-rex[i], tuple(pts[i])))
    kept: list[int] = []
    for i in order:
        ok = True
        for j in kept:
            if np.linalg.norm(pts[i] - pts[j]) < 2 * rex[i] + 2 * rex[j]:
                ok = False
                break
        if ok:
            kept.append(i)
    balls = [DiagonalBall(tuple(float(c) for c in pts[i]), float(rex[i])) for i in kept]
    cover = Cover(lam, kappa, balls, pts, rex)
    cover.checks = audit_cover(run, cover, psi[in_d], first[in_d], radii_arr, level, M_big)
    return cover


def audit_cover(run, cover: Cover, psi_rows, first, radii, level, M_big) -> dict:
    n = run.n
    eps_p = run.params.eps * run.params.p
    balls = cover.balls
    centers = np.array([b.center for b in balls]).reshape(-1, n)
    rad = np.array([b.radius for b in balls])
    disjoint = True
    for a in range(len(balls)):
        for b in range(a + 1, len(balls)):
            if np.linalg.norm(centers[a] - centers[b]) < 2 * rad[a] + 2 * rad[b]:
                disjoint = False
    # exit conditions on the lattice
    exit_ok = True
    for row, f in zip(psi_rows, first):
        if row[f] < level or np.any(row[:f] > level):
            exit_ok = False
    # every 2-dilated candidate ball sits in some 10-dilated kept ball
    covered = True
    for x, r in zip(cover.exit_points, cover.exit_radii):
        if len(balls) == 0 or not np.any(np.linalg.norm(centers - x, axis=1) + 2 * r <= 10 * rad * (1 + 1e-12)):
            covered = False
    ev = run.evaluator
    if balls:
        big = ev.ball_stats(centers, 10 * rad, keys=("Hp",))
        small = ev.ball_stats(centers, rad, keys=("Hp",))
        lhs = float(np.sum(big["Hp"]))
        nu_sum = float(np.sum(small["mass"]))
    else:
        lhs = nu_sum = 0.0
    pp = run.exps.p_prime
    factor_eps = 10.0 ** (n + eps_p)
    factor_p = 10.0 ** (n + run.params.p)
    rhs = max(factor_eps, factor_p) * cover.kappa**pp * cover.lam**pp * nu_sum
    alpha = run.geometry.alpha
    inside_alpha = bool(
        np.all(np.linalg.norm(centers - np.asarray(run.geometry.x0), axis=1) + 10 * rad <= alpha + 1e-12)
    ) if balls else True
    return {
        "balls": len(balls),
        "exit_points": len(cover.exit_points),
        "two_dilations_disjoint": disjoint,
        "exit_condition_on_lattice": exit_ok,
        "vitali_cover_ok": covered,
        "vitali_factor": 5.0,
        "dilated_sum_lhs": lhs,
        "dilated_sum_rhs": rhs,
        "dilated_sum_factor_eps": factor_eps,
        "dilated_sum_factor_p": factor_p,
        "dilated_sum_ok": lhs <= rhs * (1 + 1e-12),
        "sum_nu_balls": nu_sum,
        "ten_dilations_inside_alpha": inside_alpha,
    }


# ------------------------------------------------------------ classification


GOOD, BAD_D, BAD_ND = "good", "bad_d", "bad_nd"


@dataclass
class CubeFamilies:
    lam: float
    kappa: float
    cubes: CubeArray
    near: np.ndarray
    tags: np.ndarray  # "" for near-diagonal cubes
    bad_h: np.ndarray  # (m, 2) bool: bad w.r.t. projection h
    proj_avg: np.ndarray  # (m, 2) averages of H^gamma over pi_1, pi_2
    covered: np.ndarray  # inside the union of 10-dilated balls
    cover_mode: np.ndarray
    threshold: float
    checks: dict = field(default_factory=dict)

    def family(self, name: str) -> CubeArray:
        if name == "H_d":
            return self.cubes.subset(self.near)
        if name == "H_nd":
            return self.cubes.subset(~self.near)
        return self.cubes.subset(self.tags == name)


def _ball_contains_cubes(cubes: CubeArray, anchor, balls: list[DiagonalBall], factor: float = 10.0) -> np.ndarray:
    """Per cube: index of a single dilated ball containing both factors, or -1."""
    m = len(cubes)
    out = np.full(m, -1)
    if m == 0 or not balls:
        return out
    anchor = np.asarray(anchor)
    side = cubes.side()[:, None]
    lo1 = anchor + cubes.z1 * side
    lo2 = anchor + cubes.z2 * side
    for j, b in enumerate(balls):
        c = np.asarray(b.center)
        R = factor * b.radius * (1 + 1e-12)
        far1 = np.sqrt(np.sum(np.maximum(np.abs(lo1 - c), np.abs(lo1 + side - c)) ** 2, axis=1))
        far2 = np.sqrt(np.sum(np.maximum(np.abs(lo2 - c), np.abs(lo2 + side - c)) ** 2, axis=1))
        ok = (far1 <= R) & (far2 <= R) & (out < 0)
        out[ok] = j
    return out


def _pairs_covered(run: LevelSetRun, k, a, b, balls, factor=10.0) -> bool:
    """Every sampled pair of the cube lies in some dilated ball (cell-centre test)."""
    size = 2 ** (run.kg - k)
    centers = run.grid.centers().reshape(run.grid.shape + (run.n,))
    sa = run.anchor_cell + np.asarray(a) * size
    sb = run.anchor_cell + np.asarray(b) * size
    c1 = centers[tuple(slice(int(s), int(s) + size) for s in sa)].reshape(-1, run.n)
    c2 = centers[tuple(slice(int(s), int(s) + size) for s in sb)].reshape(-1, run.n)
    cov = np.zeros((len(c1), len(c2)), dtype=bool)
    for bl in balls:
        x = np.asarray(bl.center)
        R = factor * bl.radius
        cov |= np.outer(np.linalg.norm(c1 - x, axis=1) < R, np.linalg.norm(c2 - x, axis=1) < R)
    return bool(cov.all())


def classify_cubes(hl: HLambda, cover: Cover, run: LevelSetRun, lam: float, kappa: float) -> CubeFamilies:
    if abs(hl.lam - lam) > 1e-12 * lam or abs(cover.lam - lam) > 1e-12 * lam or abs(cover.kappa - kappa) > 1e-15:
        raise ValueError("families and cover were built for different lambda or kappa")
    n, p = run.n, run.params.p
    g = run.exps.gamma
    cubes = hl.cubes
    side = cubes.side()
    pred_gap = factor_gap(cubes.z1 // 2, cubes.z2 // 2, 2 * side)
    near = pred_gap < side
    threshold = (10 * n) ** (n + p) * kappa**g * lam**g
    proj = np.stack([run.averages(run.hg_pyr, cubes, 1), run.averages(run.hg_pyr, cubes, 2)], axis=1)
    bad_h = (proj > threshold) & ~near[:, None]
    single = _ball_contains_cubes(cubes, run.geometry.x0, cover.balls)
    covered = single >= 0
    mode = np.where(covered, "ball", "")
    need = np.where(~covered & (near | bad_h.any(axis=1)))[0]
    keys = cubes.keys()
    for i in need:
        k, a, b = keys[i]
        if cover.balls and _pairs_covered(run, k, a, b, cover.balls):
            covered[i] = True
            mode[i] = "pairs"
    tags = np.full(len(cubes), "", dtype=object)
    bad = bad_h.any(axis=1)
    tags[~near & ~bad] = GOOD
    tags[~near & bad & covered] = BAD_D
    tags[~near & bad & ~covered] = BAD_ND
    fam = CubeFamilies(lam, kappa, cubes, near, tags, bad_h, proj, covered, mode, threshold)
    fam.checks = audit_families(fam, run)
    return fam


def audit_families(fam: CubeFamilies, run: LevelSetRun) -> dict:
    tags = fam.tags
    nd = ~fam.near
    one_tag = all(t in (GOOD, BAD_D, BAD_ND) for t in tags[nd]) and all(t == "" for t in tags[fam.near])
    sizes = {name: int(np.sum(tags == name)) for name in (GOOD, BAD_D, BAD_ND)}
    partition = int(np.sum(fam.near)) + sum(sizes.values()) == len(tags)
    near_covered = bool(np.all(fam.covered[fam.near]))
    side = fam.cubes.side()
    pred_gap = factor_gap(fam.cubes.z1 // 2, fam.cubes.z2 // 2, 2 * side)
    nd_pred_ok = bool(np.all(pred_gap[nd] >= side[nd] - 1e-15))
    # symmetry audit: K in B^1_nd iff Symm K in B^2_nd whenever both are present
    index = {k: i for i, k in enumerate(fam.cubes.keys())}
    sym_checked = sym_ok = 0
    for i, (k, a, b) in enumerate(fam.cubes.keys()):
        j = index.get((k, b, a))
        if j is None or tags[i] == "" or tags[j] == "":
            continue
        sym_checked += 1
        lhs = tags[i] == BAD_ND and fam.bad_h[i, 0]
        rhs = tags[j] == BAD_ND and fam.bad_h[j, 1]
        sym_ok += int(lhs == rhs)
    return {
        "H_lambda": len(tags),
        "H_d": int(np.sum(fam.near)),
        "H_nd": int(np.sum(nd)),
        **sizes,
        "partition_exact": bool(partition and one_tag),
        "near_diagonal_covered": near_covered,
        "near_diagonal_cover_modes": {m: int(np.sum(fam.cover_mode[fam.near] == m)) for m in ("ball", "pairs", "")},
        "nd_predecessor_distance_ok": nd_pred_ok,
        "symmetry_pairs_checked": sym_checked,
        "symmetry_ok": sym_ok == sym_checked,
        "threshold": fam.threshold,
    }


# ---------------------------------------------------------- bad-cube indexing


@dataclass
class BadIndex:
    entries: list[dict]
    problem_cubes: list[tuple[int, tuple[int, ...]]]
    counts: dict
    checks: dict


def _maximal(cubes: set) -> list:
    """Maximal elements (coarsest ancestors present) of a set of (level, index) cubes."""
    out = []
    for k, z in cubes:
        kk, zz, top = k, z, True
        while kk > 0:
            kk -= 1
            zz = tuple(c >> 1 if c >= 0 else -((-c + 1) >> 1) for c in zz)
            if (kk, zz) in cubes:
                top = False
                break
        if top:
            out.append((k, z))
    return sorted(out)


def _ancestor(z, shift):
    return tuple(c >> shift for c in z) if all(c >= 0 for c in z) else tuple(int(math.floor(c / 2**shift)) for c in z)


def partition_bad_families(fam: CubeFamilies, run: LevelSetRun, C_n: float | None = None) -> BadIndex:
    """Index B_{lambda,nd} by (h, M, i, j, m) and check the two counting facts."""
    n = run.n
    C_n = counting_constant(n) if C_n is None else C_n
    keys = fam.cubes.keys()
    proj_set = set()
    for i, (k, a, b) in enumerate(keys):
        if fam.tags[i] in (BAD_D, BAD_ND):
            if fam.bad_h[i, 0]:
                proj_set.add((k, a))
            if fam.bad_h[i, 1]:
                proj_set.add((k, b))
    problems = _maximal(proj_set)
    by_level: dict[int, dict] = {}
    for k, z in problems:
        by_level.setdefault(k, {})[z] = (k, z)
    entries = []
    lemma_ok = True
    for i, (k, a, b) in enumerate(keys):
        if fam.tags[i] != BAD_ND:
            continue
        dist = math.dist((0,) * n, (0,) * n)
        side = 2.0**-k
        gap = [max(0, abs(x - y) - 1) * side for x, y in zip(a, b)]
        dist = math.sqrt(sum(g * g for g in gap))
        for h in (1, 2):
            if not fam.bad_h[i, h - 1]:
                continue
            zh = a if h == 1 else b
            owner = None
            for km in sorted(by_level):
                if km > k:
                    break
                anc = _ancestor(zh, k - km)
                if anc in by_level[km]:
                    owner = (km, anc)
                    break
            km, zm = owner
            unit = 2.0**-km
            ok = dist >= unit * (1 - 1e-12)
            lemma_ok &= ok
            j = int(math.floor(math.log2(dist / unit) + 1e-12)) if ok else -1
            rel = tuple(c - (m << (k - km)) for c, m in zip(zh, zm))
            m_index = 0
            for c in rel:
                m_index = m_index * 2 ** (k - km) + c
            entries.append({"cube": i, "h": h, "M": owner, "i": k - km, "j": j, "m": m_index, "dist": dist})
    counts: dict = {}
    for e in entries:
        key = (e["h"], e["M"], e["i"], e["j"], e["m"])
        counts[key] = counts.get(key, 0) + 1
    worst = 0.0
    card_ok = True
    for (h, M, i, j, m), c in counts.items():
        if j < 0:
            continue
        bound = C_n * 2.0 ** (n * (i + j))
        worst = max(worst, c / 2.0 ** (n * (i + j)))
        card_ok &= c <= bound
    diag_counts_ok = True
    for km, zs in by_level.items():
        for z in zs:
            for i_sub in range(min(3, run.kg - km) + 1):
                # diagonal subcubes of M at level km + i_sub: exactly 2^{n i}
                sub = list(itertools.product(range(2**i_sub), repeat=n))
                diag_counts_ok &= len(sub) == 2 ** (n * i_sub)
    return BadIndex(
        entries,
        problems,
        {str(k): v for k, v in sorted(counts.items(), key=lambda kv: str(kv[0]))},
        {
            "problem_cubes": len(problems),
            "indexed": len(entries),
            "combinatorial_lemma_ok": lemma_ok,
            "cardinality_ok": card_ok,
            "cardinality_constant": C_n,
            "max_count_over_2^{n(i+j)}": worst,
            "i_nonnegative": all(e["i"] >= 0 for e in entries),
            "diagonal_subcube_count_ok": diag_counts_ok,
        },
    )
