"""Pair kernels U, A, F, G, H on a grid and the functionals built from them.

All pair quantities are stored as dense (cells x cells) matrices in the
C-ordered cell enumeration of the grid.  Pair weights are exact
nu-masses of cell pairs.  A cell paired with itself has no meaningful
centre-to-centre difference quotient, so its value is replaced by the
first-order surrogate obtained from the local gradient: for u affine the
surrogate reproduces the exact cell-pair integral of U^p.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .grid import Grid, GridFunction
from .measure import Box, NuMeasure, box_pair_integral, sphere_area
from .params import DerivedExponents, ParameterSet, derive_exponents

KINDS = ("U", "A", "F", "G", "H")


class DiagonalEvaluationError(ValueError):
    pass


class EmptyRegionError(ValueError):
    """A nu-average was requested over a region of zero mass."""


def isotropic_moment(n: int, r: float) -> float:
    """Average of |e . w|^r over unit vectors w, for any fixed unit e."""
    return math.exp(
        special.gammaln(n / 2) + special.gammaln((r + 1) / 2) - 0.5 * math.log(math.pi) - special.gammaln((n + r) / 2)
    )


def self_cell_integral(n: int, h: float, kappa: float) -> float:
    """int_cell int_cell |x - y|^{-kappa} for a cube of side h."""
    cell = Box.cube((0.0,) * n, h)
    return box_pair_integral(cell, cell, kappa)


def _coefficient(g: GridFunction | None, grid: Grid, bound: float) -> np.ndarray:
    if g is None:
        return np.zeros(grid.size)
    vals = g.flat()
    if np.any(vals < -1e-14) or np.any(vals > bound * (1 + 1e-12)):
        raise ValueError("coefficient g must take values in [0, M_coeff]")
    return np.clip(vals, 0.0, bound)


@dataclass
class PairRegion:
    """Product of two cell sets, given as boolean masks."""

    rows: np.ndarray
    cols: np.ndarray

    @classmethod
    def diagonal_ball(cls, grid: Grid, center, radius: float) -> PairRegion:
        m = grid.cells_in_ball(center, radius)
        return cls(m, m)

    @classmethod
    def product_box(cls, grid: Grid, lo1, hi1, lo2, hi2) -> PairRegion:
        return cls(grid.cells_in_box(lo1, hi1), grid.cells_in_box(lo2, hi2))


class PairKernel:
    """Lazy-free evaluator of U, A, F, G, H on all cell pairs of a grid.

    ``a(x, y) = (g(x) + g(y)) / 2`` for the coefficient samples ``g``.
    """

    def __init__(
        self,
        params: ParameterSet,
        u: GridFunction,
        f: GridFunction | None = None,
        g: GridFunction | None = None,
        measure: NuMeasure | None = None,
        checked: bool = True,
    ):
        self.params = params
        self.exps: DerivedExponents = derive_exponents(params, checked=checked)
        self.u = u
        self.grid = u.grid
        if self.grid.n != params.n:
            raise ValueError("grid dimension does not match parameters")
        self.f = f if f is not None else GridFunction(self.grid, np.zeros(self.grid.shape), "zero")
        self.g = g
        self.measure = measure or NuMeasure(params)
        self.coeff = _coefficient(g, self.grid, params.M_coeff)
        self._build()

    # ------------------------------------------------------------ assembly

    def _build(self):
        grid, prm = self.grid, self.params
        n, h = grid.n, grid.h
        s, t, eps, p, q = prm.s, prm.t, prm.eps, prm.p, prm.q
        reach = grid.cells - 1
        idx = grid.multi_index()
        offsets = idx[None, :, :] - idx[:, None, :]
        table = self.measure.cell_pair_table(h, reach)
        self.W = table[tuple(offsets[..., a] + reach for a in range(n))]
        self.D = h * np.sqrt(np.sum(offsets.astype(float) ** 2, axis=-1))
        del offsets
        self.w_self = float(table[(reach,) * n])

        uv = self.u.flat()
        grad = self.u.gradient_norm()
        diff = np.abs(uv[:, None] - uv[None, :])
        off = ~np.eye(grid.size, dtype=bool)
        D = np.where(off, self.D, 1.0)

        # self-pair surrogate: U_ii^p W_ii equals the exact cell-pair integral
        # of |grad u . (x - y)|^p |x - y|^{-(s+eps)p} for u affine
        kappa = n - eps * p
        j_u = self_cell_integral(n, h, kappa - (1 - s - eps) * p)
        self.d_self = (j_u / self.w_self) ** (1.0 / ((1 - s - eps) * p))
        u_self = grad * isotropic_moment(n, p) ** (1.0 / p) * self.d_self ** (1 - s - eps)

        self.U = diff / D ** (s + eps)
        np.fill_diagonal(self.U, u_self)
        a = 0.5 * (self.coeff[:, None] + self.coeff[None, :])
        a_exp = (s - t) * q + eps * (q - p)
        Dd = np.where(off, self.D, self.d_self)
        self.A = a * Dd**a_exp
        self.G = self.U**p + self.A * self.U**q
        self.H = self.G ** (1.0 / self.exps.p_prime)
        self.F = np.repeat(np.abs(self.f.flat())[:, None], grid.size, axis=1)
        self._grad = grad

    def matrix(self, kind: str) -> np.ndarray:
        if kind not in KINDS:
            raise KeyError(f"unknown kernel kind {kind!r}")
        return getattr(self, kind)

    def eval(self, kind: str, x, y) -> float:
        """Pointwise kernel at an arbitrary pair, u and f interpolated."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if kind == "F":
            return float(abs(self.f(x[None])[0]))
        dist = float(np.linalg.norm(x - y))
        if dist == 0.0:
            raise DiagonalEvaluationError(f"kernel {kind} is not defined on the diagonal")
        prm = self.params
        s, t, eps, p, q = prm.s, prm.t, prm.eps, prm.p, prm.q
        ux, uy = self.u(np.stack([x, y]))
        U = abs(ux - uy) / dist ** (s + eps)
        if kind == "U":
            return float(U)
        if self.g is None:
            a = 0.0
        else:
            gx, gy = self.g(np.stack([x, y]))
            a = 0.5 * (gx + gy)
        A = a * dist ** ((s - t) * q + eps * (q - p))
        if kind == "A":
            return float(A)
        G = U**p + A * U**q
        if kind == "G":
            return float(G)
        return float(G ** (1.0 / self.exps.p_prime))

    # ------------------------------------------------------------ integrals

    def region_masks(self, region) -> PairRegion:
        if isinstance(region, PairRegion):
            return region
        raise TypeError("regions are given as PairRegion masks")

    def integral(self, kind: str, power: float, region: PairRegion, above: tuple[str, float] | None = None):
        """(int_region K^power dnu, nu(region restricted)) as grid sums."""
        rows, cols = region.rows, region.cols
        K = self.matrix(kind)[np.ix_(rows, cols)]
        W = self.W[np.ix_(rows, cols)]
        if above is not None:
            lk, lam = above
            keep = self.matrix(lk)[np.ix_(rows, cols)] > lam
            W = np.where(keep, W, 0.0)
        with np.errstate(divide="ignore"):
            vals = np.where(W > 0, K**power, 0.0)
        return float(np.sum(vals * W)), float(np.sum(W))

    def nu_average(self, kind: str, power: float, region: PairRegion, above=None) -> float:
        total, mass = self.integral(kind, power, region, above)
        if mass <= 0.0:
            raise EmptyRegionError("region has zero nu-mass")
        return total / mass

    def mass(self, region: PairRegion) -> float:
        return float(np.sum(self.W[np.ix_(region.rows, region.cols)]))

    # --------------------------------------------------------------- energy

    def difference_integral(
        self, r: float, sigma: float, mask: np.ndarray | None = None, coeff: np.ndarray | None = None,
        route: str = "nu", near: int = 2,
    ) -> float:
        """int int c(x,y) |u(x)-u(y)|^r / |x-y|^{n + sigma r} dx dy over (mask x mask).

        ``route="lebesgue"`` samples the integrand at cell centres with weight
        h^{2n}; ``route="nu"`` rewrites it against d nu and uses the exact
        cell-pair masses together with the kernel's self-pair surrogate.
        Either way, offsets with |o|_inf <= ``near`` get a local correction:
        the route's own model of a linear u is replaced by the exact
        cell-pair moment of |grad u . z|^r |z|^{-n - sigma r}, both averaged
        over gradient directions.  ``coeff`` holds a(x, y) per cell (the pair
        value is the mean of the two).
        """
        grid, prm = self.grid, self.params
        n, h = grid.n, grid.h
        eps_p = prm.eps * prm.p
        m = np.ones(grid.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        uv = self.u.flat()[m]
        diff = np.abs(uv[:, None] - uv[None, :])
        D = self.D[np.ix_(m, m)]
        off = ~np.eye(len(uv), dtype=bool)
        Ds = np.where(off, D, 1.0)
        c = np.ones(grid.size) if coeff is None else np.asarray(coeff, dtype=float)
        cm = c[m]
        pair_c = 0.5 * (cm[:, None] + cm[None, :])
        grad = self._grad
        amp = isotropic_moment(n, r)

        if route == "lebesgue":
            base = float(np.sum(np.where(off, pair_c * diff**r / Ds ** (n + sigma * r), 0.0))) * h ** (2 * n)

            def model(o_norm: float) -> float:
                return 0.0 if o_norm == 0 else amp * o_norm ** (r - n - sigma * r) * h ** (2 * n)

        elif route == "nu":
            W = self.W[np.ix_(m, m)]
            base = float(np.sum(np.where(off, pair_c * diff**r / Ds ** (sigma * r + eps_p) * W, 0.0)))
            # diagonal: effective difference |grad u| A_p^{1/p} d_self at distance d_self
            d = self.d_self
            self_factor = isotropic_moment(n, prm.p) ** (r / prm.p) * d ** (r - sigma * r - eps_p) * self.w_self
            base += float(np.sum(cm * grad[m] ** r)) * self_factor
            table = self.measure.cell_pair_table(h, grid.cells - 1)
            reach = grid.cells - 1

            def model(o_norm: float, o=None) -> float:
                if o_norm == 0:
                    return self_factor
                w = table[tuple(int(x) + reach for x in o)]
                return amp * o_norm ** (r - sigma * r - eps_p) * w

        else:
            raise ValueError("route must be 'lebesgue' or 'nu'")

        kappa_exact = n + sigma * r - r
        shape = grid.shape
        m_grid = m.reshape(shape)
        weight = (c * grad**r).reshape(shape)
        correction = 0.0
        cell = Box.cube((0.0,) * n, h)
        for o in np.ndindex(*(2 * near + 1,) * n):
            o = tuple(x - near for x in o)
            o_norm = h * math.sqrt(sum(x * x for x in o))
            exact = amp * box_pair_integral(cell, cell.shifted(tuple(h * x for x in o)), kappa_exact)
            mod = model(o_norm) if route == "lebesgue" else model(o_norm, o)
            # cells i with i + o inside the mask
            partner = _shift_mask(m_grid, o)
            correction += (exact - mod) * float(np.sum(weight[m_grid & partner]))
        return float(base + correction)

    def energy_routes(self, mask: np.ndarray | None = None, near: int = 2) -> tuple[float, float]:
        """Double-phase energy over (mask x mask) by the Lebesgue and nu quadratures."""
        prm = self.params
        out = []
        for route in ("lebesgue", "nu"):
            total = self.difference_integral(prm.p, prm.s, mask, route=route, near=near)
            if np.any(self.coeff > 0):
                total += self.difference_integral(prm.q, prm.t, mask, coeff=self.coeff, route=route, near=near)
            out.append(total)
        return out[0], out[1]


def _shift_mask(mask: np.ndarray, offset) -> np.ndarray:
    """out[i] = mask[i + offset], False where i + offset leaves the grid."""
    out = np.zeros_like(mask)
    src, dst = [], []
    for o, size in zip(offset, mask.shape):
        if o >= 0:
            src.append(slice(o, size))
            dst.append(slice(0, size - o))
        else:
            src.append(slice(0, size + o))
            dst.append(slice(-o, size))
    out[tuple(dst)] = mask[tuple(src)]
    return out


# ----------------------------------------------------------------- seminorm


def gagliardo_seminorm(
    u: GridFunction, sobolev_order: float, r: float, mask: np.ndarray | None = None, near: int = 2
) -> float:
    """int_Omega int_Omega |u(x) - u(y)|^r / |x - y|^{n + sigma r} on the grid.

    Cell-centre sampling with a near-field correction from the local gradient.
    """
    if not 0 < sobolev_order < 1 or r < 1:
        raise ValueError("seminorm needs 0 < sigma < 1 and r >= 1")
    grid = u.grid
    if mask is not None and np.asarray(mask).shape != (grid.size,):
        raise ValueError("mask does not match the grid")
    return _LebesgueOnly(u).difference_integral(r, sobolev_order, mask, route="lebesgue", near=near)


class _LebesgueOnly(PairKernel):
    """Minimal kernel stand-in exposing the Lebesgue route for a bare function."""

    def __init__(self, u: GridFunction):
        self.u = u
        self.grid = u.grid
        idx = self.grid.multi_index()
        diff = (idx[None, :, :] - idx[:, None, :]).astype(float)
        self.D = self.grid.h * np.sqrt(np.sum(diff**2, axis=-1))
        self._grad = u.gradient_norm()
        self.params = _Dummy(self.grid.n)


@dataclass(frozen=True)
class _Dummy:
    n: int
    eps: float = 0.0
    p: float = 1.0


def dual_pair_routes(kernel: PairKernel, center, radius: float, near: int = 2) -> tuple[float, float]:
    """Both sides of int_B int_B |du|^eta / |x-y|^{n + tau eta} = int_{B x B} U^eta dnu."""
    grid = kernel.grid
    ex = kernel.exps
    if not grid.ball_inside(center, radius):
        raise ValueError("ball leaves the grid box")
    mask = grid.cells_in_ball(center, radius)
    lebesgue = gagliardo_seminorm(kernel.u, ex.tau, ex.eta, mask, near=near)
    nu_route = kernel.difference_integral(ex.eta, ex.tau, mask, route="nu", near=near)
    return lebesgue, nu_route


# -------------------------------------------------------------- functionals


@dataclass(frozen=True)
class FunctionalValues:
    x: tuple[float, ...]
    R: float
    M_big: float
    psi_M: float
    psi_1: float
    upsilon0: float
    tail: float
    theta_big: float
    K_max: int
    tail_remainder: float
    nu_ball: float
    inside: bool

    def to_dict(self) -> dict:
        return asdict(self)


class FunctionalEvaluator:
    """Batched ball integrals and the functionals Psi_M, Upsilon_0, Tail, Theta.

    Balls contained in the grid box are integrated exactly on the grid and
    normalised by their discrete mass.  Balls leaving the box are normalised
    by the exact mass nu(B x B); the pairs with one point outside the box
    (where u and f vanish) are replaced by certified upper bounds, which
    integrate the kernel over the full exterior of the distance-to-boundary
    ball of each cell.
    """

    def __init__(self, kernel: PairKernel, chunk: int = 256):
        self.k = kernel
        self.grid = kernel.grid
        self.chunk = chunk
        prm, ex = kernel.params, kernel.exps
        self.prm, self.ex = prm, ex
        self.centers = self.grid.centers()
        W = kernel.W
        self.weighted = {
            "Hp": kernel.G * W,
            "Hg": kernel.H**ex.gamma * W,
            "Fp": kernel.F**ex.p_lower_s * W,
            "Fd": kernel.F ** (ex.p_lower_s + prm.delta_f) * W,
            "one": W,
        }
        self.c_ball = kernel.measure.ball_constant()
        self._exterior_bounds()
        self.alphas_rate = ex.alpha_k_rate

    def _exterior_bounds(self):
        prm, ex = self.prm, self.ex
        n, h = self.grid.n, self.grid.h
        s, t, eps, p, q = prm.s, prm.t, prm.eps, prm.p, prm.q
        d = self.grid.distance_to_outside()
        au = self.k.u.exterior_jump()
        area = sphere_area(n)
        hn = h**n
        sp, tq = s * p, t * q
        ff_g = area * (au**p * d**-sp / sp + prm.M_coeff * au**q * d**-tq / tq)
        c = ex.eta / p  # H^gamma = G^{eta/p} <= U^eta + (A U^q)^{eta/p}
        e1 = ex.tau * ex.eta
        e2 = (tq + eps * p) * c - eps * p
        if e2 <= 0:
            ff_h = np.full_like(au, np.inf)
        else:
            ff_h = area * (au**ex.eta * d**-e1 / e1 + (prm.M_coeff * au**q) ** c * d**-e2 / e2)
        ff_h = np.where(au > 0, ff_h, 0.0)
        ff_g = np.where(au > 0, ff_g, 0.0)
        # both orderings (x inside, y outside) and (x outside, y inside)
        self.exterior = {"Hp": 2 * hn * ff_g, "Hg": 2 * hn * ff_h}
        self.dist_out = d
        self.f_abs = np.abs(self.k.f.flat())

    def ball_mass_exact(self, R: float) -> float:
        return self.c_ball * R ** (self.prm.n + self.prm.eps * self.prm.p) / self.prm.eps

    def ball_stats(self, centers: np.ndarray, radii: np.ndarray, keys=("Hp", "Hg", "Fp", "Fd")) -> dict:
        """Integrals of the weighted kernels over many diagonal balls.

        Returns arrays keyed by ``keys`` plus ``mass`` and ``inside``.
        """
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.asarray(radii, dtype=float).ravel()
        out = {k: np.zeros(len(radii)) for k in keys}
        out["mass"] = np.zeros(len(radii))
        inside = np.array([self.grid.ball_inside(c, r) for c, r in zip(centers, radii)], dtype=bool)
        out["inside"] = inside
        eps_p = self.prm.eps * self.prm.p
        area = sphere_area(self.grid.n)
        for start in range(0, len(radii), self.chunk):
            sl = slice(start, start + self.chunk)
            dist = np.linalg.norm(self.centers[None, :, :] - centers[sl, None, :], axis=-1)
            masks = (dist <= radii[sl, None] * (1 + 1e-12)).astype(float)
            for key in keys + ("one",):
                left = masks @ self.weighted[key]
                vals = np.einsum("ij,ij->i", left, masks)
                if key == "one":
                    out["mass"][sl] = vals
                else:
                    out[key][sl] = vals
            ins = inside[sl]
            exact = np.array([self.ball_mass_exact(r) for r in radii[sl]])
            out["mass"][sl] = np.where(ins, out["mass"][sl], exact)
            for key in keys:
                if key in self.exterior:
                    extra = masks @ self.exterior[key]
                elif key in ("Fp", "Fd"):
                    power = self.ex.p_lower_s if key == "Fp" else self.ex.p_lower_s + self.prm.delta_f
                    reach = dist + radii[sl, None]
                    d = self.dist_out[None, :]
                    shell = np.where(reach > d, (reach**eps_p - d**eps_p) / eps_p, 0.0) * area
                    extra = (masks * shell) @ (self.f_abs**power) * self.grid.h**self.grid.n
                else:
                    extra = 0.0
                out[key][sl] = out[key][sl] + np.where(ins, 0.0, extra)
        return out

    # ------------------------------------------------------------ functionals

    def psi(self, centers, radii, M_big: float = 1.0) -> np.ndarray:
        st = self.ball_stats(centers, radii, keys=("Hp", "Fp"))
        return self._psi_from(st, M_big)

    def _psi_from(self, st: dict, M_big: float) -> np.ndarray:
        ex, prm = self.ex, self.prm
        mass = st["mass"]
        avg_h = st["Hp"] / mass
        avg_f = st["Fp"] / mass
        weight = mass**ex.theta / prm.eps ** (1.0 / ex.p_lower_s - 1.0 / ex.p_prime)
        return avg_h ** (1.0 / ex.p_prime) + M_big * weight * avg_f ** (1.0 / ex.p_lower_s)

    def _k_max(self, x, R: float) -> int:
        corners = [self.grid.lo, self.grid.hi]
        far = 0.0
        for bits in np.ndindex(*(2,) * self.grid.n):
            corner = np.array([corners[b] for b in bits])
            far = max(far, float(np.linalg.norm(corner - x)))
        k = 0
        while R * 2.0**k < far:
            k += 1
        return k

    def global_bound(self) -> float:
        """Upper bound for the integral of H^gamma over all of R^n x R^n."""
        return float(np.sum(self.weighted["Hg"]) + np.sum(self.exterior["Hg"]))

    def evaluate(self, x, R: float, M_big: float = 1.0, extra_terms: int = 0, strict: bool = True) -> FunctionalValues:
        return self.evaluate_many(np.atleast_2d(x), np.array([R]), M_big, extra_terms, strict)[0]

    def evaluate_many(self, xs, Rs, M_big: float = 1.0, extra_terms: int = 0, strict: bool = True) -> list[FunctionalValues]:
        if M_big < 1:
            raise ValueError("M_big must be at least 1")
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        Rs = np.asarray(Rs, dtype=float).ravel()
        if np.any(Rs <= 0):
            raise ValueError("radii must be positive")
        if strict:
            for x, R in zip(xs, Rs):
                if not self.grid.ball_inside(x, R):
                    raise ValueError(f"ball B({tuple(x)}, {R}) leaves the grid box")
        ex, prm = self.ex, self.prm
        first = self.ball_stats(xs, Rs)
        psi_M = self._psi_from(first, M_big)
        psi_1 = self._psi_from(first, 1.0)
        ups = (first["Fd"] / first["mass"]) ** (1.0 / (ex.p_lower_s + prm.delta_f))

        kmax = [self._k_max(x, R) + extra_terms for x, R in zip(xs, Rs)]
        site_ix, kk = [], []
        for i, K in enumerate(kmax):
            site_ix.extend([i] * (K + 1))
            kk.extend(range(K + 1))
        site_ix = np.array(site_ix)
        kk = np.array(kk)
        big = self.ball_stats(xs[site_ix], Rs[site_ix] * 2.0**kk, keys=("Hg",))
        rate = self.alphas_rate
        terms = 2.0 ** (-kk * rate) * (big["Hg"] / big["mass"]) ** (1.0 / ex.gamma)
        tails = np.zeros(len(Rs))
        np.add.at(tails, site_ix, terms)

        total = self.global_bound()
        hom = prm.n + prm.eps * prm.p
        ratio = 2.0 ** (-rate - hom / ex.gamma)
        out = []
        for i, (x, R) in enumerate(zip(xs, Rs)):
            K = kmax[i]
            k1 = K + 1
            lead = 2.0 ** (-k1 * rate) * (total / self.ball_mass_exact(R * 2.0**k1)) ** (1.0 / ex.gamma)
            remainder = lead / (1.0 - ratio)
            tail = tails[i]
            out.append(
                FunctionalValues(
                    x=tuple(float(c) for c in x),
                    R=float(R),
                    M_big=float(M_big),
                    psi_M=float(psi_M[i]),
                    psi_1=float(psi_1[i]),
                    upsilon0=float(ups[i]),
                    tail=float(tail),
                    theta_big=float(ups[i] + tail + psi_1[i]),
                    K_max=int(K),
                    tail_remainder=float(remainder),
                    nu_ball=float(first["mass"][i]),
                    inside=bool(first["inside"][i]),
                )
            )
        return out

    def tail_terms(self, x, R: float, count: int) -> np.ndarray:
        """The first ``count`` summands of the tail series at one site."""
        ks = np.arange(count)
        st = self.ball_stats(np.repeat(np.atleast_2d(x), count, axis=0), R * 2.0**ks, keys=("Hg",))
        return 2.0 ** (-ks * self.alphas_rate) * (st["Hg"] / st["mass"]) ** (1.0 / self.ex.gamma)


# --------------------------------------------------------------- constants


def kappa_choice(params: ParameterSet, exps: DerivedExponents, C_d: float, C_nd: float) -> dict:
    """The three smallness conditions on kappa and their minimum.

    Two forms of the first condition are in circulation, with exponent 1/p'
    and 1/p on 2 C_d; the smaller value is used.
    """
    eps, n, p = params.eps, params.n, params.p
    g, pp = exps.gamma, exps.p_prime
    k0_pp = eps ** (1 / pp) / (2 * C_d) ** (1 / pp)
    k0_p = eps ** (1 / pp) / (2 * C_d) ** (1 / p)
    k1 = eps ** (1 / g) / (2 ** (1 / g) * 3 * C_nd)
    k2 = eps ** (1 / g) / (8 ** (1 / g) * 3 * C_nd * (10 * n) ** ((n + p) / g))
    k0 = min(k0_pp, k0_p)
    return {
        "kappa0_pprime_form": k0_pp,
        "kappa0_p_form": k0_p,
        "kappa0_forms_differ": abs(k0_pp - k0_p) > 1e-12 * max(k0_pp, k0_p),
        "kappa0": k0,
        "kappa1": k1,
        "kappa2": k2,
        "kappa": min(k0, k1, k2, 1.0),
    }


@dataclass(frozen=True)
class ConstantsLedger:
    c_ball: float
    C_d: float
    C_nd: float
    C_dd: float
    C_ddd: float
    C1: float
    sigma_rh: float
    C2: float
    M_big: float
    C3: float
    kappa_tilde: float
    C_n: float
    L: float
    kappa_hat: float
    C5: float
    kappa_f: float
    kappa: dict

    def to_dict(self) -> dict:
        return asdict(self)


REQUIRED_MEASUREMENTS = ("c_ball", "C_d", "C_nd", "C_dd", "C_ddd")


def constants_ledger(params: ParameterSet, measurements: dict, C2: float = 1.0, C3: float = 1.0, C_n: float | None = None) -> ConstantsLedger:
    """Chain of explicit constants used by the level-set argument.

    ``C2``, ``C3`` and ``C_n`` stand for constants that are only shown to
    exist; they default to 1 (``C_n`` defaults to the lattice-counting
    constant of :func:`counting_constant`).
    """
    missing = [k for k in REQUIRED_MEASUREMENTS if k not in measurements]
    if missing:
        raise KeyError(f"missing measurements: {', '.join(missing)}")
    ex = derive_exponents(params)
    n, p, q, s, t, eps = params.n, params.p, params.q, params.s, params.t, params.eps
    pp, g, th, pl = ex.p_prime, ex.gamma, ex.theta, ex.p_lower_s
    C1 = 4.0**q / (s * (pp - 1) * (t * q / (s * p) - 1 / pp) * math.log(2.0))
    sigma_rh = eps ** (1 / g - 1 / pp) / (4 * C1)
    M_big = 4.0 * C2
    kappa_tilde = eps ** (2 / g - 2 / pp) / (2 * C3) ** (1 / g)
    C_n = counting_constant(n) if C_n is None else C_n
    L = C_n * 2.0 ** (n + eps * p) / eps
    expo = pl / (1 - pl * th)
    lead = 4 * M_big * (L + 1) / eps ** (1 / pl - 1 / pp)
    kappa_hat = 0.5 ** ((1 - pl * th) / pl) / lead
    C5 = 2 * lead**expo
    kf = kappa_hat / kappa_tilde
    kf = min(max(kf, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))
    kap = kappa_choice(params, ex, measurements["C_d"], measurements["C_nd"])
    return ConstantsLedger(
        c_ball=measurements["c_ball"],
        C_d=measurements["C_d"],
        C_nd=measurements["C_nd"],
        C_dd=measurements["C_dd"],
        C_ddd=measurements["C_ddd"],
        C1=C1,
        sigma_rh=sigma_rh,
        C2=C2,
        M_big=M_big,
        C3=C3,
        kappa_tilde=kappa_tilde,
        C_n=C_n,
        L=L,
        kappa_hat=kappa_hat,
        C5=C5,
        kappa_f=float(kf),
        kappa=kap,
    )


def counting_constant(n: int) -> float:
    """omega_n (2 + 2 sqrt n)^n: bounds lattice counts in the cardinality lemma."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * (2 + 2 * math.sqrt(n)) ** n


# --------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class Thresholds:
    lambda0: float
    lambda1: float
    lambda2: float
    kappa: float
    window: tuple[float, float]
    sites: int
    radii: tuple[float, ...]

    def to_dict(self) -> dict:
        return asdict(self)


def radius_lattice(lower: float, upper: float) -> list[float]:
    """upper 2^-m for m >= 0 down to lower, together with lower itself."""
    radii = []
    r = upper
    while r >= lower * (1 - 1e-12):
        radii.append(r)
        r /= 2.0
    if not radii or abs(radii[-1] - lower) > 1e-12 * lower:
        radii.append(lower)
    return sorted(set(radii))


def thresholds(evaluator: FunctionalEvaluator, geometry, kappa: float, M_big: float = 1.0, C_a: float = 1.0) -> Thresholds:
    """lambda_0, lambda_1, lambda_2 on the grid-vertex x dyadic-radius lattice.

    The sups are lower bounds to the continuum sups.
    """
    from .dyadic import enumerate_cubes

    geometry.validate()
    grid = evaluator.grid
    prm = evaluator.prm
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    lower, upper = geometry.radius_window()
    radii = radius_lattice(lower, upper)
    verts = grid.vertices()
    x0 = np.asarray(geometry.x0)
    sites = verts[np.linalg.norm(verts - x0, axis=1) < geometry.beta]
    xs = np.repeat(sites, len(radii), axis=0)
    Rs = np.tile(radii, len(sites))
    vals = evaluator.evaluate_many(xs, Rs, M_big=M_big, strict=False)
    sup = max((v.psi_M + v.upsilon0 + v.tail for v in vals), default=0.0)
    lam1 = sup / kappa

    coll = enumerate_cubes(geometry, geometry.k0)
    lam2_part = 0.0
    masks = [grid.cells_in_box(c.lo, c.hi) for c in coll.cubes]
    Gw = evaluator.weighted["Hp"]
    W = evaluator.k.W
    for m1 in masks:
        if not m1.any():
            continue
        for m2 in masks:
            if not m2.any():
                continue
            mass = float(np.sum(W[np.ix_(m1, m2)]))
            val = float(np.sum(Gw[np.ix_(m1, m2)])) / mass
            lam2_part = max(lam2_part, val ** (1 / evaluator.ex.p_prime))
    lam2 = max(lam1, lam2_part)

    theta_big = evaluator.evaluate(x0, 2 * geometry.rho0, strict=False).theta_big
    n, p = prm.n, prm.p
    lam0 = C_a / prm.eps * (geometry.rho0 / (geometry.alpha - geometry.beta)) ** (2 * n + p) * theta_big
    return Thresholds(lam0, lam1, lam2, kappa, (lower, upper), len(sites), tuple(radii))
