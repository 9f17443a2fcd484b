"""Grids over box cylinders, sampled fields, measures and norms.

A Grid is a tensor-product discretization of a BoxCylinder: cell-centered
nodes in x and v, right-aligned nodes in t (the final slice sits at the
top of the half-open time interval).  Measures of level sets are computed
by cell-center counting, which is first order in the spacing and makes no
smoothness assumption on the sampled function -- the natural choice for
merely measurable data.

The negative-order Sobolev norm in the velocity variable is realized by a
Dirichlet Poisson solve on the v-ball per (t, x) slice: the squared slice
norm is the Dirichlet energy of the solution, aggregated in L^2 over the
remaining variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BoxCylinder, Cylinder, StackedCylinder

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "CoefficientField",
    "NegSobolevInput",
    "level_set_measure",
    "norms",
    "RegionNorms",
    "h_minus1_norm",
    "make_coefficients",
    "save_field_csv",
    "load_field_csv",
]

Region = BoxCylinder | Cylinder | StackedCylinder


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid over a BoxCylinder."""

    domain: BoxCylinder
    n_t: int
    n_x: int
    n_v: int

    def __post_init__(self):
        if min(self.n_t, self.n_x, self.n_v) < 2:
            raise ValueError("every axis needs at least 2 nodes")

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def dt(self) -> float:
        return (self.domain.t_max - self.domain.t_min) / self.n_t

    @property
    def dx(self) -> float:
        return 2.0 * self.domain.rx / self.n_x

    @property
    def dv(self) -> float:
        return 2.0 * self.domain.rv / self.n_v

    @cached_property
    def t_nodes(self) -> np.ndarray:
        return self.domain.t_min + self.dt * np.arange(1, self.n_t + 1)

    @cached_property
    def x_axis(self) -> np.ndarray:
        lo = self.domain.x_center - self.domain.rx
        return lo[:, None] + self.dx * (np.arange(self.n_x) + 0.5)  # (d, n_x)

    @cached_property
    def v_axis(self) -> np.ndarray:
        lo = self.domain.v_center - self.domain.rv
        return lo[:, None] + self.dv * (np.arange(self.n_v) + 0.5)  # (d, n_v)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_t,) + (self.n_x,) * self.d + (self.n_v,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dt * self.dx**self.d * self.dv**self.d

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable node coordinates (T, X, V) with X, V of shape (..., d)."""
        shape = self.shape
        T = self.t_nodes.reshape((self.n_t,) + (1,) * (2 * self.d))
        T = np.broadcast_to(T, shape)
        axes_x = []
        for i in range(self.d):
            sh = [1] * (1 + 2 * self.d)
            sh[1 + i] = self.n_x
            axes_x.append(np.broadcast_to(self.x_axis[i].reshape(sh), shape))
        axes_v = []
        for i in range(self.d):
            sh = [1] * (1 + 2 * self.d)
            sh[1 + self.d + i] = self.n_v
            axes_v.append(np.broadcast_to(self.v_axis[i].reshape(sh), shape))
        X = np.stack(axes_x, axis=-1)
        V = np.stack(axes_v, axis=-1)
        return T, X, V

    def region_mask(self, region: Region | None) -> np.ndarray:
        if region is None:
            return np.ones(self.shape, dtype=bool)
        T, X, V = self.coords
        return region.contains(T, X, V)

    def sample(self, fn) -> "ScalarField":
        """Sample a callable fn(t, x, v) -> values at all nodes."""
        T, X, V = self.coords
        return ScalarField(self, np.asarray(fn(T, X, V), dtype=float))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.domain, self.n_t * factor, self.n_x * factor, self.n_v * factor)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")

    def __add__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """A d-vector field on a grid, components in the trailing axis."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != self.grid.shape + (self.grid.d,):
            raise ValueError("vector field shape mismatch")
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")


@dataclass(frozen=True)
class NegSobolevInput:
    """Right-hand side H = div_v H1 + H0 for the dual-norm solve."""

    H0: ScalarField
    H1: VectorField

    def __post_init__(self):
        if self.H0.grid is not self.H1.grid and self.H0.grid != self.H1.grid:
            raise ValueError("H0 and H1 must live on the same grid")

    @property
    def grid(self) -> Grid:
        return self.H0.grid


def level_set_measure(f: ScalarField, predicate, region: Region | None = None) -> float:
    """Sum of cell volumes whose center satisfies the predicate inside the region."""
    mask = f.grid.region_mask(region)
    if region is not None and not mask.any():
        raise ValueError("region does not overlap the grid domain")
    sel = np.asarray(predicate(f.values), dtype=bool) & mask
    return float(sel.sum()) * f.grid.cell_volume


@dataclass(frozen=True)
class RegionNorms:
    sup: float
    inf: float
    measure: float
    _values: np.ndarray
    _cell_volume: float

    @property
    def osc(self) -> float:
        return self.sup - self.inf

    def lp(self, p: float) -> float:
        if p <= 0:
            raise ValueError(f"Lp exponent must be positive, got {p}")
        return float((np.abs(self._values) ** p).sum() * self._cell_volume) ** (1.0 / p)


def norms(f: ScalarField, region: Region | None = None) -> RegionNorms:
    """Cell-quadrature Lp / sup / inf / oscillation over a region."""
    mask = f.grid.region_mask(region)
    if not mask.any():
        raise ValueError("region does not overlap the grid domain")
    vals = f.values[mask]
    return RegionNorms(
        sup=float(vals.max()),
        inf=float(vals.min()),
        measure=float(mask.sum()) * f.grid.cell_volume,
        _values=vals,
        _cell_volume=f.grid.cell_volume,
    )


def _dirichlet_laplacian_1d(n: int, h: float) -> sp.csc_matrix:
    """Cell-centered -d^2/dv^2 with zero values on the interval boundary.

    The boundary lies half a cell beyond the outer centers; mirror ghosts
    (u_ghost = -u_edge) enforce a zero face value.
    """
    main = np.full(n, 2.0)
    main[0] = main[-1] = 3.0
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csc") / h**2


def _dirichlet_laplacian_ball_2d(v1: np.ndarray, v2: np.ndarray, h: float, center, radius):
    """Masked 5-point -Laplacian on nodes inside the v-ball; outside is zero."""
    V1, V2 = np.meshgrid(v1, v2, indexing="ij")
    inside = (V1 - center[0]) ** 2 + (V2 - center[1]) ** 2 < radius**2
    idx = -np.ones(inside.shape, dtype=int)
    idx[inside] = np.arange(inside.sum())
    n = int(inside.sum())
    rows, cols, vals = [], [], []
    nb = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    ii, jj = np.nonzero(inside)
    for i, j in zip(ii, jj):
        k = idx[i, j]
        rows.append(k), cols.append(k), vals.append(4.0)
        for di, dj in nb:
            a, b = i + di, j + dj
            if 0 <= a < inside.shape[0] and 0 <= b < inside.shape[1] and inside[a, b]:
                rows.append(k), cols.append(idx[a, b]), vals.append(-1.0)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n)) / h**2
    return A, inside


def _weak_rhs(H: ScalarField | NegSobolevInput) -> np.ndarray:
    """Node values of H, with div_v H1 assembled by centered differences."""
    if isinstance(H, ScalarField):
        return H.values
    grid = H.grid
    dv = grid.dv
    rhs = H.H0.values.copy()
    for i in range(grid.d):
        axis = 1 + grid.d + i
        comp = H.H1.values[..., i]
        rhs += np.gradient(comp, dv, axis=axis)
    return rhs


def h_minus1_norm(H: ScalarField | NegSobolevInput, region: Region | None = None) -> float:
    """Discrete L^2_{t,x} H^{-1}_v norm.

    Per (t, x) slice solve -Lap_v u = H with zero Dirichlet data on the
    v-ball; the squared slice norm is the Dirichlet energy, recovered via
    the weak identity int |grad u|^2 = int H u.  Slices are aggregated in
    L^2 with the (t, x) cell measure.  If a region is given, slices whose
    (t, x) cell centers fall outside its time interval and x-ball are
    dropped.
    """
    grid = H.grid if isinstance(H, NegSobolevInput) else H.grid
    rhs = _weak_rhs(H)
    d = grid.d
    n_slices = grid.n_t * grid.n_x**d
    rhs_flat = rhs.reshape(n_slices, grid.n_v**d)

    if d == 1:
        A = _dirichlet_laplacian_1d(grid.n_v, grid.dv)
        solve = spla.factorized(A)
        u = solve(rhs_flat.T)  # (n_v, n_slices)
        energy = (rhs_flat.T * u).sum(axis=0) * grid.dv
    elif d == 2:
        A, inside = _dirichlet_laplacian_ball_2d(
            grid.v_axis[0], grid.v_axis[1], grid.dv, grid.domain.v_center, grid.domain.rv
        )
        solve = spla.factorized(A)
        masked = rhs_flat[:, inside.ravel()].T
        u = solve(masked)
        energy = (masked * u).sum(axis=0) * grid.dv**2
    else:
        raise NotImplementedError("h_minus1_norm supports d in {1, 2}")

    energy = np.maximum(energy, 0.0)

    if region is not None:
        T, X, _ = grid.coords
        # collapse the v axes: keep one representative v-index
        sl = (slice(None),) * (1 + d) + (0,) * d
        keep_t = (region.t_min < T[sl]) & (T[sl] <= region.t_max) if isinstance(region, BoxCylinder) else None
        if not isinstance(region, BoxCylinder):
            raise ValueError("h_minus1_norm region must be a BoxCylinder")
        keep_x = np.sqrt(((X[sl] - region.x_center) ** 2).sum(axis=-1)) < region.rx
        keep = (keep_t & keep_x).reshape(n_slices)
        energy = energy[keep]

    return float(np.sqrt(energy.sum() * grid.dt * grid.dx**d))


@dataclass(frozen=True)
class CoefficientField:
    """Measurable coefficients A(z), B(z), S(z) with ellipticity bounds."""

    grid: Grid
    A: np.ndarray  # shape grid.shape + (d, d)
    B: np.ndarray  # shape grid.shape + (d,)
    S: np.ndarray  # shape grid.shape
    lam: float
    Lam: float

    def __post_init__(self):
        d = self.grid.d
        if self.A.shape != self.grid.shape + (d, d):
            raise ValueError("A has wrong shape")
        if self.B.shape != self.grid.shape + (d,):
            raise ValueError("B has wrong shape")
        if self.S.shape != self.grid.shape:
            raise ValueError("S has wrong shape")
        if not 0 < self.lam <= self.Lam:
            raise ValueError("ellipticity bounds must satisfy 0 < lam <= Lam")
        self.validate()

    def validate(self, slack: float = 1e-12) -> None:
        if not np.allclose(self.A, np.swapaxes(self.A, -1, -2), rtol=0, atol=1e-13):
            raise ValueError("A must be symmetric at every node")
        if self.grid.d == 1:
            eig = self.A[..., 0, 0]
        else:
            eig = np.linalg.eigvalsh(self.A)
        if eig.min() < self.lam - slack or eig.max() > self.Lam + slack:
            raise ValueError(
                f"eigenvalues of A in [{eig.min():.3e}, {eig.max():.3e}] "
                f"escape [{self.lam}, {self.Lam}]"
            )
        bnorm = np.sqrt((self.B**2).sum(axis=-1))
        if bnorm.max() > self.Lam + slack:
            raise ValueError("|B| exceeds the upper ellipticity bound")


def _cell_index(coord: np.ndarray, cell_size: float) -> np.ndarray:
    return np.floor(coord / cell_size).astype(np.int64)


def make_coefficients(
    grid: Grid,
    kind: str = "constant",
    lam: float = 1.0,
    Lam: float = 1.0,
    cell_size: float = 0.25,
    seed: int = 0,
    S=None,
) -> CoefficientField:
    """Coefficient generators: constant, checkerboard, or random per-cell.

    Checkerboard alternates A = lam*I / Lam*I on phase-space cells of the
    given size; random draws symmetric matrices with spectrum clamped to
    [lam, Lam] and |B| <= Lam, piecewise constant per cell (deliberately
    discontinuous).
    """
    if lam > Lam:
        raise ValueError("need lam <= Lam")
    d = grid.d
    shape = grid.shape
    eye = np.eye(d)
    S_arr = np.zeros(shape) if S is None else np.broadcast_to(np.asarray(S, float), shape).copy()

    if kind == "constant":
        mid = 0.5 * (lam + Lam)
        A = np.broadcast_to(mid * eye, shape + (d, d)).copy()
        B = np.zeros(shape + (d,))
        return CoefficientField(grid, A, B, S_arr, lam, Lam)

    T, X, V = grid.coords
    cells = _cell_index(T, cell_size)
    for i in range(d):
        cells = cells + _cell_index(X[..., i], cell_size) + _cell_index(V[..., i], cell_size)

    if kind == "checkerboard":
        hi = (cells % 2).astype(bool)
        A = np.where(hi[..., None, None], Lam * eye, lam * eye)
        B = np.zeros(shape + (d,))
        return CoefficientField(grid, A, B, S_arr, lam, Lam)

    if kind == "random":
        rng = np.random.default_rng(seed)
        # hash cell indices into a deterministic per-cell table
        key = _cell_index(T, cell_size) * 73856093
        for i in range(d):
            key = key + _cell_index(X[..., i], cell_size) * 19349663
            key = key + _cell_index(V[..., i], cell_size) * 83492791
        uniq, inv = np.unique(key, return_inverse=True)
        n_cells = uniq.size
        eigs = rng.uniform(lam, Lam, size=(n_cells, d))
        if d == 1:
            A_cells = eigs[:, :, None]
        else:
            # random rotation via QR, then clamp spectrum by construction
            Qm, _ = np.linalg.qr(rng.standard_normal((n_cells, d, d)))
            A_cells = np.einsum("cij,cj,ckj->cik", Qm, eigs, Qm)
        b_dir = rng.standard_normal((n_cells, d))
        b_dir /= np.sqrt((b_dir**2).sum(axis=-1, keepdims=True))
        B_cells = b_dir * rng.uniform(0.0, Lam, size=(n_cells, 1))
        A = A_cells[inv].reshape(shape + (d, d))
        B = B_cells[inv].reshape(shape + (d,))
        # exact symmetrization against roundoff
        A = 0.5 * (A + np.swapaxes(A, -1, -2))
        return CoefficientField(grid, A, B, S_arr, lam, Lam)

    raise ValueError(f"unknown coefficient kind {kind!r}")


def save_field_csv(f: ScalarField, path) -> None:
    """Snapshot as CSV with column order t, x..., v..., value."""
    T, X, V = f.grid.coords
    d = f.grid.d
    cols = [T.ravel()]
    cols += [X[..., i].ravel() for i in range(d)]
    cols += [V[..., i].ravel() for i in range(d)]
    cols.append(f.values.ravel())
    header = ",".join(["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["value"])
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="")


def load_field_csv(grid: Grid, path) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return ScalarField(grid, data[:, -1].reshape(grid.shape))
