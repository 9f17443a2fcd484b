"""Discrete covering inequality for boolean phase-space sets.

Implements the growing-ink-spots measure bound on grids: if every
high-density slanted cylinder inside the unit past cylinder Q_- has small
radius and its stacked extension lies in F, then

    |E| <= (m+1)/m * (1 - c mu) * ( |F meet Q_-| + C m r0^2 ).

Sets are boolean masks on a :class:`~kinfp.fields.Grid`; measures are cell
counts times the cell volume.  Candidate cylinders are grid-aligned
(centers on cell centers, radii from a supplied dyadic list) -- an
implementation restriction recorded in every report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import BoxCylinder, Grid
from .geometry import (
    Cylinder,
    PhasePoint,
    StackedCylinder,
    cylinder_in_cylinder,
    origin,
)
from .report import VerificationReport

__all__ = [
    "DiscreteSet",
    "unit_past_cylinder",
    "standard_grid",
    "find_dense_cylinders",
    "verify_inkspots",
    "generate_hypothesis_pair",
    "mask_to_rle",
    "rle_to_mask",
]


class InkspotsHypothesisError(ValueError):
    """A hypothesis of the covering inequality failed; names the witness."""


def unit_past_cylinder(d: int = 1) -> Cylinder:
    """The reference region Q_-: the unit slanted cylinder at the origin."""
    return Cylinder(origin(d), 1.0)


def standard_grid(n=(24, 24, 24), d: int = 1, t_max: float = 0.0) -> Grid:
    """Grid whose box hull covers Q_- (and optionally some future time)."""
    box = BoxCylinder(-1.0, max(t_max, 0.0), np.zeros(d), 2.0, np.zeros(d), 1.0)
    return Grid(box, *n)


@dataclass(frozen=True)
class DiscreteSet:
    """Boolean mask on a grid, measured against a reference cylinder."""

    grid: Grid
    mask: np.ndarray
    region: Cylinder

    def __post_init__(self):
        if self.mask.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid shape")
        if self.mask.dtype != np.bool_:
            object.__setattr__(self, "mask", self.mask.astype(bool))

    @property
    def region_mask(self) -> np.ndarray:
        T, X, V = self.grid.coords
        return self.region.contains(T, X, V)

    @property
    def measure(self) -> float:
        """Measure of the set inside the reference region."""
        return float(
            np.count_nonzero(self.mask & self.region_mask)
            * self.grid.cell_volume
        )

    def restricted(self) -> "DiscreteSet":
        return DiscreteSet(self.grid, self.mask & self.region_mask, self.region)


def _index_window(grid: Grid, Q: Cylinder):
    """Slices of grid axes covering the bounding box of Q (clipped)."""
    z0, r = Q.center, Q.r
    speed = float(np.sqrt(np.sum(z0.v**2)))
    t = grid.t_nodes
    it = np.searchsorted(t, [z0.t - r**2 - grid.dt, z0.t + grid.dt])
    sl = [slice(max(it[0], 0), min(it[1], grid.n_t))]
    rx = r**3 + r**2 * speed
    for k in range(grid.d):
        ax = grid.x_axis[k]
        i = np.searchsorted(ax, [z0.x[k] - rx - grid.dx, z0.x[k] + rx + grid.dx])
        sl.append(slice(max(i[0], 0), min(i[1], grid.n_x)))
    for k in range(grid.d):
        ax = grid.v_axis[k]
        i = np.searchsorted(ax, [z0.v[k] - r - grid.dv, z0.v[k] + r + grid.dv])
        sl.append(slice(max(i[0], 0), min(i[1], grid.n_v)))
    return tuple(sl)


def _cell_counts(E: DiscreteSet, Q: Cylinder):
    """(cells of Q meeting E, cells of Q) by counting cell centers."""
    g = E.grid
    win = _index_window(g, Q)
    T, X, V = g.coords
    inside = Q.contains(T[win], X[win], V[win])
    n_q = int(np.count_nonzero(inside))
    n_e = int(np.count_nonzero(E.mask[win] & inside))
    return n_e, n_q


def _shift3(arr: np.ndarray, a: int, b: int, c: int) -> np.ndarray:
    """out[i, j, k] = arr[i - a, j + b, k + c], zero-filled outside."""
    nt, nx, nv = arr.shape
    out = np.zeros_like(arr)
    if a >= nt or abs(b) >= nx or abs(c) >= nv:
        return out
    ts_out, ts_in = slice(a, nt), slice(0, nt - a)
    if b >= 0:
        xs_out, xs_in = slice(0, nx - b), slice(b, nx)
    else:
        xs_out, xs_in = slice(-b, nx), slice(0, nx + b)
    if c >= 0:
        vs_out, vs_in = slice(0, nv - c), slice(c, nv)
    else:
        vs_out, vs_in = slice(-c, nv), slice(0, nv + c)
    out[ts_out, xs_out, vs_out] = arr[ts_in, xs_in, vs_in]
    return out


def _admissible_centers_1d(grid: Grid, r: float, region: Cylinder) -> np.ndarray:
    """Boolean array over cell centers: Q_r(center) inside the region.

    Vectorized replica of cylinder_in_cylinder at tol = 0 for d = 1.
    """
    zo, ro = region.center, region.r
    t = grid.t_nodes[:, None, None] - zo.t
    x = grid.x_axis[0][None, :, None] - zo.x[0]
    v = grid.v_axis[0][None, None, :] - zo.v[0]
    ok = (t <= 0.0) & (t - r**2 >= -(ro**2)) & (np.abs(v) + r <= ro)
    base = x - t * zo.v[0]
    drift = np.maximum(np.abs(base), np.abs(base - r**2 * v))
    return ok & (drift + r**3 <= ro**3)


def _default_radii(grid: Grid) -> list[float]:
    """Dyadic radii from 1 down to the smallest scale the grid resolves
    in time and velocity (density counting needs at least the center
    cell's neighborhood to be meaningful)."""
    floor = 2.0 * max(grid.dv, grid.dt**0.5)
    radii = []
    r = 1.0
    while r >= floor:
        radii.append(r)
        r /= 2.0
    return radii or [1.0]


def _dense_counts_1d(E: DiscreteSet, r: float):
    """(n_in_E, n_in_Q) per candidate center, as arrays over the grid.

    Sums shifted copies of the mask over all index offsets that can fall
    inside a radius-r cylinder; membership per offset replicates the
    coordinate comparisons of Cylinder.contains bit for bit, so the result
    matches a brute-force scan exactly.
    """
    g = E.grid
    t, x, v = g.t_nodes, g.x_axis[0], g.v_axis[0]
    nt, nx, nv = g.n_t, g.n_x, g.n_v
    vmax = float(np.max(np.abs(v)))
    a_max = min(nt - 1, int(np.ceil(r * r / g.dt)))
    b_max = min(nx - 1, int(np.ceil((r**3 + r * r * vmax) / g.dx)) + 1)
    c_max = min(nv - 1, int(np.ceil(r / g.dv)) + 1)
    n_q = np.zeros(g.shape, dtype=np.int64)
    n_e = np.zeros(g.shape, dtype=np.int64)
    mask = E.mask
    for a in range(a_max + 1):
        s = np.full(nt, np.nan)
        s[a:] = t[: nt - a] - t[a:]  # t_point - t_center per center index
        cond_t = (-(r * r) < s) & (s <= 0.0)
        if not cond_t.any():
            continue
        for c in range(-c_max, c_max + 1):
            dv = np.full(nv, np.nan)
            if c >= 0:
                dv[: nv - c] = v[c:] - v[: nv - c]
            else:
                dv[-c:] = v[: nv + c] - v[-c:]
            cond_v = np.abs(dv) < r
            if not cond_v.any():
                continue
            for b in range(-b_max, b_max + 1):
                dx = np.full(nx, np.nan)
                if b >= 0:
                    dx[: nx - b] = x[b:] - x[: nx - b]
                else:
                    dx[-b:] = x[: nx + b] - x[-b:]
                cond_x = (
                    np.abs(dx[None, :, None] - s[:, None, None] * v[None, None, :])
                    < r**3
                )
                mem = cond_t[:, None, None] & cond_x & cond_v[None, None, :]
                if not mem.any():
                    continue
                n_q += mem
                n_e += mem & _shift3(mask, a, b, c)
    return n_e, n_q


def find_dense_cylinders(
    E: DiscreteSet, mu: float, radii=None
) -> list[Cylinder]:
    """Grid-aligned cylinders Q_r(z0) inside Q_- with |Q meet E| >= (1-mu)|Q|.

    Candidate centers run over the cell centers of E's grid; radii over the
    supplied list (default: the dyadic ladder from 1 down to the cell
    scale).  Containment in Q_- is exact (closed form); density is cell
    counting.  The d = 1 scan is vectorized over centers by summing shifted
    masks; higher dimensions fall back to a per-candidate loop.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    radii = list(_default_radii(E.grid) if radii is None else radii)
    if not radii:
        raise ValueError("radii list must be nonempty")
    g = E.grid
    region = E.region
    out: list[Cylinder] = []
    T, X, V = g.coords
    any_E = E.mask.any()
    for r in sorted(radii, reverse=True):
        if not any_E:
            break
        r = float(r)
        if g.d == 1:
            admissible = _admissible_centers_1d(g, r, region)
            if not admissible.any():
                continue
            n_e, n_q = _dense_counts_1d(E, r)
            good = admissible & (n_q > 0) & (n_e >= (1.0 - mu) * n_q)
            for idx in np.argwhere(good):
                i, j, k = (int(q) for q in idx)
                z0 = PhasePoint(float(g.t_nodes[i]),
                                np.array([g.x_axis[0][j]]),
                                np.array([g.v_axis[0][k]]))
                Q = Cylinder(z0, r)
                if cylinder_in_cylinder(Q, region):
                    out.append(Q)
        else:
            flat_T = T.ravel()
            flat_X = X.reshape(-1, g.d)
            flat_V = V.reshape(-1, g.d)
            for i in range(flat_T.size):
                z0 = PhasePoint(float(flat_T[i]), flat_X[i].copy(),
                                flat_V[i].copy())
                Q = Cylinder(z0, r)
                if not cylinder_in_cylinder(Q, region):
                    continue
                n_e, n_q = _cell_counts(E, Q)
                if n_q > 0 and n_e >= (1.0 - mu) * n_q:
                    out.append(Q)
    return out


def _stacked_mask(grid: Grid, Q: Cylinder, m: int) -> np.ndarray:
    bar = StackedCylinder(Q, m)
    T, X, V = grid.coords
    return bar.contains(T, X, V)


def verify_inkspots(
    E: DiscreteSet,
    F: DiscreteSet,
    mu: float,
    m: int,
    r0: float,
    c: float,
    C: float,
    radii=None,
) -> VerificationReport:
    """Evaluate |E| <= (m+1)/m (1 - c mu) ( |F meet Q_-| + C m r0^2 ).

    Hypotheses checked first: E inside F meet Q_-; every dense cylinder
    (scanned over ``radii``, default dyadic 1, 1/2, ... down to the cell
    scale) has r < r0 and its stacked extension Qbar^m lies in F.  The
    report carries the tightest c* for which the inequality holds at the
    given C.
    """
    if E.grid is not F.grid and E.grid != F.grid:
        raise ValueError("E and F must share a grid")
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 < r0 < 1.0:
        raise ValueError("r0 must lie in (0, 1)")
    region_mask = E.region_mask
    if np.any(E.mask & ~(F.mask & region_mask)):
        raise InkspotsHypothesisError("E is not contained in F meet Q_-")
    if radii is None:
        radii = _default_radii(E.grid)
    dense = find_dense_cylinders(E, mu, radii)
    for Q in dense:
        if Q.r >= r0:
            raise InkspotsHypothesisError(
                f"dense cylinder of radius {Q.r} >= r0 = {r0} at "
                f"(t={Q.center.t:.4f}, x={Q.center.x}, v={Q.center.v})"
            )
        bar = _stacked_mask(E.grid, Q, m)
        if np.any(bar & ~F.mask):
            raise InkspotsHypothesisError(
                f"stacked extension of the dense cylinder at "
                f"(t={Q.center.t:.4f}, x={Q.center.x}, v={Q.center.v}) "
                "leaves F"
            )
    lhs = E.measure
    f_measure = F.restricted().measure
    base = f_measure + C * m * r0**2
    rhs = (m + 1) / m * (1.0 - c * mu) * base
    if base > 0:
        c_star = (1.0 - lhs * m / ((m + 1) * base)) / mu
    else:
        c_star = None
    return VerificationReport(
        inequality="ink-spots-covering",
        lhs=lhs,
        rhs=rhs,
        params={"mu": mu, "m": m, "r0": r0, "c": c, "C": C,
                "F_measure": f_measure, "dense_count": len(dense),
                "candidate_class": "grid-aligned slanted cylinders",
                "c_star": c_star},
        passed=lhs <= rhs + 1e-15,
    )


def generate_hypothesis_pair(
    seed: int,
    k: int,
    m: int,
    r0: float,
    n=(24, 24, 24),
    d: int = 1,
) -> tuple[DiscreteSet, DiscreteSet]:
    """Deterministic (E, F) pair satisfying the covering hypotheses.

    E is a union of k cylinders of radius < r0/2 inside Q_-, intersected
    with a synthetic level set; F is the union of their stacked extensions
    together with E.  A final rejection sweep removes E-cells of any
    accidentally dense cylinder with radius >= r0, so the hypotheses hold
    by construction on the discrete grid.
    """
    if not 0.0 < r0 < 1.0:
        raise ValueError("r0 must lie in (0, 1)")
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = np.random.default_rng(seed)
    grid = standard_grid(n, d, t_max=m * (r0 / 2.0) ** 2)
    region = unit_past_cylinder(d)
    T, X, V = grid.coords
    e_mask = np.zeros(grid.shape, dtype=bool)
    f_mask = np.zeros(grid.shape, dtype=bool)
    # smooth synthetic level set
    w = np.sin(3.0 * rng.uniform(0.5, 2.0) * T)
    for kk in range(d):
        w = w + np.cos(2.0 * rng.uniform(0.5, 2.0) * X[..., kk]) \
              + np.sin(4.0 * rng.uniform(0.5, 2.0) * V[..., kk])
    level = w >= np.quantile(w, 0.35)
    placed = 0
    attempts = 0
    while placed < k and attempts < 50 * max(k, 1):
        attempts += 1
        r = float(rng.uniform(0.5, 1.0) * r0 / 2.0)
        z0 = PhasePoint(
            float(rng.uniform(-1.0 + r**2, 0.0)),
            rng.uniform(-0.5, 0.5, size=d),
            rng.uniform(-0.9 + r, 0.9 - r, size=d),
        )
        Q = Cylinder(z0, r)
        if not cylinder_in_cylinder(Q, region):
            continue
        inside = Q.contains(T, X, V)
        if not inside.any():
            continue
        e_mask |= inside & level
        f_mask |= _stacked_mask(grid, Q, m) | inside
        placed += 1
    region_mask = region.contains(T, X, V)
    e_mask &= region_mask
    f_mask |= e_mask
    E = DiscreteSet(grid, e_mask, region)
    # rejection sweep: no dense cylinder with radius >= r0 may survive
    # (scanned over the same default radii verify_inkspots uses)
    all_radii = _default_radii(grid)
    big_radii = [r for r in all_radii if r >= r0]
    if big_radii:
        for _ in range(8):
            offenders = find_dense_cylinders(E, 0.5, big_radii)
            if not offenders:
                break
            for Q in offenders:
                e_mask = e_mask & ~Q.contains(T, X, V)
            E = DiscreteSet(grid, e_mask, region)
    # enlargement sweep: the stacked extension of every remaining dense
    # cylinder (any radius below r0, any density level down to mu = 1/2's
    # complement) must lie in F
    small_radii = [r for r in all_radii if r < r0]
    if small_radii and e_mask.any():
        for Q in find_dense_cylinders(E, 0.999, small_radii):
            f_mask |= _stacked_mask(grid, Q, m)
    f_mask |= e_mask
    return E, DiscreteSet(grid, f_mask, region)


# ---------------------------------------------------------------------------
# run-length-encoded mask fixtures
# ---------------------------------------------------------------------------


def mask_to_rle(mask: np.ndarray) -> str:
    """Serialize a boolean array: 'shape' line, then run lengths.

    Runs alternate starting from False, flattened in C order.
    """
    mask = np.asarray(mask, dtype=bool)
    flat = mask.ravel()
    lines = ["shape " + " ".join(str(s) for s in mask.shape)]
    runs = []
    current = False
    count = 0
    for bit in flat:
        if bit == current:
            count += 1
        else:
            runs.append(count)
            current = bool(bit)
            count = 1
    runs.append(count)
    lines.append(" ".join(str(r) for r in runs))
    return "\n".join(lines) + "\n"


def rle_to_mask(text: str) -> np.ndarray:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("shape "):
        raise ValueError("missing shape header")
    shape = tuple(int(s) for s in lines[0].split()[1:])
    runs = [int(tok) for ln in lines[1:] for tok in ln.split()]
    total = int(np.prod(shape))
    flat = np.zeros(total, dtype=bool)
    pos = 0
    bit = False
    for run in runs:
        if run < 0 or pos + run > total:
            raise ValueError("run lengths do not match shape")
        flat[pos:pos + run] = bit
        pos += run
        bit = not bit
    if pos != total:
        raise ValueError("run lengths do not match shape")
    return flat.reshape(shape)
