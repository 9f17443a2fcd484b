"""Constant-coefficient (Kolmogorov) machinery.

The operator here is L_K = (d/dt + v . grad_x) - Lap_v.  Its fundamental
solution is an explicit Gaussian: starting from (t0, x0, v0), at elapsed
time s = t - t0 the velocity is Gaussian around v0 with variance 2s per
axis, the position is Gaussian around x0 + s v0 with variance 2 s^3 / 3 per
axis, and the x-v covariance per axis is s^2 (the axes are independent).
These moments follow from the characteristics dV = sqrt(2) dW, dX = V dt.

The module also builds the C^2 cutoff Psi used to localize supersolutions:

    Psi1(t, x, v) = phi1(t) phi2(x - t v) phi3(v),
    Psi(t, x, v)  = Psi1(t, x / R, v / R),

with polynomial (quintic-smoothstep) profiles so that every derivative
entering the estimates is available in closed form, and the localization
pipeline that solves the three Cauchy problems (h, P_R, E_R) behind the
bound h <= theta0 * sup f on the unit cylinder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import BoxCylinder, CoefficientField, Grid, ScalarField
from .fpsolver import SolverConfig, solve
from .geometry import PhasePoint, ball_volume, group_inverse, group_product

__all__ = [
    "KolmogorovKernel",
    "kernel_eval",
    "log_kernel_eval",
    "InsufficientPaddingError",
    "solve_cauchy",
    "CutoffFunction",
    "build_cutoff",
    "theta0_parameters",
    "localization_bound",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _kernel_log_density(s, dx, dv):
    """Per-axis log-densities summed; s > 0, dx/dv shaped (..., d)."""
    s = np.asarray(s, dtype=float)
    det = s**4 / 3.0
    q = (2.0 * s[..., None] * dx * dx
         - 2.0 * (s**2)[..., None] * dx * dv
         + (2.0 * s**3 / 3.0)[..., None] * dv * dv) / det[..., None]
    per_axis = -_LOG_2PI - 0.5 * np.log(det)[..., None] - 0.5 * q
    return np.sum(per_axis, axis=-1)


def log_kernel_eval(t, x, v, z0: PhasePoint):
    """log of the fundamental solution with pole at z0; requires t > z0.t."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    s = t - z0.t
    if np.any(s <= 0.0):
        raise ValueError("kernel is only defined forward in time (t > t0)")
    dx = x - z0.x - s[..., None] * z0.v
    dv = v - z0.v
    return _kernel_log_density(s, dx, dv)


def kernel_eval(t, x, v, z0: PhasePoint):
    """Fundamental solution of L_K with pole at z0, evaluated at (t, x, v)."""
    return np.exp(log_kernel_eval(t, x, v, z0))


@dataclass(frozen=True)
class KolmogorovKernel:
    """Fundamental solution viewed as a function of the observation point.

    Left-invariance holds exactly: evaluating at z0 o w equals evaluating
    the origin-pole kernel at w, because the group product transports the
    pole along the free-transport flow.
    """

    pole: PhasePoint

    def __call__(self, t, x, v):
        return kernel_eval(t, x, v, self.pole)

    def log(self, t, x, v):
        return log_kernel_eval(t, x, v, self.pole)

    def at_point(self, z: PhasePoint) -> float:
        return float(kernel_eval(z.t, z.x[None, :], z.v[None, :], self.pole)[0])

    def shifted_argument(self, z: PhasePoint) -> PhasePoint:
        """z0^{-1} o z, the argument of the origin-pole kernel."""
        return group_product(group_inverse(self.pole), z)


# ---------------------------------------------------------------------------
# truncated whole-space Cauchy solve
# ---------------------------------------------------------------------------


class InsufficientPaddingError(RuntimeError):
    """Too much solution mass reached the truncation boundary."""


def _padded_grid(grid: Grid, pad_x: float, pad_v: float) -> tuple[Grid, tuple]:
    """Extend the box by whole cells on every x/v side, same spacing."""
    kx = int(np.ceil(pad_x / grid.dx - 1e-12)) if pad_x > 0 else 0
    kv = int(np.ceil(pad_v / grid.dv - 1e-12)) if pad_v > 0 else 0
    box = grid.domain
    new_box = BoxCylinder(
        t_min=box.t_min,
        t_max=box.t_max,
        x_center=box.x_center,
        rx=box.rx + kx * grid.dx,
        v_center=box.v_center,
        rv=box.rv + kv * grid.dv,
    )
    new = Grid(new_box, grid.n_t, grid.n_x + 2 * kx, grid.n_v + 2 * kv)
    return new, (kx, kv)


def solve_cauchy(
    rhs: ScalarField,
    pad_x: float = 0.0,
    pad_v: float = 0.0,
    boundary_tol: float = 1e-6,
) -> ScalarField:
    """Solve L_K h = rhs, h = 0 at the opening time, on a padded box.

    The whole-space problem is truncated to rhs's box enlarged by pad_x /
    pad_v (whole cells, same spacing) with zero Dirichlet data.  After the
    solve, the fraction of |h|-mass sitting in the outermost cell shell is
    compared against boundary_tol; exceeding it raises
    InsufficientPaddingError.  The returned field lives on the padded grid.
    """
    grid, (kx, kv) = _padded_grid(rhs.grid, pad_x, pad_v)
    d = grid.domain.d
    if kx or kv:
        source = np.zeros(grid.shape)
        sl = (slice(None),)
        sl += (slice(kx, kx + rhs.grid.n_x),) * d
        sl += (slice(kv, kv + rhs.grid.n_v),) * d
        source[sl] = rhs.values
    else:
        source = rhs.values
    eye = np.zeros(grid.shape + (d, d))
    for j in range(d):
        eye[..., j, j] = 1.0
    coeffs = CoefficientField(
        grid, eye, np.zeros(grid.shape + (d,)), source, lam=1.0, Lam=1.0
    )
    config = SolverConfig(
        grid=grid,
        coeffs=coeffs,
        initial=np.zeros(grid.shape[1:]),
        bc_x="dirichlet",
        bc_v="dirichlet",
        boundary_value=0.0,
    )
    h = solve(config)
    total = float(np.sum(np.abs(h.values)))
    if total > 0.0:
        shell = np.zeros(grid.shape, dtype=bool)
        for ax in range(1, h.values.ndim):
            idx_lo = [slice(None)] * h.values.ndim
            idx_hi = [slice(None)] * h.values.ndim
            idx_lo[ax] = 0
            idx_hi[ax] = -1
            shell[tuple(idx_lo)] = True
            shell[tuple(idx_hi)] = True
        frac = float(np.sum(np.abs(h.values[shell]))) / total
        if frac > boundary_tol:
            raise InsufficientPaddingError(
                f"boundary shell holds {frac:.3e} of the solution mass "
                f"(tolerance {boundary_tol:.1e}); increase pad_x/pad_v"
            )
    return h


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------


def _s5(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _ds5(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


def _d2s5(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u), 0.0)


def _radial_profile(rho, lo, hi):
    """w = 1 on [0, lo], smoothstep down to 0 at hi; returns (w, w', w'')."""
    u = (rho - lo) / (hi - lo)
    w = 1.0 - _s5(u)
    w1 = -_ds5(u) / (hi - lo)
    w2 = -_d2s5(u) / (hi - lo) ** 2
    return w, w1, w2


@dataclass(frozen=True)
class CutoffFunction:
    """The localizing cutoff Psi(t, x, v) = Psi1(t, x/R, v/R).

    Psi1 = phi1(t) phi2(x - t v) phi3(v) with

    * phi1: 0 before t = -1 - eta^2, slope exactly 1 on
      [-1 - eta^2, -1 - T], then a C^2 quintic blend into the plateau 1 on
      [-1, 0].  The transport derivative of Psi1 is phi1' phi2 phi3 >= 0
      because x - t v is constant along free transport.
    * phi2: radial, 1 on B_3, 0 outside B_4.
    * phi3: radial, 1 on B_1, 0 outside B_2.

    Consequences: Psi1 is [0,1]-valued, supported in
    [-1 - eta^2, 0] x B_8 x B_2, equal to 1 on (-1, 0] x B_1 x B_1, and its
    transport derivative is >= 1 on (-1 - eta^2, -1 - T] x B_1 x B_1.
    """

    eta: float
    T: float
    R: float

    # ---- phi1 ------------------------------------------------------------
    def _phi1_coeffs(self):
        a = self.eta**2 - self.T  # ramp value reached at t = -1 - T
        s0 = self.T / (1.0 - a)  # slope of the blend variable at u = 0
        return a, s0

    def _phi1(self, t):
        t = np.asarray(t, dtype=float)
        a, s0 = self._phi1_coeffs()
        u = np.clip((t + 1.0 + self.T) / self.T, 0.0, 1.0)
        blend = (s0 * u + (10.0 - 6.0 * s0) * u**3
                 + (8.0 * s0 - 15.0) * u**4 + (6.0 - 3.0 * s0) * u**5)
        out = np.where(
            t <= -1.0 - self.eta**2,
            0.0,
            np.where(
                t <= -1.0 - self.T,
                t + 1.0 + self.eta**2,
                np.where(t <= -1.0, a + (1.0 - a) * blend, 1.0),
            ),
        )
        return np.clip(out, 0.0, 1.0)

    def _phi1p(self, t):
        t = np.asarray(t, dtype=float)
        a, s0 = self._phi1_coeffs()
        u = np.clip((t + 1.0 + self.T) / self.T, 0.0, 1.0)
        dblend = (s0 + 3.0 * (10.0 - 6.0 * s0) * u**2
                  + 4.0 * (8.0 * s0 - 15.0) * u**3 + 5.0 * (6.0 - 3.0 * s0) * u**4)
        out = np.where(
            t <= -1.0 - self.eta**2,
            0.0,
            np.where(
                t <= -1.0 - self.T,
                1.0,
                np.where(t <= -1.0, (1.0 - a) * dblend / self.T, 0.0),
            ),
        )
        return np.clip(out, 0.0, None)

    # ---- spatial profiles --------------------------------------------------
    @staticmethod
    def _norm(w):
        return np.sqrt(np.sum(np.asarray(w, dtype=float) ** 2, axis=-1))

    def psi1(self, t, x, v):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        xi = x - t[..., None] * v
        w2, _, _ = _radial_profile(self._norm(xi), 3.0, 4.0)
        w3, _, _ = _radial_profile(self._norm(v), 1.0, 2.0)
        return self._phi1(t) * w2 * w3

    def psi(self, t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.psi1(t, x / self.R, v / self.R)

    def transport_psi1(self, t, x, v):
        """(d/dt + v . grad_x) Psi1 = phi1'(t) phi2(x - t v) phi3(v)."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        xi = x - t[..., None] * v
        w2, _, _ = _radial_profile(self._norm(xi), 3.0, 4.0)
        w3, _, _ = _radial_profile(self._norm(v), 1.0, 2.0)
        return self._phi1p(t) * w2 * w3

    def transport_psi(self, t, x, v):
        """Transport derivative of the scaled cutoff.

        The scaled slant coordinate x/R - t (v/R) is itself constant along
        free transport, so this is just transport_psi1 at scaled arguments.
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.transport_psi1(t, x / self.R, v / self.R)

    def grad_v_psi1(self, t, x, v):
        """Velocity gradient of Psi1, closed form, shape (..., d)."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        xi = x - t[..., None] * v
        r2 = self._norm(xi)
        r3 = self._norm(v)
        w2, w2p, _ = _radial_profile(r2, 3.0, 4.0)
        w3, w3p, _ = _radial_profile(r3, 1.0, 2.0)
        safe2 = np.where(r2 > 0.0, r2, 1.0)
        safe3 = np.where(r3 > 0.0, r3, 1.0)
        term2 = (-t[..., None]) * (w2p / safe2)[..., None] * xi * w3[..., None]
        term3 = (w3p / safe3)[..., None] * v * w2[..., None]
        return self._phi1(t)[..., None] * (term2 + term3)

    def grad_v_psi(self, t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.grad_v_psi1(t, x / self.R, v / self.R) / self.R

    def laplacian_v_psi1(self, t, x, v):
        """Velocity Laplacian of Psi1, closed form."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        d = x.shape[-1]
        xi = x - t[..., None] * v
        r2 = self._norm(xi)
        r3 = self._norm(v)
        w2, w2p, w2pp = _radial_profile(r2, 3.0, 4.0)
        w3, w3p, w3pp = _radial_profile(r3, 1.0, 2.0)
        safe2 = np.where(r2 > 0.0, r2, 1.0)
        safe3 = np.where(r3 > 0.0, r3, 1.0)
        lap2 = w2pp + (d - 1) * w2p / safe2
        lap3 = w3pp + (d - 1) * w3p / safe3
        dot = np.sum(xi * v, axis=-1)
        cross = w2p * w3p * dot / (safe2 * safe3)
        return self._phi1(t) * (t * t * lap2 * w3 - 2.0 * t * cross + w2 * lap3)

    def laplacian_v_psi(self, t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.laplacian_v_psi1(t, x / self.R, v / self.R) / self.R**2

    def lk_psi(self, t, x, v):
        """L_K Psi = transport derivative minus velocity Laplacian."""
        return self.transport_psi(t, x, v) - self.laplacian_v_psi(t, x, v)

    def exterior_box(self, d: int) -> BoxCylinder:
        """The support box of the scaled cutoff: (-1-eta^2, 0] x B_8R x B_2R."""
        return BoxCylinder(
            t_min=-1.0 - self.eta**2,
            t_max=0.0,
            x_center=np.zeros(d),
            rx=8.0 * self.R,
            v_center=np.zeros(d),
            rv=2.0 * self.R,
        )


def build_cutoff(eta: float, T: float, R: float) -> CutoffFunction:
    """Validated constructor: eta in (0,1], T in (0, eta^2), R >= 1."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not 0.0 < T < eta**2:
        raise ValueError(f"T must lie in (0, eta^2), got {T}")
    if R < 1.0:
        raise ValueError(f"R must be >= 1, got {R}")
    return CutoffFunction(eta=float(eta), T=float(T), R=float(R))


# ---------------------------------------------------------------------------
# localization pipeline
# ---------------------------------------------------------------------------


def _q_zero_box(eta: float, d: int) -> BoxCylinder:
    return BoxCylinder(
        t_min=-1.0 - eta**2,
        t_max=-1.0,
        x_center=np.zeros(d),
        rx=eta**3,
        v_center=np.zeros(d),
        rv=eta,
    )


def _log_kernel_min(eta: float, T: float, d: int, n: int = 5) -> float:
    """Min over Q_1 x (Q_zero with t0 <= -1 - T) of the log kernel.

    Both regions are sampled on small tensor grids including their corners.
    The true minimum is astronomically small for moderate eta (the
    quadratic form scales like 1 / s^3 near the minimal elapsed time), so
    only the log is meaningful in double precision.
    """
    lin = np.linspace(-1.0, 1.0, n)
    t1 = np.linspace(-1.0 + 1e-9, 0.0, n)
    x1 = lin  # Q_1 box coordinates, radius 1
    t0 = np.linspace(-1.0 - eta**2, -1.0 - T, n)
    x0 = lin * eta**3
    v0 = lin * eta
    best = np.inf
    axes0 = [t0] + [x0] * d + [v0] * d
    grids0 = np.meshgrid(*axes0, indexing="ij")
    pts0 = np.stack([g.ravel() for g in grids0], axis=-1)
    axes1 = [t1] + [x1] * d + [x1] * d
    grids1 = np.meshgrid(*axes1, indexing="ij")
    pts1 = np.stack([g.ravel() for g in grids1], axis=-1)
    for row in pts0:
        z0 = PhasePoint(row[0], row[1 : 1 + d], row[1 + d :])
        s = pts1[:, 0] - z0.t
        keep = s > 0.0
        if not keep.any():
            continue
        logs = log_kernel_eval(
            pts1[keep, 0], pts1[keep, 1 : 1 + d], pts1[keep, 1 + d :], z0
        )
        best = min(best, float(np.min(logs)))
    return best


def theta0_parameters(eta: float, d: int = 1) -> dict:
    """The pair (delta0, theta0) behind the localization bound.

    delta0 = (1/8) m |Q_zero| with m the kernel minimum over
    Q_1 x (Q_zero cut at t <= -1 - T); theta0 = 1 - delta0 / 2.  The log of
    m is returned as well since m itself underflows for moderate eta.
    """
    T = eta**2 / 8.0
    log_m = _log_kernel_min(eta, T, d)
    qz_vol = eta**2 * ball_volume(d, eta**3) * ball_volume(d, eta)
    delta0 = float(np.exp(log_m) * qz_vol / 8.0)
    return {
        "eta": eta,
        "T": T,
        "log_kernel_min": log_m,
        "q_zero_volume": qz_vol,
        "delta0": delta0,
        "theta0": 1.0 - delta0 / 2.0,
    }


def localization_bound(
    f: ScalarField,
    eta: float,
    R: float = 1.0,
    alpha0: float = 0.25,
    boundary_tol: float = 1.0,
) -> dict:
    """Bound the localized evolution h of a [0, sup f]-valued field.

    Given f >= 0 on a grid covering the support box of the scaled cutoff,
    solves the three Cauchy problems

        L_K h   = f * L_K Psi,
        L_K P_R = (sup f - f) * (transport derivative of Psi)   (>= 0),
        L_K E_R = (sup f - f) * (velocity Laplacian of Psi),

    all from zero data at the opening time, so that
    h = Psi * sup f - P_R + E_R up to scheme error.  Requires the zero set
    of f to fill at least the fraction alpha0 of Q_zero =
    (-1-eta^2, -1] x B_{eta^3} x B_eta (measured by cell counting on f's
    grid).  Returns the bound parameters

        delta0 = (1/8) m |Q_zero|,   theta0 = 1 - delta0 / 2,

    with m the kernel minimum over Q_1 x (Q_zero cut at t <= -1 - T); m is
    reported in log space and generally underflows to zero in double
    precision, in which case theta0 = 1 exactly and the verified inequality
    degenerates to sup h <= sup f on Q_1.
    """
    grid = f.grid
    d = grid.domain.d
    if np.any(f.values < 0.0):
        raise ValueError("localization_bound requires f >= 0")
    T = eta**2 / 8.0
    cutoff = build_cutoff(eta, T, R)
    ext = cutoff.exterior_box(d)
    box = grid.domain
    tol = 1e-9
    if (box.t_min > ext.t_min + tol or box.t_max < ext.t_max - tol
            or np.any(box.rx < ext.rx - tol) or np.any(box.rv < ext.rv - tol)):
        raise ValueError("grid must cover the cutoff support box")

    # zero-set hypothesis on Q_zero, cell-counted on f's own grid
    qz = _q_zero_box(eta, d)
    mask_qz = grid.region_mask(qz)
    n_qz = int(np.count_nonzero(mask_qz))
    if n_qz == 0:
        raise ValueError("grid too coarse: no cells inside Q_zero")
    zero_frac = float(np.count_nonzero(f.values[mask_qz] == 0.0)) / n_qz
    if zero_frac < alpha0:
        raise ValueError(
            f"zero-set hypothesis fails: fraction {zero_frac:.3f} < {alpha0}"
        )

    sup_f = float(np.max(f.values))
    q1 = BoxCylinder(-1.0, 0.0, np.zeros(d), 1.0, np.zeros(d), 1.0)
    mask_q1 = grid.region_mask(q1)
    log_m = _log_kernel_min(eta, T, d)
    qz_vol = eta**2 * ball_volume(d, eta**3) * ball_volume(d, eta)
    delta0 = float(np.exp(log_m) * qz_vol / 8.0)
    theta0 = 1.0 - delta0 / 2.0

    if sup_f == 0.0:
        zero = ScalarField(grid, np.zeros(grid.shape))
        return {
            "theta0": theta0, "delta0": delta0, "log_kernel_min": log_m,
            "R": R, "eta": eta, "T": T, "sup_f": 0.0,
            "zero_fraction": zero_frac,
            "h": zero, "P_R": zero, "E_R": zero,
            "sup_h_Q1": 0.0, "min_P_Q1": 0.0, "sup_E_Q1": 0.0,
            "sup_E_abs": 0.0, "c_e": 0.0,
            "passed_h": True, "passed_P": True, "passed_E": True,
            "decomposition_error": 0.0,
        }

    T_, X, V = grid.coords
    psi = cutoff.psi(T_, X, V)
    transport = cutoff.transport_psi(T_, X, V)
    lap = cutoff.laplacian_v_psi(T_, X, V)
    gap = sup_f - f.values

    h = solve_cauchy(ScalarField(grid, f.values * (transport - lap)),
                     boundary_tol=boundary_tol)
    p_r = solve_cauchy(ScalarField(grid, gap * transport),
                       boundary_tol=boundary_tol)
    e_r = solve_cauchy(ScalarField(grid, gap * lap),
                       boundary_tol=boundary_tol)

    # closed-form constant for the E_R claim: the maximum principle gives
    # |E_R| <= (time span) * sup|rhs| and sup|rhs| <= sup f * sup|Lap_v Psi1| / R^2
    lap1 = cutoff.laplacian_v_psi1(T_, X / R, V / R)
    c_e = (1.0 + eta**2) * sup_f * float(np.max(np.abs(lap1)))

    sup_h_q1 = float(np.max(h.values[mask_q1]))
    min_p_q1 = float(np.min(p_r.values[mask_q1]))
    sup_e_q1 = float(np.max(e_r.values[mask_q1]))
    sup_e_abs = float(np.max(np.abs(e_r.values)))
    recon = psi * sup_f - p_r.values + e_r.values
    decomposition_error = float(np.max(np.abs(h.values - recon)))

    return {
        "theta0": theta0, "delta0": delta0, "log_kernel_min": log_m,
        "R": R, "eta": eta, "T": T, "sup_f": sup_f,
        "zero_fraction": zero_frac,
        "h": h, "P_R": p_r, "E_R": e_r,
        "sup_h_Q1": sup_h_q1, "min_P_Q1": min_p_q1,
        "sup_E_Q1": sup_e_q1, "sup_E_abs": sup_e_abs, "c_e": c_e,
        "passed_h": sup_h_q1 <= theta0 * sup_f + 1e-12,
        "passed_P": min_p_q1 >= delta0 - 1e-12,
        "passed_E": sup_e_abs <= c_e / R**2 + 1e-9,
        "decomposition_error": decomposition_error,
    }
