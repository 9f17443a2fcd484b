"""Finite-volume/semi-Lagrangian solver for the kinetic equation

    (d/dt + v . grad_x) f = div_v (A grad_v f) + B . grad_v f + S

on box-shaped space-time-velocity domains with rough (merely measurable,
uniformly elliptic) coefficients.

Scheme: operator splitting, first order in time.

* x-transport: exact-shift semi-Lagrangian per v-line (velocity is a grid
  coordinate, so the foot of the characteristic is a constant shift of the
  x-line), linear interpolation -- monotone.
* v-diffusion: implicit backward Euler on the divergence form, tridiagonal
  per line at d = 1 (dimension-split sweeps at d = 2); face coefficients by
  harmonic averaging of adjacent cell values, which gives the correct
  homogenization behavior for discontinuous A.
* drift B . grad_v: explicit upwind.

The splitting is monotone, so nonnegative data, source, and boundary values
produce a nonnegative solution.  With periodic x and zero-flux v boundaries
the divergence-form discretization conserves mass exactly (up to roundoff).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import BoxCylinder, CoefficientField, Grid, ScalarField
from .report import VerificationReport

__all__ = [
    "CFLError",
    "NumericalAbort",
    "SolverConfig",
    "solve",
    "Bump",
    "default_test_set",
    "weak_residual",
    "local_bound_check",
]


class CFLError(ValueError):
    """Time step too large for the explicit parts of the splitting."""


class NumericalAbort(RuntimeError):
    """Non-finite values detected during time stepping."""


_BC_X = ("dirichlet", "copy-out", "periodic")
_BC_V = ("dirichlet", "copy-out", "zero-flux")


@dataclass
class SolverConfig:
    """Everything one time integration needs.

    ``initial`` is the slice at the opening time of the grid's window (the
    grid itself stores only the n_t later slices).  ``boundary_value`` is a
    constant or, at d = 1, a callable (t, x, v) -> value used for Dirichlet
    inflow and ghost cells.
    """

    grid: Grid
    coeffs: CoefficientField
    initial: np.ndarray
    bc_x: str = "dirichlet"
    bc_v: str = "dirichlet"
    boundary_value: object = 0.0
    implicit_diffusion: bool = True
    transport_interp: str = "linear"
    cfl_safety: float = 0.9

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        if self.initial.shape != self.grid.shape[1:]:
            raise ValueError(
                f"initial slice shape {self.initial.shape} does not match "
                f"grid spatial shape {self.grid.shape[1:]}"
            )
        if self.bc_x not in _BC_X:
            raise ValueError(f"bc_x must be one of {_BC_X}")
        if self.bc_v not in _BC_V:
            raise ValueError(f"bc_v must be one of {_BC_V}")
        if self.transport_interp not in ("linear", "pchip"):
            raise ValueError("transport_interp must be 'linear' or 'pchip'")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        self.coeffs.validate()
        self._check_cfl()

    def _check_cfl(self):
        g = self.grid
        d = g.domain.d
        vmax = float(np.max(np.abs(g.v_axis)))
        limits = {}
        if vmax > 0.0:
            limits["transport"] = g.dx / vmax
        if not self.implicit_diffusion:
            limits["diffusion"] = g.dv**2 / (2.0 * d * self.coeffs.Lam)
        bmax = float(np.max(np.abs(self.coeffs.B)))
        if bmax > 0.0:
            limits["drift"] = g.dv / bmax
        for name, lim in limits.items():
            if g.dt > self.cfl_safety * lim + 1e-15:
                raise CFLError(
                    f"dt = {g.dt:.3e} exceeds {self.cfl_safety} * {lim:.3e} "
                    f"({name} limit)"
                )


def _boundary_scalar(bv) -> float | None:
    return float(bv) if not callable(bv) else None


def _shift_linear(block, cells, bc, fill):
    """Per-column constant shift of axis 0 with linear interpolation.

    block: (n, m, r); cells: shift in cell units per column (m,).  Linear
    interpolation makes the step a convex combination of node values --
    monotone and linear in the data.
    """
    n, m = block.shape[0], block.shape[1]
    k = np.floor(cells).astype(int)
    frac = cells - k
    base = np.arange(n)[:, None]
    idx0 = base - k[None, :]
    idx1 = idx0 - 1
    col = np.arange(m)[None, :]
    if bc == "periodic":
        g0 = block[idx0 % n, col]
        g1 = block[idx1 % n, col]
    else:
        g0 = block[np.clip(idx0, 0, n - 1), col]
        g1 = block[np.clip(idx1, 0, n - 1), col]
        if bc == "dirichlet":
            g0 = np.where(((idx0 < 0) | (idx0 >= n))[..., None], fill, g0)
            g1 = np.where(((idx1 < 0) | (idx1 >= n))[..., None], fill, g1)
    return (1.0 - frac)[None, :, None] * g0 + frac[None, :, None] * g1


def _pchip_slopes(slopes):
    """Shape-preserving node derivatives (harmonic mean of adjacent slopes)."""
    left, right = slopes[:-1], slopes[1:]
    prod = left * right
    den = left + right
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(prod > 0.0, 2.0 * prod / np.where(den != 0.0, den, 1.0), 0.0)
    return d


def _shift_pchip(block, cells, bc, fill):
    """Per-column constant shift with monotone cubic (pchip) interpolation.

    Derivative limiting keeps the interpolant inside the local data range
    (so positivity is preserved) while the error away from extrema is third
    order in the spacing.  Unlike linear interpolation this map is not
    linear in the data.
    """
    n, m = block.shape[0], block.shape[1]
    col = np.arange(m)[None, :]
    base = np.arange(n)[:, None]
    if bc == "periodic":
        p = (base - cells[None, :]) % n
        kf = np.floor(p).astype(int)
        u = (p - kf)[..., None]
        slopes = np.roll(block, -1, axis=0) - block  # slope on [i, i+1]
        d = _pchip_slopes(
            np.concatenate([slopes[-1:], slopes], axis=0)
        )  # derivative at node i from slopes [i-1, i]
        kr = (kf + 1) % n
        y_l, y_r = block[kf, col], block[kr, col]
        d_l, d_r = d[kf, col], d[kr, col]
    else:
        G = 4  # ghost layers; deep ghosts are constant, so their slopes vanish
        if bc == "copy-out":
            lo = np.repeat(block[:1], G, axis=0)
            hi = np.repeat(block[-1:], G, axis=0)
        else:
            pad_shape = (G,) + block.shape[1:]
            lo = np.broadcast_to(fill, pad_shape).astype(float)
            hi = lo
        ye = np.concatenate([lo, block, hi], axis=0)
        slopes = ye[1:] - ye[:-1]
        d = np.concatenate(
            [slopes[:1], _pchip_slopes(slopes), slopes[-1:]], axis=0
        )
        p = np.clip(base - cells[None, :], -(G - 2), n + G - 3)
        kf = np.floor(p).astype(int)
        u = (p - kf)[..., None]
        e = kf + G
        y_l, y_r = ye[e, col], ye[e + 1, col]
        d_l, d_r = d[e, col], d[e + 1, col]
    u2, u3 = u * u, u * u * u
    return (
        y_l * (2.0 * u3 - 3.0 * u2 + 1.0)
        + d_l * (u3 - 2.0 * u2 + u)
        + y_r * (-2.0 * u3 + 3.0 * u2)
        + d_r * (u3 - u2)
    )


def _advect(f, grid, dt, bc, fill, interp="linear"):
    """Shift each x-axis by dt * (matching v coordinate)."""
    d = grid.domain.d
    shifter = _shift_linear if interp == "linear" else _shift_pchip
    out = f
    for a in range(d):
        # move x_a to axis 0 and v_a to axis 1, flatten the rest
        work = np.moveaxis(out, (a, d + a), (0, 1))
        rest = work.shape[2:]
        nx, nv = work.shape[0], work.shape[1]
        block = work.reshape(nx, nv, -1)
        cells = dt * grid.v_axis[a] / grid.dx  # shift in cell units, per v
        shifted = shifter(block, cells, bc, fill)
        out = np.moveaxis(shifted.reshape(nx, nv, *rest), (0, 1), (a, d + a))
    return out


def _thomas(lower, diag, upper, rhs):
    """Batched tridiagonal solve; arrays shaped (..., n), solved along -1."""
    n = rhs.shape[-1]
    cp = np.empty_like(rhs)
    dp = np.empty_like(rhs)
    cp[..., 0] = upper[..., 0] / diag[..., 0]
    dp[..., 0] = rhs[..., 0] / diag[..., 0]
    for i in range(1, n):
        denom = diag[..., i] - lower[..., i] * cp[..., i - 1]
        cp[..., i] = upper[..., i] / denom
        dp[..., i] = (rhs[..., i] - lower[..., i] * dp[..., i - 1]) / denom
    x = np.empty_like(rhs)
    x[..., -1] = dp[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = dp[..., i] - cp[..., i] * x[..., i + 1]
    return x


def _harmonic(a, b):
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0.0, 2.0 * a * b / np.where(s > 0, s, 1.0), 0.0)
    return out


def _diffuse_axis(f, a_diag, dt, dv, bc, ghost):
    """Implicit (I - dt * d/dv (a d/dv .)) solve along the last axis.

    ``f`` and ``a_diag`` are shaped (..., n_v); ``ghost`` is the Dirichlet
    value array broadcastable to the boundary slices.
    """
    n = f.shape[-1]
    face = _harmonic(a_diag[..., :-1], a_diag[..., 1:])  # interior faces
    r = dt / dv**2
    lower = np.zeros_like(f)
    upper = np.zeros_like(f)
    diag = np.ones_like(f)
    lower[..., 1:] = -r * face
    upper[..., :-1] = -r * face
    diag[..., 1:] += r * face
    diag[..., :-1] += r * face
    rhs = f.copy()
    if bc == "dirichlet":
        # ghost cell one dv beyond each edge holds the boundary value
        diag[..., 0] += r * a_diag[..., 0]
        diag[..., -1] += r * a_diag[..., -1]
        rhs[..., 0] += r * a_diag[..., 0] * np.asarray(ghost[0])
        rhs[..., -1] += r * a_diag[..., -1] * np.asarray(ghost[1])
    # zero-flux / copy-out: boundary face flux vanishes, nothing to add
    return _thomas(lower, diag, upper, rhs)


def _upwind_drift(f, B, dt, dv, bc, fill):
    """Explicit upwind step for + B . grad_v f along every v-axis."""
    d = B.shape[-1]
    ndim = f.ndim
    out = f.copy()
    for j in range(d):
        axis = ndim - d + j
        w = np.moveaxis(f, axis, -1)
        b = np.moveaxis(B[..., j], axis, -1)
        fwd = np.empty_like(w)
        bwd = np.empty_like(w)
        fwd[..., :-1] = w[..., 1:] - w[..., :-1]
        bwd[..., 1:] = w[..., 1:] - w[..., :-1]
        if bc == "dirichlet":
            fwd[..., -1] = fill - w[..., -1]
            bwd[..., 0] = w[..., 0] - fill
        else:  # zero-flux / copy-out: constant extension
            fwd[..., -1] = 0.0
            bwd[..., 0] = 0.0
        upd = np.where(b > 0.0, b * fwd, b * bwd) * (dt / dv)
        out += np.moveaxis(upd, -1, axis)
    return out


def _cross_diffusion(f, A, d, dt, dv):
    """Explicit centered update for the off-diagonal part of A (d >= 2)."""
    out = np.zeros_like(f)
    ndim = f.ndim
    for j in range(d):
        for k in range(d):
            if j == k:
                continue
            ax_j, ax_k = ndim - d + j, ndim - d + k
            flux = A[..., j, k] * np.gradient(f, dv, axis=ax_k)
            out += np.gradient(flux, dv, axis=ax_j)
    return f + dt * out


def solve(config: SolverConfig) -> ScalarField:
    """Integrate the equation over the grid's window; return the trajectory.

    The returned field holds f on every stored time node (the initial slice
    is config.initial and is not part of the grid).  Raises NumericalAbort
    with step diagnostics if non-finite values appear.
    """
    g = config.grid
    d = g.domain.d
    dt, dv = g.dt, g.dv
    A, B, S = config.coeffs.A, config.coeffs.B, config.coeffs.S
    bval = config.boundary_value
    scalar_b = _boundary_scalar(bval)
    if scalar_b is None and d != 1:
        raise NotImplementedError("callable boundary values require d = 1")
    has_drift = bool(np.any(B != 0.0))
    has_source = S is not None and bool(np.any(S != 0.0))
    if not config.implicit_diffusion:
        raise NotImplementedError("only the implicit-diffusion mode is built")

    traj = np.empty(g.shape)
    f = config.initial.copy()
    for n in range(g.n_t):
        t_new = g.t_nodes[n]
        if scalar_b is not None:
            fill_x = fill_v = scalar_b
            ghost = (scalar_b, scalar_b)
        else:
            # d = 1: evaluate the extension on the inflow faces / ghost cells
            xb = g.domain.x_center[0] + g.domain.rx
            xa = g.domain.x_center[0] - g.domain.rx
            vv = g.v_axis[0]
            fill_x = np.where(vv > 0, bval(t_new, xa, vv), bval(t_new, xb, vv))
            fill_x = fill_x[None, :, None]
            vlo = g.domain.v_center[0] - g.domain.rv - 0.5 * dv
            vhi = g.domain.v_center[0] + g.domain.rv + 0.5 * dv
            xx = g.x_axis[0]
            ghost = (bval(t_new, xx, vlo), bval(t_new, xx, vhi))
            fill_v = None
        f = _advect(f, g, dt, config.bc_x, fill_x, config.transport_interp)
        if has_drift:
            fv = scalar_b if scalar_b is not None else 0.0
            f = _upwind_drift(f, B[n], dt, dv, config.bc_v, fv)
        if d > 1:
            f = _cross_diffusion(f, A[n], d, dt, dv)
        for j in range(d):
            axis = f.ndim - d + j
            w = np.moveaxis(f, axis, -1)
            a_jj = np.moveaxis(A[n][..., j, j], axis, -1)
            if config.bc_v == "dirichlet":
                gpair = ghost if scalar_b is None else (scalar_b, scalar_b)
            else:
                gpair = (0.0, 0.0)
            w = _diffuse_axis(w, a_jj, dt, dv, config.bc_v, gpair)
            f = np.moveaxis(w, -1, axis)
        if has_source:
            f = f + dt * S[n]
        if not np.all(np.isfinite(f)):
            bad = int(np.count_nonzero(~np.isfinite(f)))
            raise NumericalAbort(
                f"non-finite values at step {n + 1}/{g.n_t} (t = {t_new:.6g}): "
                f"{bad} bad nodes"
            )
        traj[n] = f
    return ScalarField(g, traj)


# ---------------------------------------------------------------------------
# weak-form residuals
# ---------------------------------------------------------------------------


class Bump:
    """C^2 compactly supported test function, separable in t, x, v.

    Each factor is b(u) = (1 - u^2)^3 on |u| < 1 (zero outside), centered
    and scaled per coordinate.  Derivatives are analytic.
    """

    def __init__(self, t_center, t_width, x_center, x_width, v_center, v_width):
        self.t_center, self.t_width = float(t_center), float(t_width)
        self.x_center = np.atleast_1d(np.asarray(x_center, dtype=float))
        self.v_center = np.atleast_1d(np.asarray(v_center, dtype=float))
        self.x_width, self.v_width = float(x_width), float(v_width)

    @staticmethod
    def _b(u):
        core = np.clip(1.0 - u * u, 0.0, None)
        return core**3

    @staticmethod
    def _db(u):
        core = np.clip(1.0 - u * u, 0.0, None)
        return -6.0 * u * core**2

    def _factors(self, T, X, V):
        ut = (T - self.t_center) / self.t_width
        ux = (X - self.x_center) / self.x_width
        uv = (V - self.v_center) / self.v_width
        return ut, ux, uv

    def value(self, T, X, V):
        ut, ux, uv = self._factors(T, X, V)
        return (
            self._b(ut)
            * np.prod(self._b(ux), axis=-1)
            * np.prod(self._b(uv), axis=-1)
        )

    def dt(self, T, X, V):
        ut, ux, uv = self._factors(T, X, V)
        return (
            self._db(ut) / self.t_width
            * np.prod(self._b(ux), axis=-1)
            * np.prod(self._b(uv), axis=-1)
        )

    def _grad(self, u_all, width, others):
        d = u_all.shape[-1]
        out = np.empty(u_all.shape)
        for k in range(d):
            rest = np.prod(
                np.delete(self._b(u_all), k, axis=-1), axis=-1
            ) if d > 1 else 1.0
            out[..., k] = self._db(u_all[..., k]) / width * rest * others
        return out

    def grad_x(self, T, X, V):
        ut, ux, uv = self._factors(T, X, V)
        others = self._b(ut) * np.prod(self._b(uv), axis=-1)
        return self._grad(ux, self.x_width, others)

    def grad_v(self, T, X, V):
        ut, ux, uv = self._factors(T, X, V)
        others = self._b(ut) * np.prod(self._b(ux), axis=-1)
        return self._grad(uv, self.v_width, others)

    def support_inside(self, box: BoxCylinder) -> bool:
        if self.t_center - self.t_width < box.t_min:
            return False
        if self.t_center + self.t_width > box.t_max:
            return False
        ok_x = np.all(np.abs(self.x_center - box.x_center) + self.x_width < box.rx)
        ok_v = np.all(np.abs(self.v_center - box.v_center) + self.v_width < box.rv)
        return bool(ok_x and ok_v)


def default_test_set(grid: Grid, count: int = 5, seed: int = 0) -> list[Bump]:
    """Bumps with random centers, supports strictly inside the grid box."""
    rng = np.random.default_rng(seed)
    box = grid.domain
    d = box.d
    out = []
    t_width = 0.25 * (box.t_max - box.t_min)
    x_width, v_width = 0.4 * box.rx, 0.4 * box.rv
    for _ in range(count):
        tc = rng.uniform(box.t_min + 1.1 * t_width, box.t_max - 1.1 * t_width)
        xc = box.x_center + rng.uniform(-1, 1, d) * (box.rx - 1.1 * x_width)
        vc = box.v_center + rng.uniform(-1, 1, d) * (box.rv - 1.1 * v_width)
        out.append(Bump(tc, t_width, xc, x_width, vc, v_width))
    return out


def weak_residual(
    f: ScalarField,
    coeffs: CoefficientField,
    mode: str,
    test_set: list[Bump],
    tol: float | None = None,
) -> dict:
    """Quadrature of the weak form against each nonnegative test bump.

    For each phi the value of

        -int f (d_t + v.grad_x) phi + int A grad_v f . grad_v phi
        -int (B . grad_v f + S) phi

    is computed on the grid.  mode 'super' requires every value >= -tol,
    'sub' requires <= tol, 'solution' requires |value| <= tol.  When tol is
    None a first-order default (dt + dx + dv) * scale is used.
    """
    if mode not in ("solution", "super", "sub"):
        raise ValueError("mode must be solution|super|sub")
    g = f.grid
    d = g.domain.d
    T, X, V = g.coords
    dvol = g.cell_volume
    grad_f = np.stack(
        [np.gradient(f.values, g.dv, axis=1 + d + k) for k in range(d)], axis=-1
    )
    s_sup = float(np.max(np.abs(coeffs.S)))
    if tol is None:
        scale = max(float(np.max(np.abs(f.values))), s_sup, 1e-30)
        tol = 10.0 * scale * (g.dt + g.dx + g.dv)
    values = []
    for phi in test_set:
        if not phi.support_inside(g.domain):
            raise ValueError("test function support exits the domain")
        pv = phi.value(T, X, V)
        transport = phi.dt(T, X, V) + np.einsum("...k,...k->...", V, phi.grad_x(T, X, V))
        gv_phi = phi.grad_v(T, X, V)
        a_grad = np.einsum("...jk,...k->...j", coeffs.A, grad_f)
        drift = np.einsum("...k,...k->...", coeffs.B, grad_f)
        src = coeffs.S
        val = (
            -np.sum(f.values * transport)
            + np.sum(np.einsum("...k,...k->...", a_grad, gv_phi))
            - np.sum((drift + src) * pv)
        ) * dvol
        values.append(float(val))
    arr = np.array(values)
    if mode == "super":
        passed = bool(np.all(arr >= -tol))
    elif mode == "sub":
        passed = bool(np.all(arr <= tol))
    else:
        passed = bool(np.all(np.abs(arr) <= tol))
    return {
        "mode": mode,
        "values": values,
        "tol": tol,
        "max": float(arr.max()),
        "min": float(arr.min()),
        "passed": passed,
    }


def local_bound_check(
    f: ScalarField,
    q_int: BoxCylinder,
    q_ext: BoxCylinder,
    source_sup: float = 0.0,
) -> VerificationReport:
    """Interior sup bound for sub-solutions:

        sup over q_int of f  <=  C (L2 norm of f_+ on q_ext + sup|S| on q_ext)

    Requires q_int strictly inside q_ext in all three directions.  Returns
    the fitted C = lhs / rhs; stability across refinements is the caller's
    refinement study.
    """
    gaps = (
        q_int.t_min > q_ext.t_min,
        q_int.t_max <= q_ext.t_max,
        np.all(np.abs(q_int.x_center - q_ext.x_center) + q_int.rx < q_ext.rx),
        np.all(np.abs(q_int.v_center - q_ext.v_center) + q_int.rv < q_ext.rv),
    )
    if not all(gaps):
        raise ValueError("q_int must sit strictly inside q_ext")
    g = f.grid
    m_int = g.region_mask(q_int)
    m_ext = g.region_mask(q_ext)
    if not m_int.any() or not m_ext.any():
        raise ValueError("regions do not overlap the grid")
    lhs = float(np.max(f.values[m_int]))
    plus = np.clip(f.values[m_ext], 0.0, None)
    l2 = float(np.sqrt(np.sum(plus**2) * g.cell_volume))
    rhs = l2 + source_sup
    return VerificationReport(
        inequality="local-upper-bound",
        lhs=lhs,
        rhs=rhs,
        params={"source_sup": source_sup},
        passed=np.isfinite(lhs) and np.isfinite(rhs),
        details={"l2_plus": l2},
    )
