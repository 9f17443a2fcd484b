"""End-to-end verification experiments for the Harnack-type inequalities.

Every operation here follows the same pattern: check the hypotheses of the
inequality first (never evaluate a conclusion on a field that does not
qualify), then compute both sides by quadrature and return a
:class:`~kinfp.report.VerificationReport` with the fitted constant
lhs / rhs.

Quadrature strategy: the reference regions of the Harnack geometry are
extremely anisotropic (at omega = 1e-2 the past cylinder has x-radius
omega^3 = 1e-6), so no single global grid can resolve them.  Fields are
therefore treated as evaluators -- either analytic callables (kernel
mixtures are exact solutions) or interpolants of solver trajectories --
and every region gets its own local tensor grid, on which cell counting
reproduces box volumes to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .fields import (
    BoxCylinder,
    Grid,
    NegSobolevInput,
    ScalarField,
    h_minus1_norm,
)
from .fpsolver import Bump, SolverConfig, solve
from .geometry import (
    Cylinder,
    PhasePoint,
    pop_parameters,
    q_minus,
    q_pos,
    q_zero,
    stack_cylinders,
)
from .kolmogorov import (
    CutoffFunction,
    log_kernel_eval,
    solve_cauchy,
    theta0_parameters,
)
from .report import VerificationReport

__all__ = [
    "ExperimentEnsemble",
    "make_kernel_mixture",
    "as_evaluator",
    "sample_on_box",
    "verify_weak_poincare",
    "verify_local_poincare",
    "verify_expansion_of_positivity",
    "verify_minima_measure",
    "verify_pop_large_times",
    "verify_weak_harnack",
    "verify_harnack",
    "estimate_holder",
]


class HypothesisError(ValueError):
    """A named hypothesis of an inequality failed on the supplied field."""


# ---------------------------------------------------------------------------
# field evaluators and local quadrature
# ---------------------------------------------------------------------------


def as_evaluator(f):
    """Turn a field into a callable (T, X, V) -> values.

    Callables pass through; ScalarFields become linear interpolants of
    their grid values (clamped to the grid hull, so evaluation slightly
    outside the node hull reuses the nearest values).
    """
    if callable(f):
        return f
    if isinstance(f, ScalarField):
        g = f.grid
        axes = (g.t_nodes,) + tuple(g.x_axis) + tuple(g.v_axis)
        interp = RegularGridInterpolator(
            axes, f.values, method="linear", bounds_error=False, fill_value=None
        )
        lows = [a[0] for a in axes]
        highs = [a[-1] for a in axes]

        def evaluate(T, X, V):
            T = np.asarray(T, dtype=float)
            X = np.asarray(X, dtype=float)
            V = np.asarray(V, dtype=float)
            pts = np.concatenate(
                [T[..., None], X, V], axis=-1
            ).reshape(-1, 1 + 2 * g.d)
            pts = np.clip(pts, lows, highs)
            return interp(pts).reshape(T.shape)

        return evaluate
    raise TypeError(f"cannot evaluate object of type {type(f)!r}")


def sample_on_box(f, box: BoxCylinder, n=(16, 16, 16)) -> ScalarField:
    """Sample an evaluator on a fresh local grid over the box."""
    grid = Grid(box, *n)
    return grid.sample(as_evaluator(f))


def _box_stats(f, box: BoxCylinder, n=(16, 16, 16)):
    vals = sample_on_box(f, box, n).values
    return float(vals.min()), float(vals.max())


def _box_lp(f, box: BoxCylinder, p: float, n=(16, 16, 16)) -> float:
    fld = sample_on_box(f, box, n)
    return float(
        (np.sum(np.abs(fld.values) ** p) * fld.grid.cell_volume) ** (1.0 / p)
    )


def _cylinder_bounding_box(Q: Cylinder) -> BoxCylinder:
    z0, r = Q.center, Q.r
    speed = float(np.sqrt(np.sum(z0.v**2)))
    return BoxCylinder(
        t_min=z0.t - r**2,
        t_max=z0.t,
        x_center=z0.x,
        rx=r**3 + r**2 * speed + 1e-15,
        v_center=z0.v,
        rv=r,
    )


def _cylinder_fraction(f, Q: Cylinder, predicate, n=(16, 16, 16)) -> float:
    """Fraction of Q (by cell counting) where predicate(f) holds."""
    grid = Grid(_cylinder_bounding_box(Q), *n)
    T, X, V = grid.coords
    inside = Q.contains(T, X, V)
    if not inside.any():
        raise HypothesisError("local grid too coarse for the cylinder")
    vals = as_evaluator(f)(T, X, V)
    return float(np.count_nonzero(predicate(vals[inside]))) / int(
        np.count_nonzero(inside)
    )


def _cylinder_inf(f, Q: Cylinder, n=(16, 16, 16)) -> float:
    grid = Grid(_cylinder_bounding_box(Q), *n)
    T, X, V = grid.coords
    inside = Q.contains(T, X, V)
    vals = as_evaluator(f)(T, X, V)
    return float(vals[inside].min())


def _box_fraction(f, box: BoxCylinder, predicate, n=(16, 16, 16)) -> float:
    vals = sample_on_box(f, box, n).values
    return float(np.count_nonzero(predicate(vals))) / vals.size


def _q_one(d: int) -> BoxCylinder:
    return BoxCylinder(-1.0, 0.0, np.zeros(d), 1.0, np.zeros(d), 1.0)


def _q_plus_box(omega: float, d: int) -> BoxCylinder:
    return BoxCylinder(
        -(omega**2), 0.0, np.zeros(d), omega**3, np.zeros(d), omega
    )


# ---------------------------------------------------------------------------
# super-solution generators
# ---------------------------------------------------------------------------


def make_kernel_mixture(
    seed: int,
    d: int = 1,
    n_terms: int = 5,
    pole_time: tuple[float, float] = (-6.0, -1.6),
    pole_spread: float = 3.0,
    weight_range: tuple[float, float] = (0.2, 2.0),
    floor: float = 0.0,
):
    """Positive combination of kernel translates with poles in the far past.

    Each member is an exact nonnegative solution of the constant-coefficient
    equation on any domain with t > max pole time (hence a super-solution),
    strictly positive everywhere.  Returns (evaluator, metadata).
    """
    rng = np.random.default_rng(seed)
    poles = []
    weights = rng.uniform(*weight_range, size=n_terms)
    for _ in range(n_terms):
        poles.append(
            PhasePoint(
                rng.uniform(*pole_time),
                rng.uniform(-pole_spread, pole_spread, size=d),
                rng.uniform(-pole_spread, pole_spread, size=d),
            )
        )

    def evaluate(T, X, V):
        T = np.asarray(T, dtype=float)
        out = np.full(T.shape, float(floor))
        for w, z0 in zip(weights, poles):
            out = out + w * np.exp(log_kernel_eval(T, X, V, z0))
        return out

    meta = {
        "seed": seed,
        "weights": weights.tolist(),
        "poles": [(float(z.t), z.x.tolist(), z.v.tolist()) for z in poles],
        "floor": floor,
    }
    return evaluate, meta


@dataclass
class ExperimentEnsemble:
    """Reproducible family of nonnegative super-solution evaluators.

    kind 'kernel-mixture' yields analytic members; 'solver-rough' runs the
    rough-coefficient solver from positive initial data with S >= 0 and
    returns the trajectory field together with its coefficients.
    """

    kind: str = "kernel-mixture"
    count: int = 10
    seed: int = 0
    d: int = 1
    params: dict = field(default_factory=dict)

    def member_seed(self, i: int) -> int:
        return self.seed * 100003 + i

    def members(self):
        for i in range(self.count):
            yield self.member(i)

    def member(self, i: int):
        if self.kind == "kernel-mixture":
            f, meta = make_kernel_mixture(
                self.member_seed(i), d=self.d, **self.params
            )
            return f, meta
        if self.kind == "solver-rough":
            return self._solver_member(i)
        raise ValueError(f"unknown ensemble kind {self.kind!r}")

    def _solver_member(self, i: int):
        from .fields import make_coefficients

        seed = self.member_seed(i)
        rng = np.random.default_rng(seed)
        p = self.params
        radius = float(p.get("radius", 18.0))
        n = tuple(p.get("n", (64, 96, 48)))
        lam = float(p.get("lam", 1.0))
        Lam = float(p.get("Lam", 4.0))
        coeff_kind = p.get("coeff_kind", "checkerboard")
        box = BoxCylinder(
            -1.0, 0.0, np.zeros(self.d), radius, np.zeros(self.d), radius
        )
        grid = Grid(box, *n)
        coeffs = make_coefficients(
            grid, coeff_kind, lam, Lam, cell_size=p.get("cell_size", 0.5),
            seed=seed,
        )
        # positive Gaussian blob mixture as initial data
        X = grid.x_axis[0][:, None] * np.ones((1, grid.n_v))
        V = grid.v_axis[0][None, :] * np.ones((grid.n_x, 1))
        init = np.zeros_like(X)
        for _ in range(4):
            cx, cv = rng.uniform(-3, 3, size=2)
            w = rng.uniform(0.5, 2.0)
            s = rng.uniform(0.5, 2.0)
            init += w * np.exp(-((X - cx) ** 2 + (V - cv) ** 2) / (2 * s**2))
        f = solve(SolverConfig(grid, coeffs, init, bc_x="copy-out",
                               bc_v="copy-out"))
        meta = {"seed": seed, "coeff_kind": coeff_kind, "lam": lam,
                "Lam": Lam, "n": list(n), "radius": radius}
        return f, meta


# ---------------------------------------------------------------------------
# weak and local Poincare inequalities
# ---------------------------------------------------------------------------


def _grad_v_l2(f: ScalarField, region: BoxCylinder) -> float:
    g = f.grid
    mask = g.region_mask(region)
    total = np.zeros(f.values.shape)
    for k in range(g.d):
        total += np.gradient(f.values, g.dv, axis=1 + g.d + k) ** 2
    return float(np.sqrt(np.sum(total[mask]) * g.cell_volume))


def _check_transport_control(f: ScalarField, H: NegSobolevInput, tol: float):
    """Weak check of (d/dt + v.grad_x) f <= H against a few bumps."""
    g = f.grid
    T, X, V = g.coords
    dvol = g.cell_volume
    box = g.domain
    d = g.d
    widths = (0.2 * (box.t_max - box.t_min), 0.3 * box.rx, 0.3 * box.rv)
    centers = [
        (box.t_min + frac * (box.t_max - box.t_min), np.zeros(d), np.zeros(d))
        for frac in (0.3, 0.5, 0.7)
    ]
    for tc, xc, vc in centers:
        phi = Bump(tc, widths[0], xc, widths[1], vc, widths[2])
        lhs = -np.sum(
            f.values * (phi.dt(T, X, V)
                        + np.einsum("...k,...k->...", V, phi.grad_x(T, X, V)))
        ) * dvol
        rhs = np.sum(H.H0.values * phi.value(T, X, V)) * dvol
        rhs -= np.sum(
            np.einsum("...k,...k->...", H.H1.values, phi.grad_v(T, X, V))
        ) * dvol
        if lhs > rhs + tol:
            raise HypothesisError(
                f"transport-control hypothesis fails: {lhs:.3e} > {rhs:.3e}"
            )


def verify_weak_poincare(
    f: ScalarField,
    H: NegSobolevInput,
    eta: float,
    alpha0: float = 0.25,
    check_transport: bool = True,
) -> VerificationReport:
    """Mean-value gain from a vanishing set:

        || (f - theta0 M)_+ ||_{L2(Q_1)}
            <= C ( || grad_v f ||_{L2(Q_ext)} + || H ||_{L2 H^-1(Q_ext)} )

    with M = sup of f on Q_1 and theta0 from the localization analysis.
    Hypotheses checked: f >= 0; the zero set of f fills at least alpha0 of
    Q_zero; the transport derivative of f is dominated by H in weak form.
    """
    g = f.grid
    d = g.d
    if np.any(f.values < 0.0):
        raise HypothesisError("weak Poincare requires f >= 0")
    qz_mask = g.region_mask(q_zero(eta, d))
    if not qz_mask.any():
        raise HypothesisError("grid too coarse: no cells inside Q_zero")
    zero_frac = float(np.count_nonzero(f.values[qz_mask] == 0.0)) / int(
        np.count_nonzero(qz_mask)
    )
    if zero_frac < alpha0:
        raise HypothesisError(
            f"zero-set measure below {alpha0}: fraction {zero_frac:.3f}"
        )
    scale = max(float(np.max(f.values)), 1e-30)
    if check_transport:
        _check_transport_control(f, H, tol=10.0 * scale * (g.dt + g.dx + g.dv))

    pars = theta0_parameters(eta, d)
    q1 = _q_one(d)
    m1 = g.region_mask(q1)
    M = float(np.max(f.values[m1]))
    excess = np.clip(f.values - pars["theta0"] * M, 0.0, None)
    lhs = float(np.sqrt(np.sum(excess[m1] ** 2) * g.cell_volume))
    ext = g.domain
    rhs = _grad_v_l2(f, ext) + h_minus1_norm(H, ext)
    return VerificationReport(
        inequality="weak-poincare",
        lhs=lhs,
        rhs=rhs,
        params={"eta": eta, "alpha0": alpha0, "M": M,
                "theta0": pars["theta0"], "delta0": pars["delta0"],
                "zero_fraction": zero_frac},
        passed=np.isfinite(lhs) and np.isfinite(rhs),
    )


def verify_local_poincare(
    f: ScalarField,
    H: NegSobolevInput,
    cutoff: CutoffFunction,
    a: float = 0.25,
    check_transport: bool = True,
) -> VerificationReport:
    """Gain against the localized evolution h = solve of L_K h = f L_K Psi:

        || (f - h)_+ ||_{L2(Q_1)}
            <= C ( || grad_v f ||_{L2(Q_ext)} + || H ||_{L2 H^-1(Q_ext)} )

    with predicted constant growth c(a) (1 + sup|grad_v Psi|), recorded in
    the report details for the two-cutoff comparison.
    """
    g = f.grid
    d = g.d
    if np.any(f.values < 0.0):
        raise HypothesisError("local Poincare requires f >= 0")
    scale = max(float(np.max(f.values)), 1e-30)
    if check_transport:
        _check_transport_control(f, H, tol=10.0 * scale * (g.dt + g.dx + g.dv))
    T, X, V = g.coords
    rhs_field = ScalarField(g, f.values * cutoff.lk_psi(T, X, V))
    h = solve_cauchy(rhs_field, boundary_tol=1.0)
    m1 = g.region_mask(_q_one(d))
    gain = np.clip(f.values - h.values, 0.0, None)
    lhs = float(np.sqrt(np.sum(gain[m1] ** 2) * g.cell_volume))
    rhs = _grad_v_l2(f, g.domain) + h_minus1_norm(H, g.domain)
    grad_sup = float(
        np.max(np.sqrt(np.sum(cutoff.grad_v_psi(T, X, V) ** 2, axis=-1)))
    )
    return VerificationReport(
        inequality="local-poincare",
        lhs=lhs,
        rhs=rhs,
        params={"eta": cutoff.eta, "T": cutoff.T, "R": cutoff.R, "a": a},
        passed=np.isfinite(lhs) and np.isfinite(rhs),
        details={"grad_v_psi_sup": grad_sup,
                 "predicted_factor": 1.0 + grad_sup},
    )


# ---------------------------------------------------------------------------
# expansion of positivity and its descendants
# ---------------------------------------------------------------------------


def verify_expansion_of_positivity(
    f,
    theta: float,
    eps: float = 1e-2,
    eta0: float = 1e-2,
    source_sup: float = 0.0,
    n_local=(16, 24, 24),
) -> VerificationReport:
    """Measure-positivity in the past implies pointwise positivity now:

    if |{f >= 1} meet Q_pos| >= (1/2)|Q_pos| then inf over Q_1 of f >= l0.

    The report carries the empirical infimum (lhs) next to the formula
    value l0 = eps^((2+theta0)/3) - eps (rhs).  Since theta0 = 1 up to an
    underflowing correction, the formula value collapses to 0 in double
    precision and the meaningful check is strict positivity of the
    infimum; both numbers are recorded.
    """
    pars = pop_parameters(theta)
    if source_sup > eta0:
        raise HypothesisError(
            f"source bound fails: sup|S| = {source_sup} > eta0 = {eta0}"
        )
    d = f.grid.d if isinstance(f, ScalarField) else 1
    qp = q_pos(theta, d)
    frac = _box_fraction(f, qp, lambda v: v >= 1.0, n_local)
    if frac < 0.5:
        raise HypothesisError(
            f"positivity-measure hypothesis fails: fraction {frac:.3f} < 0.5"
        )
    ext = BoxCylinder(-1.0 - theta**2, 0.0, np.zeros(d), 9.0, np.zeros(d), 3.0)
    lo, _ = _box_stats(f, ext, n_local)
    if lo < 0.0:
        raise HypothesisError("expansion of positivity requires f >= 0")
    th = theta0_parameters(pars.eta, d)
    ell0_formula = eps ** ((2.0 + th["theta0"]) / 3.0) - eps
    inf_q1 = _box_stats(f, _q_one(d), n_local)[0]
    return VerificationReport(
        inequality="expansion-of-positivity",
        lhs=inf_q1,
        rhs=ell0_formula,
        params={"theta": theta, "iota": pars.iota, "eta": pars.eta,
                "time_lap": pars.time_lap, "eps": eps, "eta0": eta0,
                "theta0": th["theta0"], "positive_fraction": frac},
        passed=inf_q1 > 0.0 and inf_q1 >= ell0_formula,
        details={"ell0_empirical": inf_q1, "ell0_formula": ell0_formula},
    )


def verify_minima_measure(
    f,
    m: int,
    M: float,
    ell0_empirical: float | None = None,
    n_local=(16, 24, 24),
) -> VerificationReport:
    """Large values on half of Q_1 force f >= 1 on the stacked cylinder:

    if |{f >= M} meet Q_1| >= (1/2)|Q_1| then f >= 1 on
    Qbar_1^m = (0, m] x B_{m+2} x B_1, for M = 1 / l0 at aperture
    theta = m^{-1/2}.
    """
    if m < 3:
        raise HypothesisError("minima-measure requires m >= 3")
    d = f.grid.d if isinstance(f, ScalarField) else 1
    theta = m ** (-0.5)
    frac = _box_fraction(f, _q_one(d), lambda v: v >= M, n_local)
    if frac < 0.5:
        raise HypothesisError(
            f"minima-measure hypothesis fails: fraction {frac:.3f} < 0.5"
        )
    stacked = BoxCylinder(0.0, float(m), np.zeros(d), float(m + 2),
                          np.zeros(d), 1.0)
    inf_bar = _box_stats(f, stacked, n_local)[0]
    m_formula = None if ell0_empirical in (None, 0.0) else 1.0 / ell0_empirical
    return VerificationReport(
        inequality="minima-measure",
        lhs=inf_bar,
        rhs=1.0,
        params={"m": m, "theta": theta, "M": M,
                "value_fraction": frac, "M_formula": m_formula},
        passed=inf_bar >= 1.0 - 1e-12,
    )


def verify_pop_large_times(
    f,
    z0: PhasePoint,
    r: float,
    A: float,
    omega: float = 1e-2,
    ell0: float = 0.25,
    n_local=(16, 24, 24),
) -> VerificationReport:
    """Positivity on a small past cylinder propagates to Q_+:

    if |{f >= A} meet Q_r(z0)| >= (1/2)|Q_r(z0)| (with Q_r(z0) inside Q_-)
    then f >= A (r^2/4)^{p0} on Q_+, where p0 = -log_4 l0 for the
    positivity gain l0 of the aperture-1/2 pipeline (empirical input).
    """
    if not 0.0 < ell0 < 1.0:
        raise ValueError("ell0 must lie in (0, 1)")
    seq = stack_cylinders(z0, r, omega)  # validates Q_r(z0) inside Q_-
    frac = _cylinder_fraction(f, seq.base, lambda v: v >= A, n_local)
    if frac < 0.5:
        raise HypothesisError(
            f"large-times hypothesis fails: fraction {frac:.3f} < 0.5"
        )
    p0 = -math.log(ell0, 4.0)
    rhs = A * (r * r / 4.0) ** p0
    d = z0.d
    lhs = _box_stats(f, _q_plus_box(omega, d), n_local)[0]
    stack_infs = [_cylinder_inf(f, Q, n_local) for Q in seq.cylinders]
    return VerificationReport(
        inequality="expansion-of-positivity-large-times",
        lhs=lhs,
        rhs=rhs,
        params={"r": r, "A": A, "omega": omega, "ell0": ell0, "p0": p0,
                "N": seq.N, "value_fraction": frac},
        passed=lhs >= rhs and lhs > 0.0,
        details={"stack_infima": stack_infs},
    )


# ---------------------------------------------------------------------------
# weak Harnack, Harnack, Hoelder
# ---------------------------------------------------------------------------


def _framed(f, frame: PhasePoint | None):
    """Pull an evaluator back along z -> frame o z (a measure-preserving
    change of variables)."""
    ev = as_evaluator(f)
    if frame is None:
        return ev

    def moved(T, X, V):
        T = np.asarray(T, dtype=float)
        X = np.asarray(X, dtype=float)
        V = np.asarray(V, dtype=float)
        t2 = frame.t + T
        x2 = frame.x + X + T[..., None] * frame.v
        v2 = frame.v + V
        return ev(t2, x2, v2)

    return moved


def verify_weak_harnack(
    f,
    p: float = 1.0,
    omega: float = 1e-2,
    source_sup: float = 0.0,
    R0: float = 18.0,
    m: int = 3,
    d: int = 1,
    frame: PhasePoint | None = None,
    n_local=(16, 24, 24),
    refine: int = 0,
) -> VerificationReport:
    """Past Lp average controlled by the future infimum:

        ( int over Q_- of f^p )^{1/p} <= C ( inf over Q_+ of f + sup|S| ).

    The source reduction replaces f by f + sup|S| * t before both sides are
    measured.  Domain gates: R0 >= 18 R_{1/2} and
    R0 >= 9 R_{m^{-1/2}} m^{3/2} omega^3, with both localization radii
    realized as 1 in this implementation.  ``frame`` reruns the whole
    computation in a transported frame (the group action preserves
    measure, so the ratio is invariant up to quadrature error).
    """
    if p <= 0.0:
        raise ValueError("p must be positive")
    r_half = 1.0
    r_theta = 1.0
    if R0 < 18.0 * r_half:
        raise HypothesisError(f"domain gate fails: R0 = {R0} < 18")
    if R0 < 9.0 * r_theta * m**1.5 * omega**3:
        raise HypothesisError("domain gate fails: R0 too small for omega, m")
    base = _framed(f, frame)

    def reduced(T, X, V):
        return base(T, X, V) + source_sup * np.asarray(T, dtype=float)

    qm = q_minus(omega, d)
    qp = _q_plus_box(omega, d)

    def fit(nn):
        lhs = _box_lp(reduced, qm, p, nn)
        inf_plus = _box_stats(reduced, qp, nn)[0]
        rhs = inf_plus + source_sup
        return lhs, rhs

    lhs, rhs = fit(n_local)
    refinement = []
    nn = n_local
    for level in range(refine):
        nn = tuple(2 * k for k in nn)
        l2, r2 = fit(nn)
        refinement.append([level + 1, (l2 / r2) if r2 > 0 else None])
    return VerificationReport(
        inequality="weak-harnack",
        lhs=lhs,
        rhs=rhs,
        params={"p": p, "omega": omega, "source_sup": source_sup,
                "R0": R0, "m": m,
                "frame": None if frame is None
                else [frame.t, frame.x.tolist(), frame.v.tolist()]},
        passed=np.isfinite(lhs) and rhs > 0.0,
        refinement=refinement,
    )


def verify_harnack(
    f,
    omega: float = 1e-2,
    source_sup: float = 0.0,
    R0: float = 18.0,
    d: int = 1,
    n_local=(16, 24, 24),
) -> VerificationReport:
    """Full Harnack: sup over Q_- controlled by inf over Q_+ (plus source).

    Composes the interior upper bound (sup over Q_- against the L2 mass of
    an enlarged past cylinder) with the weak Harnack inequality at p = 2;
    the two fitted constants are recorded in the details and the headline
    numbers are the direct sup / inf pair.
    """
    if R0 < 18.0:
        raise HypothesisError(f"domain gate fails: R0 = {R0} < 18")
    base = as_evaluator(f)

    def reduced(T, X, V):
        return base(T, X, V) + source_sup * np.asarray(T, dtype=float)

    qm = q_minus(omega, d)
    sup_minus = _box_stats(reduced, qm, n_local)[1]
    inf_plus = _box_stats(reduced, _q_plus_box(omega, d), n_local)[0]
    lhs = sup_minus
    rhs = inf_plus + source_sup
    enlarged = BoxCylinder(
        -1.0 - 3.0 * omega**2, -1.0 + 2.0 * omega**2,
        np.zeros(d), 2.0 * omega**3, np.zeros(d), 2.0 * omega,
    )
    l2_mass = _box_lp(reduced, enlarged, 2.0, n_local)
    c_local = sup_minus / l2_mass if l2_mass > 0 else None
    wk = verify_weak_harnack(f, p=2.0, omega=omega, source_sup=source_sup,
                             R0=R0, d=d, n_local=n_local)
    return VerificationReport(
        inequality="harnack",
        lhs=lhs,
        rhs=rhs,
        params={"omega": omega, "source_sup": source_sup, "R0": R0},
        passed=np.isfinite(lhs) and rhs > 0.0,
        details={"local_bound_fitted": c_local,
                 "weak_harnack_fitted": wk.fitted_c},
    )


def estimate_holder(
    f,
    levels: int = 5,
    rbar: float = 2.0,
    r_base: float = 1.0,
    d: int = 1,
    n_local=(16, 24, 24),
) -> dict:
    """Oscillation decay over nested kinetic cylinders.

    Measures osc over Q_{r_base * rbar^{-k}} (boxes at the origin) for
    k = 0..levels-1 after normalizing f to [0, 2] on the base cylinder,
    fits log osc_k against k, and reports the exponent
    alpha = -slope / log(rbar) with the fit's R^2.  Records which branch
    of the shrinking dichotomy (f vs 2 - f) each level took.
    """
    if levels < 2:
        raise ValueError("need at least 2 levels")
    ev = as_evaluator(f)
    base_box = BoxCylinder(-(r_base**2), 0.0, np.zeros(d), r_base**3,
                           np.zeros(d), r_base)
    lo, hi = _box_stats(ev, base_box, n_local)
    if isinstance(f, ScalarField):
        finest = r_base * rbar ** (-(levels - 1))
        if finest**3 < f.grid.dx or finest < f.grid.dv:
            raise ValueError(
                "insufficient levels before hitting grid resolution"
            )
    if hi - lo <= 0.0:
        return {"alpha_fit": None, "osc": [0.0] * levels, "r_squared": None,
                "branches": ["f"] * levels, "monotone": True,
                "constant": True}

    def normalized(T, X, V):
        return 2.0 * (ev(T, X, V) - lo) / (hi - lo)

    osc = []
    branches = []
    for k in range(levels):
        r = r_base * rbar ** (-k)
        box = BoxCylinder(-(r**2), 0.0, np.zeros(d), r**3, np.zeros(d), r)
        a, b = _box_stats(normalized, box, n_local)
        osc.append(b - a)
        past = BoxCylinder(-2.0 * r**2, -(r**2), np.zeros(d), r**3,
                           np.zeros(d), r)
        frac_low = _box_fraction(normalized, past, lambda v: v <= 1.0, n_local)
        branches.append("f" if frac_low <= 0.5 else "2-f")
    osc_arr = np.array(osc)
    monotone = bool(np.all(np.diff(osc_arr) < 0.0))
    pos = osc_arr > 0.0
    ks = np.arange(levels)[pos]
    logs = np.log(osc_arr[pos])
    slope, intercept = np.polyfit(ks, logs, 1)
    pred = slope * ks + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else None
    return {
        "alpha_fit": float(-slope / math.log(rbar)),
        "osc": [float(o) for o in osc],
        "r_squared": r_squared,
        "branches": branches,
        "monotone": monotone,
        "constant": False,
    }
