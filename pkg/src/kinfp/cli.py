"""Configuration-driven experiment runner.

Parses an INI-style config, dispatches geometry / kernel / solver /
inequality / covering experiments, and writes deterministic reports:

* ``report.json``   -- config echo, package version, and one record per
  inequality instance (full VerificationReport schema);
* ``summary.csv``   -- one row per instance with the fixed column order
  ``id,seed,lhs,rhs,fitted_c,pass`` (byte-identical across reruns of the
  same config and seed);
* a log line per instance carrying the inequality's anchor string.

Exit codes: 0 all gated checks pass, 2 config parse error, 3 hypothesis
failure (named), 4 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .fields import BoxCylinder, Grid, NegSobolevInput, ScalarField, VectorField
from .fpsolver import NumericalAbort
from .geometry import (
    PhasePoint,
    group_product,
    origin,
    stack_cylinders,
    check_stacking,
)
from .harness import (
    HypothesisError,
    make_kernel_mixture,
    sample_on_box,
    verify_expansion_of_positivity,
    verify_harnack,
    verify_minima_measure,
    verify_pop_large_times,
    verify_weak_harnack,
    verify_weak_poincare,
    estimate_holder,
)
from .harness import _box_stats, _cylinder_inf, _q_one  # local quadrature
from .geometry import Cylinder, q_minus
from .inkspots import (
    InkspotsHypothesisError,
    generate_hypothesis_pair,
    verify_inkspots,
)
from .kolmogorov import build_cutoff, kernel_eval
from .report import VerificationReport

logger = logging.getLogger("kinfp")

EXPERIMENT_KINDS = [
    "geometry-check",
    "kernel-check",
    "solve",
    "weak-poincare",
    "pop",
    "minima-measure",
    "pop-large-times",
    "weak-harnack",
    "harnack",
    "holder",
    "inkspots",
    "all",
]

_ALLOWED_KEYS = {
    "experiment": {"kind", "seed", "out"},
    "grid": {"d", "n_t", "n_x", "n_v"},
    "coefficients": {"kind", "lam", "lambda_max", "cell_size"},
    "params": {
        "theta", "eta", "omega", "m", "p", "eps", "mu", "r0", "c", "big_c",
        "count", "levels", "tolerance", "source_sup",
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    out: str = "out"
    d: int = 1
    n_t: int = 16
    n_x: int = 24
    n_v: int = 24
    coeff_kind: str = "constant"
    lam: float = 1.0
    lambda_max: float = 1.0
    cell_size: float = 0.25
    params: dict = field(default_factory=dict)

    @property
    def grid_n(self):
        return (self.n_t, self.n_x, self.n_v)


_PARAM_DEFAULTS = {
    "theta": 0.5,
    "eta": 0.5,
    "omega": 1e-2,
    "m": 3,
    "p": 1.0,
    "eps": 1e-2,
    "mu": 0.3,
    "r0": 0.3,
    "c": 0.05,
    "big_c": 1.0,
    "count": 5,
    "levels": 5,
    "tolerance": 1e-10,
    "source_sup": 0.0,
}

_PARAM_RANGES = {
    "theta": (0.0, 1.0),
    "eta": (0.0, 1.0),
    "omega": (0.0, 1e-2),
    "p": (0.0, math.inf),
    "eps": (0.0, 0.25),
    "mu": (0.0, 1.0),
    "r0": (0.0, 1.0),
    "c": (0.0, 1.0),
}


def load_config(path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _ALLOWED_KEYS[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    if "experiment" not in parser or "kind" not in parser["experiment"]:
        raise ConfigError("missing [experiment] kind")
    kind = parser["experiment"]["kind"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind '{kind}'")
    try:
        cfg = ExperimentConfig(
            kind=kind,
            seed=parser.getint("experiment", "seed", fallback=0),
            out=parser.get("experiment", "out", fallback="out"),
            d=parser.getint("grid", "d", fallback=1),
            n_t=parser.getint("grid", "n_t", fallback=16),
            n_x=parser.getint("grid", "n_x", fallback=24),
            n_v=parser.getint("grid", "n_v", fallback=24),
            coeff_kind=parser.get("coefficients", "kind", fallback="constant"),
            lam=parser.getfloat("coefficients", "lam", fallback=1.0),
            lambda_max=parser.getfloat("coefficients", "lambda_max",
                                       fallback=1.0),
            cell_size=parser.getfloat("coefficients", "cell_size",
                                      fallback=0.25),
        )
        params = dict(_PARAM_DEFAULTS)
        if "params" in parser:
            for key in parser["params"]:
                if key in ("m", "count", "levels"):
                    params[key] = parser.getint("params", key)
                else:
                    params[key] = parser.getfloat("params", key)
        cfg.params = params
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    for key, (lo, hi) in _PARAM_RANGES.items():
        val = cfg.params[key]
        if not lo < val <= hi:
            raise ConfigError(
                f"parameter {key} = {val} outside its range ({lo}, {hi}]"
            )
    if cfg.d < 1 or min(cfg.grid_n) < 2:
        raise ConfigError("grid spec must have d >= 1 and resolutions >= 2")
    return cfg


# ---------------------------------------------------------------------------
# experiment implementations: each returns a list of row dicts
# ---------------------------------------------------------------------------


def _row(exp: str, index: int, seed: int, report) -> dict:
    if isinstance(report, VerificationReport):
        rec = report.to_dict()
        rec.update(
            id=f"{exp}/{report.inequality}/{index}",
            seed=seed,
        )
        return rec
    return dict(report, id=f"{exp}/{report['inequality']}/{index}", seed=seed)


def _run_geometry_check(cfg: ExperimentConfig) -> list[dict]:
    rng = np.random.default_rng(cfg.seed)
    d = cfg.d
    n = 20000

    def draw():
        return [PhasePoint(float(rng.uniform(-5, 5)),
                           rng.uniform(-5, 5, size=d),
                           rng.uniform(-5, 5, size=d)) for _ in range(n)]

    zs = [draw() for _ in range(3)]
    err = 0.0
    for z1, z2, z3 in zip(*zs):
        a = group_product(group_product(z1, z2), z3)
        b = group_product(z1, group_product(z2, z3))
        scale = 1.0 + abs(a.t) + float(np.max(np.abs(a.x))) + float(
            np.max(np.abs(a.v))
        )
        err = max(
            err,
            (abs(a.t - b.t) + float(np.max(np.abs(a.x - b.x)))
             + float(np.max(np.abs(a.v - b.v)))) / scale,
        )
    rows = [_row("geometry-check", 0, cfg.seed, {
        "inequality": "group-associativity", "lhs": err, "rhs": 1e-12,
        "params": {"samples": n}, "passed": err <= 1e-12,
    })]
    fails = 0
    count = int(cfg.params["count"]) * 40
    for i in range(count):
        r = float(rng.uniform(1e-4, 9e-3))
        omega = 1e-2
        t0 = float(rng.uniform(-1.0 + r**2, -1.0 + omega**2))
        x0 = rng.uniform(-omega**3 / 2, omega**3 / 2, size=d)
        v0 = rng.uniform(-(omega - r), omega - r, size=d)
        try:
            seq = stack_cylinders(PhasePoint(t0, x0, v0), r, omega)
        except ValueError:
            continue
        checks = check_stacking(seq)
        fails += not all(checks.values())
    rows.append(_row("geometry-check", 1, cfg.seed, {
        "inequality": "stacking-closed-form", "lhs": float(fails),
        "rhs": 0.0, "params": {"bases": count}, "passed": fails == 0,
    }))
    return rows


def _run_kernel_check(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    d = cfg.d
    for i, s in enumerate((0.1, 0.5, 1.0)):
        rad = 10.0 * math.sqrt(2 * s)
        radx = 10.0 * math.sqrt(2 * s**3 / 3)
        box = BoxCylinder(s - 1e-9, s, np.zeros(d), radx, np.zeros(d), rad)
        n_q = 160
        grid = Grid(box, 2, n_q, n_q)
        pole = origin(d)
        fld = grid.sample(lambda T, X, V: kernel_eval(T, X, V, pole))
        # time-slice quadrature at the top node t = s
        T, X, V = grid.coords
        w = np.zeros_like(fld.values)
        w[-1] = fld.values[-1] * (grid.dx * grid.dv) ** d
        mass = float(np.sum(w))
        var_v = float(np.sum(w * V[..., 0] ** 2) / mass)
        cov_xv = float(np.sum(w * X[..., 0] * V[..., 0]) / mass)
        var_x = float(np.sum(w * X[..., 0] ** 2) / mass)
        err = max(abs(mass - 1.0), abs(var_v - 2 * s), abs(cov_xv - s**2),
                  abs(var_x - 2 * s**3 / 3))
        rows.append(_row("kernel-check", i, cfg.seed, {
            "inequality": "kernel-moments", "lhs": err, "rhs": 1e-6,
            "params": {"s": s, "mass": mass, "var_v": var_v,
                       "cov_xv": cov_xv, "var_x": var_x},
            "passed": err <= 1e-6,
        }))
    return rows


def _run_solve(cfg: ExperimentConfig) -> list[dict]:
    from .fields import make_coefficients
    from .fpsolver import SolverConfig, solve, weak_residual, default_test_set

    d = cfg.d
    box = BoxCylinder(0.5, 1.0, np.zeros(d), 6.0, np.zeros(d), 5.0)
    grid = Grid(box, cfg.n_t, cfg.n_x, cfg.n_v)
    coeffs = make_coefficients(grid, cfg.coeff_kind, cfg.lam, cfg.lambda_max,
                               cell_size=cfg.cell_size, seed=cfg.seed)
    pole = origin(d)
    X0 = grid.x_axis[0][:, None]
    V0 = grid.v_axis[0][None, :]
    T0 = np.full((cfg.n_x, cfg.n_v), box.t_min)
    init = kernel_eval(T0, X0[..., None] * np.ones(T0.shape)[..., None],
                       V0[..., None] * np.ones(T0.shape)[..., None], pole)
    f = solve(SolverConfig(grid, coeffs, init))
    rows = []
    if cfg.coeff_kind == "constant" and cfg.lam == cfg.lambda_max == 1.0:
        T, X, V = grid.coords
        exact = kernel_eval(T, X, V, pole)
        l1 = float(np.sum(np.abs(f.values - exact)) * grid.cell_volume)
        rows.append(_row("solve", 0, cfg.seed, {
            "inequality": "kernel-tracking-l1", "lhs": l1, "rhs": 1.0,
            "params": {"n": list(cfg.grid_n)}, "passed": l1 < 1.0,
        }))
    res = weak_residual(f, coeffs, "solution", default_test_set(grid, 3,
                                                                cfg.seed))
    rows.append(_row("solve", 1, cfg.seed, {
        "inequality": "weak-residual-solution", "lhs": res["max"],
        "rhs": res["tol"], "params": {"mode": "solution"},
        "passed": res["passed"],
    }))
    neg = float(np.min(f.values))
    rows.append(_row("solve", 2, cfg.seed, {
        "inequality": "positivity-preservation", "lhs": -neg, "rhs": 1e-12,
        "params": {}, "passed": neg >= -1e-12,
    }))
    return rows


def _ramp_fixture(cfg: ExperimentConfig, eta: float):
    d = cfg.d
    box = BoxCylinder(-1.0 - eta**2, 0.0, np.zeros(d), 8.0, np.zeros(d), 2.0)
    # x-resolution must place cell centers inside the vanishing-set box of
    # x-radius eta^3
    grid = Grid(box, max(cfg.n_t, 64), max(cfg.n_x, 128), max(cfg.n_v, 24))
    T, X, V = grid.coords
    f = ScalarField(grid, np.clip(V[..., 0] - 0.25, 0.0, None))
    H = NegSobolevInput(
        ScalarField(grid, np.zeros(grid.shape)),
        VectorField(grid, np.zeros(grid.shape + (d,))),
    )
    return f, H


def _run_weak_poincare(cfg: ExperimentConfig) -> list[dict]:
    eta = cfg.params["eta"]
    f, H = _ramp_fixture(cfg, eta)
    return [_row("weak-poincare", 0, cfg.seed,
                 verify_weak_poincare(f, H, eta))]


def _run_pop(cfg: ExperimentConfig) -> list[dict]:
    from .geometry import q_pos

    theta = cfg.params["theta"]
    rows = []
    for i in range(int(cfg.params["count"])):
        seed = cfg.seed * 1009 + i
        f0, _ = make_kernel_mixture(seed, d=cfg.d)
        lo = _box_stats(f0, q_pos(theta, cfg.d))[0]
        f = (lambda g, c: (lambda T, X, V: g(T, X, V) / c))(f0, lo)
        rows.append(_row("pop", i, seed, verify_expansion_of_positivity(
            f, theta, eps=cfg.params["eps"],
            source_sup=cfg.params["source_sup"])))
    return rows


def _run_minima_measure(cfg: ExperimentConfig) -> list[dict]:
    m = int(cfg.params["m"])
    rows = []
    for i in range(int(cfg.params["count"])):
        seed = cfg.seed * 1013 + i
        f0, _ = make_kernel_mixture(seed, d=cfg.d, pole_time=(-8.0, -4.0))
        stacked = BoxCylinder(0.0, float(m), np.zeros(cfg.d), float(m + 2),
                              np.zeros(cfg.d), 1.0)
        # normalize on the same local grid the verifier samples
        n_local = (16, 24, 24)
        lo = _box_stats(f0, stacked, n_local)[0]
        f = (lambda g, c: (lambda T, X, V: g(T, X, V) / c))(f0, lo)
        vals = sample_on_box(f, _q_one(cfg.d), n_local).values
        M = float(np.quantile(vals, 0.45))
        rows.append(_row("minima-measure", i, seed,
                         verify_minima_measure(f, m, M, n_local=n_local)))
    return rows


def _run_pop_large_times(cfg: ExperimentConfig) -> list[dict]:
    omega = cfg.params["omega"]
    rows = []
    for i in range(int(cfg.params["count"])):
        seed = cfg.seed * 1019 + i
        rng = np.random.default_rng(seed)
        r = float(rng.uniform(0.002, 0.005))
        z0 = PhasePoint(-1.0 + r**2 + float(rng.uniform(0, omega**2 - r**2)),
                        np.zeros(cfg.d), np.zeros(cfg.d))
        f0, _ = make_kernel_mixture(seed, d=cfg.d)
        lo = _cylinder_inf(f0, Cylinder(z0, r))
        f = (lambda g, c: (lambda T, X, V: g(T, X, V) / c))(f0, lo)
        rows.append(_row("pop-large-times", i, seed, verify_pop_large_times(
            f, z0, r, A=1.0, omega=omega, ell0=0.25)))
    return rows


def _run_weak_harnack(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params["p"]
    omega = cfg.params["omega"]
    tol = cfg.params["tolerance"]
    const = lambda T, X, V: np.full(np.asarray(T, dtype=float).shape, 1.0)
    rep = verify_weak_harnack(const, p=p, omega=omega)
    vol = omega**2 * (2 * omega**3) ** cfg.d * (2 * omega) ** cfg.d
    exact = vol ** (1.0 / p)
    rec = rep.to_dict()
    rec["passed"] = bool(rep.passed
                         and abs(rep.fitted_c - exact) <= tol * max(exact, 1))
    rec["params"]["expected_c"] = exact
    rows = [_row("weak-harnack", 0, cfg.seed, rec)]
    for i in range(int(cfg.params["count"])):
        seed = cfg.seed * 1021 + i
        f, _ = make_kernel_mixture(seed, d=cfg.d)
        rows.append(_row("weak-harnack", i + 1, seed, verify_weak_harnack(
            f, p=p, omega=omega, source_sup=cfg.params["source_sup"],
            refine=1)))
    return rows


def _run_harnack(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for i in range(int(cfg.params["count"])):
        seed = cfg.seed * 1031 + i
        f, _ = make_kernel_mixture(seed, d=cfg.d)
        rows.append(_row("harnack", i, seed, verify_harnack(
            f, omega=cfg.params["omega"],
            source_sup=cfg.params["source_sup"])))
    return rows


def _run_holder(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for i in range(int(cfg.params["count"])):
        seed = cfg.seed * 1033 + i
        f, _ = make_kernel_mixture(seed, d=cfg.d, n_terms=2)
        res = estimate_holder(f, levels=int(cfg.params["levels"]), d=cfg.d)
        passed = bool(res["constant"] or (
            res["monotone"] and res["r_squared"] is not None
            and res["r_squared"] >= 0.9))
        rows.append(_row("holder", i, seed, {
            "inequality": "holder-oscillation-decay",
            "lhs": res["osc"][-1], "rhs": res["osc"][0],
            "params": {"alpha_fit": res["alpha_fit"],
                       "r_squared": res["r_squared"],
                       "branches": res["branches"], "osc": res["osc"]},
            "passed": passed,
        }))
    return rows


def _run_inkspots(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    rows = []
    for i in range(int(p["count"])):
        seed = cfg.seed * 1039 + i
        E, F = generate_hypothesis_pair(seed, k=4, m=int(p["m"]), r0=p["r0"],
                                        n=cfg.grid_n, d=cfg.d)
        rows.append(_row("inkspots", i, seed, verify_inkspots(
            E, F, mu=p["mu"], m=int(p["m"]), r0=p["r0"], c=p["c"],
            C=p["big_c"])))
    return rows


_RUNNERS = {
    "geometry-check": _run_geometry_check,
    "kernel-check": _run_kernel_check,
    "solve": _run_solve,
    "weak-poincare": _run_weak_poincare,
    "pop": _run_pop,
    "minima-measure": _run_minima_measure,
    "pop-large-times": _run_pop_large_times,
    "weak-harnack": _run_weak_harnack,
    "harnack": _run_harnack,
    "holder": _run_holder,
    "inkspots": _run_inkspots,
}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _csv_bytes(rows: list[dict]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "seed", "lhs", "rhs", "fitted_c", "pass"])
    for r in rows:
        fitted = r.get("fitted_c")
        if fitted is None and r.get("rhs"):
            fitted = r["lhs"] / r["rhs"] if r["rhs"] > 0 else None
        writer.writerow([
            r["id"], r["seed"], repr(float(r["lhs"])), repr(float(r["rhs"])),
            "" if fitted is None else repr(float(fitted)),
            "pass" if r["passed"] else "fail",
        ])
    return buf.getvalue().encode()


def run(config_path: str, seed: int | None = None, out: str | None = None,
        threads: int = 1) -> int:
    """Execute the configured experiments; returns the process exit code."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 2
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    kinds = ([k for k in EXPERIMENT_KINDS if k != "all"]
             if cfg.kind == "all" else [cfg.kind])
    try:
        if threads > 1 and len(kinds) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda k: _RUNNERS[k](cfg), kinds))
        else:
            parts = [_RUNNERS[k](cfg) for k in kinds]
    except (HypothesisError, InkspotsHypothesisError) as exc:
        logger.error("hypothesis failure: %s", exc)
        return 3
    except NumericalAbort as exc:
        logger.error("numerical abort: %s", exc)
        return 4
    rows: list[dict] = []
    for part in parts:  # merged in dispatch (seed) order
        rows.extend(sorted(part, key=lambda r: (r["id"], r["seed"])))
    for r in rows:
        logger.info("check %s [%s]: lhs=%.6e rhs=%.6e %s", r["id"],
                    r["inequality"], r["lhs"], r["rhs"],
                    "pass" if r["passed"] else "fail")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": __version__,
        "config": {
            "kind": cfg.kind, "seed": cfg.seed, "d": cfg.d,
            "grid": list(cfg.grid_n),
            "coefficients": {"kind": cfg.coeff_kind, "lam": cfg.lam,
                             "lambda_max": cfg.lambda_max,
                             "cell_size": cfg.cell_size},
            "params": cfg.params,
        },
        "reports": rows,
    }
    (out_dir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    (out_dir / "summary.csv").write_bytes(_csv_bytes(rows))
    return 0 if all(r["passed"] for r in rows) else 1


def replay(report_path: str, threads: int = 1) -> bool:
    """Re-derive every recorded constant from the stored config and seed.

    Returns True iff the rerun reproduces lhs, rhs and fitted_c
    bit-identically.  Raises on package version mismatch.
    """
    payload = json.loads(Path(report_path).read_text())
    if payload.get("version") != __version__:
        raise RuntimeError(
            f"version mismatch: report {payload.get('version')}, "
            f"package {__version__}"
        )
    c = payload["config"]
    cfg = ExperimentConfig(
        kind=c["kind"], seed=c["seed"], d=c["d"],
        n_t=c["grid"][0], n_x=c["grid"][1], n_v=c["grid"][2],
        coeff_kind=c["coefficients"]["kind"], lam=c["coefficients"]["lam"],
        lambda_max=c["coefficients"]["lambda_max"],
        cell_size=c["coefficients"]["cell_size"], params=dict(c["params"]),
    )
    kinds = ([k for k in EXPERIMENT_KINDS if k != "all"]
             if cfg.kind == "all" else [cfg.kind])
    rows: list[dict] = []
    for k in kinds:
        rows.extend(sorted(_RUNNERS[k](cfg),
                           key=lambda r: (r["id"], r["seed"])))
    old = payload["reports"]
    if len(old) != len(rows):
        return False
    for a, b in zip(old, rows):
        for key in ("id", "lhs", "rhs", "fitted_c", "passed"):
            if a.get(key) != b.get(key):
                return False
    return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kinfp",
        description="run kinetic Fokker-Planck inequality experiments",
    )
    parser.add_argument("--config", help="path to the experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker pool size")
    parser.add_argument("--list-experiments", action="store_true",
                        help="print known experiment kinds and exit")
    parser.add_argument("--replay", metavar="REPORT",
                        help="re-derive constants from a report.json")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=os.environ.get("KH_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.list_experiments:
        print("\n".join(EXPERIMENT_KINDS))
        return 0
    if args.replay:
        try:
            ok = replay(args.replay, threads=args.threads)
        except RuntimeError as exc:
            logger.error("%s", exc)
            return 2
        print("replay ok" if ok else "replay mismatch")
        return 0 if ok else 1
    if not args.config:
        parser.error("--config is required (or use --list-experiments)")
    return run(args.config, seed=args.seed, out=args.out,
               threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
