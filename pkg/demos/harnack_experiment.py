"""Measure the weak Harnack ratio on rough-coefficient super-solutions.

Three experiments:

1. the constant field, whose fitted constant is exactly |Q_-|^(1/p);
2. analytic kernel mixtures (exact positive solutions), including a rerun
   in a transported Galilean frame to show the ratio is frame-invariant;
3. a solver run with checkerboard coefficients jumping between the
   ellipticity bounds, the genuinely rough case.
"""

import numpy as np

from kinfp.geometry import PhasePoint, q_minus
from kinfp.harness import ExperimentEnsemble, make_kernel_mixture, verify_weak_harnack


def show(label, rep):
    print(f"{label:<34} lhs={rep.lhs:.4e} rhs={rep.rhs:.4e} "
          f"C={rep.fitted_c:.4e} {'pass' if rep.passed else 'fail'}")


def main():
    p = 1.0
    const = lambda T, X, V: np.ones(np.asarray(T, dtype=float).shape)
    rep = verify_weak_harnack(const, p=p)
    exact = q_minus(1e-2, 1).volume() ** (1.0 / p)
    show("constant field", rep)
    print(f"{'':<34} exact |Q_-|^(1/p) = {exact:.4e}, "
          f"relative error {abs(rep.fitted_c - exact) / exact:.1e}\n")

    for seed in (1, 2, 3):
        f, meta = make_kernel_mixture(seed)
        show(f"kernel mixture seed={seed}", verify_weak_harnack(f, p=p))
    f, _ = make_kernel_mixture(1)
    frame = PhasePoint(0.02, np.array([0.01]), np.array([0.1]))
    show("  ... in a transported frame", verify_weak_harnack(f, p=p, frame=frame))
    print()

    ens = ExperimentEnsemble(
        kind="solver-rough", count=3, seed=5,
        params={"coeff_kind": "checkerboard", "lam": 1.0, "Lam": 4.0},
    )
    for i in range(ens.count):
        f, meta = ens.member(i)
        rep = verify_weak_harnack(f, p=p, refine=1)
        show(f"rough solver run seed={meta['seed']}", rep)
        for level, c in rep.refinement:
            print(f"{'':<34} quadrature refinement x{2**level}: C={c:.4e}")


if __name__ == "__main__":
    main()
