"""The ink-spots covering inequality on a generated hypothesis pair.

A pair (E, F) is generated so that every cylinder in which E is dense has
small radius and its forward-stacked extension stays inside F.  The
covering inequality then bounds |E| by a definite fraction of |F meet Q_-|
plus an r0^2 leakage term.
"""

from kinfp.inkspots import (
    find_dense_cylinders,
    generate_hypothesis_pair,
    verify_inkspots,
)


def main():
    mu, m, r0 = 0.3, 3, 0.3
    seed = 4
    E, F = generate_hypothesis_pair(seed, k=3, m=m, r0=r0)
    print(f"generated pair (seed {seed}): |E| = {E.measure:.5f}, "
          f"|F meet Q_-| = {F.restricted().measure:.5f}")

    dense = find_dense_cylinders(E, mu, None)
    print(f"\ncylinders where E fills at least a (1-mu) = {1-mu} fraction:")
    for Q in dense:
        c = Q.center
        print(f"  r = {Q.r:.4f} at t = {c.t:+.4f}, x = {c.x[0]:+.4f}, "
              f"v = {c.v[0]:+.4f}")
    if not dense:
        print("  (none)")

    rep = verify_inkspots(E, F, mu, m, r0, c=0.05, C=1.0)
    print(f"\n|E| = {rep.lhs:.5f} <= {rep.rhs:.5f} = "
          f"(m+1)/m (1 - c mu) (|F meet Q_-| + C m r0^2): "
          f"{'pass' if rep.passed else 'fail'}")
    print(f"tightest density constant at C = 1: c* = {rep.params['c_star']:.3f}")

    print("\nbound as the density parameter mu varies:")
    for mu_i in (0.1, 0.2, 0.3, 0.4, 0.5):
        r = verify_inkspots(E, F, mu_i, m, r0, c=0.05, C=1.0)
        print(f"  mu = {mu_i}: rhs = {r.rhs:.5f} "
              f"({'pass' if r.passed else 'fail'})")


if __name__ == "__main__":
    main()
