import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinfp.geometry import (
    Cylinder,
    PhasePoint,
    StackedCylinder,
    check_stacking,
    cylinder_in_box,
    cylinder_in_cylinder,
    group_inverse,
    group_product,
    origin,
    pop_parameters,
    q_minus,
    scale,
    stack_cylinders,
)


def pt(t, x, v):
    return PhasePoint(t, np.atleast_1d(float(x)), np.atleast_1d(float(v)))


coords = st.floats(-10, 10, allow_nan=False)
dims = st.integers(1, 3)


@st.composite
def phase_points(draw, d=None):
    d = d if d is not None else draw(dims)
    return PhasePoint(
        draw(coords),
        np.array([draw(coords) for _ in range(d)]),
        np.array([draw(coords) for _ in range(d)]),
    )


class TestGroup:
    def test_product_formula(self):
        z = group_product(pt(1, 0, 1), pt(1, 0, 0))
        assert z.t == 2 and z.x[0] == 1 and z.v[0] == 1

    def test_identity(self):
        z = pt(1.5, -2.0, 0.5)
        w = group_product(z, origin(1))
        assert w.t == z.t and np.all(w.x == z.x) and np.all(w.v == z.v)

    def test_noncommutative(self):
        a = group_product(pt(0, 0, 1), pt(1, 0, 0))
        b = group_product(pt(1, 0, 0), pt(0, 0, 1))
        assert (a.t, a.x[0], a.v[0]) == (1, 1, 1)
        assert (b.t, b.x[0], b.v[0]) == (1, 0, 1)

    def test_inverse_formula(self):
        w = group_inverse(pt(1, 2, 3))
        assert (w.t, w.x[0], w.v[0]) == (-1, 1, -3)

    def test_inverse_of_origin(self):
        w = group_inverse(origin(2))
        assert w.t == 0 and np.all(w.x == 0) and np.all(w.v == 0)

    @settings(max_examples=300, deadline=None)
    @given(st.data())
    def test_associativity(self, data):
        d = data.draw(dims)
        z1, z2, z3 = (data.draw(phase_points(d)) for _ in range(3))
        a = group_product(group_product(z1, z2), z3)
        b = group_product(z1, group_product(z2, z3))
        s = 1.0 + abs(a.t) + np.max(np.abs(a.x)) + np.max(np.abs(a.v))
        err = abs(a.t - b.t) + np.max(np.abs(a.x - b.x)) + np.max(np.abs(a.v - b.v))
        assert err / s <= 1e-12

    @settings(max_examples=300, deadline=None)
    @given(st.data())
    def test_inverse_cancels(self, data):
        z = data.draw(phase_points())
        w = group_product(z, group_inverse(z))
        assert abs(w.t) <= 1e-14
        assert np.max(np.abs(w.x)) <= 1e-12
        assert np.max(np.abs(w.v)) <= 1e-14

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_double_inverse(self, data):
        z = data.draw(phase_points())
        w = group_inverse(group_inverse(z))
        assert w.t == z.t and np.all(w.v == z.v)
        # x - tv + tv cancels only up to roundoff at the scale of t*v
        tol = 1e-15 * (1.0 + abs(z.t) * np.max(np.abs(z.v)))
        assert np.max(np.abs(w.x - z.x)) <= tol


class TestScaling:
    def test_formula(self):
        w = scale(2.0, pt(1, 1, 1))
        assert (w.t, w.x[0], w.v[0]) == (4, 8, 2)

    def test_identity(self):
        z = pt(0.3, -0.7, 1.1)
        w = scale(1.0, z)
        assert (w.t, w.x[0], w.v[0]) == (z.t, z.x[0], z.v[0])

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            scale(0.0, pt(0, 0, 0))

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_membership_scaling(self, data):
        # z in Q_r(0) iff S_{1/r}(z) in Q_1(0)
        r = data.draw(st.floats(0.1, 3.0))
        z = data.draw(phase_points(1))
        big = Cylinder(origin(1), r)
        unit = Cylinder(origin(1), 1.0)
        w = scale(1.0 / r, z)
        assert big.contains_point(z) == unit.contains_point(w)


class TestCylinder:
    def test_top_center_inside(self):
        Q = Cylinder(pt(0.5, 1.0, -2.0), 0.7)
        assert Q.contains_point(Q.center)

    def test_slanted_axis(self):
        Q = Cylinder(pt(0, 0, 1), 1.0)
        assert Q.contains_point(pt(-0.5, -0.49, 1))

    def test_bottom_time_excluded(self):
        Q = Cylinder(pt(0, 0, 0), 0.5)
        assert not Q.contains_point(pt(-0.25, 0, 0))

    def test_volume(self):
        assert Cylinder(origin(1), 1.0).volume() == pytest.approx(4.0)
        assert Cylinder(origin(1), 0.5).volume() == pytest.approx(0.0625)

    def test_volume_homogeneity(self):
        for r in (0.3, 1.7):
            assert Cylinder(origin(2), r).volume() == pytest.approx(
                r**10 * Cylinder(origin(2), 1.0).volume()
            )

    @settings(max_examples=500, deadline=None)
    @given(st.data())
    def test_dual_membership(self, data):
        z0 = data.draw(phase_points(1))
        r = data.draw(st.floats(0.05, 3.0))
        z = data.draw(phase_points(1))
        Q = Cylinder(z0, r)
        assert Q.contains_point(z) == Q.contains_via_group(z)


class TestStackedCylinder:
    def test_time_boundary_inclusive(self):
        Q = Cylinder(pt(0, 0, 0), 1.0)
        bar = StackedCylinder(Q, 3)
        assert bar.contains_point(pt(3.0, 0, 0))
        assert not bar.contains_point(pt(0.0, 0, 0))

    def test_x_extent(self):
        bar = StackedCylinder(Cylinder(pt(0, 0, 0), 1.0), 3)
        assert bar.contains_point(pt(1.0, 4.99, 0))
        assert not bar.contains_point(pt(1.0, 5.0, 0))


class TestStacking:
    def test_documented_instance(self):
        omega = 1e-2
        r = omega / 2
        seq = stack_cylinders(pt(-1 + omega**2, 0, 0), r, omega)
        assert seq.N == 7
        assert seq.T[6] == pytest.approx(r**2 * (4**8 - 4) / 3)
        assert seq.T[6] == pytest.approx(0.5461, abs=1e-4)
        assert seq.rho == pytest.approx(0.04 ** (1 / 3), rel=1e-12)
        assert seq.R == pytest.approx(0.6737, abs=1e-4)
        assert seq.R >= seq.rho
        assert 2**seq.N * r == pytest.approx(0.64)
        assert 2**seq.N * r >= 1 / (2 * math.sqrt(2))

    def test_rejects_base_outside(self):
        with pytest.raises(ValueError):
            stack_cylinders(pt(-0.5, 0, 0), 1e-3, 1e-2)

    def test_rejects_large_omega(self):
        with pytest.raises(ValueError):
            stack_cylinders(pt(-1 + 1e-4, 0, 0), 1e-3, 0.5)

    @pytest.mark.parametrize("d", [1, 2])
    def test_randomized_conclusions(self, d):
        rng = np.random.default_rng(0)
        omega = 1e-2
        checked = 0
        while checked < 300:
            r = float(rng.uniform(1e-4, 4e-3))
            z0 = PhasePoint(
                float(rng.uniform(-1 + r**2, -1 + omega**2)),
                rng.uniform(-omega**3 / 4, omega**3 / 4, size=d),
                rng.uniform(-(omega - r) / 2, (omega - r) / 2, size=d),
            )
            if not cylinder_in_box(Cylinder(z0, r), q_minus(omega, d)):
                continue
            seq = stack_cylinders(z0, r, omega)
            results = check_stacking(seq)
            assert all(results.values()), (z0, r, results)
            checked += 1


class TestInclusionPredicates:
    def test_nested_cylinders(self):
        inner = Cylinder(pt(-0.1, 0, 0), 0.3)
        outer = Cylinder(origin(1), 1.0)
        assert cylinder_in_cylinder(inner, outer)
        assert not cylinder_in_cylinder(outer, inner)

    def test_slant_matters(self):
        # same radii, center velocity pushes the slant outside
        inner = Cylinder(pt(0, 0, 0.8), 0.55)
        outer = Cylinder(origin(1), 1.0)
        assert not cylinder_in_cylinder(inner, outer)


class TestPopParameters:
    def test_theta_half(self):
        p = pop_parameters(0.5)
        assert p.iota == pytest.approx(0.019824, abs=1e-6)
        assert p.eta == pytest.approx(0.46888, abs=1e-5)
        assert p.time_lap == pytest.approx(0.027482, abs=1e-6)

    def test_theta_one_branch(self):
        p = pop_parameters(1.0)
        assert p.iota == pytest.approx((9 / 8) ** (1 / 6) - 1, rel=1e-12)

    def test_eta_below_theta(self):
        for theta in np.linspace(0.05, 1.0, 30):
            p = pop_parameters(float(theta))
            assert 0 < p.eta < theta
            assert 0 < p.time_lap < p.eta**2

    def test_rejects_out_of_range(self):
        for theta in (0.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                pop_parameters(theta)
