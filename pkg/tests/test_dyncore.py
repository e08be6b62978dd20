import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polypuzzle.dyncore import (
    PolynomialMap,
    alpha_ray_cycle,
    critical_orbit,
    fixed_points,
    green,
    green_array,
    rotation_cycle,
    trace_at_angle,
    trace_ray,
)
from polypuzzle.errors import (
    CycleNotFound,
    MultipleFixedPoint,
    RayNearCriticalValue,
    TraceDiverged,
)


class TestPolynomialMap:
    def test_quadratic_basics(self):
        m = PolynomialMap.quadratic(-1.6)
        assert m.degree == 2
        assert m(0) == -1.6
        assert m.derivative(2.0) == pytest.approx(4.0)
        assert list(m.critical_points()) == [0]

    def test_trailing_zero_trimmed(self):
        m = PolynomialMap((1.0, 0.0, 2.0, 0.0))
        assert m.degree == 2

    def test_cubic_critical_points(self):
        m = PolynomialMap((3.0, 3.0, 0.0, 1.0))  # z^3 + 3z + 3
        pts = sorted(m.critical_points(), key=lambda z: z.imag)
        assert pts[0] == pytest.approx(-1j)
        assert pts[1] == pytest.approx(1j)

    def test_escape_radius_growth(self):
        m = PolynomialMap.quadratic(-2.0)
        R = m.escape_radius()
        z = R + 0.1
        assert abs(m(z)) >= 2 * abs(z)


class TestFixedPoints:
    def test_c_zero(self):
        fp = fixed_points(PolynomialMap.quadratic(0))
        assert fp.beta == pytest.approx(1.0)
        assert fp.alpha == pytest.approx(0.0)
        assert abs(fp.alpha_multiplier) == pytest.approx(0.0)
        assert not fp.both_repelling

    def test_c_minus_two(self):
        fp = fixed_points(PolynomialMap.quadratic(-2.0))
        assert fp.beta == pytest.approx(2.0)
        assert fp.alpha == pytest.approx(-1.0)
        assert fp.beta_multiplier == pytest.approx(4.0)
        assert fp.alpha_multiplier == pytest.approx(-2.0)
        assert fp.both_repelling

    def test_c_i_roots_and_residuals(self):
        m = PolynomialMap.quadratic(1j)
        fp = fixed_points(m)
        # roots of z^2 - z + i, cross-checked by the iteration residual
        for p, mult in ((fp.alpha, fp.alpha_multiplier), (fp.beta, fp.beta_multiplier)):
            assert abs(m(p) - p) < 1e-12
            assert mult == pytest.approx(2 * p)
            assert abs(mult) > 1
        assert fp.both_repelling

    def test_parabolic_raises(self):
        with pytest.raises(MultipleFixedPoint):
            fixed_points(PolynomialMap.quadratic(0.25))


class TestGreen:
    def test_c_zero_log(self):
        m = PolynomialMap.quadratic(0)
        assert green(m, 2.0) == pytest.approx(math.log(2), abs=1e-12)

    def test_filled_julia_zero(self):
        m = PolynomialMap.quadratic(0)
        assert green(m, 0.5) == 0.0
        assert green(m, 0.3 + 0.4j) == 0.0

    def test_functional_equation_c_minus_two(self):
        m = PolynomialMap.quadratic(-2.0)
        g3 = green(m, 3.0)
        assert abs(green(m, m(3.0)) - 2 * g3) < 1e-9

    @pytest.mark.parametrize("c", [0.0, -1.6, 1j, -1.75])
    def test_functional_equation_sweep(self, c):
        m = PolynomialMap.quadratic(c)
        rng = np.random.default_rng(7)
        pts = rng.uniform(-2.5, 2.5, 40) + 1j * rng.uniform(-2.5, 2.5, 40)
        for z in pts:
            g = green(m, z)
            if 1e-4 <= g <= 10:
                assert abs(green(m, m(z)) - 2 * g) < 1e-8

    def test_green_array_matches_scalar(self):
        m = PolynomialMap.quadratic(-1.6)
        zs = np.array([3.0, 0.1 + 0.1j, 2.0j, 0.0])
        ga = green_array(m, zs, 200)
        for z, g in zip(zs, ga):
            assert g == pytest.approx(green(m, complex(z)), abs=1e-10)


class TestRays:
    def test_c_zero_radial(self):
        m = PolynomialMap.quadratic(0)
        ray = trace_ray(m, Fraction(0))
        assert ray.landed
        assert ray.landing_point == pytest.approx(1.0, abs=1e-8)
        assert np.all(np.abs(ray.points.imag) < 1e-9)
        assert np.all(np.diff(ray.potentials) < 0)

    def test_c_minus_two_half_ray(self):
        m = PolynomialMap.quadratic(-2.0)
        ray = trace_ray(m, Fraction(1, 2))
        assert ray.landed
        assert abs(ray.landing_point - (-2.0)) < 1e-6

    def test_c_i_one_seventh_lands_at_alpha(self):
        m = PolynomialMap.quadratic(1j)
        fp = fixed_points(m)
        ray = trace_ray(m, Fraction(1, 7))
        assert ray.landed
        assert abs(ray.landing_point - fp.alpha) < 1e-6

    def test_equivariance(self):
        # f maps the ray of angle t onto the ray of angle 2t at doubled potential
        m = PolynomialMap.quadratic(1j)
        ray = trace_ray(m, Fraction(1, 7))
        for z, g in zip(ray.points[::12], ray.potentials[::12]):
            if not 1e-3 <= g <= 4.0:
                continue
            target = trace_at_angle(m, Fraction(2, 7), 2 * g)
            assert abs(m(z) - target) < 1e-8

    def test_landing_equivariance(self):
        # f maps the landing point of ray t to the landing point of ray 2t
        m = PolynomialMap.quadratic(1j)
        land = {t: trace_ray(m, t).landing_point
                for t in (Fraction(1, 7), Fraction(2, 7), Fraction(4, 7))}
        assert abs(m(land[Fraction(1, 7)]) - land[Fraction(2, 7)]) < 1e-9
        assert abs(m(land[Fraction(2, 7)]) - land[Fraction(4, 7)]) < 1e-9
        assert abs(m(land[Fraction(4, 7)]) - land[Fraction(1, 7)]) < 1e-9

    def test_saddle_detected(self):
        # for c = 4 every critical orbit escapes; the 0-ray crashes into the
        # potential saddle at the critical point
        m = PolynomialMap.quadratic(4.0)
        with pytest.raises((RayNearCriticalValue, TraceDiverged)):
            trace_ray(m, Fraction(0), g_stop=2.0**-30)


class TestCriticalOrbit:
    def test_superattracting(self):
        orb = critical_orbit(PolynomialMap.quadratic(0), 5)
        assert np.all(orb.points == 0)
        assert not orb.escaped

    def test_period_two(self):
        orb = critical_orbit(PolynomialMap.quadratic(-1.0), 6)
        assert list(orb.points) == [0, -1, 0, -1, 0, -1, 0]

    def test_extended_precision_oracle(self):
        import mpmath

        mpmath.mp.dps = 60
        c = mpmath.mpf("-1.6")
        z = mpmath.mpf(0)
        expected = []
        for _ in range(9):
            expected.append(complex(z))
            z = z * z + c
        orb = critical_orbit(PolynomialMap.quadratic(-1.6), 8)
        for a, b in zip(orb.points, expected):
            assert abs(a - b) < 1e-12


class TestAlphaCycle:
    def test_c_i(self):
        q, angles = alpha_ray_cycle(PolynomialMap.quadratic(1j))
        assert q == 3
        assert angles == [Fraction(1, 7), Fraction(2, 7), Fraction(4, 7)]

    @pytest.mark.parametrize("c,expected", [
        (-1.0, [Fraction(1, 3), Fraction(2, 3)]),
        (-1.75, [Fraction(1, 3), Fraction(2, 3)]),
    ])
    def test_real_maps(self, c, expected):
        q, angles = alpha_ray_cycle(PolynomialMap.quadratic(c))
        assert q == 2
        assert angles == expected

    def test_attracting_alpha_raises(self):
        with pytest.raises(CycleNotFound):
            alpha_ray_cycle(PolynomialMap.quadratic(0.1))

    @given(st.integers(2, 16), st.data())
    @settings(max_examples=60, deadline=None)
    def test_rotation_cycle_is_single_orbit(self, q, data):
        ps = [p for p in range(1, q) if math.gcd(p, q) == 1]
        p = data.draw(st.sampled_from(ps))
        angles = rotation_cycle(p, q)
        assert len(angles) == q
        orbit = {angles[0]}
        t = angles[0]
        for _ in range(q - 1):
            t = (2 * t) % 1
            orbit.add(t)
        assert orbit == set(angles)
        # doubling acts on the sorted angles as rotation by p
        for i, t in enumerate(angles):
            assert (2 * t) % 1 == angles[(i + p) % q]
