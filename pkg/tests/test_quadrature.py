"""Radial norm quadrature, data spectra and rate-function tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscowave import (DataSpectrum, DomainError, InvalidParameterError,
                       ModelParams, TruncationError, kernel_norm,
                       l2_norm_radial, rate_function, sphere_area)
from viscowave.quadrature import adaptive_integral


def gaussian_norm_exact(amplitude, width, n, s):
    """Closed form of || |D|^s f || for spectrum amplitude*exp(-width r^2):
    omega_n a^2 Gamma(s + n/2) / (2 (2 width)^(s + n/2))."""
    return math.sqrt(sphere_area(n) * amplitude ** 2
                     * math.gamma(s + n / 2) / (2 * (2 * width) ** (s + n / 2)))


class TestDataSpectrum:
    def test_moments(self):
        assert DataSpectrum.gaussian(2.5, 1.0).moment == 2.5
        assert DataSpectrum.gaussian_diff(1.0, 1.0, 2.0).moment == 0.0
        assert DataSpectrum.linear_gaussian(3.0, 1.0).moment == 0.0
        assert DataSpectrum.zero().is_zero

    def test_physical_moment_conversion(self):
        sp = DataSpectrum.gaussian(1.0, 1.0)
        assert sp.physical_moment(3) == pytest.approx((2 * math.pi) ** 1.5)

    def test_tabulated_interpolation(self):
        sp = DataSpectrum.tabulated([0.0, 1.0, 2.0], [1.0, 0.5, 0.0])
        assert sp(0.5) == pytest.approx(0.75)
        assert sp(3.0) == 0.0          # beyond the table
        assert sp.moment == 1.0
        assert sp.tail_radius() == 2.0

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            DataSpectrum.gaussian(1.0, -1.0)
        with pytest.raises(InvalidParameterError):
            DataSpectrum.tabulated([0.0, 0.0], [1.0, 2.0])
        with pytest.raises(InvalidParameterError):
            DataSpectrum("mystery", (1.0,))


class TestRadialNorm:
    def test_zero_spectrum(self):
        assert l2_norm_radial(DataSpectrum.zero(), n=3, s=0) == 0.0

    def test_gaussian_closed_form_examples(self):
        # n=3, s=0: norm^2 = 4 pi * sqrt(2 pi)/16 -> (pi/2)^(3/4)
        got = l2_norm_radial(DataSpectrum.gaussian(1.0, 1.0), n=3, s=0)
        assert got == pytest.approx((math.pi / 2) ** 0.75, rel=1e-9)
        # n=1, s=1: norm^2 = 2 * sqrt(2 pi)/16
        got = l2_norm_radial(DataSpectrum.gaussian(1.0, 1.0), n=1, s=1)
        assert got == pytest.approx(math.sqrt(math.sqrt(2 * math.pi) / 8), rel=1e-9)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("s", [0, 1, 2])
    def test_gaussian_grid(self, n, s):
        for width in (0.6, 1.0, 2.3):
            got = l2_norm_radial(DataSpectrum.gaussian(1.3, width), n=n, s=s)
            assert got == pytest.approx(gaussian_norm_exact(1.3, width, n, s),
                                        rel=1e-9)

    def test_plancherel_against_physical_space(self):
        # exp(-|x|^2/2) has unitary transform exp(-|xi|^2/2) and L2 norm
        # pi^(n/4)
        for n in (1, 2, 3):
            got = l2_norm_radial(DataSpectrum.gaussian(1.0, 0.5), n=n, s=0)
            assert got == pytest.approx(math.pi ** (n / 4), rel=1e-9)

    def test_zone_partition_is_exact(self):
        sp = DataSpectrum.gaussian(1.0, 1.0)
        total = l2_norm_radial(sp, n=3, s=0, zone_filter="all")
        pieces = [l2_norm_radial(sp, n=3, s=0, zone_filter=z)
                  for z in ("small", "bounded", "large")]
        assert total ** 2 == pytest.approx(sum(x ** 2 for x in pieces),
                                           rel=1e-10)

    def test_refinement_changes_less_than_reported_error(self):
        sp = DataSpectrum.gaussian(1.0, 1.0)
        loose, err = l2_norm_radial(sp, n=3, s=0, rel_tol=1e-6, full_output=True)
        tight = l2_norm_radial(sp, n=3, s=0, rel_tol=1e-12)
        assert abs(loose - tight) <= max(err, 1e-12 * tight)

    def test_argument_validation(self):
        sp = DataSpectrum.gaussian(1.0, 1.0)
        with pytest.raises(DomainError):
            l2_norm_radial(sp, n=0, s=0)
        with pytest.raises(DomainError):
            l2_norm_radial(sp, n=3, s=-1)
        with pytest.raises(DomainError):
            l2_norm_radial(sp, n=3, s=0, zone_filter="everything")

    def test_truncation_reported(self):
        # bare callable without tail information must be refused for
        # unbounded zones, and a non-decaying integrand must be caught
        with pytest.raises(TruncationError):
            l2_norm_radial(lambda r: np.exp(-r * r), n=3, s=0)
        with pytest.raises(TruncationError):
            l2_norm_radial(lambda r: np.ones_like(r), n=3, s=0, r_max=30.0)

    def test_explicit_r_max_for_callables(self):
        got = l2_norm_radial(lambda r: np.exp(-r * r), n=3, s=0, r_max=8.0)
        assert got == pytest.approx((math.pi / 2) ** 0.75, rel=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(amp=st.floats(0.1, 5.0), width=st.floats(0.3, 3.0))
    def test_scaling_property(self, amp, width):
        base = l2_norm_radial(DataSpectrum.gaussian(1.0, width), n=2, s=1)
        scaled = l2_norm_radial(DataSpectrum.gaussian(amp, width), n=2, s=1)
        assert scaled == pytest.approx(amp * base, rel=1e-9)


class TestAdaptiveIntegral:
    def test_known_integral(self):
        val, err = adaptive_integral(lambda r: np.sin(r) ** 2, 0.0, math.pi)
        assert val == pytest.approx(math.pi / 2, rel=1e-12)
        assert err < 1e-9

    def test_oscillation_cap_prevents_aliasing(self):
        # sin^2(k r) over many periods: an uncapped coarse panel may alias;
        # the cap guarantees resolution
        k = 500.0
        val, _ = adaptive_integral(lambda r: np.sin(k * r) ** 2, 0.0, 1.0,
                                   cap_segments=[(0.0, 1.0, math.pi / k)])
        assert val == pytest.approx(0.5 - math.sin(2 * k) / (4 * k), rel=1e-10)

    def test_empty_range_rejected(self):
        with pytest.raises(DomainError):
            adaptive_integral(lambda r: r, 1.0, 1.0)


class TestKernelNorm:
    def test_argument_validation(self):
        p = ModelParams(2.0)
        with pytest.raises(DomainError):
            kernel_norm(1.0, 0.0, 3, "tan_part", p)
        with pytest.raises(DomainError):
            kernel_norm(0.0, 0.0, 3, "sin_part", p)
        with pytest.raises(DomainError):
            kernel_norm(1.0, -0.5, 3, "cos_part", p)

    def test_log_branch_computable(self):
        # 2s + n = 2 must be evaluable for t > 0 (sin^2 regularises r = 0)
        p = ModelParams(2.0)
        val = kernel_norm(100.0, 0.0, 2, "sin_part", p)
        assert np.isfinite(val) and val > 0

    def test_cos_norm_against_half_average(self):
        # once the oscillation has averaged out, the cos^2 weight halves
        # the plain Gaussian norm
        p = ModelParams(2.0)
        t = 1e5
        got = kernel_norm(t, 0.0, 3, "cos_part", p)
        plain = gaussian_norm_exact(1.0, p.parabolic_decay * t, 3, 0.0)
        assert got == pytest.approx(plain / math.sqrt(2.0), rel=1e-3)


class TestRateFunction:
    def test_known_values(self):
        assert rate_function("H", 100.0, n=1) == pytest.approx(10.0)
        assert rate_function("kappa", 7.0, n=3) == 1.0
        assert rate_function("kappa", 7.0, n=2) == pytest.approx(math.log(math.e + 7))
        assert rate_function("G", 5.0, s=0.5, n=1) == pytest.approx(
            math.sqrt(math.log(math.e + 5)))

    def test_case_selection(self):
        t = 50.0
        assert rate_function("G", t, s=0.0, n=1) == pytest.approx((1 + t) ** 0.5)
        assert rate_function("G", t, s=0.25, n=2) == pytest.approx(
            (1 + t) ** (1 - 5 * 0.25 / 6 - 5 * 2 / 12))
        assert rate_function("G", t, s=0.0, n=3) == pytest.approx((1 + t) ** -0.25)
        assert rate_function("H", t, n=5) == pytest.approx(t ** (0.5 - 1.25))

    def test_positivity_on_windows(self):
        t = np.geomspace(2.0, 1e6, 40)
        for kind, s in (("G", 0.0), ("G", 1.0), ("H", None), ("kappa", None)):
            for n in (1, 2, 3, 4):
                vals = rate_function(kind, t, s=s, n=n)
                assert np.all(vals > 0)

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            rate_function("Q", 1.0, n=1)
        with pytest.raises(DomainError):
            rate_function("G", 1.0, n=1)        # missing s
        with pytest.raises(DomainError):
            rate_function("H", 0.0, n=1)


class TestRateCaseBoundaries:
    def test_bounded_jump_across_branches(self):
        # piecewise branches need not be continuous, but adjacent values
        # stay within a bounded factor on the fit windows
        t = 100.0
        d = 1e-9
        # 2s + n = 2 boundary (n=1, s=1/2)
        vals = [rate_function("G", t, s=0.5 + k * d, n=1) for k in (-1, 0, 1)]
        for a in vals:
            for b in vals:
                assert a / b < 10.0
        # 2s + n = 3 boundary (n=1, s=1)
        vals = [rate_function("G", t, s=1.0 + k * d, n=1) for k in (-1, 0, 1)]
        for a in vals:
            for b in vals:
                assert a / b < 10.0


class TestSinNormTwoSided:
    def test_ratio_to_sharp_rate_bounded_both_ways(self):
        # the (s=0, n=3) sin norm is two-sided comparable to t^(-1/4)
        p = ModelParams(2.0)
        ts = np.geomspace(1e4, 1e6, 7)
        vals = np.array([kernel_norm(t, 0.0, 3, "sin_part", p) for t in ts])
        ratio = vals / rate_function("H", ts, n=3)
        assert ratio.min() > 0.1
        assert ratio.max() < 10.0
        assert ratio.max() / ratio.min() < 1.5


class TestCosNormSlopeOnDecayWindow:
    def test_slope_within_tolerance_despite_zone_onset(self):
        # over t in [1e2, 1e4] the (s=0, n=3) cos norm is still entering
        # the zone-restricted asymptotic regime, but the slope already
        # sits within 0.05 of -3/4 (it is exact a decade later)
        p = ModelParams(2.0)
        ts = np.geomspace(1e2, 1e4, 9)
        vals = [kernel_norm(t, 0.0, 3, "cos_part", p) for t in ts]
        slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
        assert abs(slope + 0.75) <= 0.05


class TestDenseGridCrossCheck:
    def test_adaptive_matches_dense_composite_rule(self):
        # adaptive result for an oscillatory damped integrand against a
        # dense fixed composite rule refined until stable
        p = ModelParams(2.0)
        t = 2000.0
        gt, c = p.gamma_tilde, p.parabolic_decay

        def f(r):
            return np.sin(gt * r * t) ** 2 * np.exp(-2 * c * r * r * t) * r ** 2

        cap = [(0.0, 0.1, np.pi / (gt * t))]
        val, _ = adaptive_integral(f, 0.0, 0.1, cap_segments=cap)
        x, w = np.polynomial.legendre.leggauss(10)
        ref_prev = None
        for panels in (2000, 4000):
            edges = np.linspace(0.0, 0.1, panels + 1)
            half = 0.5 * np.diff(edges)
            mid = 0.5 * (edges[:-1] + edges[1:])
            nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
            weights = (half[:, None] * w[None, :]).ravel()
            ref = float((weights * f(nodes)).sum())
            if ref_prev is not None:
                assert ref == pytest.approx(ref_prev, rel=1e-12)
            ref_prev = ref
        assert val == pytest.approx(ref_prev, rel=1e-9)
