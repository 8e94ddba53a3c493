"""Characteristic-root solver, discriminant and branch-tracking tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscowave import (DomainError, FrequencyGrid, InvalidParameterError,
                       MissingParameterError, ModelParams, RootSet,
                       asymptotic_roots, cubic_char_roots, cubic_discriminant,
                       cubic_discriminant_expanded, discriminant_zero_radii,
                       quartic_char_roots, track_branches)
from viscowave.spectrum import (RESIDUAL_RTOL, cubic_char_roots_batch,
                                quartic_char_roots_batch)


def sorted_real(roots):
    return np.sort(roots.real)


class TestModelParams:
    def test_gamma_tilde_identity(self):
        for g in (1.0001, 1.5, 2.0, 6.0, 9.99):
            p = ModelParams(g)
            assert p.gamma_tilde ** 2 * g == pytest.approx(g - 1.0, rel=4e-16)

    def test_invalid_gamma(self):
        for g in (1.0, 0.5, -2.0, float("nan"), float("inf")):
            with pytest.raises(InvalidParameterError):
                ModelParams(g)

    def test_invalid_tau(self):
        for tau in (0.0, 1.0, -0.1, float("nan")):
            with pytest.raises(InvalidParameterError):
                ModelParams(2.0, tau)

    def test_require_tau(self):
        with pytest.raises(MissingParameterError):
            ModelParams(2.0).require_tau()


class TestCubicRoots:
    def test_factored_form_at_zero_frequency(self):
        rs = cubic_char_roots(ModelParams(2.0), 0.0)
        assert sorted_real(rs.roots) == pytest.approx([-2.0, 0.0, 0.0], abs=1e-12)
        assert rs.multiplicity_flag  # double root at the origin

    def test_small_frequency_expansion_values(self):
        # real branch -gamma + r^2/gamma^2, oscillatory pair
        # +-i sqrt((g-1)/g) r - (g^2+1)/(2 g^2) r^2, remainders O(r^3)
        p = ModelParams(2.0)
        r = 0.01
        rs = cubic_char_roots(p, r)
        real_root = rs.roots[np.argmin(np.abs(rs.roots.imag))]
        assert real_root.real == pytest.approx(-1.999975, abs=1e-7)
        pair = rs.roots[np.abs(rs.roots.imag) > 0]
        assert len(pair) == 2
        assert np.abs(pair.imag) == pytest.approx(p.gamma_tilde * r, abs=1e-6)
        assert pair.real == pytest.approx(-0.625e-4, abs=1e-7)

    def test_residual_bound_spot(self):
        rs = cubic_char_roots(ModelParams(2.0), 0.5)
        # independent check against numpy's own solver
        ref = np.sort_complex(np.roots([1.0, 0.25 + 2.0, 3.0 * 0.25, 1.0 * 0.25]))
        assert np.allclose(np.sort_complex(rs.roots), ref, rtol=1e-8)
        assert np.all(rs.residuals < 1e-10)

    def test_negative_frequency_rejected(self):
        with pytest.raises(DomainError):
            cubic_char_roots(ModelParams(2.0), -0.1)

    def test_nonfinite_frequency_rejected(self):
        with pytest.raises(InvalidParameterError):
            cubic_char_roots(ModelParams(2.0), float("inf"))

    @settings(max_examples=80, deadline=None)
    @given(g=st.floats(1.001, 10.0), r=st.floats(0.0, 100.0))
    def test_residual_and_conjugacy_property(self, g, r):
        roots, resid, scales, _ = cubic_char_roots_batch(ModelParams(g), np.array([r]))
        assert np.all(resid < RESIDUAL_RTOL * scales)
        gap = np.abs(np.sort_complex(roots[0]) - np.sort_complex(np.conj(roots[0])))
        assert gap.max() <= 1e-12

    def test_triple_root_is_flagged(self):
        # the cubic collapses to (lam+1)^3 at gamma=2, r=1
        rs = cubic_char_roots(ModelParams(2.0), 1.0)
        assert rs.multiplicity_flag
        assert np.allclose(rs.roots, -1.0, atol=1e-4)


class TestQuarticRoots:
    def test_factored_form_at_zero_frequency(self):
        rs = quartic_char_roots(ModelParams(2.0, 0.1), 0.0)
        assert sorted_real(rs.roots) == pytest.approx([-10.0, -2.0, 0.0, 0.0], abs=1e-9)
        assert rs.multiplicity_flag

    def test_small_frequency_structure(self):
        p = ModelParams(2.0, 0.1)
        r = 0.01
        rs = quartic_char_roots(p, r)
        reals = np.sort(rs.roots[np.abs(rs.roots.imag) < 1e-12].real)
        assert reals[0] == pytest.approx(-10.0, abs=1e-3)
        assert reals[1] == pytest.approx(-2.0, abs=1e-3)
        pair = rs.roots[np.abs(rs.roots.imag) > 1e-12]
        expected_re = -((1 - 0.1) * 4 + 0.1 * 2 + 1) / 8 * r * r
        assert pair.real == pytest.approx(expected_re, rel=1e-2)
        assert np.abs(pair.imag) == pytest.approx(p.gamma_tilde * r, rel=1e-3)

    def test_large_frequency_structure(self):
        p = ModelParams(2.0, 0.1)
        r = 50.0
        rs = quartic_char_roots(p, r)
        pair = rs.roots[np.abs(rs.roots.imag) > 1.0]
        assert np.abs(pair.imag) == pytest.approx(r / np.sqrt(0.1), rel=1e-3)
        assert pair.real == pytest.approx(-(1 - 0.1) / (2 * 0.1), rel=1e-2)
        slow = rs.roots[np.abs(rs.roots.imag) < 1.0]
        disc = np.sqrt(9.0 - 4.0)
        assert sorted_real(slow) == pytest.approx(
            [-(3 + disc) / 2, -(3 - disc) / 2], rel=1e-2)

    def test_missing_tau(self):
        with pytest.raises(MissingParameterError):
            quartic_char_roots(ModelParams(2.0), 1.0)

    @settings(max_examples=60, deadline=None)
    @given(g=st.floats(1.001, 10.0), tau=st.floats(0.01, 0.99),
           r=st.floats(0.0, 100.0))
    def test_residual_property(self, g, tau, r):
        roots, resid, scales, _ = quartic_char_roots_batch(
            ModelParams(g, tau), np.array([r]))
        assert np.all(resid < RESIDUAL_RTOL * scales)


class TestDiscriminant:
    def test_sign_small_and_large(self):
        p = ModelParams(2.0)
        assert cubic_discriminant(p, 0.01) < 0
        assert cubic_discriminant(p, 100.0) > 0

    def test_closed_forms_agree(self):
        # resultant-based formula vs polynomial-in-r^2 expansion
        rng = np.random.default_rng(7)
        for _ in range(200):
            g = rng.uniform(1.01, 10.0)
            r = rng.uniform(0.0, 50.0)
            a = cubic_discriminant(ModelParams(g), r)
            b = cubic_discriminant_expanded(ModelParams(g), r)
            assert a == pytest.approx(b, rel=1e-9, abs=1e-6)

    def test_zero_radii_match_sign_changes(self):
        # at gamma=2 the discriminant factors as r^2 (r^2-1)^2 (5 r^2-32);
        # the double zero at r=1 is resolved to ~sqrt(eps) only
        p = ModelParams(2.0)
        radii = discriminant_zero_radii(p)
        assert radii == pytest.approx([1.0, 1.0, np.sqrt(32.0 / 5.0)], abs=1e-7)
        for r in radii:
            assert abs(cubic_discriminant_expanded(p, r)) < 1e-6


class TestAsymptoticRoots:
    def test_zone_mismatch_rejected(self):
        p = ModelParams(2.0)
        with pytest.raises(DomainError):
            asymptotic_roots(p, 0.5, "small", "vdw")
        with pytest.raises(DomainError):
            asymptotic_roots(p, 2.0, "large", "vdw")
        with pytest.raises(DomainError):
            asymptotic_roots(p, 0.01, "middle", "vdw")

    def test_small_zone_at_origin_equals_exact(self):
        p = ModelParams(2.0)
        approx = asymptotic_roots(p, 0.0, "small", "vdw")
        exact = cubic_char_roots(p, 0.0)
        assert np.allclose(np.sort_complex(approx.roots),
                           np.sort_complex(exact.roots), atol=1e-12)
        assert approx.approximate

    @staticmethod
    def _max_gap(params, r, zone, equation, eps_cut=0.1):
        approx = asymptotic_roots(params, r, zone, equation, eps_cut=eps_cut)
        if equation == "vdw":
            exact = cubic_char_roots(params, r)
        else:
            exact = quartic_char_roots(params, r)
        gaps = np.abs(exact.roots[:, None] - approx.roots[None, :])
        # nearest-neighbour matching of expansion to exact branches
        order = np.argmin(gaps, axis=1)
        return float(np.abs(exact.roots - approx.roots[order]).max())

    def test_small_zone_remainder_bounded(self):
        # remainder / r^3 must not grow as r -> 0 (a widened cut admits the
        # r = 0.1 endpoint of the geometric sequence)
        for g in (1.5, 2.0, 6.0):
            p = ModelParams(g)
            q = [self._max_gap(p, r, "small", "vdw", eps_cut=0.11) / r ** 3
                 for r in (1e-1, 1e-2, 1e-3, 1e-4)]
            for a, b in zip(q, q[1:]):
                assert b < 3.0 * a

    def test_large_zone_remainder_bounded(self):
        for g in (1.5, 2.0, 6.0):
            p = ModelParams(g)
            q = [self._max_gap(p, r, "large", "vdw") * r
                 for r in (1e2, 1e3)]
            assert q[1] < 3.0 * q[0]

    def test_mgt_small_zone_pair_order(self):
        p = ModelParams(2.0, 0.2)
        gaps = []
        for r in (1e-2, 1e-3):
            approx = asymptotic_roots(p, r, "small", "mgt")
            exact = quartic_char_roots(p, r)
            pair_a = approx.roots[np.abs(approx.roots.imag) > 0]
            pair_e = exact.roots[np.abs(exact.roots.imag) > 0]
            gaps.append(np.abs(np.sort_complex(pair_a)
                               - np.sort_complex(pair_e)).max() / r ** 3)
        assert gaps[1] < 3.0 * gaps[0]


class TestSpectralLimit:
    def test_quartic_roots_converge_to_cubic(self):
        # three branches approach the cubic roots like tau, the fourth
        # diverges like -1/tau
        g, r = 2.0, 0.5
        cubic = np.sort_complex(cubic_char_roots(ModelParams(g), r).roots)
        prev_gap = None
        for tau in (1e-2, 1e-3, 1e-4):
            quart = quartic_char_roots(ModelParams(g, tau), r).roots
            fast = quart[np.argmin(quart.real)]
            assert fast.real * tau == pytest.approx(-1.0, rel=1e-2)
            slow = np.sort_complex(quart[quart != fast])
            gap = np.abs(slow - cubic).max()
            assert gap < 10.0 * tau
            if prev_gap is not None:
                assert gap < prev_gap
            prev_gap = gap


class TestBoundedZoneStability:
    @pytest.mark.parametrize("gamma", [1.1, 2.0, 6.0])
    def test_spectral_abscissa_negative(self, gamma):
        nodes = np.linspace(0.1, 10.0, 1000)
        roots, _, _, _ = cubic_char_roots_batch(ModelParams(gamma), nodes)
        assert roots.real.max() < 0.0


class TestTrackBranches:
    def test_identity_on_constant_sweep(self):
        p = ModelParams(2.0)
        base = cubic_char_roots(p, 0.0)
        sets = [RootSet(0.0, base.roots.copy(), base.residuals.copy(),
                        base.multiplicity_flag) for _ in range(5)]
        tracked = track_branches(sets)
        for t in tracked:
            assert np.array_equal(t.roots, base.roots)
        # the repeated double root ties the matching; nodes are flagged and
        # resolved by the canonical (Re, Im) order
        assert all(t.ambiguous_match for t in tracked[1:])

    def test_sweep_continuity(self):
        p = ModelParams(2.0)
        grid = np.geomspace(1e-3, 10.0, 200)
        roots, resid, _, flags = cubic_char_roots_batch(p, grid)
        sets = [RootSet(float(grid[i]), roots[i], resid[i], bool(flags[i]))
                for i in range(len(grid))]
        tracked = track_branches(sets)
        arr = np.stack([t.roots for t in tracked])
        jumps = np.abs(np.diff(arr, axis=0))
        rel = jumps / (1.0 + np.abs(arr[:-1]))
        assert rel.max() < 0.3
        # below the first coalescence radius (triple root at r = 1) branch
        # identities are unambiguous: the oscillatory pair never swaps with
        # the real branch
        seg = grid < 0.95
        pair_cols = [j for j in range(3) if np.abs(arr[0, j].imag) > 0]
        assert len(pair_cols) == 2
        a, b = pair_cols
        real_col = ({0, 1, 2} - set(pair_cols)).pop()
        assert np.allclose(arr[seg, a], np.conj(arr[seg, b]), rtol=1e-10, atol=1e-12)
        assert np.all(np.abs(arr[seg, real_col].imag) == 0.0)
        # past the pinch every node still carries a conjugate-consistent set
        assert np.allclose(np.sort_complex(arr), np.sort_complex(np.conj(arr)),
                           rtol=1e-12, atol=1e-12)

    def test_multiplicity_flag_near_sign_change(self):
        # bisect the discriminant sign change and expect a flagged node there
        p = ModelParams(6.0)
        lo, hi = 2.0, 2.5   # brackets sqrt(5), a coalescence radius
        flo = cubic_discriminant_expanded(p, lo)
        assert flo * cubic_discriminant_expanded(p, hi) < 0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            fmid = cubic_discriminant_expanded(p, mid)
            if fmid == 0.0:
                lo = hi = mid
                break
            if (fmid > 0) == (flo > 0):
                lo, flo = mid, fmid
            else:
                hi = mid
        sweep = np.unique(np.concatenate([
            np.geomspace(1.0, 4.0, 40), [lo, hi]]))
        roots, resid, _, flags = cubic_char_roots_batch(p, sweep)
        sets = [RootSet(float(sweep[i]), roots[i], resid[i], bool(flags[i]))
                for i in range(len(sweep))]
        tracked = track_branches(sets)
        assert any(t.multiplicity_flag for t in tracked)

    def test_unsorted_input_rejected(self):
        p = ModelParams(2.0)
        a = cubic_char_roots(p, 1.5)
        b = cubic_char_roots(p, 0.5)
        with pytest.raises(DomainError):
            track_branches([a, b])


class TestFrequencyGrid:
    def test_invariants_enforced(self):
        with pytest.raises(InvalidParameterError):
            FrequencyGrid(np.array([1.0, 0.5]), np.array([0.1, 0.1]))
        with pytest.raises(InvalidParameterError):
            FrequencyGrid(np.array([0.5, 1.0]), np.array([0.1, -0.1]))
        with pytest.raises(InvalidParameterError):
            FrequencyGrid(np.array([0.5, 1.0]), np.array([0.1, 0.1]),
                          eps_cut=2.0, n_cut=1.0)

    def test_composite_gauss_avoids_origin(self):
        grid = FrequencyGrid.composite_gauss(0.0, 5.0, panels=8, order=6)
        assert grid.nodes[0] > 0.0
        assert np.all(np.diff(grid.nodes) > 0)
        # quadrature sanity: integrate r^2 over [0, 5]
        assert (grid.weights * grid.nodes ** 2).sum() == pytest.approx(125 / 3, rel=1e-12)
