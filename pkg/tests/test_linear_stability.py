import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from twofluid.linear_stability import (
    SWEEP_COLUMNS,
    classify_primary,
    eigenvalues,
    ell_equal_nu_crit,
    ell_for_degenerate_overlap,
    ell_star,
    ell_star_polynomial,
    growth_indicator,
    instability_interval,
    kappa2_cutoff,
    max_location,
    mode_matrix,
    nu_crit,
    overlap_polynomial,
    spectrum_sweep,
    strip_dispersion,
)
from twofluid.spectral_core import DomainConfig

EPARS = DomainConfig.from_dT(L1=2.0, L2=2.0, nu=9e-4, dT=0.1)


def direct_solve_resolves(M, lp, lm, rtol=1e-12):
    """Whether LAPACK's eigenvalues are accurate to well below ``rtol`` relative to |lambda|."""
    gap = abs(lp - lm)
    err = np.finfo(float).eps * np.abs(M).max() ** 2 / gap if gap > 0 else np.inf
    return err <= 0.1 * rtol * max(abs(lp), abs(lm))


def cfg_strategy():
    return st.builds(
        lambda L1, ell, nu, dT: DomainConfig.from_dT(L1=L1, L2=ell * L1, nu=nu, dT=dT),
        st.floats(0.3, 5.0), st.floats(0.2, 8.0), st.floats(0.0, 5e-3), st.floats(-0.5, 3.0),
    )


class TestModeMatrix:
    def test_k2_zero_is_pure_diffusion(self):
        s = mode_matrix(EPARS, (3, 0))
        expected = -EPARS.nu * np.pi**2 * 9 / EPARS.L1**2
        assert s.lambda_plus == pytest.approx(expected) and s.lambda_minus == pytest.approx(expected)
        assert abs(s.lambda_plus.imag) == 0

    def test_epars_unstable_at_dT_01(self):
        s = mode_matrix(EPARS, (1, 1))
        assert s.lambda_plus.real > 0
        assert s.lambda_plus == pytest.approx(oracles.EPARS_LAMBDA_PLUS_DT01, rel=1e-13)

    @pytest.mark.parametrize("k2", [1, 2, 3, -2])
    def test_higher_k1_is_less_unstable(self, k2):
        assert mode_matrix(EPARS, (2, k2)).lambda_plus.real < mode_matrix(EPARS, (1, k2)).lambda_plus.real

    @settings(max_examples=200, deadline=None)
    @given(cfg_strategy(), st.integers(1, 12), st.integers(-12, 12))
    def test_closed_form_matches_direct_solve(self, cfg, k1, k2):
        s = mode_matrix(cfg, (k1, k2))
        scale = max(np.abs(s.M).max(), abs(s.lambda_plus), 1e-300)
        if direct_solve_resolves(s.M, s.lambda_plus, s.lambda_minus):
            assert s.residual <= 1e-12
        else:
            # close eigenvalues are ill-conditioned (error ~ eps |M|^2 / gap), so
            # the direct solve is the inaccurate side; check the invariants instead
            assert abs(s.lambda_plus + s.lambda_minus - np.trace(s.M)) <= 1e-12 * scale
            assert abs(s.lambda_plus * s.lambda_minus - np.linalg.det(s.M)) <= 1e-12 * scale**2
        if cfg.nu > 0:
            assert s.lambda_minus.real < 0
        if s.D.real <= 0:
            assert s.lambda_plus.real < 0 or (cfg.nu == 0 and s.lambda_plus.real <= 1e-15)


class TestGrowthIndicator:
    def test_endpoints_are_stable(self):
        for kap in (1, 4, 9, 2.5):
            assert growth_indicator(EPARS, 0.0, kap) <= 0
            assert growth_indicator(EPARS, 4 * EPARS.L1 / np.pi**2, kap) < 0

    def test_rejects_nonpositive_kappa(self):
        with pytest.raises(ValueError):
            growth_indicator(EPARS, 0.1, 0.0)

    @settings(max_examples=300, deadline=None)
    @given(cfg_strategy(), st.integers(1, 10))
    def test_sign_matches_real_part(self, cfg, k2):
        d = float(growth_indicator(cfg, cfg.dT, k2 * k2))
        re = mode_matrix(cfg, (1, k2)).lambda_plus.real
        if abs(d) > 1e-12 and abs(re) > 1e-12:
            assert np.sign(d) == np.sign(re)

    def test_argmax_location(self):
        for kap in (1, 4, 9):
            t = np.linspace(0, 1, 200001)
            d = growth_indicator(EPARS, t, kap)
            assert t[np.argmax(d)] == pytest.approx(max_location(EPARS, kap), abs=1e-5)
        assert max_location(EPARS, 1) > max_location(EPARS, 4) > max_location(EPARS, 9)


class TestInstabilityInterval:
    def test_epars_thresholds(self):
        r = instability_interval(EPARS, 1)
        assert r.status == "interval"
        assert r.dT2 == pytest.approx(0.162, abs=5e-4)
        assert r.dT2 == pytest.approx(oracles.EPARS_DT2, rel=1e-12)
        assert r.dT1 == pytest.approx(3.1e-4, rel=0.01)
        assert r.dT1 == pytest.approx(oracles.EPARS_DT1, rel=1e-10)

    def test_inviscid_upper_root(self):
        r = instability_interval(EPARS.with_(nu=0.0), 1)
        assert r.dT1 == 0.0
        assert r.dT2 == pytest.approx(8 / (5 * np.pi**2), rel=1e-14)
        ell, L1 = EPARS.ell, EPARS.L1
        assert r.dT2 == pytest.approx(4 * ell**2 * L1 / (np.pi**2 * (ell**2 + 4)), rel=1e-14)

    def test_absent_above_nu_crit(self):
        nc = nu_crit(EPARS, 1)
        assert instability_interval(EPARS.with_(nu=1.001 * nc), 1).status == "absent"
        assert instability_interval(EPARS.with_(nu=0.999 * nc), 1).status == "interval"
        p = instability_interval(EPARS.with_(nu=nc), 1)
        assert p.status == "point" and p.dT1 == p.dT2 == pytest.approx(max_location(EPARS, 1))

    @settings(max_examples=200, deadline=None)
    @given(cfg_strategy(), st.integers(1, 8))
    def test_roots_lie_in_bounds(self, cfg, k2):
        r = instability_interval(cfg, k2)
        if r.status != "absent":
            assert 0 <= r.dT1 <= r.dT2 <= 4 * cfg.L1 / np.pi**2 * (1 + 1e-14)
            assert r.contains(0.5 * (r.dT1 + r.dT2))

    def test_upper_root_tends_to_global_bound(self):
        L1 = 2.0  # keeps nu = 1/ell^2 below nu_crit(1) already at ell = 10
        gaps = []
        for ell in (10.0, 100.0, 1000.0):
            c = DomainConfig.from_dT(L1=L1, L2=ell * L1, nu=1 / ell**2, dT=0.1)
            gaps.append(4 * L1 / np.pi**2 - instability_interval(c, 1).dT2)
        assert gaps[0] > gaps[1] > gaps[2] > 0
        assert gaps[2] < 1e-5


class TestNuCrit:
    def test_value(self):
        c = DomainConfig.from_dT(L1=1.0, L2=1.0, nu=0.0, dT=0.1)
        assert nu_crit(c, 1) == pytest.approx(oracles.NU_CRIT_ELL1_L1_1, rel=1e-14)
        assert nu_crit(c, 1) == pytest.approx(2 / (25 * np.pi**3), rel=1e-14)

    def test_equal_crossing_geometry(self):
        ell = 2 * math.sqrt(2 + 3 * math.sqrt(2))
        assert ell_equal_nu_crit(1, 4) == pytest.approx(ell, rel=1e-14)
        c = DomainConfig.from_dT(L1=1.0, L2=ell, nu=0.0, dT=0.1)
        assert abs(nu_crit(c, 1) - nu_crit(c, 4)) <= 1e-12 * nu_crit(c, 1)

    def test_decays_in_kappa(self):
        vals = nu_crit(EPARS, np.array([1e2, 1e4, 1e6]))
        assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-6


class TestClassification:
    def test_epars_is_primary(self):
        r = classify_primary(EPARS)
        assert r.classification == "primary"
        assert r.certificate["fast_path_ell_le_2sqrt2"]
        assert r.dT1 == pytest.approx(3.1e-4, rel=0.01) and r.dT2 == pytest.approx(0.162, abs=5e-4)

    def test_degenerate_overlap_is_not_primary(self):
        ell = ell_for_degenerate_overlap(4)
        c = DomainConfig.from_dT(L1=1.0, L2=ell, nu=0.0, dT=0.1)
        c = c.with_(nu=float(nu_crit(c, 1)))
        r = classify_primary(c)
        assert r.status == "point"
        assert r.classification == "not_primary"
        row = next(x for x in r.certificate["rows"] if x["k2"] == 2)
        assert row["region_dT2"] == pytest.approx(r.dT2, rel=1e-9)

    def test_no_region_raises(self):
        with pytest.raises(ValueError):
            classify_primary(EPARS.with_(nu=1.0))

    def test_inviscid_is_unknown(self):
        assert classify_primary(EPARS.with_(nu=0.0)).classification == "unknown"

    @pytest.mark.parametrize("ell", [1.0, 3.5, 6.0, 9.0])
    def test_small_viscosity_right_threshold_is_critical(self, ell):
        c = DomainConfig.from_dT(L1=1.0, L2=ell, nu=0.0, dT=0.1)
        c = c.with_(nu=1e-3 * float(nu_crit(c, 1)))
        r = classify_primary(c)
        assert r.certificate["right_threshold_critical"]
        assert r.certificate["k2_checked"] >= math.ceil(math.sqrt(kappa2_cutoff(c, r.dT1)))

    def test_certificate_serializes(self):
        import json
        json.dumps(classify_primary(EPARS).to_dict())


class TestSpecialGeometries:
    def test_ell4_ell9(self):
        l4, l9 = ell_for_degenerate_overlap(4), ell_for_degenerate_overlap(9)
        assert l4 == pytest.approx(5.37, abs=0.01) and l9 == pytest.approx(7.22, abs=0.01)
        assert l4 == pytest.approx(oracles.ELL_4, rel=1e-12)
        assert l9 == pytest.approx(oracles.ELL_9, rel=1e-12)
        assert abs(overlap_polynomial(l4, 4)) <= 1e-9 * l4**6

    def test_overlap_root_increases_in_kappa(self):
        ks = [1.5, 2, 4, 9, 16, 100]
        ls = [ell_for_degenerate_overlap(k) for k in ks]
        assert np.all(np.diff(ls) > 0)

    def test_overlap_root_domain(self):
        with pytest.raises(ValueError):
            ell_for_degenerate_overlap(1.0)

    def test_overlap_root_is_degenerate_overlap(self):
        # at nu = nu_crit(1) the point region sits exactly on dT2(kappa2)
        for k2 in (2, 3):
            ell = ell_for_degenerate_overlap(k2 * k2)
            c = DomainConfig.from_dT(L1=1.7, L2=1.7 * ell, nu=0.0, dT=0.1)
            c = c.with_(nu=float(nu_crit(c, 1)))
            other = instability_interval(c, k2)
            assert other.dT2 == pytest.approx(max_location(c, 1), rel=1e-10)

    def test_ell_star(self):
        r = ell_star()
        assert r == pytest.approx(4.053, abs=5e-4)
        assert r == pytest.approx(oracles.ELL_STAR, rel=1e-12)
        assert abs(ell_star_polynomial(r)) <= 1e-9 * 16 * (r**2 + 4) ** 2
        assert ell_star_polynomial(1.0) > 0 > ell_star_polynomial(10.0)


class TestTables:
    def test_sweep_shape_and_consistency(self):
        c = DomainConfig.from_dT(L1=1.0, L2=1.0, nu=1e-3, dT=0.1)
        dts = np.linspace(-0.05, 0.5, 111)
        tab = spectrum_sweep(c, dts, 10, 10)
        assert tab.shape == (len(dts) * 10 * 21, len(SWEEP_COLUMNS))
        regions = [instability_interval(c, k2) for k2 in range(1, 11)]
        for dT in dts:
            rows = tab[tab[:, 0] == dT]
            unstable = rows[:, 3].max() > 0
            inside = any(r.contains(dT) for r in regions)
            assert unstable == inside
        assert np.all(tab[(tab[:, 0] < 0) | (tab[:, 0] > 4 / np.pi**2), 3] <= 0)

    def test_sweep_matches_mode_matrix(self):
        tab = spectrum_sweep(EPARS, [0.1], 2, 2)
        row = tab[(tab[:, 1] == 1) & (tab[:, 2] == 1)][0]
        assert complex(row[3], row[4]) == pytest.approx(oracles.EPARS_LAMBDA_PLUS_DT01, rel=1e-13)

    def test_strip_dispersion_regimes(self):
        ell = ell_for_degenerate_overlap(4)
        c = DomainConfig.from_dT(L1=1.0, L2=ell, nu=0.0, dT=0.1)
        c = c.with_(nu=float(nu_crit(c, 1)))
        q = np.linspace(1e-3, 3.0, 30001)
        stable = strip_dispersion(c.with_dT(0.05), 0.05, q)
        near = strip_dispersion(c.with_dT(0.08), 0.08, q)
        unstable = strip_dispersion(c.with_dT(0.2), 0.2, q)
        assert stable[:, 1].max() < 0
        assert abs(near[:, 1].max()) < 1e-3
        assert unstable[:, 1].max() > 0
        assert unstable[np.argmax(unstable[:, 1]), 0] == pytest.approx(0.265, abs=2e-3)

    def test_strip_dispersion_at_zero_wavenumber(self):
        t = strip_dispersion(EPARS, 0.1, [0.0])
        assert t[0, 1] == pytest.approx(-EPARS.nu * np.pi**2 / EPARS.L1**2)

    def test_vectorized_eigenvalues(self):
        lp, lm = eigenvalues(EPARS, np.array([1, 2]), np.array([1, 1]))
        assert lp.shape == (2,) and lp[0] == pytest.approx(oracles.EPARS_LAMBDA_PLUS_DT01)
