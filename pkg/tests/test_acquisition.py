import math

import numpy as np
import pytest
from scipy import stats

from acqfam.acquisition import (
    FamilyParams,
    ImprovementStats,
    family_value,
    improvement_stats,
    named_presets,
    preset,
)
from acqfam.gp import PredictiveDistribution

from oracles import quad_improvement_moment, random_triples


def literal_forms(mu, sigma, fmin):
    """EI, VI and the named criteria written out directly from the normal pdf/cdf."""
    z = (fmin - mu) / sigma
    pdf, cdf = stats.norm.pdf(z), stats.norm.cdf(z)
    ei = sigma * (z * cdf + pdf)
    vi = sigma**2 * ((z**2 + 1) * cdf + z * pdf) - ei**2
    pi = cdf
    pei2 = sigma**2 * ((z**2 + 1) * cdf + z * pdf)
    return z, ei, vi, pi, pei2


class TestPresets:
    def test_table(self):
        expected = {
            "EI": (0, 0, 1, 0),
            "PEI": (0, 0, 2, 0),
            "PI": (0, 0, 0, 0),
            "SEI": (0.5, 0, 1, 0),
            "VEI": (0, 1, 1, -0.5),
            "UEI": (0, 0.5, 1, 2),
        }
        got = {name: (p.u, p.v, p.w, p.beta) for name, p in named_presets()}
        assert got == expected

    def test_lookup(self):
        assert preset("sei") == FamilyParams(u=0.5, v=0, w=1, beta=0)
        with pytest.raises(KeyError):
            preset("XYZ")

    def test_constructors(self):
        assert FamilyParams.vei(xi=4) == FamilyParams(0, 1, 1, -2)
        assert FamilyParams.uei(gamma=3) == FamilyParams(0, 0.5, 1, 3)
        assert FamilyParams.pei(w=3).w == 3
        with pytest.raises(ValueError):
            FamilyParams.vei(xi=0)
        with pytest.raises(ValueError):
            FamilyParams.uei(gamma=-1)

    @pytest.mark.parametrize("kw", [{"u": -1}, {"v": -0.5}, {"w": 1.5}, {"w": -1}, {"beta": math.nan}])
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            FamilyParams(**kw)

    def test_parse(self):
        assert FamilyParams.parse("uei") == preset("UEI")
        assert FamilyParams.parse("0, 0.5, 1, 2") == preset("UEI")
        assert FamilyParams.parse("u=0.5,v=0,w=1,beta=0") == preset("SEI")
        with pytest.raises(ValueError):
            FamilyParams.parse("1,2,3")
        with pytest.raises(ValueError):
            FamilyParams.parse("v=0,u=0,w=1,beta=0")
        with pytest.raises(KeyError):
            FamilyParams.parse("nonsense")

    def test_key_and_slug(self):
        p = preset("UEI")
        assert p.key == "u=0,v=0.5,w=1,beta=2"
        assert p.slug == "u0_v0.5_w1_b2"
        assert FamilyParams.parse(p.key) == p


class TestImprovementStats:
    def test_zero_gap(self):
        s = improvement_stats(PredictiveDistribution(0.0, 1.0), fmin=0.0)
        assert s.ei == pytest.approx(0.3989422804, abs=1e-10)
        # analytic value 1/2 - phi(0)^2
        assert s.vi == pytest.approx(0.5 - 1 / (2 * math.pi), abs=1e-10)
        oracle = quad_improvement_moment(0, 1, 0, 2) - quad_improvement_moment(0, 1, 0, 1) ** 2
        assert s.vi == pytest.approx(oracle, abs=1e-10)

    def test_certain_improvement(self):
        s = improvement_stats(PredictiveDistribution(-2.0, 0.0), fmin=0.0, w=0)
        assert s.ei == 2.0 and s.vi == 0.0 and s.moment_w == 1.0
        s = improvement_stats(PredictiveDistribution(1.0, 0.0), fmin=0.0, w=3)
        assert s.ei == 0.0 and s.moment_w == 0.0

    def test_hopeless_tail(self):
        s = improvement_stats(PredictiveDistribution(10.0, 0.1), fmin=0.0)
        assert 0 <= s.ei < 1e-20
        assert 0 <= s.vi < 1e-20

    def test_sigma_to_zero_limit(self):
        for gap in (-1.0, 0.5, 3.0):
            s = improvement_stats(PredictiveDistribution(-gap, 1e-9), fmin=0.0)
            assert s.ei == pytest.approx(max(gap, 0.0), abs=1e-8)
            assert s.vi <= 1e-16

    def test_rejects_nan_and_negative_sd(self):
        with pytest.raises(ValueError):
            improvement_stats(PredictiveDistribution(0.0, -1.0), 0.0)
        with pytest.raises(ValueError):
            improvement_stats(PredictiveDistribution(math.nan, 1.0), 0.0)
        with pytest.raises(ValueError):
            family_value(ImprovementStats(0.1, math.nan, 0.1), preset("SEI"))


@pytest.fixture(scope="module")
def triples():
    # shifted so the incumbent is 0
    mu, sigma, fmin = random_triples(10_000, seed=3)
    return mu - fmin, sigma, np.zeros_like(mu)


class TestFamily:
    def test_reductions(self, triples):
        mu, sigma, fmin = triples
        z, ei, vi, pi, pei2 = literal_forms(mu, sigma, fmin)
        # the literal forms cancel badly far in the lower tail
        ok = z > -5
        for name, params in named_presets():
            st_ = improvement_stats(PredictiveDistribution(mu, sigma), 0.0, params.w)
            got = family_value(st_, params)
            expect = {
                "EI": ei,
                "PI": pi,
                "PEI": pei2,
                "SEI": ei / np.sqrt(np.maximum(vi, 1e-300)),
                "VEI": ei - 0.5 * vi,
                "UEI": ei + 2 * np.sqrt(np.maximum(vi, 0)),
            }[name]
            sel = ok & (z > -3) if name == "SEI" else ok
            assert np.allclose(got[sel], expect[sel], rtol=1e-8, atol=1e-12 * sigma[sel] ** 2), name

    def test_ei_is_exact_preset(self, triples):
        mu, sigma, fmin = triples
        s = improvement_stats(PredictiveDistribution(mu, sigma), 0.0)
        assert np.array_equal(family_value(s, preset("EI")), s.ei)

    def test_ordering(self, triples):
        mu, sigma, fmin = triples
        s = improvement_stats(PredictiveDistribution(mu, sigma), 0.0)
        ei = family_value(s, preset("EI"))
        uei = family_value(s, preset("UEI"))
        assert np.all(ei >= 0)
        assert np.all(uei >= ei)
        assert np.all(family_value(s, preset("VEI")) <= ei)

    def test_monotone_in_vi(self):
        vis = np.linspace(0.01, 4, 50)
        s = ImprovementStats(np.full(50, 0.3), vis, np.full(50, 0.3))
        assert np.all(np.diff(family_value(s, preset("UEI"))) > 0)
        assert np.all(np.diff(family_value(s, preset("VEI"))) < 0)
        assert np.all(np.diff(family_value(s, preset("SEI"))) < 0)

    def test_zero_vi_finite(self):
        s = improvement_stats(PredictiveDistribution(np.array([-1.0, 0.0]), np.array([0.0, 0.0])), 0.0)
        v = family_value(s, preset("SEI"))
        assert np.all(np.isfinite(v))
        assert v[0] > 1e5 and v[1] == 0.0
        s = improvement_stats(PredictiveDistribution(-100.0, 0.0), 0.0)
        assert np.isfinite(family_value(s, FamilyParams(u=1, v=0, w=1, beta=0)))

    def test_sei_is_literal_ratio_for_tiny_vi(self):
        # sd = 1e-3 and z = -5: VI is about 1e-15, far from any floor
        s = improvement_stats(PredictiveDistribution(5e-3, 1e-3), 0.0)
        assert family_value(s, preset("SEI")) == pytest.approx(s.ei / math.sqrt(s.vi), rel=1e-14)

    def test_zero_power_of_vi_is_one(self):
        s = ImprovementStats(0.2, 0.0, 0.2)
        assert family_value(s, FamilyParams(u=0, v=0, w=1, beta=3)) == pytest.approx(3.2)
