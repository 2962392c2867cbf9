import math

import numpy as np
import pytest
from scipy import stats

from mmwave_ia.channel import (
    ChannelParams,
    PathlossState,
    realize_link,
    sample_clusters,
    sample_pathloss_db,
    sample_state,
    state_probabilities,
)

PARAMS = ChannelParams()


def rng(seed=0):
    return np.random.default_rng(seed)


class TestStateProbabilities:
    def test_sum_to_one(self):
        for d in [0.5, 1, 10, 95, 150, 300, 1e4]:
            p_los, p_nlos, p_out = state_probabilities(d, PARAMS)
            # p_nlos is the exact complement by construction
            assert p_nlos == 1.0 - p_out - p_los
            assert p_los + p_nlos + p_out == pytest.approx(1.0, abs=1e-12)
            assert min(p_los, p_nlos, p_out) >= 0.0

    def test_short_range_is_los(self):
        p_los, _, p_out = state_probabilities(1.0, PARAMS)
        assert p_out < 0.01
        assert p_los > 0.9

    def test_outage_material_at_150m(self):
        # configured curve: 1 - exp(-a*150 + b)
        _, _, p_out = state_probabilities(150.0, PARAMS)
        expected = 1.0 - math.exp(-PARAMS.outage_a_per_m * 150.0 + PARAMS.outage_b)
        assert p_out == pytest.approx(expected)
        assert p_out > 0.3

    def test_monotone_in_distance(self):
        ds = np.arange(1, 301)
        probs = [state_probabilities(float(d), PARAMS) for d in ds]
        p_los = [p[0] for p in probs]
        p_out = [p[2] for p in probs]
        assert all(a >= b - 1e-15 for a, b in zip(p_los, p_los[1:]))
        assert all(a <= b + 1e-15 for a, b in zip(p_out, p_out[1:]))

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            state_probabilities(0.0, PARAMS)
        with pytest.raises(ValueError):
            sample_state(-3.0, PARAMS, rng())


class TestPathloss:
    def test_los_intercept_at_one_meter(self):
        p = ChannelParams(los_shadow_sigma_db=0.0)
        assert sample_pathloss_db(PathlossState.LOS, 1.0, p, rng()) == pytest.approx(61.4)

    def test_los_closed_form_at_50m(self):
        p = ChannelParams(los_shadow_sigma_db=0.0)
        pl = sample_pathloss_db(PathlossState.LOS, 50.0, p, rng())
        assert pl == pytest.approx(61.4 + 20.0 * math.log10(50.0))
        assert pl == pytest.approx(95.3794, abs=1e-4)

    def test_nlos_exceeds_los_in_expectation(self):
        p = ChannelParams(los_shadow_sigma_db=0.0, nlos_shadow_sigma_db=0.0)
        for d in [5.0, 50.0, 150.0]:
            los = sample_pathloss_db(PathlossState.LOS, d, p, rng())
            nlos = sample_pathloss_db(PathlossState.NLOS, d, p, rng())
            assert nlos >= los

    def test_outage_rejected(self):
        with pytest.raises(ValueError):
            sample_pathloss_db(PathlossState.OUTAGE, 10.0, PARAMS, rng())

    def test_shadowing_moments(self):
        # sample mean -> 0 and sample sigma -> configured sigma (2% at 1e6)
        r = rng(42)
        n = 1_000_000
        det = 61.4 + 20.0 * math.log10(50.0)
        draws = np.fromiter(
            (sample_pathloss_db(PathlossState.LOS, 50.0, PARAMS, r) for _ in range(n)),
            dtype=float,
            count=n,
        )
        shadows = draws - det
        assert abs(shadows.mean()) < 0.02 * PARAMS.los_shadow_sigma_db
        assert shadows.std() == pytest.approx(PARAMS.los_shadow_sigma_db, rel=0.02)

    def test_mean_matches_deterministic_part(self):
        # mean over draws equals the deterministic part within 0.1 dB at 1e5
        r = rng(7)
        n = 100_000
        draws = [sample_pathloss_db(PathlossState.NLOS, 80.0, PARAMS, r) for _ in range(n)]
        det = 72.0 + 29.2 * math.log10(80.0)
        assert np.mean(draws) == pytest.approx(det, abs=0.1)


class TestClusters:
    def test_at_least_one_cluster(self):
        r = rng(1)
        for _ in range(200):
            assert len(sample_clusters(PARAMS, r)) >= 1

    def test_power_fractions_normalized(self):
        r = rng(2)
        for _ in range(200):
            clusters = sample_clusters(PARAMS, r)
            total = sum(c.power_fraction for c in clusters)
            assert abs(total - 1.0) < 1e-9
            assert all(0.0 <= c.power_fraction <= 1.0 for c in clusters)

    def test_subpath_count(self):
        clusters = sample_clusters(PARAMS, rng(3))
        assert all(len(c.subpaths) == PARAMS.subpaths_per_cluster for c in clusters)

    def test_central_azimuths_uniform(self):
        # pooled over 1e4 draws; chi-square against uniform on 8 bins
        r = rng(4)
        aod, aoa = [], []
        for _ in range(10_000):
            for c in sample_clusters(PARAMS, r):
                aod.append(c.central_aod_azimuth)
                aoa.append(c.central_aoa_azimuth)
        for angles in (aod, aoa):
            counts, _ = np.histogram(angles, bins=8, range=(0.0, 2.0 * math.pi))
            assert stats.chisquare(counts).pvalue > 0.01

    def test_subpath_power_matches_fraction(self):
        # E[sum |gain|^2] over a cluster equals its power fraction (5% at 1e4)
        r = rng(5)
        ratios = []
        for _ in range(10_000):
            for c in sample_clusters(PARAMS, r):
                power = sum(abs(sp.gain) ** 2 for sp in c.subpaths)
                ratios.append(power / c.power_fraction)
        assert np.mean(ratios) == pytest.approx(1.0, rel=0.05)

    def test_subpath_angles_scatter_around_center(self):
        r = rng(6)
        offsets = []
        for _ in range(2000):
            for c in sample_clusters(PARAMS, r):
                for sp in c.subpaths:
                    off = (sp.aod_azimuth - c.central_aod_azimuth + math.pi) % (2 * math.pi) - math.pi
                    offsets.append(off)
        spread = math.degrees(np.std(offsets))
        assert spread == pytest.approx(PARAMS.azimuth_spread_deg, rel=0.1)


class TestRealizeLink:
    def test_outage_has_no_clusters(self):
        p = ChannelParams(outage_a_per_m=10.0, outage_b=0.0)  # p_out(10) ~ 1
        link = realize_link(10.0, p, rng(0))
        assert link.state is PathlossState.OUTAGE
        assert link.clusters == ()
        assert math.isinf(link.pathloss_db)

    def test_los_link_is_populated(self):
        p = ChannelParams(los_prob_decay_per_m=0.0)  # LOS certain below outage onset
        link = realize_link(10.0, p, rng(0))
        assert link.state is PathlossState.LOS
        assert math.isfinite(link.pathloss_db)
        assert len(link.clusters) >= 1

    def test_deterministic_under_seed(self):
        a = realize_link(40.0, PARAMS, rng(123))
        b = realize_link(40.0, PARAMS, rng(123))
        assert a == b

    def test_different_seeds_differ(self):
        a = realize_link(40.0, PARAMS, rng(1))
        b = realize_link(40.0, PARAMS, rng(2))
        assert a != b


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(los_pl_exponent=0.0).validate()
    with pytest.raises(ValueError):
        ChannelParams(cluster_rate=0.0).validate()
    with pytest.raises(ValueError):
        ChannelParams(subpaths_per_cluster=0).validate()
    ChannelParams().validate()
