import math

import numpy as np
import pytest

from mmwave_ia.arrays import ArrayGeometry, LinkBudget, bf_gain_db, make_codebook, snr_db
from mmwave_ia.channel import (
    ChannelParams,
    Cluster,
    LinkRealization,
    PathlossState,
    Subpath,
    realize_link,
)
from mmwave_ia.protocols import (
    SchemeConfig,
    SearchKind,
    assign_rnti,
    exhaustive_margin_db,
    iterative_margin_db,
    narrow_sector_of,
    paper_schemes,
    run_exhaustive,
    run_iterative,
    sector_narrow_beams,
    slots_required,
)

EXH4, EXH16, IT4, IT16 = paper_schemes()
BUDGET = LinkBudget()


def books(scheme):
    narrow = make_codebook(scheme.bs_geometry(), scheme.bs_narrow_beams)
    ue = make_codebook(scheme.ue_geometry(), scheme.ue_rx_beams)
    wide = None
    if scheme.kind is SearchKind.ITERATIVE:
        wide = make_codebook(scheme.wide_geometry(), scheme.bs_wide_beams)
    return narrow, wide, ue


def single_path_link(aod, aoa, pathloss_db):
    cluster = Cluster(1.0, aod, aoa, 0.0, (Subpath(1 + 0j, aod, 0.0, aoa, 0.0),))
    return LinkRealization(PathlossState.LOS, pathloss_db, 50.0, clusters=(cluster,))


def outage_link():
    return LinkRealization(PathlossState.OUTAGE, math.inf, 50.0)


class TestSlots:
    def test_paper_slot_counts(self):
        assert slots_required(EXH4) == 80
        assert slots_required(EXH16) == 144
        assert slots_required(IT4) == 28
        assert slots_required(IT16) == 44

    def test_closed_form(self):
        cfg = SchemeConfig(label="x", kind=SearchKind.EXHAUSTIVE, ue_rx_beams=8, ue_rows=4, ue_cols=4)
        assert slots_required(cfg) == 16 * 9


class TestSectorNesting:
    def test_partition(self):
        seen = []
        for k in range(IT4.bs_wide_beams):
            idx = sector_narrow_beams(k, IT4)
            assert len(idx) == IT4.refine_beams
            seen.extend(idx)
        assert sorted(seen) == list(range(16))

    def test_nesting_is_centered(self):
        # narrow beam boresights map to the nearest wide boresight
        narrow = make_codebook(IT4.bs_geometry(), 16)
        for j, beam in enumerate(narrow.beams):
            sector = narrow_sector_of(j, IT4)
            wide_az = 2 * math.pi * sector / 4
            diff = abs((beam.boresight_azimuth - wide_az + math.pi) % (2 * math.pi) - math.pi)
            assert diff <= math.pi / 4 + 1e-12


class TestExhaustive:
    def test_outage(self):
        narrow, _, ue = books(EXH4)
        out = run_exhaustive(EXH4, outage_link(), narrow, ue, BUDGET)
        assert not out.detected
        assert out.slots_used == 80
        assert out.best_tx_beam is None and out.best_rx_beam is None and out.best_snr_db is None

    def test_aligned_beam_pair_selected(self):
        narrow, _, ue = books(EXH16)
        link = single_path_link(
            narrow.beams[3].boresight_azimuth, ue.beams[4].boresight_azimuth, pathloss_db=100.0
        )
        out = run_exhaustive(EXH16, link, narrow, ue, BUDGET, rnti=17)
        assert out.detected
        assert (out.best_tx_beam, out.best_rx_beam) == (3, 4)
        assert out.slots_used == 144

    def test_argmax_matches_brute_force(self):
        narrow, _, ue = books(EXH16)
        rng = np.random.default_rng(5)
        ch = ChannelParams()
        for _ in range(20):
            link = realize_link(60.0, ch, rng)
            if link.state is PathlossState.OUTAGE:
                continue
            out = run_exhaustive(EXH16, link, narrow, ue, BUDGET)
            snrs = np.array(
                [
                    [
                        snr_db(
                            bf_gain_db(tb, rb, link, narrow.geometry, ue.geometry),
                            link.pathloss_db,
                            BUDGET,
                        )
                        for rb in ue.beams
                    ]
                    for tb in narrow.beams
                ]
            )
            if snrs.max() >= BUDGET.snr_threshold_db:
                assert out.detected
                t, r = np.unravel_index(np.argmax(snrs), snrs.shape)
                assert (out.best_tx_beam, out.best_rx_beam) == (t, r)
                assert out.best_snr_db == pytest.approx(snrs.max(), abs=1e-9)
            else:
                assert not out.detected

    def test_all_below_threshold(self):
        narrow, _, ue = books(EXH4)
        link = single_path_link(0.3, 1.0, pathloss_db=250.0)
        out = run_exhaustive(EXH4, link, narrow, ue, BUDGET)
        assert not out.detected

    def test_codebook_size_mismatch(self):
        narrow, _, ue = books(EXH4)
        with pytest.raises(ValueError):
            run_exhaustive(EXH16, single_path_link(0, 0, 100.0), narrow, ue, BUDGET)


class TestIterative:
    def test_outage(self):
        narrow, wide, ue = books(IT4)
        out = run_iterative(IT4, outage_link(), wide, narrow, ue, BUDGET)
        assert not out.detected
        assert out.slots_used == 28
        assert out.macro_sector is None

    def test_refines_containing_sector(self):
        narrow, wide, ue = books(IT4)
        # narrow beam 5 nests in wide sector 1
        link = single_path_link(
            narrow.beams[5].boresight_azimuth, ue.beams[2].boresight_azimuth, pathloss_db=90.0
        )
        out = run_iterative(IT4, link, wide, narrow, ue, BUDGET)
        assert out.detected
        assert out.macro_sector == 1
        assert out.best_tx_beam == 5
        assert out.best_rx_beam == 2
        assert out.slots_used == 28

    def test_two_stage_agrees_with_brute_force_for_single_path(self):
        narrow, wide, ue = books(IT16)
        rng = np.random.default_rng(11)
        for _ in range(40):
            aod = rng.uniform(0, 2 * math.pi)
            aoa = rng.uniform(0, 2 * math.pi)
            link = single_path_link(aod, aoa, pathloss_db=95.0)
            out = run_iterative(IT16, link, wide, narrow, ue, BUDGET)
            if not out.detected:
                continue
            gains = np.array(
                [
                    [bf_gain_db(tb, rb, link, narrow.geometry, ue.geometry) for rb in ue.beams]
                    for tb in narrow.beams
                ]
            )
            t_best, r_best = np.unravel_index(np.argmax(gains), gains.shape)
            # the locked receive beam matches the global optimum and the
            # refined narrow beam is the best one inside the chosen sector
            assert out.best_rx_beam == r_best
            in_sector = sector_narrow_beams(out.macro_sector, IT16)
            assert out.best_tx_beam in in_sector
            assert gains[out.best_tx_beam, r_best] == max(gains[j, r_best] for j in in_sector)
            if t_best in in_sector:
                assert out.best_tx_beam == t_best

    def test_wide_phase_gates_detection(self):
        # a link the 64-element beams can detect but the 4-element wide
        # beams cannot: the iterative search misses it
        narrow, wide, ue = books(IT4)
        link = single_path_link(
            narrow.beams[5].boresight_azimuth, ue.beams[2].boresight_azimuth, pathloss_db=135.0
        )
        exh_out = run_exhaustive(EXH4, link, narrow, ue, BUDGET)
        it_out = run_iterative(IT4, link, wide, narrow, ue, BUDGET)
        assert exh_out.detected
        assert not it_out.detected


class TestDominance:
    @pytest.mark.parametrize("exh,it", [(EXH4, IT4), (EXH16, IT16)])
    def test_iterative_detection_implies_exhaustive(self, exh, it):
        narrow, wide, ue = books(it)
        rng = np.random.default_rng(21)
        ch = ChannelParams()
        checked = 0
        for _ in range(2000):
            link = realize_link(float(rng.uniform(10, 120)), ch, rng)
            it_out = run_iterative(it, link, wide, narrow, ue, BUDGET)
            exh_out = run_exhaustive(exh, link, narrow, ue, BUDGET)
            if it_out.detected:
                assert exh_out.detected
                checked += 1
        assert checked > 100


class TestMargins:
    def test_margin_equals_detection_threshold(self):
        narrow, wide, ue = books(IT16)
        rng = np.random.default_rng(31)
        ch = ChannelParams()
        for _ in range(200):
            link = realize_link(float(rng.uniform(20, 150)), ch, rng)
            m_exh = exhaustive_margin_db(EXH16, link, narrow, ue, BUDGET)
            m_it = iterative_margin_db(IT16, link, wide, narrow, ue, BUDGET)
            for tau in (-15.0, -5.0, 5.0):
                budget = LinkBudget(snr_threshold_db=tau)
                assert run_exhaustive(EXH16, link, narrow, ue, budget).detected == (m_exh >= tau)
                assert run_iterative(IT16, link, wide, narrow, ue, budget).detected == (m_it >= tau)

    def test_threshold_monotonicity(self):
        narrow, wide, ue = books(IT4)
        rng = np.random.default_rng(41)
        ch = ChannelParams()
        for _ in range(100):
            link = realize_link(float(rng.uniform(20, 150)), ch, rng)
            lo = run_iterative(IT4, link, wide, narrow, ue, LinkBudget(snr_threshold_db=-20.0))
            hi = run_iterative(IT4, link, wide, narrow, ue, LinkBudget(snr_threshold_db=-5.0))
            if hi.detected:
                assert lo.detected


class TestRnti:
    def test_singleton_space(self):
        assert assign_rnti(np.random.default_rng(0), space_size=1) == 0

    def test_reproducible(self):
        a = assign_rnti(np.random.default_rng(9))
        b = assign_rnti(np.random.default_rng(9))
        assert a == b

    def test_default_space_bounds(self):
        rng = np.random.default_rng(3)
        ids = [assign_rnti(rng) for _ in range(1000)]
        assert all(0 <= i < 2**16 for i in ids)
        assert len(set(ids)) > 900

    def test_invalid_space(self):
        with pytest.raises(ValueError):
            assign_rnti(np.random.default_rng(0), space_size=0)


def test_scheme_validation():
    with pytest.raises(ValueError):
        SchemeConfig(label="bad", kind=SearchKind.EXHAUSTIVE, ue_rx_beams=5).validate()
    with pytest.raises(ValueError):
        SchemeConfig(
            label="bad", kind=SearchKind.ITERATIVE, bs_narrow_beams=16, bs_wide_beams=4, refine_beams=2
        ).validate()
    for s in paper_schemes():
        s.validate()
