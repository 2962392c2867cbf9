"""Slot-accurate exhaustive and iterative directional-search procedures.

Both procedures sweep synchronization signals over a downlink codebook in
fixed macroelements (one DL slot per UE receive beam plus one UL feedback
slot per swept direction) and always complete the full scan before the
decision, so the slot count is a closed-form function of the
configuration. Detection is SNR-thresholded per beam pair on a single
link realization; uplink feedback is assumed error-free once downlink
detection succeeded.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .arrays import ArrayGeometry, Codebook, LinkBudget, codebook_pair_gains_db
from .channel import LinkRealization, PathlossState, RandomStream

RNTI_SPACE_SIZE = 2**16


class SearchKind(enum.Enum):
    EXHAUSTIVE = "exhaustive"
    ITERATIVE = "iterative"


@dataclass(frozen=True)
class SchemeConfig:
    """One search procedure: beam counts plus the array panels they use."""

    label: str
    kind: SearchKind
    bs_narrow_beams: int = 16
    ue_rx_beams: int = 4
    bs_wide_beams: int = 4
    refine_beams: int = 4
    bs_rows: int = 8
    bs_cols: int = 8
    ue_rows: int = 2
    ue_cols: int = 2
    wide_rows: int = 2
    wide_cols: int = 2

    def validate(self) -> None:
        if self.ue_rx_beams not in (4, 8):
            raise ValueError("ue_rx_beams must be 4 or 8")
        if self.bs_narrow_beams < 1:
            raise ValueError("bs_narrow_beams must be >= 1")
        if self.kind is SearchKind.ITERATIVE:
            if self.bs_narrow_beams != self.bs_wide_beams * self.refine_beams:
                raise ValueError(
                    "iterative search needs bs_narrow_beams == bs_wide_beams * refine_beams"
                )

    def bs_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.bs_rows, self.bs_cols)

    def ue_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.ue_rows, self.ue_cols)

    def wide_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.wide_rows, self.wide_cols)


def paper_schemes() -> tuple[SchemeConfig, ...]:
    """The four reference configurations (TX antennas x RX antennas)."""
    return (
        SchemeConfig(label="exh-64x4", kind=SearchKind.EXHAUSTIVE, ue_rx_beams=4,
                     ue_rows=2, ue_cols=2),
        SchemeConfig(label="exh-64x16", kind=SearchKind.EXHAUSTIVE, ue_rx_beams=8,
                     ue_rows=4, ue_cols=4),
        SchemeConfig(label="it-64x4", kind=SearchKind.ITERATIVE, ue_rx_beams=4,
                     ue_rows=2, ue_cols=2),
        SchemeConfig(label="it-64x16", kind=SearchKind.ITERATIVE, ue_rx_beams=8,
                     ue_rows=4, ue_cols=4),
    )


@dataclass(frozen=True)
class BsTableEntry:
    rnti: int
    sector_index: int
    snr_db: float


@dataclass(frozen=True)
class ScanOutcome:
    detected: bool
    best_tx_beam: Optional[int]
    best_rx_beam: Optional[int]
    best_snr_db: Optional[float]
    slots_used: int
    macro_sector: Optional[int] = None


def slots_required(config: SchemeConfig) -> int:
    """Total slots for one full scan.

    Exhaustive: every narrow direction costs one macroelement of
    (ue_rx_beams DL + 1 UL) slots. Iterative: wide macroelements in
    phase one, then one DL + one UL slot per refining beam (the UE no
    longer scans in reception).
    """
    if config.kind is SearchKind.EXHAUSTIVE:
        return config.bs_narrow_beams * (config.ue_rx_beams + 1)
    return config.bs_wide_beams * (config.ue_rx_beams + 1) + config.refine_beams * 2


def narrow_sector_of(narrow_beam: int, config: SchemeConfig) -> int:
    """Wide sector refined by a narrow beam: the nearest wide boresight."""
    half = config.refine_beams // 2
    return ((narrow_beam + half) // config.refine_beams) % config.bs_wide_beams


@functools.lru_cache(maxsize=None)
def sector_narrow_beams(sector: int, config: SchemeConfig) -> tuple[int, ...]:
    return tuple(
        j
        for j in range(config.bs_narrow_beams)
        if narrow_sector_of(j, config) == sector
    )


def assign_rnti(rng: RandomStream, space_size: int = RNTI_SPACE_SIZE) -> int:
    """Pick a temporary identifier uniformly from the signature space."""
    if space_size < 1:
        raise ValueError("signature space must have at least one id")
    return int(rng.integers(space_size))


def _snr_matrix_db(
    tx_cb: Codebook, rx_cb: Codebook, link: LinkRealization, budget: LinkBudget
) -> np.ndarray:
    gains = codebook_pair_gains_db(tx_cb, rx_cb, link)
    return budget.tx_power_dbm + gains - link.pathloss_db - budget.noise_power_dbm


def _undetected(config: SchemeConfig) -> ScanOutcome:
    return ScanOutcome(
        detected=False,
        best_tx_beam=None,
        best_rx_beam=None,
        best_snr_db=None,
        slots_used=slots_required(config),
    )


def run_exhaustive(
    config: SchemeConfig,
    link: LinkRealization,
    bs_codebook: Codebook,
    ue_codebook: Codebook,
    budget: LinkBudget,
    rnti: int = 0,
) -> ScanOutcome:
    """Sweep every narrow direction and pick the strongest fed-back pair.

    Per macroelement the UE reports (rnti, sector, SNR) iff its best
    receive beam for that direction clears the threshold; the BS keeps
    the table and selects the max-SNR entry after the full scan.
    """
    if bs_codebook.n_beams != config.bs_narrow_beams:
        raise ValueError("BS codebook size does not match the configuration")
    if ue_codebook.n_beams != config.ue_rx_beams:
        raise ValueError("UE codebook size does not match the configuration")
    if link.state is PathlossState.OUTAGE:
        return _undetected(config)

    snr = _snr_matrix_db(bs_codebook, ue_codebook, link, budget)
    table: list[BsTableEntry] = []
    best_rx_for_sector = np.argmax(snr, axis=1)
    for sector in range(config.bs_narrow_beams):
        sector_best = snr[sector, best_rx_for_sector[sector]]
        if sector_best >= budget.snr_threshold_db:
            table.append(BsTableEntry(rnti=rnti, sector_index=sector, snr_db=float(sector_best)))
    if not table:
        return _undetected(config)

    best = max(table, key=lambda e: e.snr_db)
    return ScanOutcome(
        detected=True,
        best_tx_beam=best.sector_index,
        best_rx_beam=int(best_rx_for_sector[best.sector_index]),
        best_snr_db=best.snr_db,
        slots_used=slots_required(config),
    )


def run_iterative(
    config: SchemeConfig,
    link: LinkRealization,
    bs_wide_codebook: Codebook,
    bs_narrow_codebook: Codebook,
    ue_codebook: Codebook,
    budget: LinkBudget,
    rnti: int = 0,
) -> ScanOutcome:
    """Two-phase search: wide sweep, then refine inside the best sector.

    Phase one is an exhaustive sweep over the wide codebook; it fixes the
    macro sector and the UE receive beam. Phase two re-measures the
    narrow beams nested in that sector against the locked receive beam
    only, and detection requires both phases to clear the threshold.
    """
    if bs_wide_codebook.n_beams != config.bs_wide_beams:
        raise ValueError("wide codebook size does not match the configuration")
    if bs_narrow_codebook.n_beams != config.bs_narrow_beams:
        raise ValueError("narrow codebook size does not match the configuration")
    if ue_codebook.n_beams != config.ue_rx_beams:
        raise ValueError("UE codebook size does not match the configuration")
    if link.state is PathlossState.OUTAGE:
        return _undetected(config)

    snr1 = _snr_matrix_db(bs_wide_codebook, ue_codebook, link, budget)
    if snr1.max() < budget.snr_threshold_db:
        return _undetected(config)
    flat = int(np.argmax(snr1))
    sector = flat // config.ue_rx_beams
    rx_lock = flat % config.ue_rx_beams

    refine_idx = sector_narrow_beams(sector, config)
    snr2_all = _snr_matrix_db(bs_narrow_codebook, ue_codebook, link, budget)
    snr2 = snr2_all[list(refine_idx), rx_lock]
    if snr2.max() < budget.snr_threshold_db:
        return ScanOutcome(
            detected=False,
            best_tx_beam=None,
            best_rx_beam=None,
            best_snr_db=None,
            slots_used=slots_required(config),
            macro_sector=None,
        )
    best_local = int(np.argmax(snr2))
    return ScanOutcome(
        detected=True,
        best_tx_beam=refine_idx[best_local],
        best_rx_beam=rx_lock,
        best_snr_db=float(snr2[best_local]),
        slots_used=slots_required(config),
        macro_sector=sector,
    )


def margin_from_snr(
    config: SchemeConfig, snr_narrow: np.ndarray, snr_wide: np.ndarray | None = None
) -> float:
    """Threshold-free detection statistic from per-pair SNR matrices.

    A scan detects iff this margin clears the threshold: the sector and
    receive-beam locks of the iterative search are argmax decisions and
    do not depend on the threshold, so its margin is min(phase-1 best,
    phase-2 best at the locked beams).
    """
    if config.kind is SearchKind.EXHAUSTIVE:
        return float(snr_narrow.max())
    if snr_wide is None:
        raise ValueError("iterative margin needs the wide-phase SNR matrix")
    flat = int(np.argmax(snr_wide))
    sector = flat // config.ue_rx_beams
    rx_lock = flat % config.ue_rx_beams
    refine_idx = sector_narrow_beams(sector, config)
    phase2_best = snr_narrow[list(refine_idx), rx_lock].max()
    return float(min(snr_wide.flat[flat], phase2_best))


def exhaustive_margin_db(
    config: SchemeConfig,
    link: LinkRealization,
    bs_codebook: Codebook,
    ue_codebook: Codebook,
    budget: LinkBudget,
) -> float:
    """Best pair SNR in dB; the scan detects iff this clears the threshold."""
    if link.state is PathlossState.OUTAGE:
        return -math.inf
    return margin_from_snr(config, _snr_matrix_db(bs_codebook, ue_codebook, link, budget))


def iterative_margin_db(
    config: SchemeConfig,
    link: LinkRealization,
    bs_wide_codebook: Codebook,
    bs_narrow_codebook: Codebook,
    ue_codebook: Codebook,
    budget: LinkBudget,
) -> float:
    """Threshold-free detection statistic of the two-phase search."""
    if link.state is PathlossState.OUTAGE:
        return -math.inf
    snr1 = _snr_matrix_db(bs_wide_codebook, ue_codebook, link, budget)
    snr2 = _snr_matrix_db(bs_narrow_codebook, ue_codebook, link, budget)
    return margin_from_snr(config, snr2, snr1)
