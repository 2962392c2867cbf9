"""Monte Carlo engine: deployment, misdetection statistics and delay math.

Every trial owns a random substream derived from (master seed, distance
bin, trial index), so results are bit-identical for any partitioning of
trials across workers, and different schemes evaluated under the same
seed see the same link realizations. Signal duration enters only through
an equivalent detection threshold, which makes the duration/threshold
trade a mathematical identity rather than an approximation.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .arrays import LinkBudget, make_codebook, pair_amplitudes_from_responses, steering_matrix
from .channel import (
    ChannelParams,
    PathlossState,
    RandomStream,
    realize_link,
    subpath_arrays,
)
from .protocols import SchemeConfig, SearchKind, margin_from_snr, slots_required

_CHUNK_TRIALS = 2048


@dataclass(frozen=True)
class SimParams:
    """System-level simulation parameters (see configs/default.ini)."""

    tx_power_dbm: float = 30.0
    bandwidth_hz: float = 1e9
    noise_figure_db: float = 5.0
    carrier_freq_hz: float = 28e9
    snr_threshold_db: float = -5.0
    t_sig_s: float = 10e-6
    overhead: float = 0.05
    trials: int = 1_000_000
    bin_width_m: float = 10.0
    max_radius_m: float = 200.0
    master_seed: int = 1
    edge_distance_m: float = 95.0
    target_pmd: float = 0.01
    t_sig_cap_s: float = 0.01

    def validate(self) -> None:
        if not 0.0 < self.overhead < 1.0:
            raise ValueError("overhead must be in (0, 1)")
        if self.t_sig_s <= 0:
            raise ValueError("t_sig_s must be > 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.bin_width_m <= 0 or self.max_radius_m <= 0:
            raise ValueError("bin geometry must be positive")
        if not 0.0 < self.target_pmd <= 1.0:
            raise ValueError("target_pmd must be in (0, 1]")
        if self.t_sig_cap_s < self.t_sig_s:
            raise ValueError("t_sig_cap_s must be >= t_sig_s")

    def budget(self) -> LinkBudget:
        return LinkBudget(
            tx_power_dbm=self.tx_power_dbm,
            bandwidth_hz=self.bandwidth_hz,
            noise_figure_db=self.noise_figure_db,
            snr_threshold_db=self.snr_threshold_db,
        )


@dataclass(frozen=True)
class DistanceBin:
    inner_m: float
    outer_m: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.inner_m < self.outer_m:
            raise ValueError("need 0 <= inner < outer")


@dataclass(frozen=True)
class PmdEstimate:
    bin: DistanceBin
    trials: int
    misdetections: int
    pmd: float
    ci95_halfwidth: float


@dataclass(frozen=True)
class DelayReport:
    scheme: str
    n_slots: int
    t_sig_s: float
    t_per_s: float
    delay_s: float
    total_delay_s: Optional[float] = None


def deploy_ue(bin: DistanceBin, rng: RandomStream) -> tuple[float, float]:
    """Drop a UE uniformly by area inside the annulus, BS at the origin."""
    r2, r1 = bin.inner_m, bin.outer_m
    radius = math.sqrt(r2 * r2 + rng.uniform() * (r1 * r1 - r2 * r2))
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return radius * math.cos(angle), radius * math.sin(angle)


def discovery_delay(n_slots: int, t_sig: float, overhead: float) -> float:
    """Wall-clock time of a full scan: n_slots * t_sig / overhead."""
    if overhead <= 0 or overhead > 1:
        raise ValueError("overhead must be in (0, 1]")
    if n_slots < 1 or t_sig <= 0:
        raise ValueError("slot count and signal duration must be positive")
    return n_slots * t_sig / overhead


def total_delay(n_slots: int, min_t_sig: float, overhead: float) -> float:
    """Discovery delay at the solved minimum signal duration."""
    if math.isinf(min_t_sig):
        return math.inf
    return discovery_delay(n_slots, min_t_sig, overhead)


def equivalent_threshold(tau_db: float, t_sig: float, t_sig_ref: float) -> float:
    """Detection threshold equivalent to stretching the signal duration.

    Doubling the signal doubles the accumulated energy, which is the same
    as lowering the threshold by 3 dB.
    """
    if t_sig <= 0 or t_sig_ref <= 0:
        raise ValueError("signal durations must be > 0")
    return tau_db - 10.0 * math.log10(t_sig / t_sig_ref)


def wilson_halfwidth(misdetections: int, trials: int, z: float = 1.96) -> float:
    """Half-width of the Wilson 95% score interval for a proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = misdetections / trials
    denom = 1.0 + z * z / trials
    return z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom


def tsig_grid(base_s: float, cap_s: float) -> list[float]:
    """Half-octave signal-duration lattice: base * 2**(k/2), up to the cap."""
    if base_s <= 0 or cap_s < base_s:
        raise ValueError("need 0 < base <= cap")
    grid = []
    k = 0
    while True:
        t = base_s * 2.0 ** (k / 2.0)
        if t > cap_s * (1.0 + 1e-9):
            return grid
        grid.append(t)
        k += 1


def trial_rng(master_seed: int, bin_index: int, trial_index: int) -> RandomStream:
    """Independent substream for one trial, stable under any scheduling."""
    return np.random.default_rng((master_seed, bin_index, trial_index))


def distance_bins(params: SimParams) -> list[DistanceBin]:
    n = int(round(params.max_radius_m / params.bin_width_m))
    w = params.bin_width_m
    return [DistanceBin(i * w, (i + 1) * w) for i in range(n)]


def delay_report(scheme: SchemeConfig, params: SimParams) -> DelayReport:
    n_slots = slots_required(scheme)
    t_per = params.t_sig_s / params.overhead
    return DelayReport(
        scheme=scheme.label,
        n_slots=n_slots,
        t_sig_s=params.t_sig_s,
        t_per_s=t_per,
        delay_s=discovery_delay(n_slots, params.t_sig_s, params.overhead),
    )


class _EnginePlan:
    """Flattened evaluation plan for the hot trial loop.

    Response matrices and per-pair gain jobs are deduplicated across
    schemes (indexed lists, no hashing per trial), so schemes sharing a
    panel also share the per-trial computation, and all schemes see the
    same link realization.
    """

    def __init__(self, schemes: Sequence[SchemeConfig]):
        self.schemes = list(schemes)
        self.responses: list[tuple] = []  # (geometry, side)
        self.tx_projs: list[tuple] = []  # (weights, response index, n_elements)
        self.rx_projs: list[tuple] = []  # (conj weights, response index, n_elements)
        self.jobs: list[tuple] = []  # (tx_proj, rx_proj, amplitude scale)
        self._index: dict = {}
        self._books: dict = {}
        self.plan: list[tuple] = []  # per scheme: (config, narrow_job, wide_job | -1)
        for config in schemes:
            config.validate()
            narrow = self._job(config.bs_geometry(), config.bs_narrow_beams,
                               config.ue_geometry(), config.ue_rx_beams)
            wide = -1
            if config.kind is SearchKind.ITERATIVE:
                wide = self._job(config.wide_geometry(), config.bs_wide_beams,
                                 config.ue_geometry(), config.ue_rx_beams)
            self.plan.append((config, narrow, wide))

    def _dedup(self, kind: str, key, build) -> int:
        full_key = (kind, key)
        if full_key not in self._index:
            target = getattr(self, kind)
            self._index[full_key] = len(target)
            target.append(build())
        return self._index[full_key]

    def _book(self, geom, n_beams) -> np.ndarray:
        key = (geom, n_beams)
        if key not in self._books:
            self._books[key] = make_codebook(geom, n_beams).matrix
        return self._books[key]

    def _job(self, tx_geom, tx_beams, rx_geom, rx_beams) -> int:
        resp_tx = self._dedup("responses", (tx_geom, "aod"), lambda: (tx_geom, "aod"))
        resp_rx = self._dedup("responses", (rx_geom, "aoa"), lambda: (rx_geom, "aoa"))
        tx = self._dedup(
            "tx_projs", (tx_geom, tx_beams),
            lambda: (self._book(tx_geom, tx_beams), resp_tx, tx_geom.n_elements),
        )
        rx = self._dedup(
            "rx_projs", (rx_geom, rx_beams),
            lambda: (self._book(rx_geom, rx_beams).conj(), resp_rx, rx_geom.n_elements),
        )
        return self._dedup(
            "jobs", (tx, rx),
            lambda: (tx, rx, math.sqrt(self.tx_projs[tx][2] * self.rx_projs[rx][2])),
        )


def _trial_margins(
    plan: _EnginePlan,
    d: float,
    channel: ChannelParams,
    budget: LinkBudget,
    rng: RandomStream,
) -> list[float]:
    """Detection margin of each scheme on one shared link realization."""
    link = realize_link(d, channel, rng)
    if link.state is PathlossState.OUTAGE:
        return [-math.inf] * len(plan.schemes)
    gains, aod_az, aod_el, aoa_az, aoa_el = subpath_arrays(link)
    const = budget.tx_power_dbm - budget.noise_power_dbm - link.pathloss_db

    responses = []
    for geom, side in plan.responses:
        if side == "aod":
            a = steering_matrix(geom, aod_az, aod_el)
            responses.append(np.conjugate(a, out=a))
        else:
            responses.append(steering_matrix(geom, aoa_az, aoa_el))

    # same math as arrays.pair_amplitudes_from_responses, with the
    # conjugations and shared projections hoisted out of the loop
    vg = [
        (tx_w @ responses[resp]) * gains[None, :] for tx_w, resp, _ in plan.tx_projs
    ]
    u = [rx_w_conj @ responses[resp] for rx_w_conj, resp, _ in plan.rx_projs]
    snrs = []
    for tx, rx, scale in plan.jobs:
        amps = np.abs(vg[tx] @ u[rx].T)
        snrs.append(20.0 * np.log10(scale * amps) + const)

    return [
        margin_from_snr(config, snrs[narrow]) if wide < 0
        else margin_from_snr(config, snrs[narrow], snrs[wide])
        for config, narrow, wide in plan.plan
    ]


# Worker-process state, set once by the pool initializer (also used for the
# inline single-worker path so both paths execute identical code).
_WSTATE: dict = {}


def _init_worker(schemes, sim_params, channel_params) -> None:
    _WSTATE["plan"] = _EnginePlan(schemes)
    _WSTATE["sim"] = sim_params
    _WSTATE["channel"] = channel_params
    _WSTATE["budget"] = sim_params.budget()


def _chunk_margins(spec) -> tuple[int, int, np.ndarray]:
    """Margins for trials [start, stop) of one bin; returns (bin, start, M).

    M has one row per trial and one column per scheme. ``distance`` is
    None for annulus deployment within the bin, else trials run at the
    fixed distance.
    """
    bin_index, inner, outer, distance, start, stop = spec
    plan: _EnginePlan = _WSTATE["plan"]
    sim_params: SimParams = _WSTATE["sim"]
    channel: ChannelParams = _WSTATE["channel"]
    budget: LinkBudget = _WSTATE["budget"]
    bin_ = DistanceBin(inner, outer) if distance is None else None
    out = np.empty((stop - start, len(plan.schemes)))
    with np.errstate(divide="ignore"):
        for t in range(start, stop):
            rng = trial_rng(sim_params.master_seed, bin_index, t)
            if distance is None:
                x, y = deploy_ue(bin_, rng)
                d = max(math.hypot(x, y), 1e-9)
            else:
                d = distance
            out[t - start, :] = _trial_margins(plan, d, channel, budget, rng)
    return bin_index, start, out


def _chunk_counts(spec) -> tuple[int, np.ndarray]:
    """Misdetection counts at the configured threshold for one chunk."""
    bin_index, start, margins = _chunk_margins(spec)
    tau = _WSTATE["sim"].snr_threshold_db
    return bin_index, (margins < tau).sum(axis=0)


def _run_chunks(fn, specs, schemes, params, channel, workers):
    _init_worker(schemes, params, channel)  # inline path / parent process
    if workers <= 1 or len(specs) <= 1:
        return [fn(s) for s in specs]
    ctx = multiprocessing.get_context()
    with ctx.Pool(
        processes=workers, initializer=_init_worker, initargs=(schemes, params, channel)
    ) as pool:
        return pool.map(fn, specs)


def _chunk_ranges(trials: int) -> list[tuple[int, int]]:
    return [(s, min(s + _CHUNK_TRIALS, trials)) for s in range(0, trials, _CHUNK_TRIALS)]


def sweep_bins(
    schemes: Sequence[SchemeConfig],
    params: SimParams,
    channel: ChannelParams | None = None,
    workers: int = 1,
) -> dict[str, list[PmdEstimate]]:
    """Misdetection probability per distance bin for several schemes.

    All schemes are evaluated on the same link realizations (one
    substream per trial), so paired comparisons between schemes are
    exact, not just statistical.
    """
    params.validate()
    channel = channel or ChannelParams()
    channel.validate()
    bins = distance_bins(params)
    specs = [
        (i, b.inner_m, b.outer_m, None, start, stop)
        for i, b in enumerate(bins)
        for start, stop in _chunk_ranges(params.trials)
    ]
    counts = np.zeros((len(bins), len(schemes)), dtype=np.int64)
    for bin_index, chunk_counts in _run_chunks(
        _chunk_counts, specs, schemes, params, channel, workers
    ):
        counts[bin_index] += chunk_counts
    result: dict[str, list[PmdEstimate]] = {s.label: [] for s in schemes}
    for j, scheme in enumerate(schemes):
        for i, b in enumerate(bins):
            k = int(counts[i, j])
            result[scheme.label].append(
                PmdEstimate(
                    bin=b,
                    trials=params.trials,
                    misdetections=k,
                    pmd=k / params.trials,
                    ci95_halfwidth=wilson_halfwidth(k, params.trials),
                )
            )
    return result


def pmd_sweep(
    scheme: SchemeConfig,
    params: SimParams,
    channel: ChannelParams | None = None,
    workers: int = 1,
) -> list[PmdEstimate]:
    """Misdetection probability vs. distance for one scheme."""
    return sweep_bins([scheme], params, channel, workers)[scheme.label]


def margins_at_distance(
    schemes: Sequence[SchemeConfig],
    distance: float,
    params: SimParams,
    channel: ChannelParams | None = None,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Per-trial detection margins at a fixed BS-UE distance.

    The margin array answers every threshold (equivalently every signal
    duration) question about these trials without re-simulation.
    """
    params.validate()
    if distance <= 0:
        raise ValueError("distance must be > 0")
    channel = channel or ChannelParams()
    channel.validate()
    bin_index = int(distance // params.bin_width_m)
    specs = [
        (bin_index, 0.0, 0.0, distance, start, stop)
        for start, stop in _chunk_ranges(params.trials)
    ]
    chunks = _run_chunks(_chunk_margins, specs, schemes, params, channel, workers)
    chunks.sort(key=lambda c: c[1])
    stacked = np.vstack([c[2] for c in chunks])
    return {s.label: stacked[:, j] for j, s in enumerate(schemes)}


def pmd_from_margins(margins: np.ndarray, tau_db: float) -> tuple[int, float]:
    """(misdetections, pmd) of recorded margins at a threshold."""
    k = int((margins < tau_db).sum())
    return k, k / margins.size


def min_tsig_for_pmd(
    scheme: SchemeConfig,
    params: SimParams,
    distance: float,
    target_pmd: float,
    channel: ChannelParams | None = None,
    workers: int = 1,
    margins: np.ndarray | None = None,
) -> float:
    """Smallest grid signal duration meeting a misdetection target.

    Walks the half-octave duration lattice, mapping each duration to its
    equivalent threshold, and returns the first duration whose estimated
    PMD at ``distance`` is strictly below ``target_pmd``; +inf if the
    lattice cap is exceeded. Pass precomputed ``margins`` to reuse
    trials across schemes or targets.
    """
    if not 0.0 < target_pmd <= 1.0:
        raise ValueError("target_pmd must be in (0, 1]")
    if margins is None:
        margins = margins_at_distance([scheme], distance, params, channel, workers)[
            scheme.label
        ]
    for t_sig in tsig_grid(params.t_sig_s, params.t_sig_cap_s):
        tau_eff = equivalent_threshold(params.snr_threshold_db, t_sig, params.t_sig_s)
        _, pmd = pmd_from_margins(margins, tau_eff)
        if pmd < target_pmd:
            return t_sig
    return math.inf
