"""Statistical 28 GHz urban channel sampling.

Links are drawn independently per Monte Carlo trial: a distance-dependent
state (LOS / NLOS / outage), a log-distance pathloss with lognormal
shadowing, and a small-scale cluster/subpath geometry used by the
beamforming code. All numeric defaults live in :class:`ChannelParams` and
mirror ``configs/default.ini``; override them there rather than editing
code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

RandomStream = np.random.Generator

TWO_PI = 2.0 * math.pi


class PathlossState(enum.Enum):
    LOS = "los"
    NLOS = "nlos"
    OUTAGE = "outage"


@dataclass(frozen=True)
class ChannelParams:
    """Tunable parameters of the statistical channel.

    Pathloss follows ``intercept + 10 * exponent * log10(d)`` plus a
    zero-mean normal shadowing term per state. The outage probability is
    ``max(0, 1 - exp(-a*d + b))`` and the LOS probability decays as
    ``(1 - p_out) * exp(-decay * d)``.
    """

    los_pl_exponent: float = 2.0
    los_pl_intercept_db: float = 61.4
    los_shadow_sigma_db: float = 5.8
    nlos_pl_exponent: float = 2.92
    nlos_pl_intercept_db: float = 72.0
    nlos_shadow_sigma_db: float = 8.7
    # Outage slope chosen so p_out crosses 0.5 at ~150 m, the distance where
    # the cell-edge PMD knee sits for this deployment; LOS decay keeps LOS
    # dominant through the first few tens of meters.
    outage_a_per_m: float = 0.0393
    outage_b: float = 5.2
    los_prob_decay_per_m: float = 0.0095
    cluster_rate: float = 1.8
    subpaths_per_cluster: int = 20
    # Per-cluster power law: u**(shape-1) * 10**(-0.6*z/10), z ~ N(0, sigma),
    # normalized to unit total power.
    cluster_power_shape: float = 2.8
    cluster_power_sigma_db: float = 4.0
    azimuth_spread_deg: float = 10.0
    elevation_spread_deg: float = 6.0
    carrier_freq_hz: float = 28e9

    def validate(self) -> None:
        if self.los_pl_exponent <= 0 or self.nlos_pl_exponent <= 0:
            raise ValueError("pathloss exponents must be > 0")
        if self.los_shadow_sigma_db < 0 or self.nlos_shadow_sigma_db < 0:
            raise ValueError("shadowing sigmas must be >= 0")
        if self.outage_a_per_m < 0:
            raise ValueError("outage_a_per_m must be >= 0")
        if self.cluster_rate <= 0:
            raise ValueError("cluster_rate must be > 0")
        if self.subpaths_per_cluster < 1:
            raise ValueError("subpaths_per_cluster must be >= 1")


class Subpath(NamedTuple):
    """One ray: complex gain plus departure/arrival angles in radians."""

    gain: complex
    aod_azimuth: float
    aod_elevation: float
    aoa_azimuth: float
    aoa_elevation: float


class Cluster(NamedTuple):
    power_fraction: float
    central_aod_azimuth: float
    central_aoa_azimuth: float
    central_elevation: float
    subpaths: tuple[Subpath, ...]


@dataclass(frozen=True)
class LinkRealization:
    """One random draw of the BS-UE channel at a given distance."""

    state: PathlossState
    pathloss_db: float
    distance: float
    clusters: tuple[Cluster, ...] = field(default_factory=tuple)


def state_probabilities(d: float, params: ChannelParams) -> tuple[float, float, float]:
    """Return (p_los, p_nlos, p_out) at distance ``d`` in meters."""
    if d <= 0:
        raise ValueError(f"distance must be > 0, got {d}")
    p_out = max(0.0, 1.0 - math.exp(-params.outage_a_per_m * d + params.outage_b))
    p_los = (1.0 - p_out) * math.exp(-params.los_prob_decay_per_m * d)
    p_nlos = 1.0 - p_out - p_los
    return p_los, p_nlos, p_out


def sample_state(d: float, params: ChannelParams, rng: RandomStream) -> PathlossState:
    """Draw the link state at distance ``d``."""
    p_los, _, p_out = state_probabilities(d, params)
    u = rng.uniform()
    if u < p_out:
        return PathlossState.OUTAGE
    if u < p_out + p_los:
        return PathlossState.LOS
    return PathlossState.NLOS


def sample_pathloss_db(
    state: PathlossState, d: float, params: ChannelParams, rng: RandomStream
) -> float:
    """Log-distance pathloss plus one shadowing draw, in dB.

    Shadowing is drawn once per link; every beam pair of the same link
    sees the same value.
    """
    if state is PathlossState.OUTAGE:
        raise ValueError("pathloss is undefined in outage; caller must short-circuit")
    if d <= 0:
        raise ValueError(f"distance must be > 0, got {d}")
    if state is PathlossState.LOS:
        intercept, exponent, sigma = (
            params.los_pl_intercept_db,
            params.los_pl_exponent,
            params.los_shadow_sigma_db,
        )
    else:
        intercept, exponent, sigma = (
            params.nlos_pl_intercept_db,
            params.nlos_pl_exponent,
            params.nlos_shadow_sigma_db,
        )
    shadow = sigma * rng.standard_normal() if sigma > 0 else 0.0
    return intercept + 10.0 * exponent * math.log10(d) + shadow


def sample_clusters(params: ChannelParams, rng: RandomStream) -> tuple[Cluster, ...]:
    """Draw the spatial clusters of a non-outage link.

    The cluster count is Poisson with a floor of one (a usable link must
    carry power). Power fractions are normalized to sum to one; departure
    and arrival central azimuths are independent and uniform; subpath
    angles scatter around the centers with the configured spreads and the
    complex subpath gains split the cluster power evenly in expectation.
    """
    k = max(int(rng.poisson(params.cluster_rate)), 1)
    n_sub = params.subpaths_per_cluster

    u = rng.uniform(size=k)
    z = rng.standard_normal(size=k)
    raw = u ** (params.cluster_power_shape - 1.0) * 10.0 ** (
        -0.6 * params.cluster_power_sigma_db * z / 10.0
    )
    fractions = raw / raw.sum()

    aod_centers = rng.uniform(0.0, TWO_PI, size=k)
    aoa_centers = rng.uniform(0.0, TWO_PI, size=k)
    az_spread = math.radians(params.azimuth_spread_deg)
    el_spread = math.radians(params.elevation_spread_deg)
    # rows: aod/aoa azimuth offsets, aod/aoa elevations, gain re/im
    noise = rng.standard_normal((k, 6, n_sub))

    clusters = []
    for i in range(k):
        aod_az = (aod_centers[i] + az_spread * noise[i, 0]) % TWO_PI
        aoa_az = (aoa_centers[i] + az_spread * noise[i, 1]) % TWO_PI
        aod_el = el_spread * noise[i, 2]
        aoa_el = el_spread * noise[i, 3]
        # E|gain|^2 per subpath = fraction / n_sub
        scale = math.sqrt(fractions[i] / (2.0 * n_sub))
        gains = scale * noise[i, 4] + 1j * (scale * noise[i, 5])
        subpaths = tuple(
            Subpath._make(row)
            for row in zip(gains, aod_az, aod_el, aoa_az, aoa_el)
        )
        clusters.append(
            Cluster(
                power_fraction=float(fractions[i]),
                central_aod_azimuth=float(aod_centers[i]),
                central_aoa_azimuth=float(aoa_centers[i]),
                central_elevation=0.0,
                subpaths=subpaths,
            )
        )
    return tuple(clusters)


def realize_link(d: float, params: ChannelParams, rng: RandomStream) -> LinkRealization:
    """Draw a full link realization at distance ``d``."""
    state = sample_state(d, params, rng)
    if state is PathlossState.OUTAGE:
        return LinkRealization(state=state, pathloss_db=math.inf, distance=d)
    pathloss_db = sample_pathloss_db(state, d, params, rng)
    clusters = sample_clusters(params, rng)
    return LinkRealization(
        state=state, pathloss_db=pathloss_db, distance=d, clusters=clusters
    )


def subpath_arrays(
    link: LinkRealization,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Flatten a link's subpaths to (gains, aod_az, aod_el, aoa_az, aoa_el)."""
    flat = np.array(
        [sp for cl in link.clusters for sp in cl.subpaths], dtype=np.complex128
    )
    gains = flat[:, 0]
    aod_az, aod_el, aoa_az, aoa_el = flat[:, 1].real, flat[:, 2].real, flat[:, 3].real, flat[:, 4].real
    return gains, aod_az, aod_el, aoa_az, aoa_el
