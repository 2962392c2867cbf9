"""Uniform planar arrays, direction codebooks and beamforming gain.

The array sits in the horizontal plane, so the phase profile resolves the
full 360 degrees of azimuth. With exactly half-wavelength spacing the
profiles at the two directions along an array axis coincide (the spatial
frequency wraps), which would make opposite codebook beams identical; a
small fixed mounting rotation keeps every swept direction distinct.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkRealization, PathlossState, subpath_arrays

BOLTZMANN_NOISE_DBM_PER_HZ = -174.0
# Mounting offset between the array axes and the swept world directions.
# At exactly half-wavelength spacing the phase profiles of the two
# directions along an array axis coincide, so an offset keeps every swept
# direction distinct; the values are chosen numerically for even codebook
# coverage and, on 2-element axes, to suppress the mirror lobe of the
# opposite beam.
DEFAULT_ROTATION_RAD = 0.28
SMALL_ARRAY_ROTATION_RAD = 0.44


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int
    cols: int
    spacing_wavelengths: float = 0.5
    rotation_rad: float | None = None

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array must have at least one element per axis")
        if self.spacing_wavelengths <= 0:
            raise ValueError("element spacing must be > 0")
        if self.rotation_rad is None:
            rot = SMALL_ARRAY_ROTATION_RAD if max(self.rows, self.cols) <= 2 else DEFAULT_ROTATION_RAD
            object.__setattr__(self, "rotation_rad", rot)

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True, eq=False)
class BeamWeights:
    """Unit-norm complex weight vector steering toward one azimuth."""

    weights: np.ndarray
    boresight_azimuth: float


@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered set of beams whose boresights tile [0, 2*pi) evenly."""

    geometry: ArrayGeometry
    beams: tuple[BeamWeights, ...]

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    @property
    def matrix(self) -> np.ndarray:
        """Beam weights stacked as rows, shape (n_beams, n_elements)."""
        return np.vstack([b.weights for b in self.beams])


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 30.0
    bandwidth_hz: float = 1e9
    noise_figure_db: float = 5.0
    snr_threshold_db: float = -5.0

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be > 0")

    @property
    def noise_power_dbm(self) -> float:
        return BOLTZMANN_NOISE_DBM_PER_HZ + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@functools.lru_cache(maxsize=None)
def _axis_constants(geometry: ArrayGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis element offsets in radians/direction-cosine, with the
    unit-norm factor folded into the row axis."""
    k = 2.0 * math.pi * geometry.spacing_wavelengths
    rows = k * np.arange(geometry.rows, dtype=float)
    cols = k * np.arange(geometry.cols, dtype=float)
    return rows, cols


def steering_matrix(
    geometry: ArrayGeometry, azimuth: np.ndarray, elevation: np.ndarray
) -> np.ndarray:
    """Unit-norm array responses for many directions, shape (N, n_dirs).

    Element (r, c) sits at ``spacing * (r, c)`` wavelengths in the array
    plane; its phase for a direction is ``2*pi*spacing*cos(el) *
    (r*cos(az') + c*sin(az'))`` with az' measured from the rotated array
    axis. The response factors over the two axes, so the per-row and
    per-column phasors are built separately and combined by broadcasting.
    """
    az = np.atleast_1d(np.asarray(azimuth, dtype=float)) - geometry.rotation_rad
    el = np.atleast_1d(np.asarray(elevation, dtype=float))
    ce = np.cos(el)
    x = ce * np.cos(az)
    y = ce * np.sin(az)
    r_off, c_off = _axis_constants(geometry)
    row_phasors = np.exp(r_off[:, None] * (1j * x[None, :]))  # (rows, n_dirs)
    col_phasors = np.exp(c_off[:, None] * (1j * y[None, :]))  # (cols, n_dirs)
    row_phasors /= math.sqrt(geometry.n_elements)
    out = row_phasors[:, None, :] * col_phasors[None, :, :]
    return out.reshape(geometry.n_elements, -1)


def steering_vector(geometry: ArrayGeometry, azimuth: float, elevation: float = 0.0) -> np.ndarray:
    """Unit-norm response vector for a single direction."""
    return steering_matrix(geometry, np.array([azimuth]), np.array([elevation]))[:, 0]


def make_codebook(geometry: ArrayGeometry, n_beams: int) -> Codebook:
    """Pure steering-vector codebook: beam i points at azimuth 2*pi*i/n."""
    if n_beams < 1:
        raise ValueError("codebook needs at least one beam")
    beams = []
    for i in range(n_beams):
        az = 2.0 * math.pi * i / n_beams
        beams.append(BeamWeights(weights=steering_vector(geometry, az), boresight_azimuth=az))
    return Codebook(geometry=geometry, beams=tuple(beams))


def pair_amplitudes_from_responses(
    tx_weights: np.ndarray,
    rx_weights: np.ndarray,
    subpath_gains: np.ndarray,
    a_tx: np.ndarray,
    a_rx: np.ndarray,
) -> np.ndarray:
    """|w_rx^H H w_tx| for every (tx, rx) row pair, shape (T, R).

    H = sqrt(Nt*Nr) * sum_i g_i a_rx(i) a_tx(i)^H over the subpaths,
    normalized so a single unit-gain subpath aligned with both beams
    yields the full coherent array gain Nt*Nr; the pathloss carries all
    distance dependence. ``a_tx``/``a_rx`` are unit-norm response
    matrices of shape (N, n_subpaths).
    """
    v = tx_weights @ a_tx.conj()  # (T, S): a_tx^H w_tx per subpath
    u = rx_weights.conj() @ a_rx  # (R, S): w_rx^H a_rx per subpath
    scale = math.sqrt(a_tx.shape[0] * a_rx.shape[0])
    return scale * np.abs((v * subpath_gains[None, :]) @ u.T)


def _pair_amplitudes(
    tx_weights: np.ndarray,
    rx_weights: np.ndarray,
    link: LinkRealization,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
) -> np.ndarray:
    if link.state is PathlossState.OUTAGE:
        raise ValueError("beamforming gain is undefined for an outage link")
    gains, aod_az, aod_el, aoa_az, aoa_el = subpath_arrays(link)
    a_tx = steering_matrix(tx_geom, aod_az, aod_el)
    a_rx = steering_matrix(rx_geom, aoa_az, aoa_el)
    return pair_amplitudes_from_responses(tx_weights, rx_weights, gains, a_tx, a_rx)


def bf_gain_db(
    tx: BeamWeights,
    rx: BeamWeights,
    link: LinkRealization,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
) -> float:
    """Beamforming gain of one TX/RX beam pair over a link, in dB."""
    amp = _pair_amplitudes(tx.weights[None, :], rx.weights[None, :], link, tx_geom, rx_geom)[0, 0]
    if amp == 0.0:
        return -math.inf
    return 20.0 * math.log10(amp)


def codebook_pair_gains_db(
    tx_cb: Codebook, rx_cb: Codebook, link: LinkRealization
) -> np.ndarray:
    """Beamforming gain in dB for every codebook pair, shape (T, R)."""
    amps = _pair_amplitudes(tx_cb.matrix, rx_cb.matrix, link, tx_cb.geometry, rx_cb.geometry)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(amps)


def snr_db(gain_db: float, pathloss_db: float, budget: LinkBudget) -> float:
    """Received SNR from the link budget: P_tx + G - PL - N."""
    return budget.tx_power_dbm + gain_db - pathloss_db - budget.noise_power_dbm
