"""Self-interference and user channel generation.

The self-interference channel mixes a deterministic near-field component
(spherical waves between the co-located arrays) with a stochastic
far-field component built from clustered rays::

    H_SI = g_si * (sqrt(k/(k+1)) * H_NF + sqrt(1/(k+1)) * H_FF)

Both components are normalized to squared Frobenius norm ``Nt * Nr`` so
that ``k`` alone sets their power ratio.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NormalizationError
from .geometry import ArrayGeometry, Pose, far_field_responses, near_field_responses

NORM_RTOL = 1e-6


@dataclass(frozen=True)
class ClusteredChannelParams:
    num_clusters: int = 3
    rays_per_cluster: int = 5
    ray_angle_stddev: float = math.radians(5.0)
    seed: int = 0

    def __post_init__(self):
        if int(self.num_clusters) < 1:
            raise ValueError("num_clusters must be >= 1")
        if int(self.rays_per_cluster) < 1:
            raise ValueError("rays_per_cluster must be >= 1")
        if not self.ray_angle_stddev >= 0:
            raise ValueError("ray_angle_stddev must be >= 0")


@dataclass(frozen=True, eq=False)
class SelfInterferenceChannel:
    """Assembled SI channel together with the pieces it was built from."""

    matrix: np.ndarray
    kappa: float
    g_si: float
    h_nf: np.ndarray
    h_ff: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def isolation_db(self) -> float:
        return -20.0 * math.log10(self.g_si)


@dataclass(frozen=True, eq=False)
class UserChannel:
    matrix: np.ndarray
    user_id: str = "user"


def isolation_to_gain(isolation_db: float) -> float:
    return 10.0 ** (-isolation_db / 20.0)


def _normalize(h: np.ndarray) -> np.ndarray:
    energy = np.sum(np.abs(h) ** 2)
    if energy == 0:
        raise NormalizationError("cannot normalize an all-zero channel")
    return h * np.sqrt(h.size / energy)


def default_rx_pose(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry,
                    gap: float = 2.0) -> Pose:
    """Place the receive array beside the transmit array along +x.

    The arrays share a boresight and are separated by `gap` wavelengths
    edge to edge.
    """
    shift = tx_geom.elements[:, 0].max() + gap - rx_geom.elements[:, 0].min()
    return Pose(translation=np.array([shift, 0.0, 0.0]))


def near_field_channel(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry,
                       rx_pose: Pose | None = None,
                       normalize: bool = True) -> np.ndarray:
    """Spherical-wave channel from each transmit to each receive element.

    Returns an ``Nr x Nt`` matrix whose entry (m, n) is the near-field
    response of transmit element n observed at receive element m.
    """
    if rx_pose is None:
        rx_pose = default_rx_pose(tx_geom, rx_geom)
    rx_pts = rx_pose.apply(rx_geom.elements)
    # rows: rx elements, columns: tx elements
    h = near_field_responses(tx_geom, rx_pts)
    return _normalize(h) if normalize else h


def clustered_channel(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry,
                      aod, aoa, gains, normalize: bool = True) -> np.ndarray:
    """Sum of rank-one ray contributions ``g * a_rx(aoa) a_tx(aod)^H``."""
    aod = np.atleast_1d(np.asarray(aod, dtype=float))
    aoa = np.atleast_1d(np.asarray(aoa, dtype=float))
    gains = np.atleast_1d(np.asarray(gains, dtype=complex))
    if not aod.shape == aoa.shape == gains.shape:
        raise DimensionError("aod, aoa and gains must have equal length",
                             module="si-channel")
    a_tx = far_field_responses(tx_geom, aod)
    a_rx = far_field_responses(rx_geom, aoa)
    h = (a_rx.T * gains) @ a_tx.conj()
    return _normalize(h) if normalize else h


def draw_rays(params: ClusteredChannelParams):
    """Ray departure/arrival angles and complex gains for one realization."""
    rng = np.random.default_rng(params.seed)
    nc, nr = int(params.num_clusters), int(params.rays_per_cluster)
    half = np.pi / 2
    aod_c = rng.uniform(-half, half, nc)
    aoa_c = rng.uniform(-half, half, nc)
    aod = aod_c[:, None] + params.ray_angle_stddev * rng.standard_normal((nc, nr))
    aoa = aoa_c[:, None] + params.ray_angle_stddev * rng.standard_normal((nc, nr))
    gains = (rng.standard_normal((nc, nr))
             + 1j * rng.standard_normal((nc, nr))) / np.sqrt(2)
    return (np.clip(aod, -half, half).ravel(), np.clip(aoa, -half, half).ravel(),
            gains.ravel())


def far_field_channel(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry,
                      params: ClusteredChannelParams) -> np.ndarray:
    """Clustered ray-based channel, deterministic in ``params.seed``."""
    aod, aoa, gains = draw_rays(params)
    return clustered_channel(tx_geom, rx_geom, aod, aoa, gains)


def assemble_si_channel(h_nf, h_ff, kappa: float, g_si: float) -> SelfInterferenceChannel:
    """Combine normalized near- and far-field parts with Rician factor `kappa`.

    ``kappa = inf`` gives a purely near-field channel, ``kappa = 0`` a
    purely far-field one.
    """
    h_nf = np.asarray(h_nf, dtype=complex)
    h_ff = np.asarray(h_ff, dtype=complex)
    if h_nf.shape != h_ff.shape or h_nf.ndim != 2:
        raise DimensionError(
            f"component shapes differ: {h_nf.shape} vs {h_ff.shape}",
            module="si-channel")
    for name, h in (("near-field", h_nf), ("far-field", h_ff)):
        energy = np.sum(np.abs(h) ** 2)
        if abs(energy - h.size) > NORM_RTOL * h.size:
            raise NormalizationError(
                f"{name} component has energy {energy:.6g}, expected {h.size}")
    if not kappa >= 0:
        raise ValueError("kappa must be >= 0")
    if not (g_si > 0 and np.isfinite(g_si)):
        raise ValueError("g_si must be positive and finite")
    if np.isinf(kappa):
        a, b = 1.0, 0.0
    else:
        a, b = math.sqrt(kappa / (kappa + 1.0)), math.sqrt(1.0 / (kappa + 1.0))
    matrix = g_si * (a * h_nf + b * h_ff)
    return SelfInterferenceChannel(matrix, float(kappa), float(g_si), h_nf, h_ff)


def si_channel(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, kappa: float,
               isolation_db: float, params: ClusteredChannelParams,
               rx_pose: Pose | None = None) -> SelfInterferenceChannel:
    """Convenience wrapper: build both components and assemble them."""
    if rx_pose is None:
        rx_pose = default_rx_pose(tx_geom, rx_geom)
    h_nf = near_field_channel(tx_geom, rx_geom, rx_pose)
    h_ff = far_field_channel(tx_geom, rx_geom, params)
    return assemble_si_channel(h_nf, h_ff, kappa, isolation_to_gain(isolation_db))


def user_channel(device_geom: ArrayGeometry, user_geom: ArrayGeometry,
                 params: ClusteredChannelParams, user_id: str = "user",
                 direction: str = "downlink") -> UserChannel:
    """Clustered channel between the full-duplex device and a distant user.

    ``direction="downlink"`` gives the ``N_user x N_device`` channel from
    the device to the user; ``"uplink"`` gives ``N_device x N_user``.
    """
    if direction == "downlink":
        h = far_field_channel(device_geom, user_geom, params)
    elif direction == "uplink":
        h = far_field_channel(user_geom, device_geom, params)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return UserChannel(h, str(user_id))


def write_channel_csv(path, matrix):
    """One row per (rx_index, tx_index) with real and imaginary parts."""
    from .reports import write_rows

    m = np.asarray(matrix)
    return write_rows(path, ["rx_index", "tx_index", "real", "imag"],
                      ([i, j, m[i, j].real, m[i, j].imag]
                       for i in range(m.shape[0]) for j in range(m.shape[1])))


def read_channel_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    nr = max(int(r["rx_index"]) for r in rows) + 1
    nt = max(int(r["tx_index"]) for r in rows) + 1
    h = np.zeros((nr, nt), dtype=complex)
    for r in rows:
        h[int(r["rx_index"]), int(r["tx_index"])] = complex(float(r["real"]), float(r["imag"]))
    return h
