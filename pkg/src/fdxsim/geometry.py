"""Antenna array geometries, steering vectors and array factors.

All lengths are in wavelengths, so the carrier frequency never appears.
Linear arrays lie on the x-axis and planar arrays in the x-y plane; the
boresight is the +z axis and azimuth is measured from it toward +x.
Elevation (toward +y) is only meaningful for planar arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidGeometryError, SingularRangeError

#: Closest an observation point may get to an element, in wavelengths.
MIN_RANGE = 1e-6

_ANGLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element positions of one antenna array.

    Parameters
    ----------
    elements : array_like, shape (N, 3)
        Element positions in wavelengths.
    kind : {"linear", "planar"}
    spacing : float
        Element pitch in wavelengths.
    """

    elements: np.ndarray
    kind: str = "linear"
    spacing: float = 0.5

    def __post_init__(self):
        pos = np.array(self.elements, dtype=float)
        if pos.ndim == 1 and pos.size == 3:
            pos = pos.reshape(1, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InvalidGeometryError(
                f"element positions must have shape (N, 3), got {pos.shape}")
        if pos.shape[0] < 1:
            raise InvalidGeometryError("geometry has no elements")
        if not np.all(np.isfinite(pos)):
            raise InvalidGeometryError("element positions must be finite")
        if self.kind not in ("linear", "planar"):
            raise InvalidGeometryError(f"unknown array kind {self.kind!r}")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise InvalidGeometryError("spacing must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "elements", pos)

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def __len__(self):
        return self.n_elements

    @property
    def aperture(self) -> float:
        """Largest distance between any two elements."""
        diff = self.elements[:, None, :] - self.elements[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())

    @property
    def center(self) -> np.ndarray:
        return self.elements.mean(axis=0)

    def transformed(self, pose: "Pose") -> "ArrayGeometry":
        return ArrayGeometry(pose.apply(self.elements), self.kind, self.spacing)

    def translated(self, offset) -> "ArrayGeometry":
        return self.transformed(Pose(translation=np.asarray(offset, float)))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> rotation @ x + translation`` (wavelengths)."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise InvalidGeometryError("pose rotation must be orthogonal")
        trans = np.array(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def from_tilt(cls, tilt_rad: float = 0.0, translation=(0.0, 0.0, 0.0)):
        """Rotation by `tilt_rad` about the y-axis, then translation."""
        c, s = np.cos(tilt_rad), np.sin(tilt_rad)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls(rot, np.asarray(translation, dtype=float))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


def linear_array(n: int, spacing: float = 0.5, centered: bool = True) -> ArrayGeometry:
    """Uniform linear array on the x-axis.

    With ``centered=False`` element 0 sits at the origin instead of the
    array centre.
    """
    if n < 1:
        raise InvalidGeometryError("an array needs at least one element")
    x = np.arange(n, dtype=float) * spacing
    if centered:
        x -= x.mean()
    pos = np.zeros((n, 3))
    pos[:, 0] = x
    return ArrayGeometry(pos, "linear", spacing)


def planar_array(rows: int, cols: int, spacing: float = 0.5) -> ArrayGeometry:
    """Uniform rectangular array in the x-y plane, centred, row-major."""
    if rows < 1 or cols < 1:
        raise InvalidGeometryError("an array needs at least one element")
    y, x = np.meshgrid(np.arange(rows) * spacing, np.arange(cols) * spacing,
                       indexing="ij")
    pos = np.zeros((rows * cols, 3))
    pos[:, 0] = x.ravel() - x.mean()
    pos[:, 1] = y.ravel() - y.mean()
    return ArrayGeometry(pos, "planar", spacing)


def direction(azimuth, elevation=0.0) -> np.ndarray:
    """Unit vector(s) for the given azimuth/elevation (radians)."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    return np.stack(np.broadcast_arrays(np.sin(az) * np.cos(el),
                                        np.sin(el) * np.ones_like(az),
                                        np.cos(az) * np.cos(el)), axis=-1)


def _check_angles(geom: ArrayGeometry, azimuth, elevation):
    az = np.asarray(azimuth, dtype=float)
    if geom.kind == "linear":
        if np.any(np.abs(az) > np.pi / 2 + _ANGLE_TOL):
            raise InvalidGeometryError(
                "azimuth must lie in [-pi/2, pi/2] for linear arrays")
        if np.any(np.asarray(elevation) != 0):
            raise InvalidGeometryError("elevation requires a planar array")


def far_field_response(geom: ArrayGeometry, azimuth: float,
                       elevation: float = 0.0) -> np.ndarray:
    """Plane-wave steering vector ``exp(j 2 pi <p_n, u>)``.

    Entries are unit modulus and not normalized.
    """
    _check_angles(geom, azimuth, elevation)
    u = direction(azimuth, elevation)
    return np.exp(2j * np.pi * (geom.elements @ u))


def far_field_responses(geom: ArrayGeometry, azimuths) -> np.ndarray:
    """Steering vectors for many azimuths, shape ``(len(azimuths), N)``."""
    _check_angles(geom, azimuths, 0.0)
    u = direction(np.atleast_1d(azimuths))
    return np.exp(2j * np.pi * (u @ geom.elements.T))


def far_field_distance(geom: ArrayGeometry) -> float:
    """Fraunhofer distance ``2 D^2`` in wavelengths (0 for one element)."""
    return 2.0 * geom.aperture ** 2


def _spherical(distances: np.ndarray) -> np.ndarray:
    if np.any(distances < MIN_RANGE):
        raise SingularRangeError(
            f"observation point within {MIN_RANGE} wavelengths of an element")
    return np.exp(-2j * np.pi * distances) / distances


def near_field_response(geom: ArrayGeometry, point) -> np.ndarray:
    """Spherical-wave response of each element seen from `point`.

    Entry n is ``exp(-j 2 pi r_n) / r_n`` with ``r_n`` the exact distance
    from element n to the point (reference amplitude 1 at one wavelength).
    """
    p = np.asarray(point, dtype=float).reshape(3)
    r = np.linalg.norm(geom.elements - p, axis=1)
    return _spherical(r)


def near_field_responses(geom: ArrayGeometry, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    r = np.linalg.norm(pts[:, None, :] - geom.elements[None, :, :], axis=-1)
    return _spherical(r)


def array_factor(geom: ArrayGeometry, weights, range_, angles,
                 normalize: bool = False) -> np.ndarray:
    """Magnitude of ``weights^H a(point)`` over an azimuth grid.

    Parameters
    ----------
    geom : ArrayGeometry
    weights : array_like, shape (N,)
    range_ : float
        Distance of the observation points from the array centre, in
        wavelengths. ``np.inf`` selects the far-field response.
    angles : array_like
        Azimuths in radians.
    normalize : bool
        Scale so the largest value is 1.
    """
    w = np.asarray(weights, dtype=complex).ravel()
    if w.size != geom.n_elements:
        raise DimensionError(
            f"{w.size} weights for a {geom.n_elements}-element array",
            module="array-geometry")
    ang = np.atleast_1d(np.asarray(angles, dtype=float))
    if ang.size == 0:
        raise InvalidGeometryError("empty angle grid")
    if np.isinf(range_):
        resp = far_field_responses(geom, ang)
    else:
        if not range_ > 0:
            raise InvalidGeometryError("range must be positive")
        pts = geom.center + range_ * direction(ang)
        resp = near_field_responses(geom, pts)
    af = np.abs(resp @ w.conj())
    if normalize:
        peak = af.max()
        if peak > 0:
            af = af / peak
    return af


def to_db(magnitude, floor_db: float = -300.0) -> np.ndarray:
    """``20 log10`` of a magnitude, clipped below at `floor_db`."""
    mag = np.asarray(magnitude, dtype=float)
    with np.errstate(divide="ignore"):
        out = 20.0 * np.log10(mag)
    return np.maximum(out, floor_db)
