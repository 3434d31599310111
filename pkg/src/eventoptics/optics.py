"""Geometrical optics: ray paths, optical path lengths and phases.

Lengths are in meters and angles in radians throughout.  The array
functions (``trace_*``) accept scalars or numpy arrays and are the single
source of truth for propagation; the scalar helpers wrap them so that the
per-event API and the batched event loop produce identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import AbsorbedRayError, InvalidParameterError

TWO_PI = 2.0 * math.pi

Point = Tuple[float, float]


@dataclass(frozen=True)
class Ray:
    origin: Point
    direction: Point

    def __post_init__(self):
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParameterError(f"ray direction must be a unit vector, |u|={norm!r}")

    @classmethod
    def from_angle(cls, origin: Point, angle: float) -> "Ray":
        return cls(tuple(origin), (math.cos(angle), math.sin(angle)))

    @property
    def angle(self) -> float:
        return math.atan2(self.direction[1], self.direction[0])


@dataclass(frozen=True)
class OpticalPath:
    """Ordered (geometric length, refractive index) segments."""

    segments: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        for length, index in self.segments:
            if length < 0.0:
                raise InvalidParameterError(f"negative segment length {length!r}")
            if index < 1.0:
                raise InvalidParameterError(f"refractive index below one: {index!r}")

    @property
    def total_optical_length(self) -> float:
        total = 0.0
        for length, index in self.segments:
            total += length * index
        return total

    @property
    def geometric_length(self) -> float:
        return sum(length for length, _ in self.segments)


@dataclass(frozen=True)
class BiprismSpec:
    """Fresnel biprism with its apex at ``(apex_x, 0)``.

    The two exit faces meet at the apex and each is tilted by half the
    summit angle away from the plane ``x = apex_x``, so the glass is
    thickest on the axis.
    """

    summit_angle: float
    refractive_index: float
    apex_x: float

    def __post_init__(self):
        if not 0.0 < self.summit_angle < math.pi / 2:
            raise InvalidParameterError("summit angle must lie in (0, pi/2)")
        if not self.refractive_index > 1.0:
            raise InvalidParameterError("biprism refractive index must exceed 1")
        if not self.apex_x > 0.0:
            raise InvalidParameterError("apex position must be positive")

    @property
    def face_inclination(self) -> float:
        return 0.5 * self.summit_angle

    @property
    def deviation(self) -> float:
        """Exit-angle deviation of a ray travelling along the axis direction.

        The ray meets either face at incidence ``alpha/2`` and leaves bent
        toward the axis by ``asin(n sin(alpha/2)) - alpha/2``.
        """
        half = self.face_inclination
        return math.asin(self.refractive_index * math.sin(half)) - half

    def face_normal(self, side: int) -> Point:
        """Outward normal of the upper (``side=+1``) or lower (``-1``) face."""
        half = self.face_inclination
        return (math.cos(half), side * math.sin(half))


@dataclass(frozen=True)
class SemicircleScreen:
    """Detectors on a circle of ``radius`` centred on the source midpoint.

    The screen coordinate is the polar angle ``theta`` in radians.
    """

    radius: float
    start: float = -math.pi / 2
    stop: float = math.pi / 2
    unit = "rad"
    kind = "semicircle"

    def __post_init__(self):
        if not self.radius > 0.0:
            raise InvalidParameterError("screen radius must be positive")
        if not -math.pi / 2 <= self.start < self.stop <= math.pi / 2:
            raise InvalidParameterError("semicircle extent must lie within [-pi/2, pi/2]")

    def subtended_angles(self) -> Tuple[float, float]:
        return self.start, self.stop


@dataclass(frozen=True)
class PlaneScreen:
    """Detectors on the line ``x = distance``; the coordinate is ``y`` in meters."""

    distance: float
    start: float
    stop: float
    unit = "m"
    kind = "plane"

    def __post_init__(self):
        if not self.distance > 0.0:
            raise InvalidParameterError("screen distance must be positive")
        if not self.start < self.stop:
            raise InvalidParameterError("plane extent must satisfy start < stop")

    def subtended_angles(self) -> Tuple[float, float]:
        return math.atan2(self.start, self.distance), math.atan2(self.stop, self.distance)


def phase_of_path(optical_length, wavelength):
    """Phase ``2 pi (L mod lambda) / lambda`` reduced into ``[0, 2 pi)``.

    ``fmod`` of two doubles is exact, so the only rounding happens in the
    final scaling.  Works elementwise on arrays.
    """
    if np.any(np.asarray(wavelength) <= 0.0):
        raise InvalidParameterError("wavelength must be positive")
    length = np.asarray(optical_length, dtype=float)
    if np.any(length < 0.0):
        raise InvalidParameterError("optical length must be non-negative")
    phase = TWO_PI * (np.fmod(length, wavelength) / wavelength)
    phase = np.where(phase >= TWO_PI, 0.0, phase)
    if phase.ndim == 0:
        return float(phase)
    return phase


def free_path_length(start: Point, end: Point) -> float:
    return math.hypot(end[0] - start[0], end[1] - start[1])


def _refract(ux, uy, nx, ny, index):
    """Vector Snell refraction from glass of ``index`` into air.

    ``(nx, ny)`` is the outward face normal.  Returns the refracted
    direction and a mask of rays suffering total internal reflection.
    """
    cos_i = ux * nx + uy * ny
    sin2_t = index * index * (1.0 - cos_i * cos_i)
    absorbed = sin2_t > 1.0
    cos_t = np.sqrt(np.where(absorbed, 0.0, 1.0 - sin2_t))
    shift = cos_t - index * cos_i
    return index * ux + shift * nx, index * uy + shift * ny, absorbed


def trace_biprism(y0, beta, spec: BiprismSpec, screen_x: float, source_x: float = 0.0):
    """Trace rays emitted inside the biprism to the plane ``x = screen_x``.

    Parameters
    ----------
    y0, beta:
        Emission height and in-glass direction angle of each ray.
    spec:
        Biprism geometry.
    screen_x:
        Detector plane, beyond the apex.
    source_x:
        Abscissa of the emission line inside the glass.

    Returns
    -------
    dict with arrays ``arrival`` (y on the screen), ``glass`` and ``air``
    (geometric segment lengths), ``optical_length``, ``face`` (+1 upper,
    -1 lower, 0 straight through the apex), ``exit_x``, ``exit_y``,
    ``dir_x``, ``dir_y`` (refracted direction) and ``absorbed``.
    Absorbed rays carry NaN in the geometric fields.
    """
    y0 = np.asarray(y0, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = spec.refractive_index
    c = math.cos(spec.face_inclination)
    s = math.sin(spec.face_inclination)
    ux = np.cos(beta)
    uy = np.sin(beta)
    depth = c * (spec.apex_x - source_x)

    num_up = depth - s * y0
    num_dn = depth + s * y0
    t_up = num_up / (c * ux + s * uy)
    t_dn = num_dn / (c * ux - s * uy)
    upper = t_up < t_dn
    apex = t_up == t_dn
    t = np.where(upper, t_up, t_dn)
    ny = np.where(upper, s, -s)
    px = source_x + t * ux
    py = y0 + t * uy

    tx, ty, absorbed = _refract(ux, uy, c, ny, n)
    tx = np.where(apex, ux, tx)
    ty = np.where(apex, uy, ty)
    absorbed = (absorbed & ~apex) | (num_up < 0.0) | (num_dn < 0.0)

    air = (screen_x - px) / tx
    arrival = py + air * ty
    optical = n * t + air
    face = np.where(apex, 0, np.where(upper, 1, -1))
    nan = np.nan
    return {
        "arrival": np.where(absorbed, nan, arrival),
        "glass": np.where(absorbed, nan, t),
        "air": np.where(absorbed, nan, air),
        "optical_length": np.where(absorbed, nan, optical),
        "face": face,
        "exit_x": px,
        "exit_y": py,
        "dir_x": tx,
        "dir_y": ty,
        "absorbed": absorbed,
    }


def trace_to_semicircle(y0, beta, radius: float):
    """Free flight from ``(0, y0)`` to the circle of ``radius`` about the origin.

    Returns ``(theta, path_length)``.
    """
    y0 = np.asarray(y0, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ux = np.cos(beta)
    uy = np.sin(beta)
    t = -y0 * uy + np.sqrt(radius * radius - (y0 * ux) ** 2)
    theta = np.arctan2(y0 + t * uy, t * ux)
    return theta, t


def trace_to_plane(y0, beta, distance: float):
    """Free flight from ``(0, y0)`` to the plane ``x = distance``.

    Returns ``(y, path_length)``.
    """
    y0 = np.asarray(y0, dtype=float)
    beta = np.asarray(beta, dtype=float)
    t = distance / np.cos(beta)
    return y0 + t * np.sin(beta), t


def refract_at_biprism(ray: Ray, spec: BiprismSpec) -> Ray:
    """Refract a ray emitted inside the glass at the exit face it meets.

    Returns the refracted ray starting at the exit point.  A ray that hits
    the apex exactly is passed through undeviated.
    """
    beta = ray.angle
    out = trace_biprism(ray.origin[1], beta, spec, screen_x=spec.apex_x + 1.0,
                        source_x=ray.origin[0])
    if bool(out["absorbed"]):
        raise AbsorbedRayError("total internal reflection at the biprism exit face")
    dx, dy = float(out["dir_x"]), float(out["dir_y"])
    # the vector Snell formula yields a unit vector up to rounding
    norm = math.hypot(dx, dy)
    return Ray((float(out["exit_x"]), float(out["exit_y"])), (dx / norm, dy / norm))


def optical_length_through_biprism(emission: Point, beta: float, screen_x: float,
                                   spec: BiprismSpec) -> Tuple[OpticalPath, Point]:
    """Glass segment then air segment from ``emission`` to the screen.

    The refracted ray decides where it lands, so the arrival point is
    returned rather than taken as input.
    """
    out = trace_biprism(emission[1], beta, spec, screen_x, source_x=emission[0])
    if bool(out["absorbed"]):
        raise AbsorbedRayError("total internal reflection at the biprism exit face")
    path = OpticalPath(((float(out["glass"]), spec.refractive_index), (float(out["air"]), 1.0)))
    return path, (screen_x, float(out["arrival"]))


def thin_prism_separation(spec: BiprismSpec, distance: float) -> float:
    """Virtual-source separation ``2 L (n - 1) tan(alpha/2)`` of a thin biprism."""
    return 2.0 * distance * (spec.refractive_index - 1.0) * math.tan(spec.face_inclination)


def virtual_source_separation(spec: BiprismSpec, source_x: float = 0.0) -> float:
    """Separation of the two virtual sources seen in the plane of the source.

    Traces the two extreme rays of the pencils (emitted parallel to the
    axis just above and just below the apex) and extends the refracted rays
    back to ``x = source_x``.
    """
    eta = 1e-12 * spec.apex_x
    heights = []
    for side in (1, -1):
        refracted = refract_at_biprism(Ray((source_x, side * eta), (1.0, 0.0)), spec)
        (px, py), (dx, dy) = refracted.origin, refracted.direction
        heights.append(py + (source_x - px) * dy / dx)
    return heights[0] - heights[1]
