"""Single-photon sources for the three experiments.

Every event consumes a fixed number of uniform deviates from the emission
stream, in this order:

* double slit: slit choice, position across the slit, direction angle;
* Gaussian twin: source choice, two Box-Muller deviates, direction angle;
* biprism: two Box-Muller deviates, direction angle.

Box-Muller uses only the cosine branch, ``z = sqrt(-2 ln(1 - u1)) cos(2 pi u2)``,
so each Gaussian draw costs exactly two deviates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import optics
from .errors import AbsorbedRayError, InvalidParameterError
from .optics import BiprismSpec, PlaneScreen, SemicircleScreen

UPPER, LOWER = 1, -1


@dataclass(frozen=True)
class DoubleSlit:
    width: float
    separation: float

    def __post_init__(self):
        if not (self.width > 0.0 and self.separation > 0.0):
            raise InvalidParameterError("slit width and separation must be positive")
        if self.width > self.separation:
            raise InvalidParameterError("slits overlap: width exceeds separation")


@dataclass(frozen=True)
class GaussianTwin:
    sigma: float
    separation: float

    def __post_init__(self):
        if not (self.sigma > 0.0 and self.separation > 0.0):
            raise InvalidParameterError("sigma and separation must be positive")


@dataclass(frozen=True)
class BiprismPoint:
    sigma: float
    biprism: BiprismSpec
    source_x: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise InvalidParameterError("sigma must be positive")
        if not 0.0 <= self.source_x < self.biprism.apex_x:
            raise InvalidParameterError("the source must sit inside the glass, before the apex")


Variant = Union[DoubleSlit, GaussianTwin, BiprismPoint]


@dataclass(frozen=True)
class SourceSpec:
    """A source variant plus wavelength and (optional) angular aperture.

    ``aperture`` is the emission-angle interval.  ``None`` selects the
    default: the screen's subtended angles for slit and twin sources, and
    ``[-alpha/2, alpha/2]`` for the biprism.
    """

    variant: Variant
    wavelength: float
    aperture: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.wavelength > 0.0:
            raise InvalidParameterError("wavelength must be positive")
        if self.aperture is not None:
            lo, hi = self.aperture
            if not -math.pi / 2 < lo < hi < math.pi / 2:
                raise InvalidParameterError("aperture must be an interval inside (-pi/2, pi/2)")

    @property
    def uniforms_per_event(self) -> int:
        return {DoubleSlit: 3, GaussianTwin: 4, BiprismPoint: 3}[type(self.variant)]

    def resolved_aperture(self, screen) -> Tuple[float, float]:
        if self.aperture is not None:
            return self.aperture
        if isinstance(self.variant, BiprismPoint):
            half = self.variant.biprism.face_inclination
            return -half, half
        lo, hi = screen.subtended_angles()
        # grazing rays never reach a semicircle of finite radius
        return max(lo, -math.pi / 2 + 1e-12), min(hi, math.pi / 2 - 1e-12)


@dataclass(frozen=True)
class Message:
    """A messenger at the screen: unit phase vector, arrival coordinate, origin label.

    The label records which slit, source or biprism face the messenger came
    through.  Detectors never read it.
    """

    e: Tuple[float, float]
    arrival: float
    label: int

    def __post_init__(self):
        norm = math.hypot(*self.e)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParameterError(f"message vector is not unit length: {norm!r}")

    @property
    def phase(self) -> float:
        return math.atan2(self.e[1], self.e[0]) % (2.0 * math.pi)


def _box_muller(u1, u2):
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * math.pi * u2)


def _angle(u, aperture):
    lo, hi = aperture
    return lo + (hi - lo) * u


def emission_from_uniforms(spec: SourceSpec, u: np.ndarray, aperture) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map an ``(n, k)`` block of deviates to emission heights, angles and labels."""
    v = spec.variant
    if isinstance(v, DoubleSlit):
        label = np.where(u[:, 0] < 0.5, UPPER, LOWER)
        y = label * (0.5 * v.separation) + v.width * (u[:, 1] - 0.5)
        return y, _angle(u[:, 2], aperture), label
    if isinstance(v, GaussianTwin):
        label = np.where(u[:, 0] < 0.5, UPPER, LOWER)
        y = label * (0.5 * v.separation) + v.sigma * _box_muller(u[:, 1], u[:, 2])
        return y, _angle(u[:, 3], aperture), label
    y = v.sigma * _box_muller(u[:, 0], u[:, 1])
    return y, _angle(u[:, 2], aperture), np.zeros(len(y), dtype=int)


def propagate(spec: SourceSpec, screen, y0, beta, label):
    """Carry emitted messengers to the screen.

    Returns ``(arrival, phase, label, absorbed)``; absorbed messengers have
    NaN arrival and phase.  For the biprism the label becomes the exit face.
    """
    v = spec.variant
    if isinstance(v, BiprismPoint):
        if not isinstance(screen, PlaneScreen):
            raise InvalidParameterError("the biprism experiment needs a plane screen")
        out = optics.trace_biprism(y0, beta, v.biprism, screen.distance, v.source_x)
        absorbed = out["absorbed"]
        length = np.where(absorbed, 0.0, out["optical_length"])
        phase = np.where(absorbed, np.nan, optics.phase_of_path(length, spec.wavelength))
        return out["arrival"], phase, out["face"], absorbed
    if isinstance(screen, SemicircleScreen):
        arrival, length = optics.trace_to_semicircle(y0, beta, screen.radius)
    else:
        arrival, length = optics.trace_to_plane(y0, beta, screen.distance)
    phase = optics.phase_of_path(length, spec.wavelength)
    return arrival, phase, label, np.zeros(np.shape(arrival), dtype=bool)


def _emit_one(spec: SourceSpec, rng: np.random.Generator, aperture):
    u = rng.random((1, spec.uniforms_per_event))
    y, beta, label = emission_from_uniforms(spec, u, aperture)
    return y, beta, label


def emit_double_slit(spec: SourceSpec, rng: np.random.Generator, screen=None):
    """One emission ``((0, y), beta)`` from a uniformly lit slit."""
    if not isinstance(spec.variant, DoubleSlit):
        raise InvalidParameterError("emit_double_slit needs a DoubleSlit source")
    y, beta, _ = _emit_one(spec, rng, spec.resolved_aperture(screen or SemicircleScreen(1.0)))
    return (0.0, float(y[0])), float(beta[0])


def emit_gaussian_twin(spec: SourceSpec, rng: np.random.Generator, screen=None):
    if not isinstance(spec.variant, GaussianTwin):
        raise InvalidParameterError("emit_gaussian_twin needs a GaussianTwin source")
    if screen is None and spec.aperture is None:
        raise InvalidParameterError("pass a screen or an explicit aperture")
    y, beta, _ = _emit_one(spec, rng, spec.resolved_aperture(screen))
    return (0.0, float(y[0])), float(beta[0])


def emit_biprism(spec: SourceSpec, rng: np.random.Generator):
    if not isinstance(spec.variant, BiprismPoint):
        raise InvalidParameterError("emit_biprism needs a BiprismPoint source")
    y, beta, _ = _emit_one(spec, rng, spec.resolved_aperture(None))
    return (spec.variant.source_x, float(y[0])), float(beta[0])


def next_message(spec: SourceSpec, rng: np.random.Generator, screen) -> Message:
    """Emit and propagate one messenger.

    Raises :class:`AbsorbedRayError` when the messenger is lost inside the
    biprism; the caller tallies it and carries on with the next emission.
    """
    y, beta, label = _emit_one(spec, rng, spec.resolved_aperture(screen))
    arrival, phase, label, absorbed = propagate(spec, screen, y, beta, label)
    if bool(absorbed[0]):
        raise AbsorbedRayError("messenger absorbed in the biprism")
    return Message((float(np.cos(phase)[0]), float(np.sin(phase)[0])), float(arrival[0]), int(label[0]))
