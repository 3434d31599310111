"""Wave-theory intensity profiles used as ground truth for the event data.

Three references are provided:

* the Fraunhofer double-slit pattern,
* the paraxial closed form for two overlapping Gaussian pencils,
* a numerical superposition of Gaussian virtual line sources, used for the
  biprism and as an independent check of the closed form.

All intensities carry an arbitrary overall constant (set to one); the
harness fits a scale factor before comparing with detector counts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameterError, NumericalFailureError
from .optics import BiprismSpec

SINC_SERIES_CUTOFF = 1e-4
QUADRATURE_RTOL = 1e-6
MAX_PANELS = 1 << 14
_GL_T, _GL_W = np.polynomial.legendre.leggauss(16)


def _sinc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SINC_SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def double_slit_intensity(theta, a: float, d: float, wavelength: float):
    """Fraunhofer intensity of two slits of width ``a`` and spacing ``d``.

    ``sinc^2(k a sin(theta) / 2) * cos^2(k d sin(theta) / 2)``, normalized
    to one at ``theta = 0``.
    """
    if not wavelength > 0.0:
        raise InvalidParameterError("wavelength must be positive")
    k = 2.0 * math.pi / wavelength
    s = np.sin(np.asarray(theta, dtype=float))
    out = _sinc(0.5 * k * a * s) ** 2 * np.cos(0.5 * k * d * s) ** 2
    return float(out) if out.ndim == 0 else out


def coherence_factor(sigma: float, distance: float, wavelength: float) -> float:
    """``b = k^2 sigma^4 / (X^2 + k^2 sigma^4)`` for a Gaussian line source."""
    k = 2.0 * math.pi / wavelength
    q = (k * sigma * sigma) ** 2
    return q / (distance * distance + q)


def gaussian_twin_intensity(y, d: float, sigma: float, distance: float, wavelength: float):
    """Paraxial intensity of two Gaussian line sources at ``y = +-d/2``.

    ``(cosh(b y d / sigma^2) + cos((1 - b) k y d / X)) exp(-b (y^2 + d^2/4) / sigma^2)``.
    The form assumes ``d << X`` and ``sigma << X``; a warning is issued
    outside that regime.
    """
    if not wavelength > 0.0:
        raise InvalidParameterError("wavelength must be positive")
    if d > 0.1 * distance or sigma > 0.1 * distance:
        warnings.warn("gaussian_twin_intensity used outside d, sigma << X", RuntimeWarning, stacklevel=2)
    k = 2.0 * math.pi / wavelength
    b = coherence_factor(sigma, distance, wavelength)
    y = np.asarray(y, dtype=float)
    s2 = sigma * sigma
    # cosh(x) exp(-z) is formed as a sum of exponentials so it cannot overflow
    x = b * y * d / s2
    z = b * (y * y + 0.25 * d * d) / s2
    out = 0.5 * (np.exp(x - z) + np.exp(-x - z)) + np.cos((1.0 - b) * k * y * d / distance) * np.exp(-z)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussianLine:
    """A coherent line source with Gaussian amplitude, parametrized by ``u``.

    The radiating point is ``origin + u * step`` and it adds
    ``path0 + path1 * u`` to the optical path before free flight.  The
    amplitude is ``exp(-(u - center)^2 / (2 width^2))``.  When ``face`` is
    given, only straight lines from the source point to the screen point
    passing on the ``side`` of ``face`` contribute (the pencil leaving one
    biprism face).
    """

    origin: tuple
    step: tuple
    width: float
    center: float = 0.0
    path0: float = 0.0
    path1: float = 0.0
    face: Optional[tuple] = None
    side: int = 1


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _allowed_interval(line: GaussianLine, screen_x: float, y: np.ndarray, lo: float, hi: float):
    """Per-point integration bounds after applying the face cut."""
    lo_arr = np.full(y.shape, lo)
    hi_arr = np.full(y.shape, hi)
    if line.face is None:
        return lo_arr, hi_arr
    ax, ay = line.face[0] - line.origin[0], line.face[1] - line.origin[1]
    bx, by = screen_x - line.origin[0], y - line.origin[1]
    # side of the face point relative to the line source -> screen chord is
    # c(u) = c0 - u c1; the upper pencil needs c(u) > 0
    c0 = _cross(ax, ay, bx, by)
    c1 = _cross(ax - bx, ay - by, line.step[0], line.step[1])
    c0, c1 = line.side * c0, line.side * c1
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = c0 / c1
    upper_bound = c1 > 0
    lower_bound = c1 < 0
    hi_arr = np.where(upper_bound, np.minimum(hi_arr, cut), hi_arr)
    lo_arr = np.where(lower_bound, np.maximum(lo_arr, cut), lo_arr)
    empty = (c1 == 0) & (c0 <= 0)
    hi_arr = np.where(empty, lo_arr, hi_arr)
    return lo_arr, np.maximum(hi_arr, lo_arr)


def _integrate(line: GaussianLine, screen_x, y, k, lo, hi, panels, kernel):
    t = 0.5 * (_GL_T + 1.0)
    w = 0.5 * _GL_W
    span = (hi - lo) / panels
    total = np.zeros(y.shape, dtype=complex)
    for p in range(panels):
        a = lo + p * span
        u = a[:, None] + span[:, None] * t[None, :]
        vx = line.origin[0] + u * line.step[0]
        vy = line.origin[1] + u * line.step[1]
        dx = screen_x - vx
        dy = y[:, None] - vy
        if kernel == "fresnel":
            path = dx + dy * dy / (2.0 * dx)
        else:
            path = np.hypot(dx, dy)
        phase = k * (line.path0 + line.path1 * u + path)
        amp = np.exp(-((u - line.center) ** 2) / (2.0 * line.width ** 2))
        total += span * ((amp * np.exp(1j * phase)) @ w)
    return total


def line_amplitude(line: GaussianLine, y, screen_x: float, wavelength: float,
                   kernel: str = "exact", span: float = 7.0) -> np.ndarray:
    """Complex amplitude of ``line`` at the points ``(screen_x, y)``.

    Composite 16-point Gauss-Legendre quadrature over ``center +- span *
    width``; the panel count doubles until the amplitude changes by less
    than ``1e-6`` of its largest magnitude.
    """
    if kernel not in ("exact", "fresnel"):
        raise InvalidParameterError(f"unknown kernel {kernel!r}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = 2.0 * math.pi / wavelength
    lo0 = line.center - span * line.width
    hi0 = line.center + span * line.width
    lo, hi = _allowed_interval(line, screen_x, y, lo0, hi0)
    panels = 8
    prev = _integrate(line, screen_x, y, k, lo, hi, panels, kernel)
    while panels < MAX_PANELS:
        panels *= 2
        cur = _integrate(line, screen_x, y, k, lo, hi, panels, kernel)
        scale = np.max(np.abs(cur)) if cur.size else 0.0
        if np.max(np.abs(cur - prev), initial=0.0) <= QUADRATURE_RTOL * scale:
            return cur
        prev = cur
    raise NumericalFailureError(f"quadrature did not converge with {panels} panels")


def lines_intensity(lines: Sequence[GaussianLine], y, screen_x: float, wavelength: float,
                    kernel: str = "exact"):
    total = 0.0
    for line in lines:
        total = total + line_amplitude(line, y, screen_x, wavelength, kernel)
    return np.abs(total) ** 2


def twin_lines(d: float, sigma: float) -> list:
    """The two Gaussian line sources of the two-beam experiment, at ``x = 0``."""
    return [GaussianLine((0.0, side * 0.5 * d), (0.0, 1.0), sigma) for side in (1, -1)]


def biprism_virtual_lines(spec: BiprismSpec, sigma: float, source_x: float = 0.0,
                          face_cut: bool = True) -> list:
    """Virtual line sources seen through the two biprism faces.

    Refraction at a plane face images a source point lying a depth ``h``
    behind it to the apparent depth ``h / n``, i.e. shifted by
    ``h (1 - 1/n)`` along the face normal.  Relative to straight flight
    from the image, the true optical path is longer by ``(n - 1/n) h``.
    Both the image point and the extra path are affine in the emission
    height ``u``, so each face gives a tilted Gaussian line source.
    """
    return face_lines(spec.refractive_index, spec.face_inclination, spec.apex_x, sigma, source_x, face_cut)


def face_lines(n: float, inclination: float, apex_x: float, sigma: float, source_x: float = 0.0,
               face_cut: bool = True) -> list:
    """:func:`biprism_virtual_lines` from raw parameters (``n = 1`` allowed)."""
    c = math.cos(inclination)
    s = math.sin(inclination)
    depth = apex_x - source_x
    shrink = 1.0 - 1.0 / n
    lines = []
    for side in (1, -1):
        # h(u) = c * depth - side * s * u
        h0, h1 = c * depth, -side * s
        origin = (source_x + h0 * shrink * c, side * s * h0 * shrink)
        step = (h1 * shrink * c, 1.0 + side * s * h1 * shrink)
        lines.append(GaussianLine(origin, step, sigma, 0.0, (n - 1.0 / n) * h0, (n - 1.0 / n) * h1,
                                  (apex_x, 0.0) if face_cut else None, side))
    return lines


def biprism_intensity(y, spec: BiprismSpec, sigma: float, screen_x: float, wavelength: float,
                      source_x: float = 0.0, kernel: str = "exact", face_cut: bool = True):
    """Intensity behind a biprism lit by a Gaussian line source inside the glass."""
    lines = biprism_virtual_lines(spec, sigma, source_x, face_cut)
    return lines_intensity(lines, y, screen_x, wavelength, kernel)


def biprism_virtual_geometry(spec: BiprismSpec, source_x: float = 0.0):
    """Separation ``d_v`` and screen-side offset of the virtual source pair.

    Returns ``(d_v, x_v)``: the centres of the two virtual lines sit at
    ``(x_v, +-d_v / 2)``.
    """
    upper = biprism_virtual_lines(spec, 1.0, source_x)[0]
    return 2.0 * upper.origin[1], upper.origin[0]


def two_source_fringe_period(separation: float, distance: float, wavelength: float) -> float:
    """Fringe spacing ``lambda D / d`` of two coherent point sources."""
    return wavelength * distance / separation


def gaussian_pair_fringe_period(separation: float, distance: float, wavelength: float,
                                sigma: float, tilt: float = 0.0) -> float:
    """Fringe spacing of two Gaussian line sources ``separation`` apart.

    Each pencil is tilted by ``tilt`` toward the axis.  Narrow sources
    (``b -> 0``) give the point-source result ``lambda D / d``; wide,
    nearly collimated sources (``b -> 1``) give the two-plane-wave result
    ``lambda / (2 sin(tilt))``.
    """
    b = coherence_factor(sigma, distance, wavelength)
    return wavelength / (2.0 * b * math.sin(tilt) + (1.0 - b) * separation / distance)


def biprism_fringe_period(spec: BiprismSpec, screen_x: float, wavelength: float,
                          sigma: float, source_x: float = 0.0) -> float:
    """Two-virtual-source prediction of the biprism fringe spacing."""
    d_v, x_v = biprism_virtual_geometry(spec, source_x)
    return gaussian_pair_fringe_period(d_v, screen_x - x_v, wavelength, sigma, spec.deviation)


@dataclass(frozen=True)
class TheoryProfile:
    coordinates: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coordinates, dtype=float)
        i = np.asarray(self.intensities, dtype=float)
        if c.shape != i.shape or c.ndim != 1:
            raise InvalidParameterError("coordinates and intensities must be 1-d and of equal length")
        if np.any(i < 0.0) or not np.all(np.isfinite(i)):
            raise InvalidParameterError("intensities must be finite and non-negative")
        object.__setattr__(self, "coordinates", c)
        object.__setattr__(self, "intensities", i)

    def __len__(self):
        return len(self.coordinates)


def sample_profile(oracle: Callable, coordinates) -> TheoryProfile:
    """Evaluate a vectorized intensity function at sorted coordinates."""
    c = np.asarray(coordinates, dtype=float).reshape(-1)
    if np.any(np.diff(c) < 0.0):
        raise InvalidParameterError("coordinates must be sorted")
    if c.size == 0:
        return TheoryProfile(c, np.zeros(0))
    values = np.asarray(oracle(c), dtype=float).reshape(c.shape)
    return TheoryProfile(c, values)
