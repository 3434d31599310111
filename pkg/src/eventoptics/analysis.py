"""Comparison of detector counts with theory: scale fit, fringes, chi-square."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks

from .errors import DegenerateFitError, InvalidParameterError

DEFAULT_PROMINENCE = 0.1
MIN_BIN_COUNT = 50


@dataclass(frozen=True)
class FitReport:
    scale: float
    normalized_rmse: float
    fringe_period_sim: float
    fringe_period_theory: float

    def __post_init__(self):
        if self.scale < 0.0 or self.normalized_rmse < 0.0:
            raise InvalidParameterError("scale and rmse must be non-negative")

    def to_text(self) -> str:
        return "".join(f"{key}={value!r}\n" for key, value in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "FitReport":
        fields = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                fields[key.strip()] = float(value)
        return cls(**fields)


def fit_scale(counts, theory):
    """Least-squares scale ``c`` and normalized RMSE of ``counts ~ c * theory``."""
    n = np.asarray(counts, dtype=float)
    i = np.asarray(theory, dtype=float)
    if n.shape != i.shape:
        raise InvalidParameterError("counts and theory must have the same shape")
    ii = float(i @ i)
    nn = float(n @ n)
    if ii == 0.0 or nn == 0.0:
        raise DegenerateFitError("cannot fit against an all-zero profile")
    c = float(n @ i) / ii
    resid = n - c * i
    return c, math.sqrt(float(resid @ resid) / nn)


def _refine(coords, values, j):
    """Vertex of the parabola through samples ``j - 1, j, j + 1``."""
    if j <= 0 or j >= len(values) - 1:
        return float(coords[j])
    y0, y1, y2 = values[j - 1], values[j], values[j + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(coords[j])
    shift = 0.5 * (y0 - y2) / denom
    step = 0.5 * (coords[j + 1] - coords[j - 1])
    return float(coords[j] + shift * step)


def _smoothed(values, smooth):
    v = np.asarray(values, dtype=float)
    return gaussian_filter1d(v, smooth, mode="nearest") if smooth else v


def fringe_extrema(coords, values, kind: str = "min", prominence: float = DEFAULT_PROMINENCE,
                   smooth: float = 0.0) -> np.ndarray:
    """Refined positions of prominent interior minima or maxima.

    ``prominence`` is relative to the profile maximum; ``smooth`` is the
    width, in samples, of a Gaussian filter applied first (for noisy counts).
    """
    coords = np.asarray(coords, dtype=float)
    v = _smoothed(values, smooth)
    if v.size < 3 or v.max() <= 0.0:
        return np.zeros(0)
    sign = -1.0 if kind == "min" else 1.0
    peaks, _ = find_peaks(sign * v, prominence=prominence * v.max())
    return np.array([_refine(coords, v, j) for j in peaks])


def fringe_period(coords, values, center: Optional[float] = None,
                  prominence: float = DEFAULT_PROMINENCE, smooth: float = 0.0) -> float:
    """Spacing of the two neighbouring interior minima closest to ``center``.

    Returns NaN when fewer than two prominent minima exist.
    """
    coords = np.asarray(coords, dtype=float)
    minima = fringe_extrema(coords, values, "min", prominence, smooth)
    if minima.size < 2:
        return float("nan")
    if center is None:
        center = 0.5 * (coords[0] + coords[-1])
    mids = 0.5 * (minima[1:] + minima[:-1])
    j = int(np.argmin(np.abs(mids - center)))
    return float(minima[j + 1] - minima[j])


def central_maxima(coords, values, count: int, center: Optional[float] = None,
                   prominence: float = DEFAULT_PROMINENCE, smooth: float = 0.0) -> np.ndarray:
    """The ``count`` prominent maxima nearest ``center``, sorted by position."""
    coords = np.asarray(coords, dtype=float)
    maxima = fringe_extrema(coords, values, "max", prominence, smooth)
    if center is None:
        center = 0.5 * (coords[0] + coords[-1])
    order = np.argsort(np.abs(maxima - center), kind="stable")[:count]
    return np.sort(maxima[order])


def count_fringes(coords, values, lo: float, hi: float, prominence: float = DEFAULT_PROMINENCE,
                  smooth: float = 0.0) -> int:
    """Number of prominent maxima with ``lo <= coordinate <= hi``."""
    maxima = fringe_extrema(coords, values, "max", prominence, smooth)
    return int(np.count_nonzero((maxima >= lo) & (maxima <= hi)))


def fit_and_compare(counts, theory, coords, smooth: float = 1.0,
                    prominence: float = DEFAULT_PROMINENCE, center: Optional[float] = None) -> FitReport:
    """Scale fit plus fringe periods of the counts and of the theory curve."""
    c, rmse = fit_scale(counts, theory)
    return FitReport(
        scale=c,
        normalized_rmse=rmse,
        fringe_period_sim=fringe_period(coords, counts, center, prominence, smooth),
        fringe_period_theory=fringe_period(coords, theory, center, prominence),
    )


def merge_bins(*arrays, weights, minimum: float = MIN_BIN_COUNT) -> list:
    """Sum neighbouring bins left to right until ``weights`` reaches ``minimum``.

    The leftover tail is folded into the last bin.  Each input array is
    merged with the same grouping.
    """
    weights = np.asarray(weights, dtype=float)
    groups = []
    start = 0
    acc = 0.0
    for j, w in enumerate(weights):
        acc += w
        if acc >= minimum:
            groups.append((start, j + 1))
            start, acc = j + 1, 0.0
    if start < len(weights):
        if groups:
            groups[-1] = (groups[-1][0], len(weights))
        else:
            groups.append((start, len(weights)))
    return [np.array([np.sum(np.asarray(a, dtype=float)[s:e]) for s, e in groups]) for a in arrays]


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    dof: int
    pvalue: float


def homogeneity(a, b, var_a, var_b, minimum: float = MIN_BIN_COUNT) -> ChiSquare:
    """Chi-square test that two count profiles share one expectation.

    Bins are merged until both profiles hold at least ``minimum`` counts;
    each merged difference is weighted by the summed variances.  With
    Poisson counts pass the counts themselves as variances.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ma, mb, va, vb = merge_bins(a, b, var_a, var_b, weights=np.minimum(a, b), minimum=minimum)
    keep = (va + vb) > 0.0
    if not np.any(keep):
        raise DegenerateFitError("no populated bins to compare")
    stat = float(np.sum((ma[keep] - mb[keep]) ** 2 / (va[keep] + vb[keep])))
    dof = int(np.count_nonzero(keep))
    return ChiSquare(stat, dof, float(stats.chi2.sf(stat, dof)))


def mirror_symmetry(coords, counts, variances, center: float = 0.0,
                    minimum: float = MIN_BIN_COUNT) -> ChiSquare:
    """Chi-square comparison of a profile with its mirror image about ``center``.

    Requires a grid symmetric about ``center``; a middle bin (odd count)
    carries no information and is dropped.
    """
    coords = np.asarray(coords, dtype=float)
    counts = np.asarray(counts, dtype=float)
    variances = np.asarray(variances, dtype=float)
    span = np.max(np.abs(coords - center))
    if not np.allclose(coords - center, -(coords[::-1] - center), rtol=0.0, atol=1e-9 * span):
        raise InvalidParameterError("grid is not symmetric about the mirror point")
    half = len(coords) // 2
    left = slice(half - 1, None, -1) if half else slice(0, 0)
    right = slice(len(coords) - half, None)
    return homogeneity(counts[left], counts[right], variances[left], variances[right], minimum)


def poisson_rmse_estimate(mean_count: float) -> float:
    """Order of the normalized RMSE expected from counting noise alone."""
    return 1.0 / math.sqrt(mean_count)
