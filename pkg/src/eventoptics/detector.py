"""Adaptive threshold detectors and the detector screen.

A detector keeps a two-vector ``p`` (norm at most one).  Each received
message ``e`` moves it to ``gamma * p + (1 - gamma) * e``; the detector then
clicks when ``|p|**2`` strictly exceeds a fresh uniform deviate ``r``.

:class:`DetectorState` and :class:`DetectorArray` are the per-event reference
implementation.  :func:`process_events` runs the same arithmetic over a whole
batch of messages in emission order and is what the harness uses.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numba
import numpy as np

from .errors import InvalidMessageError, InvalidParameterError
from .rng import detector_channel, rng_stream, stream_id

UNIT_TOLERANCE = 1e-12


@dataclass
class DetectorState:
    gamma: float
    window: Tuple[float, float]
    p: Tuple[float, float] = (0.0, 0.0)
    received: int = 0
    fired: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameterError("gamma must lie strictly between 0 and 1")
        if math.hypot(*self.p) > 1.0 + UNIT_TOLERANCE:
            raise InvalidParameterError("|p| must not exceed one")

    def update(self, e: Tuple[float, float]) -> None:
        if abs(math.hypot(e[0], e[1]) - 1.0) > UNIT_TOLERANCE:
            raise InvalidMessageError(f"message is not a unit vector: {e!r}")
        g = self.gamma
        self.p = (g * self.p[0] + (1.0 - g) * e[0], g * self.p[1] + (1.0 - g) * e[1])
        self.received += 1

    def fire(self, r: float) -> int:
        if not 0.0 <= r < 1.0:
            raise InvalidParameterError(f"threshold deviate outside [0, 1): {r!r}")
        signal = int(self.p[0] * self.p[0] + self.p[1] * self.p[1] > r)
        self.fired += signal
        return signal

    def contains(self, coordinate: float) -> bool:
        lo, hi = self.window
        return lo <= coordinate < hi

    @property
    def center(self) -> float:
        return 0.5 * (self.window[0] + self.window[1])


def window_edges(start: float, stop: float, count: int) -> np.ndarray:
    if count < 1:
        raise InvalidParameterError("need at least one detector")
    return np.linspace(start, stop, count + 1)


def locate(edges: np.ndarray, coordinate) -> np.ndarray:
    """Detector index for each coordinate, ``-1`` when off screen.

    Windows are half-open ``[lo, hi)``; NaN coordinates map to ``-1`` as well.
    """
    idx = np.searchsorted(edges, coordinate, side="right") - 1
    inside = (idx >= 0) & (idx < len(edges) - 1)
    return np.where(inside, idx, -1)


@dataclass
class DetectorArray:
    """Identical detectors tiling a screen with equal, disjoint windows.

    When ``seed`` is given each detector draws its thresholds from its own
    keyed stream, the same streams the batched harness uses.
    """

    detectors: List[DetectorState]
    screen: object = None
    seed: Optional[int] = None
    replica: int = 0
    off_screen: int = 0
    _streams: list = field(default_factory=list, repr=False)

    @classmethod
    def tile(cls, screen, count: int, gamma: float, seed: Optional[int] = None, replica: int = 0):
        edges = window_edges(screen.start, screen.stop, count)
        detectors = [DetectorState(gamma, (float(edges[j]), float(edges[j + 1]))) for j in range(count)]
        return cls(detectors, screen, seed, replica)

    def __post_init__(self):
        for left, right in zip(self.detectors, self.detectors[1:]):
            if left.window[1] > right.window[0]:
                raise InvalidParameterError("detector windows overlap or are out of order")
        if self.seed is not None:
            self._streams = [rng_stream(self.seed, stream_id(self.replica, detector_channel(j)))
                             for j in range(len(self.detectors))]

    def index_of(self, coordinate: float) -> Optional[int]:
        lows = [d.window[0] for d in self.detectors]
        j = bisect.bisect_right(lows, coordinate) - 1
        if j >= 0 and self.detectors[j].contains(coordinate):
            return j
        return None

    def receive(self, message, r: Optional[float] = None) -> Optional[int]:
        """Route one message to the detector whose window holds its arrival.

        Returns the detector's output signal, or ``None`` for an off-screen
        message.  ``r`` overrides the detector's own threshold stream.
        """
        j = self.index_of(message.arrival)
        if j is None:
            self.off_screen += 1
            return None
        if r is None:
            if not self._streams:
                raise InvalidParameterError("no threshold stream: pass r or build the array with a seed")
            r = float(self._streams[j].random())
        detector = self.detectors[j]
        detector.update(message.e)
        return detector.fire(r)

    def counts_profile(self) -> List[Tuple[float, int, int]]:
        return [(d.center, d.received, d.fired) for d in self.detectors]


@numba.njit(cache=True, nogil=True)
def process_events(idx, ec, es, r, gamma, p0, p1, received, fired, moments):
    """Feed messages in order to their detectors, updating state in place.

    ``idx[i] < 0`` marks a message no detector accepts.  ``moments[j]``
    accumulates ``(sum c, sum s, sum c*c, sum s*s, sum c*s)`` of the message
    vectors seen by detector ``j``; the harness uses them for count variances.
    """
    g1 = 1.0 - gamma
    for i in range(idx.shape[0]):
        j = idx[i]
        if j < 0:
            continue
        c = ec[i]
        s = es[i]
        a = gamma * p0[j] + g1 * c
        b = gamma * p1[j] + g1 * s
        p0[j] = a
        p1[j] = b
        received[j] += 1
        if a * a + b * b > r[i]:
            fired[j] += 1
        moments[j, 0] += c
        moments[j, 1] += s
        moments[j, 2] += c * c
        moments[j, 3] += s * s
        moments[j, 4] += c * s


def count_variance(received, fired, moments) -> np.ndarray:
    """Approximate variance of each detector's click count.

    With ``m`` the mean message vector and ``C`` its covariance, a detector
    that has settled into its stationary regime clicks
    ``M |m|**2 + 4 M m.C.m`` times with that variance: the Poisson part plus
    the fluctuation of the detector's running average around ``m``.
    The observed count stands in for ``M |m|**2`` when it is larger, which
    keeps the estimate sensible for detectors with few messages.
    """
    received = np.asarray(received, dtype=float)
    fired = np.asarray(fired, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = moments[:, :2] / received[:, None]
        cc = moments[:, 2] / received - mean[:, 0] ** 2
        ss = moments[:, 3] / received - mean[:, 1] ** 2
        cs = moments[:, 4] / received - mean[:, 0] * mean[:, 1]
        quad = mean[:, 0] ** 2 * cc + 2.0 * mean[:, 0] * mean[:, 1] * cs + mean[:, 1] ** 2 * ss
        var = np.maximum(fired, received * (mean ** 2).sum(axis=1)) + 4.0 * received * np.maximum(quad, 0.0)
    return np.where(received > 0, var, 0.0)
