"""End-to-end experiment runs: emission, propagation, detection, persistence.

A run is fully determined by its :class:`ExperimentConfig` (which includes
the seed).  Within a replica, events are generated in chunks and fed to the
detectors in emission order, so the result is identical to the strictly
sequential per-event loop in :func:`run_sequential` and independent of the
chunk size.  Replicas use disjoint random streams and may run on threads.
"""

from __future__ import annotations

import hashlib
import io
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np

from . import wave
from .analysis import FitReport, fit_and_compare, fit_scale
from .detector import DetectorArray, count_variance, locate, process_events, window_edges
from .errors import AbsorbedRayError, ConfigurationError, MergeError
from .optics import BiprismSpec, PlaneScreen, SemicircleScreen
from .rng import EMISSION_CHANNEL, detector_channel, rng_stream, stream_id
from .sources import BiprismPoint, DoubleSlit, GaussianTwin, SourceSpec, emission_from_uniforms, next_message, propagate

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 1 << 18
CSV_HEADER = "index,coordinate,received,fired,theory,theory_fitted"

Screen = Union[SemicircleScreen, PlaneScreen]


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceSpec
    screen: Screen
    detector_count: int
    gamma: float = 0.999
    total_events: int = 10_000_000
    seed: int = 0
    replicas: int = 1

    def __post_init__(self):
        if self.detector_count < 2:
            raise ConfigurationError("need at least two detectors")
        if self.total_events < self.detector_count:
            raise ConfigurationError("total_events must be at least detector_count")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie strictly between 0 and 1")
        if self.replicas < 1:
            raise ConfigurationError("replicas must be positive")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if isinstance(self.source.variant, BiprismPoint):
            if not isinstance(self.screen, PlaneScreen):
                raise ConfigurationError("the biprism experiment needs a plane screen")
            if self.screen.distance <= self.source.variant.biprism.apex_x:
                raise ConfigurationError("the screen must lie beyond the biprism apex")

    @property
    def edges(self) -> np.ndarray:
        return window_edges(self.screen.start, self.screen.stop, self.detector_count)

    def items(self) -> list:
        """Flat ``(key, value)`` description in SI units, in a fixed order."""
        v = self.source.variant
        out = [("experiment", experiment_name(self)), ("wavelength", self.source.wavelength)]
        if isinstance(v, DoubleSlit):
            out += [("slit_width", v.width), ("separation", v.separation)]
        elif isinstance(v, GaussianTwin):
            out += [("sigma", v.sigma), ("separation", v.separation)]
        else:
            b = v.biprism
            out += [("sigma", v.sigma), ("summit_angle", b.summit_angle),
                    ("refractive_index", b.refractive_index), ("apex_x", b.apex_x),
                    ("source_x", v.source_x)]
        if self.source.aperture is not None:
            out += [("aperture_start", self.source.aperture[0]), ("aperture_stop", self.source.aperture[1])]
        if isinstance(self.screen, SemicircleScreen):
            out += [("screen", "semicircle"), ("radius", self.screen.radius)]
        else:
            out += [("screen", "plane"), ("distance", self.screen.distance)]
        out += [("screen_start", self.screen.start), ("screen_stop", self.screen.stop),
                ("detectors", self.detector_count), ("gamma", self.gamma),
                ("events", self.total_events), ("seed", self.seed), ("replicas", self.replicas)]
        return out

    def digest(self) -> str:
        text = "".join(f"{k}={v!r}\n" for k, v in self.items())
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def experiment_name(config: ExperimentConfig) -> str:
    return {DoubleSlit: "double-slit", GaussianTwin: "two-beam", BiprismPoint: "biprism"}[
        type(config.source.variant)]


# -- canonical experiments ------------------------------------------------

WAVELENGTH = 670e-9
DOUBLE_SLIT_RADIUS = 0.05e-3
TWO_BEAM_DISTANCE = 0.1e-3
DEFAULT_OFFSET = 7e-3


def double_slit_config(*, wavelength=WAVELENGTH, width=None, separation=None, radius=DOUBLE_SLIT_RADIUS,
                       detectors=181, gamma=0.999, events=10_000_000, seed=0, replicas=1):
    width = wavelength if width is None else width
    separation = 5 * wavelength if separation is None else separation
    source = SourceSpec(DoubleSlit(width, separation), wavelength)
    screen = SemicircleScreen(radius, -math.pi / 2, math.pi / 2)
    return ExperimentConfig(source, screen, detectors, gamma, events, seed, replicas)


def envelope_half_width(separation, sigma, distance, wavelength, widths=4.0):
    """Half-extent covering ``widths`` envelope deviations beyond each pencil centre."""
    b = wave.coherence_factor(sigma, distance, wavelength)
    return 0.5 * separation + widths * sigma / math.sqrt(2.0 * b)


def two_beam_config(*, wavelength=WAVELENGTH, sigma=None, separation=None, distance=TWO_BEAM_DISTANCE,
                    detectors=201, gamma=0.999, events=10_000_000, seed=0, replicas=1, half_width=None):
    sigma = wavelength if sigma is None else sigma
    separation = 8 * wavelength if separation is None else separation
    if half_width is None:
        half_width = envelope_half_width(separation, sigma, distance, wavelength)
    source = SourceSpec(GaussianTwin(sigma, separation), wavelength)
    screen = PlaneScreen(distance, -half_width, half_width)
    return ExperimentConfig(source, screen, detectors, gamma, events, seed, replicas)


def biprism_config(*, offset=DEFAULT_OFFSET, wavelength=WAVELENGTH, sigma=0.531e-3, summit_angle=math.radians(1.0),
                   refractive_index=1.5631, apex_x=45e-3, source_x=0.0, detectors=1000, gamma=0.999,
                   events=10_000_000, seed=0, replicas=1, half_width=None):
    """Biprism experiment with the screen ``offset`` beyond the apex."""
    half_width = 4.0 * sigma if half_width is None else half_width
    prism = BiprismSpec(summit_angle, refractive_index, apex_x)
    source = SourceSpec(BiprismPoint(sigma, prism, source_x), wavelength)
    screen = PlaneScreen(apex_x + offset, -half_width, half_width)
    return ExperimentConfig(source, screen, detectors, gamma, events, seed, replicas)


# -- profiles ---------------------------------------------------------------

@dataclass
class CountsProfile:
    """Per-detector window centres, messages received and firings.

    ``variance`` is the estimated variance of each firing count (see
    :func:`eventoptics.detector.count_variance`); it is kept for statistical
    tests and is not persisted.
    """

    coordinates: np.ndarray
    received: np.ndarray
    fired: np.ndarray
    edges: np.ndarray
    unit: str = "m"
    variance: Optional[np.ndarray] = None
    theory: Optional[np.ndarray] = None
    theory_fitted: Optional[np.ndarray] = None
    off_screen: int = 0
    absorbed: int = 0
    events: int = 0

    @classmethod
    def empty(cls, edges, unit="m"):
        edges = np.asarray(edges, dtype=float)
        n = len(edges) - 1
        zeros = np.zeros(n, dtype=np.int64)
        return cls(0.5 * (edges[:-1] + edges[1:]), zeros, zeros.copy(), edges, unit, np.zeros(n))

    def __len__(self):
        return len(self.coordinates)

    @property
    def rows(self):
        return list(zip(self.coordinates, self.received, self.fired,
                        self._column(self.theory), self._column(self.theory_fitted)))

    def _column(self, values):
        return values if values is not None else np.full(len(self), np.nan)

    def with_theory(self, intensities) -> "CountsProfile":
        """Attach a theory curve and its least-squares scaling to the firings."""
        intensities = np.asarray(intensities, dtype=float)
        c, _ = fit_scale(self.fired, intensities)
        return replace(self, theory=intensities, theory_fitted=c * intensities)

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(CSV_HEADER + "\n")
        theory = self._column(self.theory)
        fitted = self._column(self.theory_fitted)
        for j in range(len(self)):
            buf.write(f"{j},{self.coordinates[j]:.17g},{int(self.received[j])},{int(self.fired[j])},"
                      f"{theory[j]:.17g},{fitted[j]:.17g}\n")
        return buf.getvalue()


def read_csv(path) -> dict:
    """Columns of a profile CSV as numpy arrays keyed by header name."""
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n").split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, j] for j, name in enumerate(header)}


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename.

    On any failure the temporary file is removed and the destination is left
    untouched.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(profile: CountsProfile, path) -> None:
    atomic_write(path, profile.to_csv())


def replica_merge(profiles: Sequence[CountsProfile]) -> CountsProfile:
    """Element-wise sum of counts over profiles sharing one detector geometry."""
    profiles = list(profiles)
    if not profiles:
        raise MergeError("nothing to merge")
    first = profiles[0]
    for p in profiles[1:]:
        if p.unit != first.unit or p.edges.shape != first.edges.shape or not np.array_equal(p.edges, first.edges):
            raise MergeError("profiles have different detector geometry")
    variance = None
    if all(p.variance is not None for p in profiles):
        variance = sum(p.variance for p in profiles)
    merged = CountsProfile(
        first.coordinates.copy(),
        sum(p.received for p in profiles),
        sum(p.fired for p in profiles),
        first.edges.copy(),
        first.unit,
        variance,
        off_screen=sum(p.off_screen for p in profiles),
        absorbed=sum(p.absorbed for p in profiles),
        events=sum(p.events for p in profiles),
    )
    if first.theory is not None and np.any(merged.fired):
        merged = merged.with_theory(first.theory)
    return merged


# -- running ---------------------------------------------------------------

def _replica_events(config: ExperimentConfig, replica: int) -> int:
    base, extra = divmod(config.total_events, config.replicas)
    return base + (1 if replica < extra else 0)


def _threshold_deviates(idx, streams, ndet):
    """One deviate per accepted message from its detector's own stream, in order."""
    r = np.zeros(idx.shape[0])
    accepted = idx >= 0
    counts = np.bincount(idx[accepted], minlength=ndet)
    order = np.argsort(idx, kind="stable")
    start = idx.shape[0] - int(counts.sum())
    for j in np.flatnonzero(counts):
        k = int(counts[j])
        r[order[start:start + k]] = streams[j].random(k)
        start += k
    return r


def run_replica(config: ExperimentConfig, replica: int = 0, chunk: int = DEFAULT_CHUNK) -> CountsProfile:
    """Run one replica's share of the event budget with the batched kernel."""
    if chunk < 1:
        raise ConfigurationError("chunk must be positive")
    ndet = config.detector_count
    edges = config.edges
    spec = config.source
    aperture = spec.resolved_aperture(config.screen)
    k = spec.uniforms_per_event
    emission = rng_stream(config.seed, stream_id(replica, EMISSION_CHANNEL))
    streams = [rng_stream(config.seed, stream_id(replica, detector_channel(j))) for j in range(ndet)]

    p0 = np.zeros(ndet)
    p1 = np.zeros(ndet)
    received = np.zeros(ndet, dtype=np.int64)
    fired = np.zeros(ndet, dtype=np.int64)
    moments = np.zeros((ndet, 5))
    off_screen = 0
    absorbed_total = 0
    remaining = _replica_events(config, replica)
    events = remaining
    while remaining > 0:
        n = min(chunk, remaining)
        remaining -= n
        u = emission.random((n, k))
        y0, beta, label = emission_from_uniforms(spec, u, aperture)
        arrival, phase, _, absorbed = propagate(spec, config.screen, y0, beta, label)
        idx = locate(edges, arrival)
        absorbed_total += int(np.count_nonzero(absorbed))
        off_screen += int(np.count_nonzero((idx < 0) & ~absorbed))
        ec = np.cos(phase)
        es = np.sin(phase)
        r = _threshold_deviates(idx, streams, ndet)
        process_events(idx.astype(np.int64), ec, es, r, config.gamma, p0, p1, received, fired, moments)

    profile = CountsProfile.empty(edges, config.screen.unit)
    profile.received = received
    profile.fired = fired
    profile.variance = count_variance(received, fired, moments)
    profile.off_screen = off_screen
    profile.absorbed = absorbed_total
    profile.events = events
    return profile


def run_sequential(config: ExperimentConfig, replica: int = 0) -> CountsProfile:
    """Reference loop: one message at a time through :class:`DetectorArray`.

    Slow; used to check that the batched kernel is an exact re-expression
    of the per-event model.
    """
    array = DetectorArray.tile(config.screen, config.detector_count, config.gamma, config.seed, replica)
    emission = rng_stream(config.seed, stream_id(replica, EMISSION_CHANNEL))
    absorbed = 0
    events = _replica_events(config, replica)
    for _ in range(events):
        try:
            message = next_message(config.source, emission, config.screen)
        except AbsorbedRayError:
            absorbed += 1
            continue
        array.receive(message)
    profile = CountsProfile.empty(config.edges, config.screen.unit)
    profile.received = np.array([d.received for d in array.detectors], dtype=np.int64)
    profile.fired = np.array([d.fired for d in array.detectors], dtype=np.int64)
    profile.variance = None
    profile.off_screen = array.off_screen
    profile.absorbed = absorbed
    profile.events = events
    return profile


def theory_intensity(config: ExperimentConfig, coordinates) -> np.ndarray:
    """Wave-theory intensity (unit constant) at the given screen coordinates."""
    spec = config.source
    v = spec.variant
    lam = spec.wavelength
    if isinstance(v, DoubleSlit):
        return wave.double_slit_intensity(coordinates, v.width, v.separation, lam)
    if isinstance(v, GaussianTwin):
        distance = config.screen.distance if isinstance(config.screen, PlaneScreen) else config.screen.radius
        return wave.gaussian_twin_intensity(coordinates, v.separation, v.sigma, distance, lam)
    return wave.biprism_intensity(coordinates, v.biprism, v.sigma, config.screen.distance, lam, v.source_x)


def predicted_period(config: ExperimentConfig) -> float:
    """Analytic fringe spacing in screen units (NaN when not applicable)."""
    spec = config.source
    v = spec.variant
    if isinstance(v, BiprismPoint):
        return wave.biprism_fringe_period(v.biprism, config.screen.distance, spec.wavelength,
                                          v.sigma, v.source_x)
    if isinstance(v, GaussianTwin) and isinstance(config.screen, PlaneScreen):
        return wave.gaussian_pair_fringe_period(v.separation, config.screen.distance, spec.wavelength, v.sigma)
    if isinstance(v, DoubleSlit):
        # minima at sin(theta) = (m + 1/2) lambda / d around the centre
        s = 0.5 * spec.wavelength / v.separation
        return 2.0 * math.asin(min(s, 1.0))
    return float("nan")


@dataclass
class RunResult:
    config: ExperimentConfig
    profile: CountsProfile
    replicas: List[CountsProfile] = field(default_factory=list)
    report: Optional[FitReport] = None
    predicted_period: float = float("nan")
    wall_time: float = 0.0

    def summary(self) -> str:
        p = self.profile
        lines = [f"experiment={experiment_name(self.config)}",
                 f"events={self.config.total_events}",
                 f"received={int(p.received.sum())}",
                 f"fired={int(p.fired.sum())}",
                 f"off_screen={p.off_screen}",
                 f"absorbed={p.absorbed}"]
        if self.report is not None:
            lines.append(self.report.to_text().rstrip("\n"))
        lines.append(f"fringe_period_predicted={self.predicted_period!r}")
        return "\n".join(lines) + "\n"


def run(config: ExperimentConfig, *, chunk: int = DEFAULT_CHUNK, workers: int = 1,
        theory: bool = True) -> RunResult:
    """Run every replica, merge them and (optionally) compare with theory."""
    start = time.perf_counter()
    indices = range(config.replicas)
    if workers > 1 and config.replicas > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda rep: run_replica(config, rep, chunk), indices))
    else:
        parts = [run_replica(config, rep, chunk) for rep in indices]
    merged = replica_merge(parts)
    report = None
    if theory:
        merged = merged.with_theory(theory_intensity(config, merged.coordinates))
        if np.any(merged.fired):
            report = fit_and_compare(merged.fired, merged.theory, merged.coordinates, center=0.0)
    elapsed = time.perf_counter() - start
    log.info("seed=%d config=%s off_screen=%d absorbed=%d wall_time=%.3fs",
             config.seed, config.digest(), merged.off_screen, merged.absorbed, elapsed)
    return RunResult(config, merged, parts, report, predicted_period(config), elapsed)
