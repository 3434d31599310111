import math

import numpy as np
import pytest
from scipy import stats
from scipy.signal import find_peaks

from eventoptics import optics, sources
from eventoptics.errors import InvalidParameterError
from eventoptics.optics import BiprismSpec, PlaneScreen, SemicircleScreen
from eventoptics.rng import rng_stream
from eventoptics.sources import (BiprismPoint, DoubleSlit, GaussianTwin, Message, SourceSpec,
                                 emission_from_uniforms, next_message)

LAM = 670e-9
PRISM_1DEG = BiprismSpec(math.radians(1.0), 1.5631, 45e-3)
SLITS = SourceSpec(DoubleSlit(LAM, 5 * LAM), LAM)
TWIN = SourceSpec(GaussianTwin(LAM, 8 * LAM), LAM)
PRISM = SourceSpec(BiprismPoint(0.531e-3, PRISM_1DEG), LAM)
HALF_PLANE = PlaneScreen(0.1e-3, -50e-6, 50e-6)


def _draw(spec, n, screen=None, seed=1):
    u = rng_stream(seed, 0).random((n, spec.uniforms_per_event))
    return emission_from_uniforms(spec, u, spec.resolved_aperture(screen))


def test_variant_validation():
    with pytest.raises(InvalidParameterError):
        DoubleSlit(2.0, 1.0)
    with pytest.raises(InvalidParameterError):
        GaussianTwin(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        SourceSpec(DoubleSlit(1.0, 2.0), 0.0)
    with pytest.raises(InvalidParameterError):
        BiprismPoint(1e-3, PRISM_1DEG, source_x=50e-3)


def test_double_slit_choice_is_fair():
    n = 1_000_000
    _, _, label = _draw(SLITS, n, SemicircleScreen(5e-5))
    upper = np.count_nonzero(label == 1)
    assert abs(upper - n / 2) <= 3 * math.sqrt(n * 0.25)


def test_double_slit_support_and_mean():
    n = 1_000_000
    y, beta, _ = _draw(SLITS, n, SemicircleScreen(5e-5))
    a, d = LAM, 5 * LAM
    in_upper = (y >= d / 2 - a / 2) & (y <= d / 2 + a / 2)
    in_lower = (y >= -d / 2 - a / 2) & (y <= -d / 2 + a / 2)
    assert np.all(in_upper | in_lower)
    spread = a / math.sqrt(12)
    assert abs(np.abs(y).mean() - d / 2) < 4 * spread / math.sqrt(n)
    assert np.all(np.abs(beta) < math.pi / 2)


def test_twin_spread_and_symmetry():
    n = 1_000_000
    y, beta, label = _draw(TWIN, n, HALF_PLANE)
    offsets = y - label * 4 * LAM
    assert offsets.std() == pytest.approx(LAM, rel=0.01)
    hist_up, edges = np.histogram(y[label == 1], bins=60, range=(0, 8 * LAM))
    hist_dn, _ = np.histogram(-y[label == -1], bins=edges)
    # the two sources are mirror images: a two-sample homogeneity test on the histograms
    table = np.array([hist_up, hist_dn])
    keep = table.sum(axis=0) > 0
    assert stats.chi2_contingency(table[:, keep])[1] > 0.01
    lo, hi = HALF_PLANE.subtended_angles()
    assert beta.min() >= lo and beta.max() <= hi


def test_twin_is_bimodal_at_half_separation():
    y, _, _ = _draw(TWIN, 200_000, HALF_PLANE)
    grid = np.linspace(-8 * LAM, 8 * LAM, 1601)
    density = stats.gaussian_kde(y / LAM)(grid / LAM)
    peaks, _ = find_peaks(density, prominence=0.1 * density.max())
    assert len(peaks) == 2
    np.testing.assert_allclose(np.sort(grid[peaks]), [-4 * LAM, 4 * LAM], atol=0.1 * LAM)


def test_biprism_angles_and_spread():
    n = 1_000_000
    y, beta, _ = _draw(PRISM, n)
    half = PRISM_1DEG.face_inclination
    assert beta.min() >= -half and beta.max() <= half
    assert y.std() == pytest.approx(0.531e-3, rel=0.01)
    ks = stats.kstest(beta[:100_000], "uniform", args=(-half, 2 * half))
    assert ks.pvalue > 0.01


def test_gaussian_draws_ks():
    y, _, _ = _draw(PRISM, 100_000, seed=9)
    assert stats.kstest(y / 0.531e-3, "norm").pvalue > 0.01


def test_messages_are_unit_vectors():
    rng = rng_stream(3, 0)
    screen = PlaneScreen(52e-3, -2e-3, 2e-3)
    for _ in range(200):
        m = next_message(PRISM, rng, screen)
        assert abs(math.hypot(*m.e) - 1.0) <= 1e-12
        assert m.label in (-1, 0, 1)
    with pytest.raises(InvalidParameterError):
        Message((1.0, 0.1), 0.0, 1)


def test_next_message_depends_only_on_stream_position():
    screen = SemicircleScreen(5e-5)
    rng = rng_stream(5, 0)
    messages = [next_message(SLITS, rng, screen) for _ in range(5)]
    rng2 = rng_stream(5, 0)
    rng2.random(2 * SLITS.uniforms_per_event)
    assert next_message(SLITS, rng2, screen) == messages[2]


def test_next_message_matches_batch_path():
    screen = PlaneScreen(52e-3, -2e-3, 2e-3)
    rng = rng_stream(8, 0)
    single = [next_message(PRISM, rng, screen) for _ in range(100)]
    u = rng_stream(8, 0).random((100, 3))
    y, beta, label = emission_from_uniforms(PRISM, u, PRISM.resolved_aperture(screen))
    arrival, phase, _, _ = sources.propagate(PRISM, screen, y, beta, label)
    assert [m.arrival for m in single] == list(arrival)
    assert [m.e for m in single] == list(zip(np.cos(phase), np.sin(phase)))


def test_symmetric_slit_paths_in_phase():
    # central rays from the two slit centres to theta = 0 have equal lengths
    d = 5 * LAM
    for radius in (1e-4, 1e-2, 1.0):
        betas = [math.atan2(-s * d / 2, radius) for s in (1, -1)]
        phases = []
        for s, beta in zip((1, -1), betas):
            theta, length = optics.trace_to_semicircle(s * d / 2, beta, radius)
            assert abs(float(theta)) < 1e-12
            phases.append(optics.phase_of_path(float(length), LAM))
        assert abs(phases[0] - phases[1]) < 1e-9


def test_emitters_return_points_and_angles():
    rng = rng_stream(1, 0)
    (x, y), beta = sources.emit_double_slit(SLITS, rng)
    assert x == 0.0 and abs(abs(y) - 5 * LAM / 2) <= LAM / 2
    (x, y), beta = sources.emit_gaussian_twin(TWIN, rng, HALF_PLANE)
    assert x == 0.0
    (x, y), beta = sources.emit_biprism(PRISM, rng)
    assert x == 0.0 and abs(beta) <= PRISM_1DEG.face_inclination
    with pytest.raises(InvalidParameterError):
        sources.emit_biprism(SLITS, rng)


def test_biprism_pencils_bounded_by_extreme_rays():
    # for a point-like source each face's arrivals lie on its own side of
    # the extreme ray grazing the apex; the pencils overlap only between them
    spec = SourceSpec(BiprismPoint(1e-9, PRISM_1DEG), LAM)
    screen = PlaneScreen(52e-3, -1.0, 1.0)
    y, beta, label = _draw(spec, 200_000, seed=4)
    arrival, _, face, absorbed = sources.propagate(spec, screen, y, beta, label)
    assert not absorbed.any()
    edge_up = float(optics.trace_biprism(1e-15, 0.0, PRISM_1DEG, 52e-3)["arrival"])
    edge_dn = float(optics.trace_biprism(-1e-15, 0.0, PRISM_1DEG, 52e-3)["arrival"])
    overlap = 7e-3 * math.tan(PRISM_1DEG.deviation)
    assert edge_up == pytest.approx(-overlap, rel=1e-3)
    assert edge_dn == pytest.approx(overlap, rel=1e-3)
    tol = 1e-8  # source width of 1 nm
    assert arrival[face == 1].min() >= edge_up - tol
    assert arrival[face == -1].max() <= edge_dn + tol
    both = (arrival >= edge_up) & (arrival <= edge_dn)
    assert np.any(both & (face == 1)) and np.any(both & (face == -1))
