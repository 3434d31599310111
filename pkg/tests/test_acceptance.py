"""End-to-end acceptance checks, one marker per criterion.

Each check prints a one-line PASS/FAIL record; the terminal summary groups
them per criterion.
"""

import dataclasses
import math

import numpy as np
import pytest

from eventoptics import analysis, harness, wave
from eventoptics.detector import DetectorState
from eventoptics.rng import rng_stream

LAM = 670e-9
OFFSETS = (7e-3, 15e-3, 55e-3)


def report(criterion, name, ok, detail):
    print(f"criterion {criterion} [{name}]: {'PASS' if ok else 'FAIL'} -- {detail}")
    return ok


def conserved(profile):
    return int(profile.received.sum()) + profile.off_screen + profile.absorbed == profile.events


# -- criterion 1 ---------------------------------------------------------------

@pytest.fixture(scope="module")
def double_slit():
    return harness.run(harness.double_slit_config(events=2_000_000))


@pytest.mark.criterion(1)
def test_double_slit_rmse(double_slit):
    rmse = double_slit.report.normalized_rmse
    assert report(1, "rmse", rmse <= 0.08, f"normalized rmse {rmse:.4f} (limit 0.08)")


@pytest.mark.criterion(1)
def test_double_slit_central_maxima(double_slit):
    p = double_slit.profile
    width = math.pi / double_slit.config.detector_count
    fine = np.linspace(-math.pi / 2, math.pi / 2, 200_001)
    v = double_slit.config.source.variant
    expected = analysis.central_maxima(fine, wave.double_slit_intensity(fine, v.width, v.separation, LAM), 5,
                                       center=0.0)
    found = analysis.central_maxima(p.coordinates, p.fired, 5, center=0.0, smooth=1.0)
    worst = float(np.max(np.abs(found - expected))) if found.size == 5 else math.inf
    assert report(1, "maxima", worst <= width,
                  f"worst maximum offset {worst:.4f} rad (detector width {width:.4f} rad)")


# -- criterion 2 ---------------------------------------------------------------

@pytest.fixture(scope="module")
def two_beam():
    return harness.run(harness.two_beam_config(events=2_000_000))


@pytest.mark.criterion(2)
def test_two_beam_rmse(two_beam):
    rmse = two_beam.report.normalized_rmse
    assert report(2, "rmse", rmse <= 0.08, f"normalized rmse {rmse:.4f} (limit 0.08)")


@pytest.mark.criterion(2)
def test_two_beam_mirror_symmetry(two_beam):
    p = two_beam.profile
    chi = analysis.mirror_symmetry(p.coordinates, p.fired, p.variance)
    assert report(2, "mirror", chi.pvalue >= 0.01,
                  f"chi2 {chi.statistic:.1f} on {chi.dof} bins, p = {chi.pvalue:.3g} (limit 0.01)")


# -- criterion 3 ---------------------------------------------------------------

@pytest.fixture(scope="module", params=OFFSETS, ids=lambda o: f"{o * 1e3:g}mm")
def biprism(request):
    return harness.run(harness.biprism_config(offset=request.param, events=10_000_000))


@pytest.mark.criterion(3)
def test_biprism_period(biprism):
    sim = biprism.report.fringe_period_sim
    predicted = biprism.predicted_period
    err = abs(sim / predicted - 1.0)
    assert report(3, "period", err <= 0.05,
                  f"simulated {sim * 1e6:.2f} um vs predicted {predicted * 1e6:.2f} um, error {err:.1%} "
                  f"(oracle curve {biprism.report.fringe_period_theory * 1e6:.2f} um)")


@pytest.mark.criterion(3)
def test_biprism_rmse(biprism):
    rmse = biprism.report.normalized_rmse
    assert report(3, "rmse", rmse <= 0.10, f"normalized rmse {rmse:.4f} (limit 0.10)")


@pytest.mark.criterion(3)
def test_biprism_fringe_count(biprism):
    p = biprism.profile
    cfg = biprism.config
    prism = cfg.source.variant.biprism
    # the two pencils overlap between the rays grazing the apex
    offset = cfg.screen.distance - prism.apex_x
    half = offset * math.tan(prism.deviation) + 0.5 * biprism.predicted_period
    sim = analysis.count_fringes(p.coordinates, p.fired, -half, half, smooth=1.0)
    oracle = analysis.count_fringes(p.coordinates, p.theory, -half, half)
    assert report(3, "fringes", abs(sim - oracle) <= 1, f"{sim} simulated vs {oracle} oracle within |y| <= "
                                                          f"{half * 1e6:.0f} um")


# -- criterion 4 ---------------------------------------------------------------

@pytest.mark.criterion(4)
def test_detector_geometric_convergence():
    g = 0.5
    e = (math.cos(2.0), math.sin(2.0))
    d = DetectorState(g, (0.0, 1.0), p=(0.3, -0.1))
    start = math.hypot(0.3 - e[0], -0.1 - e[1])
    worst = 0.0
    for i in range(1, 51):
        d.update(e)
        worst = max(worst, abs(math.hypot(d.p[0] - e[0], d.p[1] - e[1]) - g ** i * start))
    assert report(4, "convergence", worst <= 1e-12, f"max deviation from closed form {worst:.2e}")


def _drive(message, n_transient, n, seed):
    d = DetectorState(0.999, (0.0, 1.0))
    for i in range(n_transient):
        d.update(message(i))
    r = rng_stream(seed, 1).random(n)
    expected = 0.0
    spread = 0.0
    for i in range(n):
        d.update(message(n_transient + i))
        q = d.p[0] * d.p[0] + d.p[1] * d.p[1]
        expected += q
        spread += q * (1.0 - q)
        d.fire(float(r[i]))
    return d.fired, expected, spread


@pytest.mark.criterion(4)
def test_detector_alternating_stream_silent():
    fired, _, _ = _drive(lambda i: (1.0, 0.0) if i % 2 == 0 else (-1.0, 0.0), 20_000, 100_000, 1)
    assert report(4, "alternating", fired <= 2, f"{fired} firings in 1e5 post-transient messages (limit 2)")


@pytest.mark.criterion(4)
def test_detector_constant_stream_always_fires():
    n = 100_000
    fired, expected, spread = _drive(lambda i: (0.6, 0.8), 20_000, n, 2)
    # binomial spread of the firing count around certainty
    bound = 3.0 * math.sqrt(spread)
    assert report(4, "constant", n - fired <= bound,
                  f"{fired}/{n} fired, expected {expected:.4f}, 3 sigma = {bound:.2e}")


# -- criterion 5 ---------------------------------------------------------------

@pytest.mark.criterion(5)
def test_oracle_matches_closed_form():
    # a two-source geometry deep in the d << X, sigma << X regime, integrated
    # with the exact path-length kernel of the numerical oracle
    sigma, d, x = 10 * LAM, 0.2e-3, 10e-3
    b = wave.coherence_factor(sigma, x, LAM)
    half = 2.0 * sigma / math.sqrt(2.0 * b)
    y = np.linspace(-half, half, 801)
    numeric = wave.lines_intensity(wave.twin_lines(d, sigma), y, x, LAM, "exact")
    k = 2 * math.pi / LAM
    scale = 2.0 * (2.0 * math.pi / math.sqrt(sigma ** -4 + k * k / x ** 2))
    closed = scale * wave.gaussian_twin_intensity(y, d, sigma, x, LAM)
    dev = float(np.max(np.abs(numeric - closed)) / numeric.max())
    assert report(5, "oracle", dev <= 0.01, f"max |difference| / peak {dev:.2e} over |y| <= {half * 1e6:.0f} um")


# -- criterion 6 ---------------------------------------------------------------

@pytest.mark.criterion(6)
def test_byte_identical_csv(tmp_path):
    cfg = harness.two_beam_config(events=500_000, seed=7, replicas=2)
    texts = []
    for name, workers in (("a.csv", 1), ("b.csv", 2)):
        harness.write_csv(harness.run(cfg, workers=workers).profile, tmp_path / name)
        texts.append((tmp_path / name).read_bytes())
    assert report(6, "determinism", texts[0] == texts[1], f"{len(texts[0])} bytes, identical={texts[0] == texts[1]}")


@pytest.mark.criterion(6)
def test_conservation_every_run(double_slit, two_beam):
    runs = [double_slit, two_beam]
    runs += [harness.run(harness.biprism_config(offset=o, events=200_000, replicas=3), theory=False)
             for o in OFFSETS]
    checked = [conserved(r.profile) and all(conserved(p) for p in r.replicas) for r in runs]
    assert report(6, "conservation", all(checked), f"{sum(checked)}/{len(checked)} runs conserve every event")


@pytest.mark.criterion(6)
def test_replicas_match_single_long_run():
    base = harness.double_slit_config(events=4_000_000)
    merged = harness.run(dataclasses.replace(base, replicas=2), theory=False).profile
    single = harness.run(dataclasses.replace(base, seed=1), theory=False).profile
    chi = analysis.homogeneity(merged.fired, single.fired, merged.variance, single.variance)
    assert report(6, "replicas", chi.pvalue >= 0.01,
                  f"2 x 2e6 merged vs 4e6 single: fired {int(merged.fired.sum())} vs {int(single.fired.sum())}, "
                  f"chi2 {chi.statistic:.1f} on {chi.dof} bins, p = {chi.pvalue:.3g}")
