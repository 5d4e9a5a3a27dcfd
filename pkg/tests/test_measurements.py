import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from flp.map_core import Beacon
from flp.measurements import (GnssFix, RssModelParams, RssObservation, UnknownBeacon, gnss_likelihood,
                              resolve_beacon, rss_from_distance, rss_likelihood, rss_predict)

B = Beacon("b", (0.0, 0.0), 0)


def test_rss_predict_examples():
    assert rss_predict((10.0, 0.0), B) == pytest.approx(-63.4, abs=1e-9)
    assert rss_predict((35.0, 0.0), B) == pytest.approx(-86.9, abs=1e-9)
    assert rss_predict((0.0, 50.0), B) == pytest.approx(-86.9, abs=1e-9)


def test_branch_jump_at_breakpoint():
    near = rss_from_distance(35.0)
    far = rss_from_distance(np.nextafter(35.0, 36.0))
    assert near == pytest.approx(-86.9, abs=1e-9)
    assert far == pytest.approx(-86.03, abs=1e-9)
    assert far - near == pytest.approx(0.87, abs=1e-9)


def test_rss_monotone_non_increasing():
    d = np.linspace(0, 200, 20001)
    r = rss_from_distance(d)
    # the only increase is the documented jump at the breakpoint
    inc = np.nonzero(np.diff(r) > 0)[0]
    assert len(inc) == 1 and d[inc[0]] <= 35.0 < d[inc[0] + 1]
    assert np.all(np.diff(r[d <= 35]) <= 0) and np.all(np.diff(r[d > 35]) <= 0)


def test_rss_likelihood_examples():
    z = RssObservation(0.0, "b", -63.4)
    assert rss_likelihood(z, (10.0, 0.0), B) == pytest.approx(0.039894, abs=1e-6)
    z = RssObservation(0.0, "b", -53.4)
    assert rss_likelihood(z, (10.0, 0.0), B) == pytest.approx(0.024197, abs=1e-6)


def test_unknown_beacon():
    with pytest.raises(UnknownBeacon):
        resolve_beacon({"b": B}, "zz")
    with pytest.raises(UnknownBeacon):
        rss_likelihood(RssObservation(0, "zz", -50), (0, 0), B)


def test_observation_range():
    with pytest.raises(ValueError):
        RssObservation(0, "b", 5.0)
    with pytest.raises(ValueError):
        GnssFix(0, (0, 0), 0.0)
    with pytest.raises(ValueError):
        RssModelParams(sigma=0)


def test_gnss_examples():
    z = GnssFix(0.0, (3.0, 4.0), 5.0)
    peak = gnss_likelihood(z, (3.0, 4.0))
    assert peak == pytest.approx(1 / (2 * math.pi * 25), abs=1e-9)
    assert gnss_likelihood(z, (8.0, 4.0)) == pytest.approx(peak * math.exp(-0.5), rel=1e-12)
    assert gnss_likelihood(z, (3.0, 9.0)) == pytest.approx(gnss_likelihood(z, (-2.0, 4.0)), rel=1e-12)


def test_likelihoods_integrate_to_one():
    x = (12.0, 5.0)
    mu = float(rss_predict(x, B))

    # the density must integrate over all of R, beyond the validated dBm range
    def f(r):
        return float(rss_likelihood(SimpleNamespace(beacon_id="b", rss=r), x, B))

    val, _ = integrate.quad(f, mu - 200, mu + 200, points=[mu])
    assert val == pytest.approx(1.0, abs=1e-6)

    def g(zy, zx):
        return float(gnss_likelihood(GnssFix(0, (zx, zy), 5.0), x))

    val, _ = integrate.dblquad(g, x[0] - 60, x[0] + 60, x[1] - 60, x[1] + 60, epsabs=1e-10)
    assert val == pytest.approx(1.0, abs=1e-6)


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-40, 40), st.floats(-40, 40),
       st.floats(-110, -20))
def test_translation_invariance(dx, dy, px, py, rss):
    b2 = Beacon("b", (B.position[0] + dx, B.position[1] + dy), 0)
    z = RssObservation(0, "b", rss)
    a = rss_likelihood(z, (px, py), B)
    b = rss_likelihood(z, (px + dx, py + dy), b2)
    assert b == pytest.approx(a, rel=1e-6, abs=1e-300)
    f1 = GnssFix(0, (1.0, 2.0), 5.0)
    f2 = GnssFix(0, (1.0 + dx, 2.0 + dy), 5.0)
    assert gnss_likelihood(f2, (px + dx, py + dy)) == pytest.approx(gnss_likelihood(f1, (px, py)), rel=1e-6,
                                                                   abs=1e-300)


def test_vectorised_inputs():
    xs = np.array([[10.0, 0.0], [0.0, 50.0]])
    assert np.allclose(rss_predict(xs, B), [-63.4, -86.9])
    z = GnssFix(0, (0, 0), 5.0)
    assert gnss_likelihood(z, xs).shape == (2,)
