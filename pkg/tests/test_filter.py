import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from flp.filter import (Cloud, Engine, FilterConfig, Global, KnownPose, KnownPosition, NoiseConfig, NoStairway,
                        Trigger, UpdateEpoch, apply_collisions, apply_dpc, config_from_dict, epoch_trigger,
                        handle_floor_change, init_cloud, kmeans_step, load_config, measurement_update,
                        output_estimate, partial_resample, predict, short_term_predict)
from flp.filter.clustering import Cluster, Estimate, merge_clusters
from flp.harness.oracle import naive_crossings
from flp.map_core import (AxisBox, Beacon, Floor, MapModel, OutOfMap, Partition, PartitionCache, Point2, Wall,
                          Zone, ZoneKind)
from flp.measurements import GnssFix, RssObservation, UnknownBeacon
from flp.pdr import StepEvent

TWO_PI = 2 * math.pi


def box_partition(half=200.0, walls=(), pid=0, lo=None, hi=None):
    lo = lo or (-half, -half)
    hi = hi or (half, half)
    return Partition(pid, AxisBox(Point2(*lo), Point2(*hi)), [Wall(*w) for w in walls])


def open_map(half=200.0, walls=(), beacons=(), zones=()):
    return MapModel([Floor(0, 0.0, [box_partition(half, walls)], list(beacons), list(zones))])


def two_floor_map(stair_zone_on_0=False):
    stair = Zone([(20, 20), (25, 20), (25, 25), (20, 25)], ZoneKind.STAIRWAY, 0.3, [(5, 0), (50, 0)])
    f0_zones = [Zone([(-2, -2), (2, -2), (2, 2), (-2, 2)], ZoneKind.STAIRWAY, 0.3, [(0, 0)])] if stair_zone_on_0 else []
    return MapModel([Floor(0, 0.0, [box_partition()], [], f0_zones),
                     Floor(1, 3.0, [box_partition()], [], [stair])])


def cache_for(m, slots=5):
    return PartitionCache(lambda k: m.floor(k[0]).partition(k[1]), slots)


def ep(length=1.0, heading=0.0, meas=(), n_steps=1, t=0.0):
    trig = Trigger.STEP if length > 0 else Trigger.HIGH_RSS
    return UpdateEpoch(length, heading, trig, tuple(meas), n_steps, t)


ZERO = NoiseConfig.zero()


# --- init -------------------------------------------------------------------------

def test_known_pose_zero_sigma_gives_identical_particles():
    c = init_cloud(KnownPose(3.0, 4.0, beta=0.25), FilterConfig(n_particles=200), open_map())
    assert np.all(c.x == 3.0) and np.all(c.y == 4.0)
    assert np.all(c.beta == 0.25) and np.all(c.epsilon == 0.0)
    assert np.allclose(c.w, 1 / 200)


def test_known_position_beta_is_uniform():
    c = init_cloud(KnownPosition(0.0, 0.0, sigma=1.0), FilterConfig(), open_map(), seed=11)
    assert stats.kstest(c.beta / TWO_PI, "uniform").pvalue > 0.01
    assert np.all((c.beta >= 0) & (c.beta < TWO_PI))
    assert abs(np.std(c.epsilon) - 0.05) < 0.01


def test_prior_outside_map_rejected():
    with pytest.raises(OutOfMap):
        init_cloud(KnownPosition(500.0, 0.0), FilterConfig(), open_map())


def test_global_init_avoids_walled_sliver():
    # two walls 0.15 m apart: no spawn point can be 0.1 m clear of both
    walls = [((5.0, 0.0), (5.0, 10.0)), ((5.15, 0.0), (5.15, 10.0))]
    m = open_map(10.0, walls)
    c = init_cloud(Global(0), FilterConfig(n_particles=3000), m, seed=2)
    in_sliver = (c.x > 5.0) & (c.x < 5.15) & (c.y > 0) & (c.y < 10)
    assert not in_sliver.any()
    d = np.minimum(np.hypot(c.x - 5.0, 0) * ((c.y >= 0) & (c.y <= 10)) + 1e9 * ((c.y < 0) | (c.y > 10)),
                   np.abs(c.x - 5.15) + 1e9 * ((c.y < 0) | (c.y > 10)))
    assert np.all(d >= 0.1 - 1e-12)


def test_known_position_samples_never_cross_walls():
    m = open_map(10.0, [((1.0, -10.0), (1.0, 10.0))])
    c = init_cloud(KnownPosition(0.0, 0.0, sigma=2.0), FilterConfig(n_particles=2000), m, seed=4)
    assert np.all(c.x < 1.0)


# --- predict ------------------------------------------------------------------------

@pytest.mark.parametrize("eps,beta,expect", [
    (0.0, 0.0, (1.0, 0.0)),
    (0.0, math.pi / 2, (0.0, 1.0)),
    (0.2, 0.0, (1.2, 0.0)),
])
def test_predict_zero_noise_examples(eps, beta, expect):
    c = init_cloud(KnownPose(0.0, 0.0, beta=beta), FilterConfig(n_particles=10), open_map())
    c.epsilon[:] = eps
    predict(c, ep(1.0, 0.0), ZERO, open_map(), FilterConfig())
    assert np.allclose(c.x, expect[0], atol=1e-12) and np.allclose(c.y, expect[1], atol=1e-12)
    assert np.allclose(c.prev_x, 0.0)


def test_predict_uses_stairway_step_length():
    stair = Zone([(-1, -1), (1, -1), (1, 1), (-1, 1)], ZoneKind.STAIRWAY, 0.3, [(0, 0)])
    m = open_map(zones=[stair])
    c = init_cloud(KnownPose(0.0, 0.0), FilterConfig(n_particles=4), m)
    c.x[2:] = 10.0
    predict(c, ep(2.4, 0.0, n_steps=3), ZERO, m, FilterConfig())
    assert np.allclose(c.x[:2], 0.9) and np.allclose(c.x[2:], 12.4)


def test_predict_noise_statistics():
    c = init_cloud(KnownPose(0.0, 0.0), FilterConfig(n_particles=20000), open_map(), seed=5)
    noise = NoiseConfig()
    predict(c, ep(1.0, 0.0), noise, open_map(), FilterConfig())
    # along-track spread is sigma_d, cross-track spread ~ L * sigma_alpha
    assert np.std(c.x) == pytest.approx(noise.sigma_d, rel=0.05)
    assert np.std(c.y) == pytest.approx(noise.sigma_alpha, rel=0.05)
    assert np.std(c.epsilon) == pytest.approx(noise.sigma_epsilon, rel=0.05)


def test_predict_mask_moves_only_selected():
    c = init_cloud(KnownPose(0.0, 0.0), FilterConfig(n_particles=6), open_map())
    mask = np.array([1, 0, 1, 0, 0, 0], dtype=bool)
    predict(c, ep(1.0, 0.0), ZERO, open_map(), FilterConfig(), mask=mask)
    assert np.allclose(c.x, mask.astype(float))


# --- DPC ----------------------------------------------------------------------------

def test_dpc_fraction_zero_preserves_user_heading():
    c = init_cloud(KnownPosition(0, 0), FilterConfig(), open_map(), seed=3)
    before = c.beta.copy()
    hb, ha = 0.3, 2.1
    apply_dpc(c, FilterConfig(dpc_uniform_fraction=0.0), hb, ha)
    diff = np.mod((ha + c.beta) - (hb + before) + math.pi, TWO_PI) - math.pi
    assert np.max(np.abs(diff)) < 1e-9


def test_dpc_fraction_one_is_uniform():
    c = init_cloud(KnownPose(0, 0, beta=1.0), FilterConfig(), open_map(), seed=8)
    apply_dpc(c, FilterConfig(dpc_uniform_fraction=1.0), 0.0, 1.0)
    assert stats.kstest(c.beta / TWO_PI, "uniform").pvalue > 0.01


def test_dpc_quarter_turn_shifts_deterministic_branch():
    c = init_cloud(KnownPose(0, 0, beta=math.radians(100)), FilterConfig(), open_map(), seed=9)
    w = c.w.copy()
    apply_dpc(c, FilterConfig(), 0.0, math.pi / 2)
    shifted = np.isclose(c.beta, math.radians(10), atol=1e-12)
    assert shifted.sum() == 500
    assert np.array_equal(c.w, w)


# --- measurements ---------------------------------------------------------------------

def test_uniform_likelihood_leaves_weights_unchanged():
    m = open_map(beacons=[Beacon("b", (0, 0), 0)])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=100), m)
    a = np.linspace(0, TWO_PI, 100, endpoint=False)
    c.x, c.y = 10 * np.cos(a), 10 * np.sin(a)
    c.w = np.random.default_rng(1).dirichlet(np.ones(100))
    w = c.w.copy()
    measurement_update(c, [RssObservation(0, "b", -70.0)], m, FilterConfig())
    assert np.allclose(c.w, w, atol=1e-12)


def test_rss_weight_ratio_near_vs_far():
    m = open_map(beacons=[Beacon("b", (0, 0), 0)])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=2), m)
    c.x[:] = [5.0, 50.0]
    measurement_update(c, [RssObservation(0, "b", -58.7)], m, FilterConfig())
    # exp(-0.5 * ((-58.7 - -86.9) / 10)^2)
    assert c.w[1] / c.w[0] == pytest.approx(0.018756779848581023, rel=1e-9)


def test_gnss_denied_zone_skips_fix():
    denied = Zone([(-50, -50), (50, -50), (50, 50), (-50, 50)], ZoneKind.GNSS_DENIED)
    m = open_map(zones=[denied])
    c = init_cloud(KnownPosition(0, 0, sigma=5), FilterConfig(n_particles=300), m, seed=1)
    w = c.w.copy()
    measurement_update(c, [GnssFix(0, (30.0, 30.0))], m, FilterConfig())
    assert np.allclose(c.w, w, atol=1e-15)


def test_gnss_fix_outside_denied_zone_weights():
    m = open_map()
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=2), m)
    c.x[:] = [0.0, 5.0]
    measurement_update(c, [GnssFix(0, (0.0, 0.0))], m, FilterConfig())
    assert c.w[1] / c.w[0] == pytest.approx(math.exp(-0.5), rel=1e-9)


def test_high_accessibility_factor_applied():
    hall = Zone([(-1, -1), (1, -1), (1, 1), (-1, 1)], ZoneKind.HIGH_ACCESSIBILITY, weight_factor=2.0)
    m = open_map(zones=[hall])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=2), m)
    c.x[1] = 10.0
    measurement_update(c, [], m, FilterConfig())
    assert c.w[0] == pytest.approx(2 / 3) and c.w[1] == pytest.approx(1 / 3)
    c.w[:] = 0.5
    measurement_update(c, [], m, FilterConfig(accessibility=False))
    assert np.allclose(c.w, 0.5)


def test_unknown_beacon_propagates():
    m = open_map(beacons=[Beacon("b", (0, 0), 0)])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=5), m)
    with pytest.raises(UnknownBeacon):
        measurement_update(c, [RssObservation(0, "nope", -70.0)], m, FilterConfig())


def test_measurement_ruling_out_everyone_is_ignored():
    m = open_map()
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=5), m)
    w = c.w.copy()
    measurement_update(c, [GnssFix(0, (1e6, 0.0), sigma=0.001)], m, FilterConfig())
    assert np.allclose(c.w, w)


# --- collisions -----------------------------------------------------------------------

def test_no_walls_leaves_cloud_unchanged():
    m = open_map()
    c = init_cloud(KnownPosition(0, 0, sigma=3), FilterConfig(), m, seed=3)
    predict(c, ep(2.0, 0.3), NoiseConfig(), m, FilterConfig())
    before = (c.x.copy(), c.y.copy(), c.w.copy())
    apply_collisions(c, m, cache_for(m), FilterConfig())
    assert np.array_equal(c.x, before[0]) and np.allclose(c.w, before[2], rtol=0, atol=1e-15)


def test_head_on_mid_segment_crossing_kills():
    m = open_map(10.0, [((1.0, -5.0), (1.0, 5.0))])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=4), m)
    c.y[:] = [-1.0, 0.0, 1.0, 2.0]
    c.x[2:] = -3.0
    predict(c, ep(2.0, 0.0), ZERO, m, FilterConfig())
    apply_collisions(c, m, cache_for(m), FilterConfig())
    assert np.all(c.w[:2] == 0) and np.allclose(c.w[2:], 0.5)


def test_particles_leaving_the_map_are_zeroed():
    m = open_map(5.0)
    c = init_cloud(KnownPose(4.0, 0.0), FilterConfig(n_particles=3), m)
    c.x[0] = 0.0
    predict(c, ep(2.0, 0.0), ZERO, m, FilterConfig())
    apply_collisions(c, m, cache_for(m), FilterConfig())
    assert c.w[0] == 1.0 and np.all(c.w[1:] == 0)


def _random_walled_map(rng, n_walls=30, half=15.0):
    walls = []
    while len(walls) < n_walls:
        a = rng.uniform(-half, half, 2)
        b = a + rng.uniform(-4, 4, 2)
        if np.hypot(*(b - a)) > 0.5:
            walls.append((tuple(a), tuple(b)))
    return open_map(half + 60, walls)


def test_kill_decisions_match_naive_oracle():
    rng = np.random.default_rng(21)
    cfg = FilterConfig(n_particles=200, corrections=False)
    disagreements = 0
    for k in range(100):
        m = _random_walled_map(rng)
        c = init_cloud(KnownPosition(0.0, 0.0, sigma=10.0), cfg, m, seed=k)
        predict(c, ep(3.0, rng.uniform(0, TWO_PI)), NoiseConfig(), m, cfg)
        hits = naive_crossings(c.prev_x, c.prev_y, c.x, c.y, m.floor(0).walls)
        apply_collisions(c, m, cache_for(m), cfg)
        if hits.all():
            continue  # whole cloud re-initialised
        disagreements += int(np.sum((c.w == 0) != hits))
    assert disagreements == 0


def test_live_particles_never_cross_walls_with_corrections():
    rng = np.random.default_rng(5)
    cfg = FilterConfig(n_particles=300)
    m = _random_walled_map(rng, 60)
    c = init_cloud(Global(0), cfg, m, seed=1)
    cache = cache_for(m)
    for i in range(50):
        predict(c, ep(1.5, rng.uniform(0, TWO_PI)), NoiseConfig(), m, cfg)
        apply_collisions(c, m, cache, cfg)
        live = c.w > 0
        assert not naive_crossings(c.prev_x[live], c.prev_y[live], c.x[live], c.y[live], m.floor(0).walls).any()
        partial_resample(c, cfg, m)


def test_all_dead_cloud_is_reinitialised():
    m = open_map(10.0, [((1.0, -10.0), (1.0, 10.0))])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=50), m)
    predict(c, ep(2.0, 0.0), ZERO, m, FilterConfig())
    apply_collisions(c, m, cache_for(m), FilterConfig())
    assert c.w.sum() == pytest.approx(1.0)
    assert np.unique(c.x).size > 1


def test_cache_overflow_zeroes_particles_in_dropped_partitions():
    parts = [box_partition(pid=i, lo=(10.0 * i, 0.0), hi=(10.0 * (i + 1), 10.0)) for i in range(3)]
    m = MapModel([Floor(0, 0.0, parts)])
    cfg = FilterConfig(n_particles=6, cache_slots=2)
    c = init_cloud(KnownPose(5.0, 5.0), cfg, m)
    c.x[:] = [5, 5, 5, 15, 15, 25]
    predict(c, ep(1.0, math.pi / 2), ZERO, m, cfg)
    cache = cache_for(m, 2)
    apply_collisions(c, m, cache, cfg)
    # partition 2 holds the fewest particles and is the one left out
    assert (0, 2) not in cache
    assert c.w[5] == 0 and np.all(c.w[:5] > 0)


# --- floor change -----------------------------------------------------------------------

def test_all_particles_in_stairway_only_change_floor():
    m = two_floor_map(stair_zone_on_0=True)
    c = init_cloud(KnownPosition(0, 0, sigma=0.3), FilterConfig(n_particles=200), m, seed=3)
    x, y = c.x.copy(), c.y.copy()
    moved = handle_floor_change(c, 1, m, FilterConfig())
    assert np.array_equal(c.x, x) and np.array_equal(c.y, y) and np.all(c.floor == 1)
    assert not moved.any()


def test_floor_change_exit_selection_follows_distance_kernel():
    m = two_floor_map()
    cfg = FilterConfig()
    c = init_cloud(KnownPose(0.0, 0.0, beta=0.4), cfg, m, seed=12)
    c.epsilon[:] = 0.1
    moved = handle_floor_change(c, 1, m, cfg)
    assert moved.all() and np.all(c.floor == 1)
    near = np.hypot(c.x - 5, c.y) < np.hypot(c.x - 50, c.y)
    p = math.exp(-0.5) / (math.exp(-0.5) + math.exp(-5))
    sigma = math.sqrt(p * (1 - p) / 1000)
    assert abs(near.mean() - p) < 3 * sigma
    # beta and epsilon survive the move
    assert np.all(c.beta == 0.4) and np.all(c.epsilon == 0.1)
    assert np.std(c.x[near] - 5) == pytest.approx(1.0, rel=0.1)


def test_floor_without_stairway_raises_after_global_reinit():
    m = MapModel([Floor(0, 0.0, [box_partition(20)]), Floor(1, 3.0, [box_partition(20)])])
    c = init_cloud(KnownPose(0, 0), FilterConfig(n_particles=100), m)
    with pytest.raises(NoStairway):
        handle_floor_change(c, 1, m, FilterConfig())
    assert np.all(c.floor == 1) and np.unique(c.x).size > 1
    assert c.w.sum() == pytest.approx(1.0)


# --- resampling ---------------------------------------------------------------------------

def test_equal_weights_are_not_resampled():
    m = open_map()
    c = init_cloud(KnownPosition(0, 0), FilterConfig(n_particles=100), m, seed=2)
    x = c.x.copy()
    replaced = partial_resample(c, FilterConfig(n_particles=100), m)
    assert not replaced.any() and np.array_equal(c.x, x)


def test_half_killed_cloud_replacements_stay_near_survivors():
    m = open_map()
    cfg = FilterConfig(n_particles=400)
    c = init_cloud(Global(0), cfg, m, seed=6)
    c.w[200:] = 0.0
    c.normalize()
    survivors = np.column_stack([c.x[:200], c.y[:200]]).copy()
    replaced = partial_resample(c, cfg, m)
    assert np.array_equal(np.flatnonzero(replaced), np.arange(200, 400))
    assert np.array_equal(np.column_stack([c.x[:200], c.y[:200]]), survivors)
    d = np.hypot(c.x[200:, None] - survivors[:, 0], c.y[200:, None] - survivors[:, 1]).min(axis=1)
    assert np.all(d < 0.6)  # 6 sigma of the 0.1 m jitter
    assert np.allclose(c.w.sum(), 1.0)


def test_strong_beacon_replacements_spawn_in_disc():
    b = Beacon("b", (30.0, -20.0), 0)
    m = open_map(beacons=[b])
    cfg = FilterConfig(n_particles=300)
    c = init_cloud(Global(0), cfg, m, seed=6)
    c.w[::2] = 0.0
    c.normalize()
    replaced = partial_resample(c, cfg, m, anchor=b)
    d = np.hypot(c.x[replaced] - 30.0, c.y[replaced] + 20.0)
    assert replaced.sum() == 150 and np.all(d <= 3.0)


def test_jitter_never_pushes_copies_through_walls():
    m = open_map(10.0, [((0.0, -10.0), (0.0, 10.0))])
    cfg = FilterConfig(n_particles=1000, resample_jitter=0.5)
    c = init_cloud(KnownPose(-0.05, 0.0), cfg, m)
    c.w[500:] = 0.0
    c.normalize()
    partial_resample(c, cfg, m)
    assert np.all(c.x < 0.0)


# --- clustering and output ----------------------------------------------------------------

def test_single_cluster_is_weighted_mean():
    c = init_cloud(Global(0), FilterConfig(n_particles=500), open_map(), seed=1)
    c.w = np.random.default_rng(3).dirichlet(np.ones(500))
    (cl,) = kmeans_step(c, [], 1)
    assert cl.center == pytest.approx((np.dot(c.w, c.x), np.dot(c.w, c.y)), abs=1e-9)
    assert cl.weight == pytest.approx(1.0)


def test_two_blobs_one_iteration():
    rng = np.random.default_rng(4)
    c = Cloud(1000, 0)
    c.x = np.r_[rng.normal(0, 0.5, 500), rng.normal(20, 0.5, 500)]
    c.y = rng.normal(0, 0.5, 1000)
    seeds = [Cluster((1.0, 1.0), np.zeros(4), np.zeros((2, 2)), 0.5, 0),
             Cluster((19.0, -1.0), np.zeros(4), np.zeros((2, 2)), 0.5, 0)]
    out = kmeans_step(c, seeds, 2)
    assert np.hypot(*(np.subtract(out[0].center, (c.x[:500].mean(), c.y[:500].mean())))) < 0.2
    assert np.hypot(*(np.subtract(out[1].center, (c.x[500:].mean(), c.y[500:].mean())))) < 0.2
    assert out[0].center == pytest.approx((0, 0), abs=0.2)
    assert out[1].center == pytest.approx((20, 0), abs=0.2)


def test_empty_cluster_reseeded_at_heaviest_particle():
    c = Cloud(3, 0)
    c.x[:] = [0.0, 1.0, 2.0]
    c.w[:] = [0.2, 0.5, 0.3]
    far = Cluster((100.0, 100.0), np.zeros(4), np.zeros((2, 2)), 0.0, 0)
    near = Cluster((1.0, 0.0), np.zeros(4), np.zeros((2, 2)), 1.0, 3)
    out = kmeans_step(c, [near, far], 2)
    assert out[1].center == (1.0, 0.0) and out[1].weight == 0.0


def test_kmeans_tie_goes_to_lowest_index():
    c = Cloud(1, 0)
    c.x[:] = 0.0
    a = Cluster((-1.0, 0.0), np.zeros(4), np.zeros((2, 2)), 0.5, 0)
    b = Cluster((1.0, 0.0), np.zeros(4), np.zeros((2, 2)), 0.5, 0)
    out = kmeans_step(c, [a, b], 2)
    assert out[0].members == 1 and out[1].members == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8))
def test_cluster_weights_partition_and_covariances_psd(seed, k):
    rng = np.random.default_rng(seed)
    c = Cloud(300, seed)
    c.x, c.y = rng.normal(0, 10, 300), rng.normal(0, 10, 300)
    c.beta = rng.uniform(0, TWO_PI, 300)
    c.w = rng.dirichlet(np.ones(300))
    cl = kmeans_step(c, [], k)
    assert sum(x.weight for x in cl) == pytest.approx(1.0, abs=1e-9)
    for x in cl + merge_clusters(cl, 3.0):
        assert 0 <= x.weight <= 1 + 1e-12
        assert np.allclose(x.covariance, x.covariance.T)
        assert np.linalg.eigvalsh(x.covariance).min() > -1e-9
    assert sum(x.weight for x in merge_clusters(cl, 3.0)) == pytest.approx(1.0, abs=1e-9)


def _cluster(x, y, w, eps=0.0, beta=0.0):
    return Cluster((x, y), np.array([x, y, eps, beta]), np.eye(2), w, 1)


def test_output_picks_heaviest_cluster_and_lowest_id_on_tie():
    assert output_estimate([_cluster(1, 1, 0.6), _cluster(5, 5, 0.4)]).x == 1
    assert output_estimate([_cluster(1, 1, 0.4), _cluster(5, 5, 0.6)]).x == 5
    assert output_estimate([_cluster(1, 1, 0.5), _cluster(5, 5, 0.5)]).x == 1
    assert output_estimate([_cluster(7, 2, 1.0)]).y == 2


def test_merge_keeps_distant_modes_apart():
    merged = merge_clusters([_cluster(0, 0, 0.5), _cluster(1, 0, 0.1), _cluster(20, 0, 0.4)], 3.0)
    assert len(merged) == 2
    assert merged[0].weight == pytest.approx(0.6) and merged[0].center[0] == pytest.approx(1 / 6)


def test_short_term_predict():
    last = Estimate(1.0, 2.0, 3.0, 0, np.eye(2), 1.0)
    cl = _cluster(0, 0, 1.0, eps=0.1, beta=math.pi / 2)
    assert short_term_predict(last, [], cl) == last
    out = short_term_predict(last, [StepEvent(1.5, 0.8, 0.0, 1.8)], cl)
    assert (out.x, out.y) == pytest.approx((2.0, 3.0 + 0.88))
    assert out.t == 1.5


# --- epoch trigger ------------------------------------------------------------------------

def _steps(n, length=0.8, heading=0.0):
    return [StepEvent(0.5 * i, length, heading, 1.8) for i in range(n)]


def test_epoch_trigger_examples():
    cfg = FilterConfig()
    assert epoch_trigger(_steps(2), [], cfg) is None
    e = epoch_trigger(_steps(3), [], cfg)
    assert e.trigger is Trigger.STEP and e.aggregated_length == pytest.approx(2.4)
    e = epoch_trigger([], [RssObservation(0.0, "b", -55.0)], cfg)
    assert e.trigger is Trigger.HIGH_RSS and e.aggregated_length == 0
    assert epoch_trigger([], [RssObservation(0.0, "b", -75.0)], cfg) is None


def test_epoch_keeps_strongest_rss_and_latest_fix():
    meas = [RssObservation(0.0, "a", -80.0), RssObservation(0.1, "b", -70.0),
            GnssFix(0.0, (0, 0)), GnssFix(0.2, (1, 1))]
    e = epoch_trigger(_steps(3), meas, FilterConfig())
    assert [type(m).__name__ for m in e.measurements] == ["RssObservation", "GnssFix"]
    assert e.measurements[0].beacon_id == "b" and e.measurements[1].t == 0.2


def test_turning_steps_aggregate_as_vector_sum():
    steps = [StepEvent(0, 1.0, 0.0, 2), StepEvent(1, 1.0, math.pi / 2, 2)]
    e = epoch_trigger(steps, [], FilterConfig(steps_per_epoch=2))
    assert e.aggregated_length == pytest.approx(math.sqrt(2))
    assert e.aggregated_heading == pytest.approx(math.pi / 4)


def test_step_epoch_requires_positive_length():
    with pytest.raises(ValueError):
        UpdateEpoch(0.0, 0.0, Trigger.STEP)


# --- invariants -----------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.sampled_from(["predict", "collide", "rss", "gnss", "resample",
                                                         "dpc"]), min_size=1, max_size=12))
def test_weights_stay_normalised_through_any_operation_sequence(seed, ops):
    rng = np.random.default_rng(seed)
    b = Beacon("b", (0.0, 0.0), 0)
    m = MapModel([Floor(0, 0.0, [box_partition(15.0, [((-5, -5), (5, -5)), ((5, -5), (5, 5))])], [b])])
    cfg = FilterConfig(n_particles=200)
    c = init_cloud(Global(0), cfg, m, seed=seed)
    cache = cache_for(m)
    for op in ops:
        if op == "predict":
            predict(c, ep(rng.uniform(0.1, 4), rng.uniform(0, TWO_PI)), NoiseConfig(), m, cfg)
        elif op == "collide":
            apply_collisions(c, m, cache, cfg)
        elif op == "rss":
            measurement_update(c, [RssObservation(0, "b", rng.uniform(-95, -50))], m, cfg)
        elif op == "gnss":
            measurement_update(c, [GnssFix(0, tuple(rng.uniform(-15, 15, 2)))], m, cfg)
        elif op == "resample":
            partial_resample(c, cfg, m, b if rng.random() < 0.3 else None)
        else:
            apply_dpc(c, cfg, rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI))
        assert c.w.sum() == pytest.approx(1.0, abs=1e-9)
        assert len(c.x) == cfg.n_particles and np.all(c.w >= 0)
        assert np.all((c.beta >= 0) & (c.beta < TWO_PI))
        assert np.all(np.abs(c.epsilon) <= 0.5)


# --- engine ------------------------------------------------------------------------------------

def _walk(n=100, seed=0):
    rng = np.random.default_rng(seed)
    heading, t, out = 0.0, 0.0, []
    for _ in range(n):
        heading += rng.normal(0, 0.3)
        t += 0.55
        out.append(StepEvent(t, float(rng.uniform(0.5, 0.9)), heading, 1.8))
    return out


def test_engine_dead_reckons_exactly_without_noise_or_walls():
    m = open_map(500.0)
    eng = Engine(m, FilterConfig(n_particles=50), KnownPose(0.0, 0.0), noise=ZERO)
    x = y = 0.0
    worst = 0.0
    for s in _walk():
        eng.feed(s)
        x += s.length * math.cos(s.heading)
        y += s.length * math.sin(s.heading)
        e = eng.poll()
        worst = max(worst, math.hypot(e.x - x, e.y - y))
    assert worst < 1e-9


def _engine_track(m, shift=(0.0, 0.0), seed=3):
    dx, dy = shift
    eng = Engine(m, FilterConfig(n_particles=300), KnownPosition(2.0 + dx, 1.0 + dy, sigma=1.0), seed=seed)
    for i, s in enumerate(_walk(40, 1)):
        eng.feed(s)
        if i % 4 == 0:
            eng.feed(RssObservation(s.t, "b", -70.0 - (i % 7)))
        if i % 9 == 0:
            eng.feed(GnssFix(s.t, (dx + i * 0.3, dy - 0.1 * i)))
    eng.flush()
    return np.array([(e.x, e.y) for e in eng.track])


def _walled_map():
    walls = [((-10, 6), (30, 6)), ((-10, -6), (30, -6)), ((10, -3), (10, 3))]
    return MapModel([Floor(0, 0.0, [box_partition(40.0, walls)], [Beacon("b", (5.0, 0.0), 0)])])


def test_engine_is_deterministic():
    m = _walled_map()
    assert np.array_equal(_engine_track(m), _engine_track(m))
    assert not np.array_equal(_engine_track(m, seed=3), _engine_track(m, seed=4))


def test_engine_output_translates_with_the_map():
    m = _walled_map()
    base = _engine_track(m)
    moved = _engine_track(m.translated(100.0, -50.0), (100.0, -50.0))
    assert np.max(np.abs(moved - base - [100.0, -50.0])) < 1e-6


def test_engine_floor_event_moves_cloud():
    from flp.pdr import FloorEvent
    m = two_floor_map()
    eng = Engine(m, FilterConfig(n_particles=300), KnownPosition(0.0, 0.0, sigma=0.5), seed=1)
    for s in _walk(6):
        eng.feed(s)
    eng.feed(FloorEvent(4.0, 3.0, 1, latency=0.0))
    assert eng.poll().floor == 1
    assert np.all(eng.cloud.floor == 1)


# --- config ------------------------------------------------------------------------------------

def test_config_file_round_trip(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("n_particles: 500\nsigma_d: 0.2\nsteps_per_epoch: 2\n")
    fc, nc = load_config(p)
    assert fc.n_particles == 500 and fc.steps_per_epoch == 2 and nc.sigma_d == 0.2
    assert fc.resample_weight_threshold == pytest.approx(0.1 / 500)


@pytest.mark.parametrize("doc", [{"bogus": 1}, {"n_particles": {"a": 1}}, {"n_particles": 0},
                                 {"dpc_uniform_fraction": 1.5}, {"sigma_d": -1}])
def test_bad_config_rejected(doc):
    with pytest.raises(ValueError):
        config_from_dict(doc)
