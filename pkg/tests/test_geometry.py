import math

import numpy as np
import pytest

from meshrelay import (
    AirChannelParams,
    Arena,
    Deployment,
    GroundChannelParams,
    ObstacleSegment,
    Position3,
    distance,
    elevation_angle_deg,
    expected_ground_gain,
    ground_link_probability,
    los_probability,
    normal_cdf,
    uav_link_probability,
)
from meshrelay.geometry import obstacle_loss_db, segments_intersect

GP = GroundChannelParams()          # alpha 3, beta -30 dB, sigma 1, g_th -60
AP = AirChannelParams()             # LoS 2.5/-30/1, NLoS 3/-30/1, s-model 0.5/5
ARENA = Arena(-50.0, -50.0, 50.0, 50.0)


def make_dep(points_xy, obstacles=()):
    return Deployment(np.asarray(points_xy, dtype=float), list(obstacles), ARENA)


class TestDistance:
    def test_identity(self):
        assert distance((0, 0, 0), (0, 0, 0)) == 0.0

    def test_345_triangle(self):
        assert distance((0, 0, 0), (3, 4, 0)) == 5.0

    def test_hand_value(self):
        assert distance((0, 0, 0), (0, 10, 10)) == pytest.approx(14.142135623730951, abs=1e-12)

    def test_symmetry(self):
        p, q = (1.0, -2.0, 3.0), (4.0, 0.5, -1.0)
        assert distance(p, q) == distance(q, p)


class TestGroundGain:
    def test_ten_meters(self):
        dep = make_dep([(0, 0), (10, 0)])
        assert expected_ground_gain(0, 1, dep, GP) == pytest.approx(-60.0, abs=1e-12)

    def test_reference_distance(self):
        dep = make_dep([(0, 0), (1, 0)])
        assert expected_ground_gain(0, 1, dep, GP) == pytest.approx(-30.0, abs=1e-12)

    def test_obstacle_attenuation(self):
        wall = ObstacleSegment((5.0, -5.0), (5.0, 5.0), 35.0)
        dep = make_dep([(0, 0), (10, 0)], [wall])
        assert expected_ground_gain(0, 1, dep, GP) == pytest.approx(-95.0, abs=1e-12)

    def test_symmetric_in_pair(self):
        dep = make_dep([(0, 0), (7, 3), (-2, 9)])
        for i in range(3):
            for j in range(i + 1, 3):
                assert expected_ground_gain(i, j, dep, GP) == expected_ground_gain(j, i, dep, GP)

    def test_coincident_positions_error(self):
        dep = make_dep([(1, 1), (1, 1)])
        with pytest.raises(ValueError):
            expected_ground_gain(0, 1, dep, GP)

    def test_translation_invariance(self):
        rng = np.random.default_rng(42)
        pts = rng.uniform(-10, 10, size=(5, 2))
        wall = ObstacleSegment((0.0, -10.0), (0.0, 10.0), 35.0)
        dep = make_dep(pts, [wall])
        for _ in range(10):
            shift = rng.uniform(-20, 20, size=2)
            wall2 = ObstacleSegment(tuple(np.array(wall.endpoint_a) + shift),
                                    tuple(np.array(wall.endpoint_b) + shift), 35.0)
            dep2 = make_dep(pts + shift, [wall2])
            for i in range(5):
                for j in range(i + 1, 5):
                    assert expected_ground_gain(i, j, dep2, GP) == pytest.approx(
                        expected_ground_gain(i, j, dep, GP), abs=1e-9)


class TestSegmentsIntersect:
    def test_proper_crossing(self):
        assert segments_intersect((0, 0), (2, 2), (0, 2), (2, 0))

    def test_disjoint(self):
        assert not segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))

    def test_shared_endpoint_counts(self):
        assert segments_intersect((0, 0), (1, 1), (1, 1), (2, 0))

    def test_collinear_touch_counts(self):
        assert segments_intersect((0, 0), (2, 0), (1, 0), (3, 0))

    def test_collinear_disjoint(self):
        assert not segments_intersect((0, 0), (1, 0), (2, 0), (3, 0))

    def test_multiple_obstacles_sum(self):
        walls = [ObstacleSegment((2.0, -1.0), (2.0, 1.0), 10.0),
                 ObstacleSegment((4.0, -1.0), (4.0, 1.0), 7.0)]
        assert obstacle_loss_db((0, 0), (6, 0), walls) == pytest.approx(17.0)


class TestGroundLinkProbability:
    def test_at_threshold(self):
        assert ground_link_probability(GP.g_th, GP) == pytest.approx(0.5, abs=1e-15)

    def test_strong_link(self):
        assert ground_link_probability(-30.0, GP) == pytest.approx(1.0, abs=1e-12)

    def test_blocked_link(self):
        assert ground_link_probability(-95.0, GP) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_gain(self):
        gains = np.linspace(-100, -20, 200)
        probs = ground_link_probability(gains, GP)
        assert np.all(np.diff(probs) >= 0)
        assert np.all((probs >= 0) & (probs <= 1))


class TestElevation:
    def test_overhead(self):
        assert elevation_angle_deg((0, 0, 10), (0, 0, 0)) == pytest.approx(90.0)

    def test_45_degrees(self):
        assert elevation_angle_deg((10, 0, 10), (0, 0, 0)) == pytest.approx(45.0)

    def test_30_degrees(self):
        assert elevation_angle_deg((0, 10 * math.sqrt(3), 10), (0, 0, 0)) == pytest.approx(30.0)

    def test_uav_below_errors(self):
        with pytest.raises(ValueError):
            elevation_angle_deg((0, 0, 0), (0, 0, 0))


class TestLosProbability:
    def test_midpoint(self):
        assert los_probability(AP.los_b / AP.los_a, AP) == pytest.approx(0.5, abs=1e-15)

    def test_overhead_saturates(self):
        assert los_probability(90.0, AP) == pytest.approx(1.0, abs=1e-12)

    def test_grazing(self):
        assert los_probability(1e-9, AP) == pytest.approx(0.0066928509242848554, rel=1e-9)

    def test_strictly_increasing(self):
        # below ~60 deg the logistic is not yet saturated in float64
        thetas = np.linspace(0.1, 60.0, 500)
        probs = los_probability(thetas, AP)
        assert np.all(np.diff(probs) > 0)
        assert np.all(np.diff(los_probability(np.linspace(60, 90, 100), AP)) >= 0)


class TestUavLinkProbability:
    def test_overhead_value(self):
        dep = make_dep([(0, 0)])
        p = uav_link_probability((0, 0, 10), 0, dep, AP, GP.g_th)
        assert p == pytest.approx(0.9999997133484281, abs=1e-12)

    def test_forced_los_reduces_to_single_tail(self):
        # los_b very negative saturates rho to 1
        ap = AirChannelParams(los_a=0.5, los_b=-1000.0)
        dep = make_dep([(0, 0)])
        p = uav_link_probability((12, 0, 10), 0, dep, ap, GP.g_th)
        d = math.hypot(12, 10)
        g_los = ap.beta_los - ap.alpha_los * 10 * math.log10(d)
        assert p == pytest.approx(1.0 - normal_cdf((GP.g_th - g_los) / ap.sigma_los), abs=1e-12)

    def test_forced_nlos_reduces_to_single_tail(self):
        ap = AirChannelParams(los_a=0.5, los_b=1000.0)  # rho pinned to 0
        dep = make_dep([(0, 0)])
        p = uav_link_probability((12, 0, 10), 0, dep, ap, GP.g_th)
        d = math.hypot(12, 10)
        g_nlos = ap.beta_nlos - ap.alpha_nlos * 10 * math.log10(d)
        assert p == pytest.approx(1.0 - normal_cdf((GP.g_th - g_nlos) / ap.sigma_nlos), abs=1e-12)

    def test_decreasing_with_distance_at_fixed_rho(self):
        ap = AirChannelParams(los_a=0.5, los_b=-1000.0)  # rho = 1 everywhere
        dep = make_dep([(0, 0)])
        probs = [uav_link_probability((r, 0, 10), 0, dep, ap, GP.g_th)
                 for r in np.linspace(0, 40, 50)]
        assert np.all(np.diff(probs) <= 1e-15)


class TestNormalCdf:
    def test_zero(self):
        assert normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_table_value(self):
        assert normal_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-12)

    def test_symmetry_value(self):
        assert normal_cdf(-1.96) == pytest.approx(0.024997895148220435, abs=1e-12)

    def test_symmetry_identity(self):
        xs = np.linspace(-8, 8, 1000)
        assert np.max(np.abs(normal_cdf(xs) + normal_cdf(-xs) - 1.0)) < 1e-12


class TestTypes:
    def test_position_rejects_nan(self):
        with pytest.raises(ValueError):
            Position3(float("nan"), 0.0, 0.0)

    def test_obstacle_rejects_degenerate(self):
        with pytest.raises(ValueError):
            ObstacleSegment((1.0, 1.0), (1.0, 1.0), 35.0)
        with pytest.raises(ValueError):
            ObstacleSegment((0.0, 0.0), (1.0, 0.0), -3.0)

    def test_deployment_checks_arena(self):
        with pytest.raises(ValueError):
            Deployment(np.array([[100.0, 0.0]]), arena=Arena(0, 0, 10, 10))

    def test_deployment_pads_z(self):
        dep = make_dep([(1, 2)])
        assert dep.positions.shape == (1, 3)
        assert dep.positions[0, 2] == 0.0
