import json
import math

import numpy as np
import pytest

from diffsafe.sim import (
    CarState,
    Obstacle,
    Track,
    TrackParamError,
    TrackParams,
    collision,
    generate_track,
    load_track,
    off_road,
    save_track,
)


def brute_force_distance(point, poly):
    """Independent point-to-polyline distance: explicit loop over segments."""
    best = math.inf
    for a, b in zip(poly[:-1], poly[1:]):
        ax, ay = a
        bx, by = b
        px, py = point
        abx, aby = bx - ax, by - ay
        denom = abx * abx + aby * aby
        if denom == 0:
            d = math.hypot(px - ax, py - ay)
        else:
            t = max(0.0, min(1.0, ((px - ax) * abx + (py - ay) * aby) / denom))
            d = math.hypot(px - (ax + t * abx), py - (ay + t * aby))
        best = min(best, d)
    return best


def test_generate_track_deterministic():
    a = generate_track(7)
    b = generate_track(7)
    assert np.array_equal(a.centerline, b.centerline)
    assert a.obstacles == b.obstacles
    assert a.seed == b.seed == 7


def test_zero_noise_track_is_regular_polygon_circle():
    params = TrackParams(radial_noise=0.0, n_control=16, n_obstacles=0)
    t = generate_track(1, params)
    r = np.hypot(t.centerline[:, 0], t.centerline[:, 1])
    # the spline through a regular 16-gon of radius R stays in a thin band at R
    assert np.all(np.abs(r - params.base_radius) < 0.005 * params.base_radius)
    # 16-fold rotational symmetry of the radius profile
    ang = np.arctan2(t.centerline[:-1, 1], t.centerline[:-1, 0])
    order = np.argsort(ang)
    ang_s, r_s = ang[order], r[:-1][order]
    shifted = np.interp(
        np.mod(ang_s + 2 * math.pi / 16 + math.pi, 2 * math.pi) - math.pi,
        ang_s,
        r_s,
        period=2 * math.pi,
    )
    assert np.max(np.abs(shifted - r_s)) < 1e-3 * params.base_radius


def test_noisy_track_radial_spread():
    t = generate_track(3, TrackParams(radial_noise=0.3))
    centroid = t.centerline[:-1].mean(axis=0)
    r = np.hypot(*(t.centerline - centroid).T)
    assert r.max() - r.min() > 0.1 * 30.0


@pytest.mark.parametrize(
    "params",
    [TrackParams(n_control=7), TrackParams(radial_noise=0.5), TrackParams(radial_noise=0.7)],
)
def test_degenerate_params_rejected(params):
    with pytest.raises(TrackParamError):
        generate_track(0, params)


def test_track_invariants_and_obstacle_clearance():
    for seed in range(12):
        t = generate_track(seed, TrackParams(n_obstacles=5))
        assert np.allclose(t.centerline[0], t.centerline[-1], atol=1e-9)
        seg = np.hypot(*(np.diff(t.centerline, axis=0).T))
        assert np.all(seg > 1e-9)
        for ob in t.obstacles:
            d = brute_force_distance((ob.x, ob.y), t.centerline)
            assert d <= t.half_width + 1e-9
            # one side stays passable: corridor width minus obstacle on the wider side
            assert t.half_width + d - ob.radius >= 1.2 - 1e-9 or t.half_width - d - ob.radius >= 1.2 - 1e-9


def test_off_road_trivial_cases():
    t = generate_track(5)
    cx, cy = t.centerline[10]
    assert off_road(t, CarState(x=cx, y=cy, vx=0, vy=0, theta=0)) is False
    # push a point out along the radial direction by half_width + 1
    centroid = t.centerline[:-1].mean(axis=0)
    direction = np.array([cx, cy]) - centroid
    direction /= np.hypot(*direction)
    far = np.array([cx, cy]) + direction * (t.half_width + 1.0)
    d = brute_force_distance(far, t.centerline)
    assert d > t.half_width
    assert off_road(t, CarState(x=far[0], y=far[1], vx=0, vy=0, theta=0)) is True


def test_off_road_matches_brute_force_oracle():
    t = generate_track(11)
    rng = np.random.default_rng(0)
    centroid = t.centerline[:-1].mean(axis=0)
    pts = centroid + rng.uniform(-40, 40, size=(1000, 2))
    for p in pts:
        expected = brute_force_distance(p, t.centerline) >= t.half_width
        assert off_road(t, CarState(x=p[0], y=p[1], vx=0, vy=0, theta=0)) == expected


def test_collision_cases():
    t_empty = generate_track(2, TrackParams(n_obstacles=0))
    s = CarState(x=t_empty.centerline[0, 0], y=t_empty.centerline[0, 1], vx=0, vy=0, theta=0)
    assert collision(t_empty, s, car_radius=0.4) is False

    t = generate_track(2, TrackParams(n_obstacles=3))
    assert len(t.obstacles) == 3
    ob = t.obstacles[0]
    on_top = CarState(x=ob.x, y=ob.y, vx=0, vy=0, theta=0)
    assert collision(t, on_top, car_radius=0.4) is True
    # tangency counts as a collision (closed condition)
    tangent = CarState(x=ob.x + ob.radius + 0.4, y=ob.y, vx=0, vy=0, theta=0)
    assert collision(t, tangent, car_radius=0.4) is True
    clear = CarState(x=ob.x + ob.radius + 0.4 + 1e-9, y=ob.y, vx=0, vy=0, theta=0)
    assert collision(t, clear, car_radius=0.4) is False


def test_collision_matches_brute_force_oracle():
    t = generate_track(13, TrackParams(n_obstacles=5))
    rng = np.random.default_rng(1)
    centroid = t.centerline[:-1].mean(axis=0)
    pts = centroid + rng.uniform(-40, 40, size=(1000, 2))
    for p in pts:
        expected = any(math.hypot(p[0] - ob.x, p[1] - ob.y) <= 0.4 + ob.radius for ob in t.obstacles)
        assert collision(t, CarState(x=p[0], y=p[1], vx=0, vy=0, theta=0), 0.4) == expected


def test_track_json_roundtrip(tmp_path):
    t = generate_track(9)
    path = tmp_path / "track.json"
    save_track(t, path)
    t2 = load_track(path)
    assert np.array_equal(t.centerline, t2.centerline)
    assert t.obstacles == t2.obstacles
    assert t.half_width == t2.half_width and t.seed == t2.seed


def test_track_schema_version_rejected(tmp_path):
    t = generate_track(9)
    path = tmp_path / "track.json"
    save_track(t, path)
    data = json.loads(path.read_text())
    data["version"] = 99
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="version"):
        load_track(path)


def test_obstacle_outside_corridor_rejected():
    t = generate_track(4, TrackParams(n_obstacles=0))
    far = t.centerline[:-1].mean(axis=0)  # track centroid is well off the ring corridor
    with pytest.raises(ValueError, match="corridor"):
        Track(
            centerline=t.centerline,
            half_width=t.half_width,
            obstacles=(Obstacle(float(far[0]), float(far[1]), 0.5),),
            seed=0,
        )
