import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from billiard_zeta.errors import (
    BoundaryError,
    ConfigError,
    DomainError,
    EscapeError,
    FrameError,
    GeometryError,
)
from billiard_zeta.geometry import (
    Ball,
    Scene,
    billiard_map,
    check_noneclipse,
    gauss_map,
    load_scene,
    normal,
    ray_intersect,
    reflect,
)


def unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


@pytest.mark.parametrize(
    "center, x, expected",
    [((0, 0), (1, 0), (-1, 0)), ((6, 0), (5, 0), (1, 0)), ((0, 0), (0.6, 0.8), (-0.6, -0.8))],
)
def test_normal_points_inward(center, x, expected):
    assert np.allclose(normal(Ball(center, 1.0), x), expected, atol=1e-15)


def test_normal_off_boundary():
    with pytest.raises(BoundaryError):
        normal(Ball((0, 0), 1.0), (1.1, 0))


def test_gauss_map_balls():
    assert np.allclose(gauss_map(Ball((0, 0), 1.0), (0, 1), [[1], [0]]), [[1]])
    assert np.allclose(gauss_map(Ball((0, 0), 0.5), (0.5, 0), [[0], [1]]), [[2]])
    frame = np.array([[1, 0], [0, 1], [0, 0]], dtype=float)
    assert np.allclose(gauss_map(Ball((0, 0, 0), 2.0), (0, 0, 2), frame), 0.5 * np.eye(2))


def test_gauss_map_rejects_bad_frame():
    with pytest.raises(FrameError):
        gauss_map(Ball((0, 0), 1.0), (0, 1), [[2], [0]])
    with pytest.raises(FrameError):
        gauss_map(Ball((0, 0), 1.0), (0, 1), [[0], [1]])


def test_reflect_examples():
    assert np.allclose(reflect((1, 0), (-1, 0)), (-1, 0))
    assert np.allclose(reflect((1, 0), (0, 1)), (1, 0))
    s = math.sqrt(2) / 2
    assert np.allclose(reflect((s, s), (0, -1)), (s, -s))


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_reflect_involution_and_norm(a, b):
    v, n = unit(a), unit(b)
    w = reflect(v, n)
    assert abs(np.linalg.norm(w) - 1) <= 1e-14
    assert np.allclose(reflect(w, n), v, atol=1e-14)
    assert abs(w @ n + v @ n) <= 1e-14


def test_ray_intersect_examples(scene):
    single = Scene(2, (Ball((0, 0), 1.0), Ball((10, 10), 1.0), Ball((-10, 10), 1.0)))
    hit = ray_intersect(single, (-3, 0), (1, 0))
    assert hit.index == 0 and hit.t == pytest.approx(2) and np.allclose(hit.point, (-1, 0))
    low = Scene(2, (Ball((0, 0), 1.0), Ball((4, 0), 1.0), Ball((8, -1), 1.0)))
    assert ray_intersect(low, (0, 5), (0, 1)) is None
    hit = ray_intersect(scene, (1, 0), (1, 0))
    assert hit.index == 1 and hit.t == pytest.approx(4) and np.allclose(hit.point, (5, 0))


def test_ray_from_inside():
    with pytest.raises(DomainError):
        ray_intersect(Scene(2, (Ball((0, 0), 1.0), Ball((4, 0), 1.0), Ball((8, 0), 1.0))), (0.2, 0), (1, 0))


def test_billiard_map_two_cycle(scene):
    step = billiard_map(scene, (1, 0), (1, 0))
    assert step.index == 1 and np.allclose(step.point, (5, 0)) and np.allclose(step.direction, (-1, 0))
    assert step.length == pytest.approx(4)
    back = billiard_map(scene, step.point, step.direction)
    assert np.allclose(back.point, (1, 0)) and np.allclose(back.direction, (1, 0))
    assert not step.grazing


def test_billiard_map_grazing_flag(scene):
    step = billiard_map(scene, (-5, 1.0 - 1e-14), (1, 0))
    assert step.grazing


def test_billiard_map_escape(scene):
    with pytest.raises(EscapeError):
        billiard_map(scene, (1, 0), (-1, 0))


@given(st.floats(-math.pi / 2 + 0.3, math.pi / 2 - 0.3))
def test_billiard_map_hits_boundary(angle):
    # rays from disk 1 towards disk 2
    from billiard_zeta.geometry import three_disk_scene

    sc = three_disk_scene()
    x = np.array([1.0, 0.0])
    v = unit(angle * 0.15)
    step = billiard_map(sc, x, v)
    ob = sc.obstacles[step.index]
    assert abs(np.linalg.norm(step.point - ob.c) - ob.radius) <= 1e-12


def test_noneclipse_equilateral(scene):
    rep = check_noneclipse(scene)
    assert rep.passed and rep.min_clearance > 0
    assert scene.d0 == pytest.approx(4) and scene.d1 == pytest.approx(4)


def test_noneclipse_collinear():
    sc = Scene(2, (Ball((0, 0), 1.0), Ball((4, 0), 1.0), Ball((8, 0), 1.0)))
    rep = check_noneclipse(sc)
    assert not rep.passed and rep.witness == (1, 3, 2)


def test_noneclipse_overlap_is_geometry_error():
    sc = Scene(2, (Ball((0, 0), 1.0), Ball((1.5, 0), 1.0), Ball((8, 0), 1.0)))
    with pytest.raises(GeometryError):
        check_noneclipse(sc)


def test_r2_scene_rejected():
    with pytest.raises(ConfigError, match="r >= 3"):
        Scene(2, (Ball((0, 0), 1.0), Ball((4, 0), 1.0)))


def test_scene_schema(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"dimension": 2, "obstacles": [{"center": [0,0], "radius": 1, "color": 3}]}')
    with pytest.raises(ConfigError, match="unknown keys"):
        load_scene(p)
    p.write_text('{"dimension": 2, "obstacles": [], "extra": 1}')
    with pytest.raises(ConfigError):
        load_scene(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scene(p)


def test_scene_roundtrip_hash(scene):
    again = Scene.from_dict(scene.to_dict())
    assert again.hash() == scene.hash()
    assert again.d0 == scene.d0
