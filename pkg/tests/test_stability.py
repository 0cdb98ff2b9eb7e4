import math

import numpy as np
import pytest

from billiard_zeta.errors import InputError
from billiard_zeta.orbit import find_orbit, iterate_orbit
from billiard_zeta.stability import (
    bounce_data,
    curvature_form,
    fd_eigenvalues,
    hyperbolicity_certificate,
    poincare_map,
    poincare_matrix,
    reflection_block,
    transverse_frames,
    transversality_gap,
)
from billiard_zeta.symbolic import Orientation, enumerate_words

from conftest import LAMBDA_2CYCLE


def three_cycle_multiplier():
    """|Lambda| of the 3-cycle: cube of the larger root of x^2 - t x + 1,
    t = 2 + lambda psi with lambda = 6 - sqrt 3 and psi = 4 / sqrt 3."""
    t = 2 + (6 - math.sqrt(3)) * 4 / math.sqrt(3)
    return ((t + math.sqrt(t * t - 4)) / 2) ** 3


def test_curvature_form_normal_incidence(scene):
    o = find_orbit(scene, (1, 2))
    frames = transverse_frames(o)
    assert np.allclose(curvature_form(scene, o, 0, frames), [[2.0]], atol=1e-12)


def test_curvature_form_thirty_degrees(scene):
    o = find_orbit(scene, (1, 2, 3))
    frames = transverse_frames(o)
    for k in range(3):
        assert curvature_form(scene, o, k, frames)[0, 0] == pytest.approx(4 / math.sqrt(3), rel=1e-12)


def test_curvature_form_sphere(sphere_scene):
    o = find_orbit(sphere_scene, (1, 2))
    frames = transverse_frames(o)
    assert np.allclose(curvature_form(sphere_scene, o, 1, frames), 2 * np.eye(2), atol=1e-12)


def test_reflection_block_examples():
    assert np.allclose(reflection_block(4.0, [[2.0]], [[1.0]]), [[1, 4], [2, 9]])
    assert np.allclose(reflection_block(0.0, [[0.0]], [[-1.0]]), np.diag([-1.0, -1.0]))


def test_block_determinants(scene):
    for cls in enumerate_words(3, 6):
        o = find_orbit(scene, cls)
        data = bounce_data(scene, o)
        for k in range(o.m):
            B = reflection_block(data.lengths[k], data.psis[k], data.sigmas[k])
            assert abs(abs(np.linalg.det(B)) - 1) <= 1e-10


def test_two_cycle_closed_form(scene):
    rep = poincare_map(scene, find_orbit(scene, (1, 2)))
    assert rep.det_direct == pytest.approx(96, abs=1e-9)
    assert abs(rep.Lambda) == pytest.approx(LAMBDA_2CYCLE, rel=1e-12)
    assert abs(np.trace(rep.P)) == pytest.approx(98, rel=1e-12)
    assert rep.M0[0, 0] == pytest.approx(1 + math.sqrt(1.5), rel=1e-12)
    assert rep.det_factored == pytest.approx(96, rel=1e-12)
    assert abs(rep.expanding[0]) == pytest.approx(LAMBDA_2CYCLE, rel=1e-12)


def test_three_cycle_pairing_and_multiplier(scene):
    rep = poincare_map(scene, find_orbit(scene, (1, 2, 3)))
    e = rep.eigenvalues
    assert abs(e[0] * e[1] - 1) <= 1e-10
    assert abs(rep.Lambda) == pytest.approx(three_cycle_multiplier(), rel=1e-11)


def test_fixed_point_properties(scene):
    for cls in enumerate_words(3, 8):
        rep = poincare_map(scene, find_orbit(scene, cls))
        assert rep.fixed_point_sweeps <= 60
        assert np.linalg.eigvalsh(rep.M0).min() > 0.1
        assert rep.cross_check_delta <= 1e-8
        assert transversality_gap(rep) > 0.1


def test_basepoint_invariance(scene):
    for cls in enumerate_words(3, 6):
        o = find_orbit(scene, cls)
        data = bounce_data(scene, o)
        ref = np.sort(np.abs(np.linalg.eigvals(poincare_matrix(data))))
        for start in range(1, o.m):
            eig = np.sort(np.abs(np.linalg.eigvals(poincare_matrix(data, start))))
            assert np.allclose(eig[-1], ref[-1], rtol=1e-9)
            P = poincare_matrix(data, start)
            assert abs(abs(np.linalg.det(np.eye(2) - P)) - poincare_map(scene, o).det_direct) <= 1e-9 * ref[-1]


def test_orientation_invariance(db8):
    by_word = {r.word: r for r in db8.good()}
    from billiard_zeta.symbolic import canonicalize

    for w, r in by_word.items():
        if r.orientation == Orientation.CHIRAL.value:
            rev = by_word[canonicalize(tuple(reversed(w))).word]
            assert rev.det_abs == pytest.approx(r.det_abs, rel=1e-9)


def test_iterate_law(scene):
    root = find_orbit(scene, (1, 2, 3))
    rep = poincare_map(scene, root)
    for mu in (2, 3):
        it = poincare_map(scene, iterate_orbit(scene, root, mu))
        assert np.allclose(it.P, np.linalg.matrix_power(rep.P, mu), rtol=1e-9, atol=1e-9 * abs(rep.Lambda) ** mu)
        assert rep.det_iterate(mu) == pytest.approx(it.det_direct, rel=1e-8)
        assert it.det_factored == pytest.approx(it.det_direct, rel=1e-8)


def test_fd_oracle_small(scene):
    for word in [(1, 2), (1, 2, 3), (1, 2, 1, 3)]:
        o = find_orbit(scene, word)
        rep = poincare_map(scene, o)
        fd = fd_eigenvalues(scene, o)
        assert np.allclose(np.abs(fd), np.abs(rep.eigenvalues), rtol=1e-5)


def test_sphere_scene(sphere_scene, scene):
    rep = poincare_map(sphere_scene, find_orbit(sphere_scene, (1, 2)))
    assert rep.det_direct == pytest.approx(96.0**2, rel=1e-12)
    # the in-plane multipliers of a planar orbit are those of the disk scene
    rep3 = poincare_map(sphere_scene, find_orbit(sphere_scene, (1, 2, 3)))
    rep2 = poincare_map(scene, find_orbit(scene, (1, 2, 3)))
    assert np.isclose(np.abs(rep3.eigenvalues), abs(rep2.Lambda), rtol=1e-10).any()
    assert rep3.cross_check_delta <= 1e-8
    e = np.abs(rep3.eigenvalues)
    assert np.allclose(e[:2] * e[::-1][:2], 1.0, rtol=1e-8)


def test_certificate(scene):
    orbits = [find_orbit(scene, c) for c in enumerate_words(3, 8)]
    reports = [poincare_map(scene, o) for o in orbits]
    cert = hyperbolicity_certificate(scene, orbits, reports)
    assert cert.beta > 0
    assert cert.b1 <= math.log(96) / 8 <= cert.b2
    for o, r in zip(orbits, reports):
        assert cert.b1 - 1e-12 <= math.log(r.det_direct) / o.tau <= cert.b2 + 1e-12
        assert math.log(cert.C1) + cert.b1 * o.tau <= math.log(r.det_direct) + 1e-12
        assert np.abs(r.expanding).min() >= (1 + cert.epsilon * scene.d0) ** o.m * (1 - 1e-12)
    with pytest.raises(InputError):
        hyperbolicity_certificate(scene, [], [])
