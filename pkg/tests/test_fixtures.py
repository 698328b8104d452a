from __future__ import annotations

import numpy as np
import pytest

from eigenvol.fixtures import (
    clifford_torus,
    flat_torus,
    flat_torus_spectrum,
    icosphere,
    revolution_torus,
    round_rp2_double_cover,
    veronese,
)
from eigenvol.mesh import mean_curvature
from eigenvol.spectral import eigensolve


def test_icosphere_counts():
    for level in range(4):
        mesh = icosphere(level)
        assert mesh.nv == 10 * 4**level + 2
        assert mesh.nf == 20 * 4**level
        assert mesh.euler_characteristic == 2


def test_icosphere_antipodal_symmetry_is_exact():
    mesh = icosphere(3)
    canon = {(v + 0.0).tobytes() for v in mesh.vertices}
    for v in mesh.vertices:
        assert (-v + 0.0).tobytes() in canon


def test_icosphere_deterministic():
    a, b = icosphere(2), icosphere(2)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.faces, b.faces)


def test_icosphere_area_converges():
    areas = [icosphere(level).area for level in (2, 3, 4)]
    errs = [abs(a - 4 * np.pi) for a in areas]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] / errs[1] == pytest.approx(0.25, abs=0.05)


def test_flat_torus_matches_exact_stencil_spectrum():
    n = 16
    mesh = flat_torus(2 * np.pi, 2 * np.pi, n)
    res = eigensolve(mesh, 12)
    exact = flat_torus_spectrum(2 * np.pi, 2 * np.pi, n, 12)
    assert np.max(np.abs(res.eigenvalues - exact)) < 1e-10


def test_flat_torus_anisotropic():
    mesh = flat_torus(2 * np.pi, 4 * np.pi, 12)
    assert mesh.area == pytest.approx(8 * np.pi**2, rel=1e-12)
    res = eigensolve(mesh, 4)
    exact = flat_torus_spectrum(2 * np.pi, 4 * np.pi, 12, 4)
    assert np.max(np.abs(res.eigenvalues - exact)) < 1e-10


def test_flat_torus_first_eigenvalue_near_continuum():
    mesh = flat_torus(2 * np.pi, 2 * np.pi, 48)
    res = eigensolve(mesh, 5)
    lam1 = res.eigenvalues[1]
    assert lam1 == pytest.approx(1.0, rel=0.0015)
    assert np.ptp(res.eigenvalues[1:5]) < 1e-9  # multiplicity four


def test_clifford_torus_geometry(clifford32, clifford32_spec):
    assert clifford32.euler_characteristic == 0
    assert clifford32.area == pytest.approx(2 * np.pi**2, rel=0.01)
    lam = clifford32_spec.eigenvalues
    assert lam[0] == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(lam[1:5], 2.0, rtol=0.01)
    assert lam[5] > 3.5


def test_clifford_torus_is_minimal_in_sphere(clifford32):
    # tangential (in-sphere) mean curvature vanishes for a minimal surface
    H_sphere = mean_curvature(clifford32, component="sphere")
    H_amb = mean_curvature(clifford32, component="ambient")
    assert np.max(np.linalg.norm(H_sphere, axis=1)) < 0.02
    # ambient curvature is the unit normal of S^3 scaled by 1
    assert np.linalg.norm(H_amb, axis=1) == pytest.approx(1.0, abs=0.02)


def test_revolution_torus_mean_curvature_pointwise():
    R, r, n = np.sqrt(2.0), 1.0, 48
    mesh = revolution_torus(R, r, n)
    H = np.linalg.norm(mean_curvature(mesh), axis=1)
    theta = 2 * np.pi * (np.arange(mesh.nv) // n) / n
    expect = 0.5 * np.abs(1.0 / r + np.cos(theta) / (R + r * np.cos(theta)))
    assert np.max(np.abs(H - expect)) < 0.01


def test_revolution_torus_area():
    R, r = 3.0, 1.0
    mesh = revolution_torus(R, r, 64)
    assert mesh.area == pytest.approx(4 * np.pi**2 * R * r, rel=0.005)


def test_veronese_topology_and_metric():
    v = veronese(3)
    assert v.nv == 5 * 4**3 + 1
    assert v.nf == 10 * 4**3
    assert v.euler_characteristic == 1
    assert not v.orientable
    assert v.area == pytest.approx(6 * np.pi, rel=0.015)


def test_veronese_first_eigenvalue():
    res = eigensolve(veronese(3), 8)
    lam = res.eigenvalues
    assert lam[0] == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(lam[1:6], 2.0, rtol=0.01)  # multiplicity five
    assert lam[6] > 5.0


def test_veronese_rejects_coarse_level():
    with pytest.raises(ValueError):
        veronese(1)


def test_double_cover_is_round_sphere_of_curvature_third():
    d = round_rp2_double_cover(3)
    assert d.euler_characteristic == 2
    assert d.orientable
    assert d.area == pytest.approx(12 * np.pi, rel=0.015)
    res = eigensolve(d, 5)
    assert np.allclose(res.eigenvalues[1:4], 2.0 / 3.0, rtol=0.01)


def test_double_cover_images_coincide_in_pairs():
    d = round_rp2_double_cover(2)
    canon = {}
    for i, v in enumerate(d.vertices):
        canon.setdefault((v + 0.0).tobytes(), []).append(i)
    sizes = sorted(len(ids) for ids in canon.values())
    assert sizes == [2] * (d.nv // 2)


def test_fixture_input_validation():
    with pytest.raises(ValueError):
        flat_torus(n=2)
    with pytest.raises(ValueError):
        revolution_torus(1.0, 2.0)
    with pytest.raises(ValueError):
        icosphere(-1)
