from __future__ import annotations

import numpy as np
import pytest

from eigenvol.moebius import Annulus, geodesic_distance
from eigenvol.packing import (
    DiscreteMeasure,
    PackingError,
    gny_decompose,
    pushforward_measure,
    select_light,
    shells_disjoint,
    verify_family,
)


def _uniform_measure(n, seed=0, m=2):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, m + 1))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return DiscreteMeasure(pts, np.full(n, 4 * np.pi / n))


def _clustered_measure(n, seed=1):
    # two tight caps plus a sprinkling of background mass
    rng = np.random.default_rng(seed)
    c1 = np.array([0.0, 0.0, 1.0])
    c2 = np.array([1.0, 0.0, 0.0])
    blobs = []
    for c in (c1, c2):
        q = c + 0.15 * rng.standard_normal((n // 2, 3))
        blobs.append(q / np.linalg.norm(q, axis=1, keepdims=True))
    bg = rng.standard_normal((n // 4, 3))
    blobs.append(bg / np.linalg.norm(bg, axis=1, keepdims=True))
    pts = np.vstack(blobs)
    w = np.concatenate([np.full(n // 2, 1.0), np.full(n // 2, 1.0), np.full(n // 4, 0.05)])
    return DiscreteMeasure(pts, w)


# ---------------------------------------------------------------------- #
# measures


def test_measure_merges_coincident_atoms():
    p = np.array([0.0, 0.0, 1.0])
    q = np.array([1.0, 0.0, 0.0])
    mu = DiscreteMeasure(np.array([p, p, q]), np.array([1.0, 2.0, 3.0]))
    assert mu.size == 2
    assert mu.total == pytest.approx(6.0)
    assert mu.merged_atoms == 1
    heavier = mu.weights[np.argmax(mu.points @ p)]
    assert heavier == pytest.approx(3.0)


def test_measure_drops_zero_weights():
    pts = np.eye(3)
    mu = DiscreteMeasure(pts, np.array([1.0, 0.0, 2.0]))
    assert mu.size == 2


def test_measure_rejects_bad_input():
    pts = np.eye(3)
    with pytest.raises(ValueError, match="nonnegative"):
        DiscreteMeasure(pts, np.array([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError, match="unit sphere"):
        DiscreteMeasure(2 * pts, np.ones(3))


def test_pushforward_identity(sphere3):
    mu = pushforward_measure(sphere3)
    assert mu.total == pytest.approx(sphere3.area, rel=1e-12)
    assert mu.size == sphere3.nv


def test_pushforward_density(sphere3):
    dens = np.zeros(sphere3.nv)
    dens[:10] = 2.0
    mu = pushforward_measure(sphere3, density=dens)
    assert mu.size == 10
    assert mu.total == pytest.approx(2.0 * sphere3.vertex_areas[:10].sum())
    with pytest.raises(ValueError, match="nonnegative"):
        pushforward_measure(sphere3, density=-1.0)


def test_pushforward_requires_sphere_or_images(fat_torus):
    with pytest.raises(ValueError, match="unit_sphere"):
        pushforward_measure(fat_torus)


# ---------------------------------------------------------------------- #
# exact shell tests


def test_shells_disjoint_concentric():
    p = np.array([0.0, 0.0, 1.0])
    assert shells_disjoint(Annulus(p, 0.1, 0.2), Annulus(p, 0.3, 0.4))
    assert shells_disjoint(Annulus(p, 0.1, 0.5), Annulus(p, 0.5, 0.9))  # touching
    assert not shells_disjoint(Annulus(p, 0.1, 0.3), Annulus(p, 0.2, 0.4))


def test_shells_disjoint_antipodal():
    p = np.array([0.0, 0.0, 1.0])
    # caps of radius .5 around antipodal centers never meet
    assert shells_disjoint(Annulus(p, 0.0, 0.5), Annulus(-p, 0.0, 0.5))
    # but radius 1.7 caps overlap near the equator
    assert not shells_disjoint(Annulus(p, 0.0, 1.7), Annulus(-p, 0.0, 1.7))


def test_shells_disjoint_agrees_with_sampling():
    rng = np.random.default_rng(11)
    samples = rng.standard_normal((20000, 3))
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    for trial in range(40):
        c1, c2 = samples[rng.integers(0, len(samples), 2)]
        r = np.sort(rng.uniform(0.05, 2.8, 4))
        A = Annulus(c1, r[0], r[1])
        B = Annulus(c2, r[2] - r[1], r[3] - r[1])
        both = A.contains(samples) & B.contains(samples)
        if shells_disjoint(A, B):
            assert not both.any(), f"trial {trial}: SAT says disjoint, sample disagrees"


# ---------------------------------------------------------------------- #
# decomposition


@pytest.mark.parametrize("k", [1, 2, 4, 8])
def test_gny_uniform(k):
    mu = _uniform_measure(900, seed=5)
    fam = gny_decompose(mu, k, seed=0)
    assert len(fam.annuli) == k
    assert fam.beta >= 1e-2
    report = verify_family(mu, fam)
    assert report.ok
    assert report.disjoint
    assert report.max_double_membership <= 1
    assert np.all(report.masses >= fam.target)


@pytest.mark.parametrize("k", [2, 4, 8])
def test_gny_clustered(k):
    mu = _clustered_measure(600)
    fam = gny_decompose(mu, k, seed=0)
    report = verify_family(mu, fam)
    assert report.ok
    assert fam.beta >= 1e-2


def test_gny_deterministic():
    mu = _uniform_measure(400, seed=6)
    f1 = gny_decompose(mu, 4, seed=3)
    f2 = gny_decompose(mu, 4, seed=3)
    assert f1.beta == f2.beta
    for a, b in zip(f1.annuli, f2.annuli):
        assert np.array_equal(a.center, b.center)
        assert a.inner == b.inner and a.outer == b.outer


def test_gny_respects_r_max():
    mu = _uniform_measure(500, seed=7)
    r_max = 0.49 * np.pi
    fam = gny_decompose(mu, 4, seed=0, r_max=r_max)
    assert max(a.outer for a in fam.annuli) <= r_max


def test_gny_gap_separates_doubles():
    mu = _uniform_measure(500, seed=8)
    gap = 0.08
    fam = gny_decompose(mu, 3, seed=0, gap=gap)
    doubles = [a.doubled() for a in fam.annuli]
    # inflating each double by gap/2 must preserve disjointness, which
    # certifies geodesic separation >= gap between the regions themselves
    eps = np.nextafter(np.pi, 0.0)
    for i in range(len(doubles)):
        for j in range(i + 1, len(doubles)):
            di, dj = doubles[i], doubles[j]
            gi = Annulus(di.center, max(0.0, di.inner - gap / 2), min(eps, di.outer + gap / 2))
            gj = Annulus(dj.center, max(0.0, dj.inner - gap / 2), min(eps, dj.outer + gap / 2))
            assert shells_disjoint(gi, gj)


def test_gny_single_atom_fails():
    mu = DiscreteMeasure(np.array([[0.0, 0.0, 1.0]]), np.array([1.0]))
    with pytest.raises(PackingError):
        gny_decompose(mu, 2, seed=0)


def test_gny_input_validation():
    mu = _uniform_measure(50)
    with pytest.raises(ValueError):
        gny_decompose(mu, 0)
    with pytest.raises(ValueError):
        gny_decompose(mu, 2, gap=-0.1)
    with pytest.raises(ValueError):
        gny_decompose(mu, 2, r_max=0.0)


def test_select_light_bound():
    mu = _uniform_measure(800, seed=9)
    k = 3
    fam = gny_decompose(mu, 2 * (k + 1), seed=0)
    assert verify_family(mu, fam).ok
    chosen = select_light(mu, fam, k + 1)
    assert chosen.shape[0] == k + 1
    doubled = np.array([mu.mass(fam.annuli[i].doubled()) for i in chosen])
    assert np.all(doubled <= mu.total / (k + 1) + 1e-12)


def test_select_light_validation():
    mu = _uniform_measure(100)
    fam = gny_decompose(mu, 2, seed=0)
    with pytest.raises(ValueError):
        select_light(mu, fam, 5)


def test_verified_masses_match_construction():
    mu = _clustered_measure(400, seed=2)
    fam = gny_decompose(mu, 4, seed=1)
    report = verify_family(mu, fam)
    assert np.array_equal(report.masses, fam.masses)
