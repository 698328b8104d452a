"""Checks of the verification harness itself."""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenvol.confvol import SphereImmersion
from eigenvol.fixtures import flat_torus, icosphere, revolution_torus
from eigenvol.harness import (
    CheckResult,
    VerificationError,
    _exact_orthogonality,
    _ineq,
    balance_decay,
    build_witness_chain,
    check_curvature_first_eigenvalue,
    check_eigenvalue_counts,
    check_first_eigenvalue,
    check_higher_eigenvalues,
    check_index,
    conformal_balance,
    genus_conformal_volume_bound,
    index_constant,
    proof_constants,
    run_verification,
)
from eigenvol.spectral import assemble_laplacian

SPHERE_AREA = 4.0 * np.pi
CLIFFORD_AREA = 2.0 * np.pi**2


# ---------------------------------------------------------------------- #
# constants


def test_constants_match_independent_expressions():
    cs = proof_constants(2, 2)
    assert cs.covering_number == 81
    assert cs.mass_fraction == Fraction(1, 8 * 81**12)
    # 10000 n / (81 c) at n=2, c = 1/(8 * 9^24):
    # 20000/81 * 8 * 81^12 = 160000 * 81^11
    assert cs.higher_eigenvalue == 160000 * 81**11
    assert cs.curvature_eigenvalue == 80000 * 81**11
    # (9c / 2500n)^{n/2} at n=2: 9 / (5000 * 8 * 9^24) = 1/(40000 * 9^23)
    assert cs.count_conformal == Fraction(1, 40000 * 9**23)
    assert cs.count_curvature == Fraction(1, 20000 * 9**23)


def test_constants_scale_with_target_dimension():
    c2, c3 = proof_constants(2, 2), proof_constants(2, 3)
    assert c3.covering_number == 9 * c2.covering_number
    # c shrinks by 9^12 per target dimension, so the eigenvalue
    # constant grows by the same factor
    assert c3.higher_eigenvalue == c2.higher_eigenvalue * 9**12


def test_constants_reject_bad_dimensions():
    with pytest.raises(ValueError):
        proof_constants(3, 2)
    with pytest.raises(ValueError):
        proof_constants(1, 2)
    with pytest.raises(ValueError):
        proof_constants(2, 1)


def test_index_constant_is_count_constant_in_s3():
    assert index_constant(2) == proof_constants(2, 3).count_conformal


def test_genus_bound_values():
    assert genus_conformal_volume_bound(0, True) == pytest.approx(4 * np.pi)
    assert genus_conformal_volume_bound(1, True) == pytest.approx(8 * np.pi)
    assert genus_conformal_volume_bound(2, True) == pytest.approx(8 * np.pi)
    assert genus_conformal_volume_bound(3, True) == pytest.approx(12 * np.pi)
    assert genus_conformal_volume_bound(0, False) == pytest.approx(8 * np.pi)
    with pytest.raises(ValueError):
        genus_conformal_volume_bound(-1, True)


@given(g=st.integers(min_value=0, max_value=200))
@settings(max_examples=40, deadline=None)
def test_genus_bound_monotone_and_doubling(g):
    b = genus_conformal_volume_bound
    assert b(g, False) == 2.0 * b(g, True)
    assert b(g + 1, True) >= b(g, True)


# ---------------------------------------------------------------------- #
# check records


def test_ineq_statuses():
    assert _ineq("a", "s", 1.0, 2.0).status == "pass"
    assert _ineq("a", "s", 3.0, 2.0).status == "fail"
    assert _ineq("a", "s", 3.0, 2.0, inconclusive_on_fail=True).status == "inconclusive"
    # relative tolerance is measured against the right-hand side
    assert _ineq("a", "s", 2.05, 2.0, rel_tol=0.03).status == "pass"
    assert _ineq("a", "s", 2.07, 2.0, rel_tol=0.03).status == "fail"


def test_check_result_serializes():
    r = CheckResult(
        name="x",
        statement="y",
        status="pass",
        lhs=1.0,
        rhs=2.0,
        detail={"arr": np.arange(3.0), "frac": Fraction(1, 3), "np": np.float64(2.5)},
    )
    blob = json.dumps(r.as_dict(), sort_keys=True)
    back = json.loads(blob)
    assert back["slack"] == 1.0
    assert back["detail"]["arr"] == [0.0, 1.0, 2.0]
    assert back["detail"]["frac"] == "1/3"
    assert "pass" in r.line()


# ---------------------------------------------------------------------- #
# eigenvalue checks


def test_first_eigenvalue_sphere_near_equality(sphere3):
    r = check_first_eigenvalue(
        sphere3,
        immersion=SphereImmersion.identity(sphere3),
        vc_reference=SPHERE_AREA,
    )
    assert r.ok
    assert r.lhs == pytest.approx(8 * np.pi, rel=0.01)
    replay = r.detail["replay"]
    # centered coordinates reproduce the variational bound lambda_1 <= 2
    assert replay["test_function_bound"] == pytest.approx(2.0, rel=1e-6)
    assert r.error_bars["max_log_distortion"] < 1e-9


def test_first_eigenvalue_needs_a_reference(sphere3):
    with pytest.raises(ValueError):
        check_first_eigenvalue(sphere3)


def test_first_eigenvalue_search_is_soft(fat_torus):
    r = check_first_eigenvalue(fat_torus, immersion=SphereImmersion.lifted(fat_torus))
    assert r.status == "pass"
    assert r.detail["vc_source"] == "search lower bound"


def test_curvature_first_eigenvalue_equalities(sphere3, clifford32):
    r = check_curvature_first_eigenvalue(sphere3)
    assert r.ok
    assert abs(r.lhs - r.rhs) < 1e-3  # round sphere saturates the bound
    r = check_curvature_first_eigenvalue(clifford32, kappa=1.0)
    assert r.ok
    assert abs(r.lhs - r.rhs) < 1e-3  # minimal surface, lambda_1 = n


def test_curvature_first_eigenvalue_strict_on_fat_torus(fat_torus):
    r = check_curvature_first_eigenvalue(fat_torus)
    assert r.ok
    assert r.rhs > 2.0 * r.lhs


def test_curvature_bound_rejects_abstract_mesh():
    flat = flat_torus(2 * np.pi, 2 * np.pi, 12)
    with pytest.raises(ValueError):
        check_curvature_first_eigenvalue(flat)


def test_higher_eigenvalues_both_forms(sphere3):
    rs = check_higher_eigenvalues(
        sphere3, kmax=6, m=2, vc_reference=SPHERE_AREA, kappa=0.0
    )
    assert [r.name for r in rs] == [
        "higher-eigenvalues",
        "higher-eigenvalues-curvature",
    ]
    assert all(r.ok for r in rs)
    assert len(rs[0].detail["eigenvalues"]) == 6


def test_higher_eigenvalues_need_some_hypothesis(sphere3):
    with pytest.raises(ValueError):
        check_higher_eigenvalues(sphere3, kmax=4)


# ---------------------------------------------------------------------- #
# counting checks


def test_counts_sphere_oracle(sphere3):
    # -Laplace has eigenvalues 0, 2, 2, 2, 6, ... so V = 1 traps only the
    # constant mode and V = 2.5 traps four
    rs = check_eigenvalue_counts(
        sphere3,
        1.0,
        vc_reference=SPHERE_AREA,
        immersion=SphereImmersion.identity(sphere3),
        kappa=0.0,
    )
    assert all(r.ok for r in rs)
    assert rs[0].detail["observed_count"] == 1
    rs = check_eigenvalue_counts(
        sphere3,
        2.5,
        vc_reference=SPHERE_AREA,
        immersion=SphereImmersion.identity(sphere3),
        kappa=0.0,
    )
    assert all(r.ok for r in rs)
    assert rs[0].detail["observed_count"] == 4
    replay = rs[0].detail["replay"]
    assert replay["constant_witness_value"] < 0.0
    assert bool(np.all(replay["conformal_family"]["strictly_negative"]))


def test_counts_clifford_match_index(clifford32):
    # the stability potential n + |S|^2 = 4 of the square torus
    rs = check_eigenvalue_counts(
        clifford32,
        4.0,
        m=3,
        vc_reference=CLIFFORD_AREA,
        immersion=SphereImmersion.identity(clifford32),
        kappa=1.0,
        minimal_in_sphere=True,
    )
    assert all(r.ok for r in rs)
    assert {r.name for r in rs} == {
        "count-conformal",
        "count-minimal",
        "count-curvature",
    }
    assert rs[0].detail["observed_count"] == 5


def test_counts_reject_signed_potential(sphere3):
    with pytest.raises(ValueError):
        check_eigenvalue_counts(sphere3, -1.0, vc_reference=SPHERE_AREA)


# ---------------------------------------------------------------------- #
# index


def test_index_reference_surfaces(sphere3, clifford32):
    r = check_index(sphere3, 0.0, reference_index=1)
    assert r.ok and r.detail["index"] == 1
    r = check_index(clifford32, 2.0, reference_index=5)
    assert r.ok and r.detail["index"] == 5


def test_index_flags_reference_mismatch(sphere3):
    r = check_index(sphere3, 0.0, reference_index=3)
    assert r.status == "fail"


# ---------------------------------------------------------------------- #
# conformal balance


def test_balance_centered_sphere_is_exact(sphere3):
    bal = conformal_balance(sphere3)
    # every term is constant on the centered sphere and the discrete
    # identity closes to rounding
    assert bal.max_abs < 1e-10
    assert bal.integrated_ok
    assert bal.willmore == pytest.approx(0.5 * bal.lifted_energy, rel=1e-3)


def test_balance_residual_decays():
    d = balance_decay(levels=(3, 4), center=(0.5, 0.0, 0.0))
    assert d["factors"][0] >= 2.5
    assert d["oracle_gap"][1] < d["oracle_gap"][0]
    assert d["oracle"] == pytest.approx(16 * np.pi / (0.5**4 + 4.0))


def test_balance_needs_embedded_surface():
    with pytest.raises(ValueError):
        conformal_balance(flat_torus(2 * np.pi, 2 * np.pi, 8))


def test_balance_holds_off_the_sphere(fat_torus):
    bal = conformal_balance(fat_torus)
    assert bal.integrated_ok
    assert bal.willmore > 0.5 * bal.lifted_energy


# ---------------------------------------------------------------------- #
# witness chain


def test_witness_chain_sphere(sphere3):
    chain = build_witness_chain(
        sphere3, SphereImmersion.identity(sphere3), k=2, vc_reference=SPHERE_AREA
    )
    assert chain.ok
    assert chain.selected.shape == (3,)
    assert chain.energies.max() <= 8 * SPHERE_AREA
    assert chain.lambda_k <= chain.rayleighs.max() * (1 + 1e-9)
    assert chain.error_bars["exact_links"] == 0.0


def test_witness_chain_rejects_k_zero(sphere3):
    with pytest.raises(ValueError):
        build_witness_chain(
            sphere3, SphereImmersion.identity(sphere3), k=0, vc_reference=SPHERE_AREA
        )


def test_exact_orthogonality_detects_overlap(sphere3):
    ops = assemble_laplacian(sphere3)
    U = np.ones((2, ops.n))
    with pytest.raises(VerificationError):
        _exact_orthogonality(ops, U)


# ---------------------------------------------------------------------- #
# full battery


def test_run_verification_section_subset():
    rep = run_verification("constants", seed=0)
    assert [name for name, _ in rep.sections] == ["constants"]
    assert rep.all_ok
    assert any("total:" in line for line in rep.lines())


def test_run_verification_rejects_unknown_section():
    with pytest.raises(ValueError):
        run_verification("everything")


def test_run_verification_weyl_deterministic():
    a = run_verification("weyl", seed=0)
    b = run_verification("weyl", seed=0)
    assert json.dumps(a.as_dict(), sort_keys=True) == json.dumps(
        b.as_dict(), sort_keys=True
    )
    assert a.as_dict()["schema_version"] == 1
