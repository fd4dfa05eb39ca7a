"""Zero-root extraction, complex-analysis probes, constraints, and regions."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rootlab.algebra import ProductPolynomial, matched_movement
from rootlab.betheroots import lambda_from_bethe, solve_log_bae
from rootlab.errors import (
    AmbiguousPattern,
    NeverDetected,
    NoConvergence,
    RootAtPole,
    UnpairableRoot,
    ZeroOnContour,
)
from rootlab.groundstate import exact_ground_state, ground_state_mps
from rootlab.model import ModelParams, build_hamiltonian, build_transfer_dense, scalar_a
from rootlab.spectral import make_zero_nodes
from rootlab.zeroroots import (
    ContourProbe,
    ZeroRootSet,
    accuracy_ladder,
    check_constraints,
    classify_zero_pattern,
    energy_from_zero_roots,
    solve_zero_roots,
    verify_argument_principle,
    verify_max_modulus,
)

XI3 = np.sqrt(3.0)


def dense_lambda(params, vec):
    """Independent eigenvalue reference: <psi| t(u) |psi> on the dense chain."""

    def ev(u):
        return complex(vec.conj() @ (build_transfer_dense(params, u) @ vec))

    return ev


def coefficient_fit_roots(params, ev):
    """Reference roots from a plain Vandermonde fit of the coefficients."""
    deg = 2 * params.N + 2
    uk = 1.3 * np.exp(2j * np.pi * np.arange(deg + 1) / (deg + 1)) - params.eta / 2.0
    coef = np.linalg.solve(np.vander(uk, deg + 1), np.array([ev(u) for u in uk]))
    return np.roots(coef), coef[0]


@pytest.fixture(scope="module")
def dense_8():
    params = ModelParams(N=8, p=0.7, q=0.6)
    gs = exact_ground_state(build_hamiltonian(params))
    ev = dense_lambda(params, gs.vector)
    return params, gs, ev, solve_zero_roots(None, params, lambda_eval=ev)


@pytest.fixture(scope="module")
def tilted_8():
    params = ModelParams(N=8, p=0.7, q=0.6, xi=XI3)
    gs = exact_ground_state(build_hamiltonian(params))
    ev = dense_lambda(params, gs.vector)
    return params, gs, ev, solve_zero_roots(None, params, lambda_eval=ev)


@pytest.fixture(scope="module")
def tilted_6():
    params = ModelParams(N=6, p=0.8, q=0.7, xi=1.2)
    gs = exact_ground_state(build_hamiltonian(params))
    ev = dense_lambda(params, gs.vector)
    return params, gs, ev, solve_zero_roots(None, params, lambda_eval=ev)


@pytest.fixture(scope="module")
def planted_poly():
    roots = np.array(
        [0.5 + 0.3j, 0.5 - 0.3j, -1.5 - 0.3j, -1.5 + 0.3j, 0.2, -1.2]
    )
    return ProductPolynomial(roots, leading=2.0), roots


@pytest.fixture(scope="module")
def census_10():
    points = {
        "A": (0.45, 0.4),
        "B": (0.7, 0.4),
        "C": (1.5, 1.0),
        "D": (-0.3, 0.4),
        "E": (-1.5, 0.96),
        "F": (-1.5, 1.04),
    }
    out = {}
    for want, (p, q) in points.items():
        params = ModelParams(N=10, p=p, q=q, xi=XI3)
        res = ground_state_mps(params)
        rs = solve_zero_roots(res.psi, params)
        out[want] = classify_zero_pattern(rs)
    return out


# ------------------------------------------------------------- container


def test_root_set_counts_and_closure(dense_8):
    params, _, _, rs = dense_8
    assert rs.n_pairs == params.N + 1
    assert rs.all_roots.size == 2 * params.N + 2
    reflected = -rs.all_roots - params.eta
    assert matched_movement(rs.all_roots, reflected) < 1e-14


def test_lambda_polynomial_is_pinned(dense_8):
    _, _, _, rs = dense_8
    lam = rs.lambda_polynomial()
    assert lam.leading == 2.0
    assert lam.roots.size == rs.all_roots.size


# ----------------------------------------------------------- extraction


def test_roots_match_coefficient_fit(dense_8):
    params, _, ev, rs = dense_8
    ref, lead = coefficient_fit_roots(params, ev)
    assert abs(lead - 2.0) < 1e-10
    assert matched_movement(ref, rs.all_roots) < 1e-9


def test_roots_match_coefficient_fit_tilted(tilted_8):
    params, _, ev, rs = tilted_8
    ref, _ = coefficient_fit_roots(params, ev)
    assert matched_movement(ref, rs.all_roots) < 1e-9


def test_lambda_value_at_origin(dense_8):
    params, _, _, rs = dense_8
    lam = rs.lambda_polynomial()
    assert abs(lam(0.0) / scalar_a(0.0, params) - 1.0) < 5e-13


def test_rebuilt_lambda_has_crossing_symmetry(tilted_8):
    params, _, _, rs = tilted_8
    lam = rs.lambda_polynomial()
    for u in (0.3 + 0.2j, -1.1 + 0.7j, 2.0):
        assert abs(lam(-u - params.eta) / lam(u) - 1.0) < 1e-13


def test_solver_bookkeeping(dense_8):
    _, _, _, rs = dense_8
    assert rs.rounds == len(rs.info["trail"])
    assert rs.residual <= 1e-10
    assert np.all(np.isfinite(rs.info["root_residuals"]))
    assert np.max(rs.info["root_residuals"]) < 1e-12
    assert rs.info["trail"][-1]["movement"] == rs.residual


def test_node_hit_fallback_keeps_residuals_finite(tilted_8):
    # the real string roots land exactly on reseeded nodes now and then
    _, _, _, rs = tilted_8
    res = rs.info["root_residuals"]
    assert np.all(np.isfinite(res))
    assert np.max(res) < 1e-12


def test_routes_agree_at_the_same_parameters(dense_8):
    params, _, _, rs = dense_8
    tq = lambda_from_bethe(solve_log_bae(params))
    rs_tq = solve_zero_roots(None, params, lambda_eval=tq)
    assert matched_movement(rs.representatives, rs_tq.representatives) < 1e-12


def test_planted_roots_are_recovered():
    params = ModelParams(N=8, p=0.7, q=0.6)
    rng = np.random.default_rng(11)
    ims = 0.1 + 0.7 * np.arange(1, 7) / 6 + 0.03 * rng.standard_normal(6)
    reps = np.concatenate(
        [
            0.5
            + 0.004 * rng.standard_normal(6)
            + 1j * np.concatenate([ims[:3], -ims[3:]]),
            [-0.5 + 1.1j, 0.23 + 0j, 0.81 + 0j],
        ]
    )
    lam = ZeroRootSet(params=params, representatives=reps).lambda_polynomial()
    rs = solve_zero_roots(None, params, lambda_eval=lam)
    assert matched_movement(reps, rs.representatives) < 1e-12
    assert rs.rounds <= 3


def test_custom_nodes_reach_the_same_roots(dense_8):
    params, _, ev, rs = dense_8
    nodes = make_zero_nodes(params.N, params.eta, k=1.08)
    rs2 = solve_zero_roots(None, params, nodes=nodes, lambda_eval=ev)
    assert matched_movement(rs.representatives, rs2.representatives) < 1e-10


def test_round_cap_raises_with_trail(planted_poly):
    poly, _ = planted_poly
    params = ModelParams(N=2, p=0.7, q=0.6)
    lam = ZeroRootSet(
        params=params, representatives=np.array([0.5 + 0.2j, 0.5 - 0.6j, 0.3 + 0j])
    ).lambda_polynomial()
    with pytest.raises(NoConvergence) as exc:
        solve_zero_roots(None, params, lambda_eval=lam, max_rounds=1)
    assert len(exc.value.diagnostics["trail"]) == 1


def test_asymmetric_settle_raises(monkeypatch, dense_8):
    params, _, ev, _ = dense_8

    def refuse(roots, eta, tol=1e-6):
        raise UnpairableRoot("forced")

    monkeypatch.setattr("rootlab.zeroroots.symmetrize_roots", refuse)
    with pytest.raises(NoConvergence, match="reflection"):
        solve_zero_roots(None, params, lambda_eval=ev)


def test_dmrg_and_bethe_routes_agree_at_n16(gs16_xi0):
    params, res = gs16_xi0
    rs_state = solve_zero_roots(res.psi, params)
    tq = lambda_from_bethe(solve_log_bae(params))
    rs_tq = solve_zero_roots(None, params, lambda_eval=tq)
    assert matched_movement(rs_tq.representatives, rs_state.representatives) < 1e-6
    assert abs(energy_from_zero_roots(params, rs_state) - res.energy) < 1e-8


# ------------------------------------------------------------- probes


def test_valley_confirms_planted_root(planted_poly):
    poly, roots = planted_poly
    rep = verify_max_modulus(poly, roots[0], 1e-3)
    assert rep.passed
    assert rep.center_log_abs == -np.inf


def test_valley_rejects_far_point(planted_poly):
    poly, _ = planted_poly
    rep = verify_max_modulus(poly, 3.0 + 3.0j, 1e-3)
    assert not rep.passed


def test_valley_validates_radius(planted_poly):
    poly, roots = planted_poly
    with pytest.raises(ValueError):
        verify_max_modulus(poly, roots[0], 0.0)


def test_winding_counts(planted_poly):
    poly, roots = planted_poly
    assert verify_argument_principle(poly, roots[0], 1e-6) == 1
    assert verify_argument_principle(poly, roots[0] + 1e-5, 1e-6) == 0


def test_winding_on_plain_callable():
    f = lambda u: u * u - 1.0  # noqa: E731
    assert verify_argument_principle(f, 1.0, 0.1) == 1
    assert verify_argument_principle(f, 0.0, 0.1) == 0
    with pytest.raises(ValueError):
        verify_argument_principle(f, 1.0, -0.1)


def test_contour_through_root_is_detected(planted_poly):
    poly, roots = planted_poly
    with pytest.raises(ZeroOnContour):
        verify_argument_principle(poly, roots[0] + 1e-6, 1e-6)


def test_contour_probe_geometry():
    probe = ContourProbe(center=0.5 + 0.25j, delta=0.01)
    pts = probe.points
    assert pts.size == 5
    assert pts[0] == pts[-1]
    assert np.allclose(pts[:4] - probe.center, 0.01 * np.array([1j, -1, -1j, 1]))


def test_ladder_resolves_a_displaced_root(planted_poly):
    poly, roots = planted_poly
    got = accuracy_ladder(poly, roots[0] + 1e-9)
    assert 1e-9 <= got <= 1e-8


def test_ladder_bottoms_out_on_an_exact_root(planted_poly):
    poly, roots = planted_poly
    got = accuracy_ladder(poly, roots[0])
    assert 1e-18 <= got <= 1e-14


def test_ladder_raises_far_from_all_roots(planted_poly):
    poly, _ = planted_poly
    with pytest.raises(NeverDetected):
        accuracy_ladder(poly, 3.0 + 3.0j)


def test_every_representative_passes_both_probes(dense_8):
    # the valley and the winding count, at the ladder's own resolution
    _, _, _, rs = dense_8
    lam = rs.lambda_polynomial()
    for z in rs.representatives:
        assert verify_max_modulus(lam, z, 1e-6).passed
        delta = accuracy_ladder(lam, z)
        assert delta <= 1e-13
        assert verify_argument_principle(lam, z, delta) == 1


# ------------------------------------------------------------- energy


def test_energy_matches_diagonalization(dense_8):
    params, gs, _, rs = dense_8
    assert abs(energy_from_zero_roots(params, rs) - gs.energy) < 1e-12


def test_energy_matches_diagonalization_tilted(tilted_6):
    params, gs, _, rs = tilted_6
    assert abs(energy_from_zero_roots(params, rs) - gs.energy) < 1e-12


def test_energy_is_real_for_a_central_pair():
    params = ModelParams(N=2, p=0.7, q=0.6)
    rs = ZeroRootSet(
        params=params,
        representatives=np.array([-0.5 + 0.8j, 0.3 + 0j, 0.9 + 0j]),
    )
    e = energy_from_zero_roots(params, rs)
    assert isinstance(e, float)


@given(
    st.complex_numbers(
        min_magnitude=1e-3, max_magnitude=10.0, allow_nan=False, allow_infinity=False
    )
)
def test_energy_term_is_reflection_invariant(z):
    # z(z+eta) is unchanged under z -> -z-eta, so either pair member works
    eta = 1.0
    w = -z - eta
    a, b = z * (z + eta), w * (w + eta)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_energy_rejects_root_at_pole():
    params = ModelParams(N=2, p=0.7, q=0.6)
    for bad in (0.0, -1.0):
        rs = ZeroRootSet(
            params=params, representatives=np.array([bad, 0.3, 0.9], complex)
        )
        with pytest.raises(RootAtPole):
            energy_from_zero_roots(params, rs)


def test_energy_rejects_complex_total():
    params = ModelParams(N=2, p=0.7, q=0.6)
    rs = ZeroRootSet(
        params=params,
        representatives=np.array([0.3 + 0.2j, 0.9 + 0j, -0.5 + 0.8j]),
    )
    with pytest.raises(ValueError, match="imaginary"):
        energy_from_zero_roots(params, rs)


# --------------------------------------------------------- constraints


def test_constraints_hold_on_solved_roots(tilted_6):
    _, _, _, rs = tilted_6
    rep = check_constraints(rs)
    assert rep.product_residual < 1e-12
    assert list(rep.orders) == [0, 2, 4]
    assert rep.worst < 1e-12


def test_constraints_hold_tilted_n8(tilted_8):
    _, _, _, rs = tilted_8
    rep = check_constraints(rs)
    assert list(rep.orders) == [0, 2, 4, 6]
    assert rep.worst < 1e-12


def test_constraints_flag_perturbed_roots(tilted_6):
    _, _, _, rs = tilted_6
    bad = rs.representatives.copy()
    bad[2] += 1e-3
    rep = check_constraints(dataclasses.replace(rs, representatives=bad))
    assert rep.product_residual > 1e-4
    assert np.all(rep.derivative_residuals > 1e-4)


def test_constraints_blocked_by_root_at_origin():
    params = ModelParams(N=4, p=0.7, q=0.6)
    rs = ZeroRootSet(
        params=params,
        representatives=np.array([0.0, 0.5 + 0.3j, 0.5 - 0.3j, 0.2, 0.9], complex),
    )
    rep = check_constraints(rs)
    assert np.all(np.isinf(rep.derivative_residuals))
    assert rep.worst == np.inf


def test_constraints_require_zero_inhomogeneities():
    params = ModelParams(N=4, p=0.7, q=0.6, thetas=(0.1, 0.0, 0.0, 0.0))
    rs = ZeroRootSet(params=params, representatives=np.zeros(5, complex))
    with pytest.raises(ValueError, match="inhomogeneities"):
        check_constraints(rs)


# ------------------------------------------------------ classification


def _bulk(n, start=0.08):
    im = start + 0.8 * np.arange(1, n + 1) / n
    return [0.5 + 1j * t for t in im]


def _mk(reps, p=0.3, q=0.4):
    params = ModelParams(N=8, p=p, q=q, xi=XI3)
    return ZeroRootSet(params=params, representatives=np.asarray(reps, complex))


SYNTHETIC = {
    "A": _bulk(6) + [-0.5 + 1.2j, 0.3 + 0j, 0.2 + 0j],
    "B": _bulk(6) + [-0.5 + 1.2j, 0.2 + 0j, 0.9 + 0j],
    "C": _bulk(8) + [-0.5 + 1.2j],
    "D": _bulk(6) + [0.3 + 0j, 0.2 + 0j, 0.9 + 0j],
    "E": _bulk(8) + [0.2 + 0j],
    "F": _bulk(8) + [0.9 + 0j],
}


@pytest.mark.parametrize("region", sorted(SYNTHETIC))
def test_synthetic_census(region):
    out = classify_zero_pattern(_mk(SYNTHETIC[region]))
    assert out.region == region
    assert len(out.tags) == 9


def test_all_bulk_census_is_ambiguous():
    with pytest.raises(AmbiguousPattern) as exc:
        classify_zero_pattern(_mk(_bulk(9)))
    assert exc.value.candidates == ("C", "F")


def test_string_with_central_pair_only_is_ambiguous():
    with pytest.raises(AmbiguousPattern) as exc:
        classify_zero_pattern(_mk(_bulk(7) + [-0.5 + 1.2j, 0.2 + 0j]))
    assert exc.value.candidates == ("B", "E")


def test_tags_are_stable_under_tiny_perturbations():
    base = _mk(SYNTHETIC["B"])
    out1 = classify_zero_pattern(base)
    rng = np.random.default_rng(3)
    nudged = base.representatives + 1e-8 * (
        rng.standard_normal(9) + 1j * rng.standard_normal(9)
    )
    out2 = classify_zero_pattern(_mk(nudged))
    assert out1.tags == out2.tags
    assert out1.region == out2.region


def test_coincident_anchors_prefer_the_left_boundary():
    out = classify_zero_pattern(_mk(_bulk(8) + [0.2 + 0j], p=0.2))
    assert out.tags.count("p_boundary_string") == 1
    assert "q_boundary_string" not in out.tags


def test_stray_complex_root_does_not_block_the_region():
    out = classify_zero_pattern(_mk(_bulk(7) + [-0.5 + 1.2j, 0.1 + 0.6j]))
    assert out.region == "C"
    assert "unclassified" in out.tags


def test_classification_does_not_mutate_its_input():
    base = _mk(SYNTHETIC["E"])
    out = classify_zero_pattern(base)
    assert base.tags is None and base.region is None
    assert out is not base
    assert out.region == "E"


def test_untilted_fixture_classifies_as_central_pair_region(dense_8):
    # p and q_bar both beyond eta/2: no boundary strings survive
    _, _, _, rs = dense_8
    out = classify_zero_pattern(rs, tol=0.05)
    assert out.region == "C"


def test_tilted_fixture_classifies_with_one_string(tilted_8):
    params, _, _, rs = tilted_8
    out = classify_zero_pattern(rs, tol=0.05)
    assert out.region == "B"
    k = out.tags.index("q_boundary_string")
    assert abs(rs.representatives[k].real - params.q_bar) < 1e-4


@pytest.mark.parametrize("region", sorted(SYNTHETIC))
def test_ground_state_census_covers_all_regions(census_10, region):
    out = census_10[region]
    assert out.region == region


def test_ground_state_census_string_counts(census_10):
    counts = {
        r: (
            out.tags.count("p_boundary_string"),
            out.tags.count("q_boundary_string"),
            out.tags.count("additional_z0"),
            out.tags.count("additional_zx"),
        )
        for r, out in census_10.items()
    }
    assert counts["A"] == (1, 1, 1, 0)
    assert counts["B"] == (0, 1, 1, 1)
    assert counts["C"] == (0, 0, 1, 0)
    assert counts["D"] == (1, 1, 0, 1)
    assert counts["E"] == (0, 1, 0, 0)
    assert counts["F"] == (0, 0, 0, 1)
