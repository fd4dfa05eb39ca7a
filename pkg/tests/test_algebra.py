import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rootlab.algebra import (
    NodalPolynomial,
    ProductPolynomial,
    clog,
    find_roots,
    from_clog,
    pair_roots,
    scaled_sum,
    symmetrize_roots,
    unwrap_phases,
)
from rootlab.errors import DegenerateGuesses, DuplicateNodes, Overflow, UnpairableRoot

# ---------------------------------------------------------------------------
# log-form scalars


def test_clog_roundtrip():
    z = np.array([1.5 - 2.0j, -3.0, 0.25j, 1e-8 + 1e-8j])
    lm, ph = clog(z)
    assert np.allclose(from_clog(lm, ph), z, rtol=1e-14)


def test_clog_of_zero_is_minus_inf():
    lm, ph = clog(0.0)
    assert lm == -np.inf


def test_from_clog_overflow():
    with pytest.raises(Overflow):
        from_clog(1000.0, 0.0)


def test_scaled_sum_matches_direct():
    z = np.array([2.0 + 1.0j, -0.5 + 0.25j, 3.0 - 4.0j])
    lm, ph = clog(z)
    slm, sph = scaled_sum(lm, ph, axis=0)
    assert np.allclose(from_clog(slm, sph), z.sum(), rtol=1e-14)


def test_scaled_sum_large_magnitudes():
    # e^800 - 2 e^800 = -e^800: unrepresentable directly, fine in log form
    lm = np.array([800.0, 800.0 + np.log(2.0)])
    ph = np.array([0.0, np.pi])
    slm, sph = scaled_sum(lm, ph, axis=0)
    assert slm == pytest.approx(800.0, abs=1e-12)
    assert np.cos(sph) == pytest.approx(-1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# product-form polynomials, oracle: numpy coefficient arithmetic


PROD_ROOTS = np.array([1.0 + 1.0j, -2.0, 0.5 - 0.3j, 3.0 + 0.2j])
PROD_LEADING = 2.0 - 0.5j


def _prod_coeffs():
    return PROD_LEADING * np.poly(PROD_ROOTS)


def test_product_polynomial_matches_polyval():
    p = ProductPolynomial(PROD_ROOTS, leading=PROD_LEADING)
    c = _prod_coeffs()
    pts = np.array([0.3 - 0.7j, 2.0, -1.0 + 2.0j, 10.0j])
    assert np.allclose(p(pts), np.polyval(c, pts), rtol=1e-12)


def test_product_polynomial_logderiv():
    p = ProductPolynomial(PROD_ROOTS, leading=PROD_LEADING)
    c = _prod_coeffs()
    dc = np.polyder(c)
    pts = np.array([0.4 + 0.1j, -3.0 - 1.0j])
    want = np.polyval(dc, pts) / np.polyval(c, pts)
    assert np.allclose(p.logderiv(pts), want, rtol=1e-12)


@pytest.mark.parametrize("order", [0, 1, 2, 3, 4])
def test_product_polynomial_derivative_at(order):
    p = ProductPolynomial(PROD_ROOTS, leading=PROD_LEADING)
    c = _prod_coeffs()
    for _ in range(order):
        c = np.polyder(c)
    u0 = 0.37 - 0.82j
    got = from_clog(*p.derivative_at(u0, order))
    assert got == pytest.approx(np.polyval(c, u0), rel=1e-10)


# ---------------------------------------------------------------------------
# nodal polynomials


def test_nodal_interpolates_coefficient_polynomial():
    c = np.array([2.0, -1.5, 0.25j, 3.0, -1.0])  # degree 4, leading 2
    nodes = np.array([0.0, 1.0, -1.0, 2.0j])  # 4 nodes + pinned leading
    p = NodalPolynomial(nodes, values=np.polyval(c, nodes), leading=2.0)
    assert p.degree == 4
    pts = np.array([0.5, -2.0 + 1.0j, 3.3, 0.1 - 0.1j])
    assert np.allclose(p(pts), np.polyval(c, pts), rtol=1e-12)


def test_nodal_plain_interpolant():
    c = np.array([2.0, -1.5, 0.25j, 3.0, -1.0])
    nodes = np.array([0.0, 1.0, -1.0, 2.0j, -0.5 - 0.5j])  # 5 nodes, degree 4
    p = NodalPolynomial(nodes, values=np.polyval(c, nodes))
    assert p.degree == 4
    pts = np.array([0.5, -2.0 + 1.0j, 3.3])
    assert np.allclose(p(pts), np.polyval(c, pts), rtol=1e-12)


def test_nodal_exact_node_hit_returns_stored_value():
    nodes = np.array([0.0, 1.0, 2.0])
    vals = np.array([5.0, -1.0j, 2.0 + 2.0j])
    p = NodalPolynomial(nodes, values=vals)
    # stored in log form, so the hit is exact there and roundoff-exact here
    lm, ph = p.eval_log(1.0)
    assert (lm, ph) == tuple(np.array(clog(vals[1])).ravel())
    assert p(1.0) == pytest.approx(vals[1], abs=1e-15)
    out = p(np.array([2.0, 0.5]))
    assert out[0] == pytest.approx(vals[2], abs=1e-14)


def test_nodal_log_values_path():
    c = np.array([1.0, 0.0, -2.0, 1.0])
    nodes = np.array([0.3, 1.1, -0.7])
    vals = np.polyval(c, nodes)
    p1 = NodalPolynomial(nodes, values=vals, leading=1.0)
    p2 = NodalPolynomial(nodes, log_values=clog(vals), leading=1.0)
    pts = np.array([0.9 + 0.4j, -2.0])
    assert np.allclose(p1(pts), p2(pts), rtol=1e-14)


def test_nodal_logderiv():
    c = np.array([2.0, -1.5, 0.25j, 3.0, -1.0])
    dc = np.polyder(c)
    nodes = np.array([0.0, 1.0, -1.0, 2.0j])
    p = NodalPolynomial(nodes, values=np.polyval(c, nodes), leading=2.0)
    pts = np.array([0.5 - 0.2j, -1.7])
    want = np.polyval(dc, pts) / np.polyval(c, pts)
    assert np.allclose(p.logderiv(pts), want, rtol=1e-11)


def test_nodal_logderiv_plain():
    c = np.array([1.0, 2.0, -1.0])
    dc = np.polyder(c)
    nodes = np.array([0.0, 1.0, -1.0])
    p = NodalPolynomial(nodes, values=np.polyval(c, nodes))
    pts = np.array([0.4 + 0.3j])
    want = np.polyval(dc, pts) / np.polyval(c, pts)
    assert np.allclose(p.logderiv(pts), want, rtol=1e-11)


def test_nodal_duplicate_nodes_rejected():
    with pytest.raises(DuplicateNodes):
        NodalPolynomial([1.0, 1.0 + 1e-15], values=[0.0, 0.0])


def test_nodal_high_degree_reflection_symmetric():
    # degree 32 with roots on the two vertical lines Re = 1/2 and Re = -3/2,
    # the geometry the zero-root pipeline produces at eta = 1
    ys = 0.35 + 0.55 * np.arange(8)
    roots = np.concatenate(
        [0.5 + 1j * ys, 0.5 - 1j * ys, -1.5 + 1j * ys, -1.5 - 1j * ys]
    )
    target = ProductPolynomial(roots, leading=2.0)
    nodes = roots + (0.11 + 0.07j)
    vals_log = target.eval_log(nodes)
    p = NodalPolynomial(nodes, log_values=vals_log, leading=2.0)
    pts = np.array([0.5 + 0.1j, -0.5 + 2.0j, 1.0, -1.4 - 0.8j, 4.0 + 4.0j])
    lm_got, ph_got = p.eval_log(pts)
    lm_want, ph_want = target.eval_log(pts)
    assert np.allclose(lm_got, lm_want, atol=1e-9)
    phase_diff = np.angle(np.exp(1j * (ph_got - ph_want)))
    assert np.max(np.abs(phase_diff)) < 1e-9


# ---------------------------------------------------------------------------
# root finding


def _match_root_sets(got, want, tol):
    """Greedy nearest matching; robust when sort order is noise-sensitive."""
    got = list(np.asarray(got, dtype=complex))
    worst = 0.0
    for w in want:
        dists = [abs(g - w) for g in got]
        i = int(np.argmin(dists))
        worst = max(worst, dists[i])
        got.pop(i)
    assert worst < tol, "worst root mismatch %.3e" % worst


def test_find_roots_constructed_fixture():
    roots = np.array([1.0 + 1.0j, -2.0, 0.5 - 0.3j, -1.0 - 1.0j, 3.0 + 0.2j])
    p = ProductPolynomial(roots, leading=2.0)
    guesses = roots + 0.1 * np.exp(2j * np.pi * np.arange(5) / 5.0)
    res = find_roots(p, 5, guesses)
    assert res.converged
    got = np.sort_complex(res.roots)
    assert np.allclose(got, np.sort_complex(roots), atol=1e-12)


def test_find_roots_through_nodal_reconstruction():
    ys = 0.35 + 0.55 * np.arange(8)
    roots = np.concatenate(
        [0.5 + 1j * ys, 0.5 - 1j * ys, -1.5 + 1j * ys, -1.5 - 1j * ys]
    )
    target = ProductPolynomial(roots, leading=2.0)
    nodes = roots + (0.11 + 0.07j)
    p = NodalPolynomial(nodes, log_values=target.eval_log(nodes), leading=2.0)
    guesses = roots + 0.05 * np.exp(2j * np.pi * np.arange(32) / 7.0)
    res = find_roots(p, 32, guesses)
    assert res.converged
    _match_root_sets(res.roots, roots, 1e-10)


def test_find_roots_callable_fallback():
    c = np.array([1.0, -1.0, -2.0])  # roots 2, -1
    res = find_roots(lambda u: np.polyval(c, u), 2, np.array([1.5 + 0.3j, -0.7 - 0.2j]))
    assert res.converged
    got = np.sort_complex(res.roots)
    assert np.allclose(got, [-1.0, 2.0], atol=1e-7)


def test_find_roots_degenerate_guesses():
    p = ProductPolynomial([1.0, -1.0])
    with pytest.raises(DegenerateGuesses):
        find_roots(p, 2, [0.5, 0.5])


def test_find_roots_reports_nonconvergence():
    p = ProductPolynomial(PROD_ROOTS, leading=1.0)
    res = find_roots(p, 4, PROD_ROOTS + 2.0, max_sweeps=1)
    assert not res.converged


# ---------------------------------------------------------------------------
# phase unwrapping


def test_unwrap_crossing_branch_cut():
    raw = np.array([1.557, -3.142, -1.557, 0.0, 1.557])
    want = np.array([1.557, 3.142, 4.726, 6.283, 7.84])
    got = unwrap_phases(raw).unwrapped
    assert np.allclose(got, want, atol=2e-3)


def test_unwrap_no_crossing_is_identity():
    raw = np.array([0.634, 0.0, -0.634, 0.0, 0.634])
    got = unwrap_phases(raw).unwrapped
    assert np.allclose(got, raw, atol=1e-12)


@given(
    st.lists(
        st.floats(min_value=-np.pi, max_value=np.pi, allow_nan=False),
        min_size=1,
        max_size=30,
    )
)
def test_unwrap_properties(raw):
    raw = np.asarray(raw)
    out = unwrap_phases(raw).unwrapped
    assert out[0] == raw[0]
    # each output differs from its raw value by a whole number of turns
    turns = (out - raw) / (2.0 * np.pi)
    assert np.allclose(turns, np.round(turns), atol=1e-9)
    if out.size > 1:
        d = np.diff(out)
        assert np.all(d <= np.pi + 1e-12)
        assert np.all(d > -np.pi - 1e-12)


# ---------------------------------------------------------------------------
# reflection pairing


def _reflection_set(eta):
    reps = np.array([0.5 + 2.1j, 0.5 + 0.9j, -eta / 2 + 3.3j, 1.7 + 0.0j])
    return reps, np.concatenate([reps, -reps - eta])


def test_pair_roots_recovers_pairs():
    eta = 1.0
    reps, full = _reflection_set(eta)
    rng = np.random.default_rng(7)
    noisy = rng.permutation(full) + 1e-9 * np.exp(2j * np.pi * rng.random(full.size))
    pairs = pair_roots(noisy, eta, tol=1e-6)
    assert len(pairs) == reps.size
    got_reps = np.sort_complex(np.array([p[0] for p in pairs]))
    assert np.allclose(got_reps, np.sort_complex(reps), atol=5e-9)
    for rep, other in pairs:
        assert abs((-rep - eta) - other) < 5e-9
        assert rep.real >= other.real - 1e-6
        if abs(rep.real - other.real) <= 1e-6:
            assert rep.imag >= other.imag


def test_pair_roots_order_invariant():
    eta = 1.0
    _, full = _reflection_set(eta)
    base = pair_roots(full, eta)
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        again = pair_roots(rng.permutation(full), eta)
        assert np.allclose(np.array(base), np.array(again))


def test_pair_roots_unpairable():
    eta = 1.0
    _, full = _reflection_set(eta)
    full[0] += 1e-3
    with pytest.raises(UnpairableRoot):
        pair_roots(full, eta, tol=1e-6)


def test_pair_roots_self_pair_at_fixed_point():
    pairs = pair_roots(np.array([-0.5 + 0.0j]), 1.0)
    assert pairs == [(-0.5 + 0.0j, -0.5 + 0.0j)]


def test_symmetrize_roots_projects_exactly():
    eta = 1.0
    reps, full = _reflection_set(eta)
    rng = np.random.default_rng(11)
    noisy = full + 1e-8 * (rng.random(full.size) + 1j * rng.random(full.size))
    got_reps, got_full = symmetrize_roots(noisy, eta, tol=1e-5)
    assert got_full.size == full.size
    for v in got_reps:
        assert (-v - eta) in got_full or abs(v - (-eta / 2)) < 1e-12
    assert np.allclose(np.sort_complex(got_reps), np.sort_complex(reps), atol=1e-7)


def test_symmetrize_self_paired_counts_once():
    reps, full = symmetrize_roots(np.array([-0.5 + 0.0j, 1.0 + 1.0j, -2.0 - 1.0j]), 1.0)
    assert full.size == 3
    assert reps.size == 2
