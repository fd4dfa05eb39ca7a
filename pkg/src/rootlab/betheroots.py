"""Bethe roots of the transfer eigenvalue, by two complementary routes.

For parallel boundary fields (xi = 0) the chain keeps its U(1) symmetry
and the ground-state roots solve a real logarithmic system that Newton
iteration cracks at any size; `solve_log_bae` is that route and doubles
as the precision reference.  For tilted fields the eigenvalue obeys an
inhomogeneous T-Q relation whose Q polynomial has degree 2N, and the
roots are recovered from sampled eigenvalue data by solving a linear
system for nodal values of Q (`solve_inhomogeneous_bethe`).

Everything downstream of the solvers is verification: T-Q residuals at
the roots, the Bethe-equation ratio test, the energy functional, and a
geometric classification of the root pattern.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .algebra import (
    NodalPolynomial,
    ProductPolynomial,
    clog,
    eval_log_any,
    find_roots,
    from_clog,
    log_ratio_error,
    matched_movement,
    scaled_sum,
    symmetrize_roots,
)
from .errors import (
    MultipleRoot,
    NoConvergence,
    NonMonotoneQuantumNumbers,
    PoleAt,
    PoleInRatio,
    RootAtPole,
    SingularSystem,
    UnpairableRoot,
)
from .model import ModelParams, scalar_a_log
from .spectral import SpectralSamples, make_bethe_nodes, sample_lambda

__all__ = [
    "BetheRootSet",
    "solve_log_bae",
    "lambda_from_bethe",
    "solve_inhomogeneous_bethe",
    "verify_tq_at_roots",
    "verify_bae_ratio",
    "energy_from_bethe",
    "classify_bethe_roots",
    "u1_restoration_check",
]


# ------------------------------------------------------------ containers


@dataclass
class BetheRootSet:
    """One root per reflection pair; the mirror partners are implied.

    `mu` is populated by the logarithmic solver only (roots there are
    -eta/2 + i*eta*mu with mu real).  `info` carries solver diagnostics
    such as the node trail of the linear-system iteration.
    """

    params: ModelParams
    representatives: np.ndarray
    method: str
    mu: np.ndarray = None
    residual: float = np.nan
    rounds: int = 0
    info: dict = field(default_factory=dict, repr=False)

    @property
    def n_pairs(self):
        return self.representatives.size

    @property
    def all_roots(self):
        reps = self.representatives
        full = [reps, -reps - self.params.eta]
        return np.concatenate(full)

    def q_polynomial(self):
        """Monic Q(u) = prod over pairs (u - l)(u + l + eta)."""
        return ProductPolynomial(self.all_roots, leading=1.0)


def _require_homogeneous(params, what):
    if any(t != 0 for t in params.thetas):
        raise ValueError("%s assumes all inhomogeneities are zero" % what)


# ------------------------------------------------- logarithmic solver


def _theta(n, x):
    # 2*arctan(2x/n), extended by its n -> 0+ limit pi*sign(x)
    if n == 0:
        return np.pi * np.sign(x)
    return 2.0 * np.arctan(2.0 * x / n)


def _theta_prime(n, x):
    return 4.0 * n / (n * n + 4.0 * x * x)


def _log_bae_residual(mu, n_sites, ph, qh, numbers):
    f = (
        _theta(2 * ph, mu)
        + _theta(2 * qh, mu)
        + 2 * n_sites * _theta(1.0, mu)
        - 2.0 * np.pi * numbers
    )
    diff = mu[:, None] - mu[None, :]
    summ = mu[:, None] + mu[None, :]
    t = _theta(2.0, diff) + _theta(2.0, summ)
    f -= t.sum(axis=1) - np.diagonal(t)  # scattering sum over l != j
    return f


def _log_bae_jacobian(mu, n_sites, ph, qh):
    diff = mu[:, None] - mu[None, :]
    summ = mu[:, None] + mu[None, :]
    td = _theta_prime(2.0, diff)
    ts = _theta_prime(2.0, summ)
    off = td - ts
    diag = (
        _theta_prime(2 * ph, mu)
        + _theta_prime(2 * qh, mu)
        + 2 * n_sites * _theta_prime(1.0, mu)
    )
    diag -= td.sum(axis=1) - np.diagonal(td)
    diag -= ts.sum(axis=1) - np.diagonal(ts)
    diag -= 2.0 * _theta_prime(2.0, 2.0 * mu)
    jac = -off
    np.fill_diagonal(jac, diag)
    return jac


def solve_log_bae(params, quantum_numbers=None, tol=1e-13, max_iter=200):
    """Ground-state Bethe roots of the parallel-field chain.

    Solves the real logarithmic system for mu_j (roots are
    -eta/2 + i*eta*mu_j) with a damped Newton iteration and an analytic
    Jacobian.  The default quantum numbers are I_j = j for j = 1..N/2,
    which reproduces exact-diagonalization ground energies; pass your
    own strictly increasing sequence for other states.

    Valid while every ground-state root stays on the central line.  For
    a boundary parameter inside (0, eta/2) the true ground state
    acquires a boundary-string pair with no real mu image; the
    iteration then either sends a root to infinity (NoConvergence) or,
    worse, converges to the lowest fully-central state, which is not
    the ground state.  Cross-check the energy when in doubt.
    """
    _require_homogeneous(params, "the logarithmic Bethe system")
    if params.xi != 0:
        raise ValueError("the logarithmic form requires parallel fields (xi = 0)")
    if params.N % 2:
        raise ValueError("ground-state root counting assumes even N")
    m = params.N // 2
    if quantum_numbers is None:
        numbers = np.arange(1, m + 1, dtype=np.float64)
    else:
        numbers = np.asarray(quantum_numbers, dtype=np.float64)
        if numbers.size != m:
            raise ValueError("need N/2 quantum numbers")
        if np.any(np.diff(numbers) <= 0):
            raise NonMonotoneQuantumNumbers(
                "quantum numbers must increase strictly"
            )
    eta = params.eta
    ph = params.p / eta - 0.5
    qh = params.q / eta - 0.5

    mu = np.tan(np.pi * numbers / (2 * params.N + 1))
    fval = _log_bae_residual(mu, params.N, ph, qh, numbers)
    best = np.max(np.abs(fval))
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if best <= tol:
            break
        jac = _log_bae_jacobian(mu, params.N, ph, qh)
        try:
            step = np.linalg.solve(jac, fval)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(
                "singular Jacobian in the logarithmic Bethe system",
                diagnostics={"mu": mu, "residual": best},
            ) from exc
        damp = 1.0
        for _ in range(30):
            trial = mu - damp * step
            ftrial = _log_bae_residual(trial, params.N, ph, qh, numbers)
            if np.max(np.abs(ftrial)) < best:
                break
            damp *= 0.5
        else:
            raise NoConvergence(
                "damped Newton stalled at residual %.3e" % best,
                diagnostics={"mu": mu, "residual": best},
            )
        mu, fval = trial, ftrial
        best = np.max(np.abs(fval))
        if np.max(np.abs(mu)) > 1e10:
            raise NoConvergence(
                "a root is escaping to infinity; the state has left the "
                "real-mu regime",
                diagnostics={"mu": mu, "residual": best},
            )
    if best > tol:
        raise NoConvergence(
            "residual %.3e above tol %.3e after %d iterations"
            % (best, tol, max_iter),
            diagnostics={"mu": mu, "residual": best},
        )
    roots = 1j * eta * mu - eta / 2.0
    return BetheRootSet(
        params=params,
        representatives=roots,
        method="log-bae",
        mu=mu,
        residual=float(best),
        rounds=iteration,
        info={"quantum_numbers": numbers},
    )


# --------------------------------------------------- T-Q closed forms


def _log_coef_a(u, params):
    return scalar_a_log(u, params)


def _log_coef_d(u, params):
    return scalar_a_log(-complex(u) - params.eta, params)


def _log_coef_c(u, params):
    """2(1-s)[u(u+eta)]^(2N+1) as (logmag, phase); None when s = 1."""
    s = params.xi_factor
    if s == 1.0:
        return None
    u = complex(u)
    lead_lg, lead_ph = clog(np.array([2.0 * (1.0 - s)]))
    lg, ph = clog(np.array([u, u + params.eta]))
    k = 2 * params.N + 1
    return float(lead_lg[0] + k * lg.sum()), float(lead_ph[0] + k * ph.sum())


def _poly_prime_log(roots, v):
    """(logmag, phase) of d/du prod(u - roots) at u = v.

    Sum of leave-one-out products; exact root hits reduce the sum to the
    single surviving term, so strings with eta-spaced members stay
    finite.
    """
    d = complex(v) - roots
    zero = d == 0
    nz = int(zero.sum())
    if nz >= 2:
        return -np.inf, 0.0
    if nz == 1:
        lg, ph = clog(d[~zero])
        return float(lg.sum()), float(ph.sum())
    lg, ph = clog(d)
    terms_lg = lg.sum() - lg
    terms_ph = ph.sum() - ph
    m, t = scaled_sum(terms_lg, terms_ph)
    return float(m), float(t)


class TQEigenvalue:
    """Transfer eigenvalue assembled from Bethe roots via T-Q.

    Evaluation runs entirely in (logmag, phase) pairs; `__call__` is a
    convenience that exponentiates and can overflow for large N.  Points
    within `pole_tol` (relative) of a Q root or of -eta/2 are rejected:
    the limit exists there but the quotient form loses all digits.
    """

    def __init__(self, root_set, pole_tol=1e-10):
        _require_homogeneous(root_set.params, "the T-Q eigenvalue")
        self.params = root_set.params
        self.roots = root_set.all_roots
        self.q_poly = ProductPolynomial(self.roots, leading=1.0)
        self.pole_tol = pole_tol

    def _check_poles(self, u):
        p = self.params
        gap = np.min(np.abs(u[:, None] - self.roots[None, :]), axis=1)
        if np.any(gap <= self.pole_tol * (1.0 + np.abs(u))):
            raise PoleAt("evaluation point too close to a Q root")
        if np.any(np.abs(2 * u + p.eta) <= self.pole_tol * abs(p.eta)):
            raise PoleAt("evaluation point too close to u = -eta/2")

    def eval_log(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=np.complex128))
        self._check_poles(u)
        p = self.params
        out_m = np.empty(u.shape)
        out_t = np.empty(u.shape)
        for i, v in enumerate(u):
            qm = self.q_poly.eval_log(np.array([v - p.eta, v, v + p.eta]))
            terms = []
            am, at = _log_coef_a(v, p)
            terms.append((am + qm[0][0] - qm[0][1], at + qm[1][0] - qm[1][1]))
            dm, dt = _log_coef_d(v, p)
            terms.append((dm + qm[0][2] - qm[0][1], dt + qm[1][2] - qm[1][1]))
            c = _log_coef_c(v, p)
            if c is not None:
                terms.append((c[0] - qm[0][1], c[1] - qm[1][1]))
            m, t = scaled_sum(
                np.array([x[0] for x in terms]), np.array([x[1] for x in terms])
            )
            out_m[i], out_t[i] = m, t
        return out_m, out_t

    def __call__(self, u):
        scalar = np.isscalar(u) or np.ndim(u) == 0
        m, t = self.eval_log(u)
        val = from_clog(m, t)
        return complex(val[0]) if scalar else val


def lambda_from_bethe(root_set, pole_tol=1e-10):
    """Closed-form Lambda(u) built from a Bethe root set."""
    return TQEigenvalue(root_set, pole_tol=pole_tol)


# -------------------------------------------- inhomogeneous T-Q solver


def _barycentric_log_weights(nodes):
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    lg, ph = clog(diff)
    return -lg.sum(axis=1), -ph.sum(axis=1)


def _cardinal_log_row(v, nodes, logw, node_tol=1e-12):
    """log form of all cardinal functions l_k(v), plus exact-hit index.

    When v coincides with a node (the eta-shift collisions the real-axis
    node family creates on purpose), l_k(v) = delta_km exactly and the
    barycentric form is skipped.
    """
    d = v - nodes
    hits = np.abs(d) <= node_tol * (1.0 + np.abs(nodes))
    if hits.any():
        return None, int(np.argmax(hits))
    lg, ph = clog(d)
    om_m, om_t = lg.sum(), ph.sum()
    return (om_m + logw[0] - lg, om_t + logw[1] - ph), -1


def _omega_log(v, nodes):
    lg, ph = clog(v - nodes)
    return lg.sum(), ph.sum()


def _assemble_tq_system(samples, eta):
    """Row/column-equilibrated linear system for the nodal Q values.

    Returns (matrix, rhs, col_log_scale): the unknown vector y relates
    to Q(u_k) through log Q(u_k) = log y_k + col_log_scale_k.
    """
    params = samples.params
    nodes = samples.nodes
    n = nodes.size
    logw = _barycentric_log_weights(nodes)
    ln_m = np.full((n, n), -np.inf)
    ln_t = np.zeros((n, n))
    b_m = np.full(n, -np.inf)
    b_t = np.zeros(n)
    for j, u in enumerate(nodes):
        a_lg, a_ph = _log_coef_a(u, params)
        d_lg, d_ph = _log_coef_d(u, params)
        row_terms = [[] for _ in range(n)]
        rhs_terms = []
        row_terms[j].append((samples.log_magnitudes[j], samples.phases[j]))
        for coef, shift in ((( a_lg, a_ph), -eta), ((d_lg, d_ph), +eta)):
            v = u + shift
            card, hit = _cardinal_log_row(v, nodes, logw)
            if hit >= 0:
                row_terms[hit].append((coef[0], coef[1] + np.pi))
            else:
                for k in range(n):
                    row_terms[k].append(
                        (coef[0] + card[0][k], coef[1] + card[1][k] + np.pi)
                    )
                om = _omega_log(v, nodes)
                rhs_terms.append((coef[0] + om[0], coef[1] + om[1]))
        c = _log_coef_c(u, params)
        if c is not None:
            rhs_terms.append(c)
        for k in range(n):
            if not row_terms[k]:
                continue  # stays an exact zero: both shifts hit nodes
            mm = np.array([x[0] for x in row_terms[k]])
            tt = np.array([x[1] for x in row_terms[k]])
            ln_m[j, k], ln_t[j, k] = scaled_sum(mm, tt)
        if rhs_terms:
            mm = np.array([x[0] for x in rhs_terms])
            tt = np.array([x[1] for x in rhs_terms])
            b_m[j], b_t[j] = scaled_sum(mm, tt)
    # two-sided equilibration, all in log space
    row = np.maximum(ln_m.max(axis=1), b_m)
    ln_m -= row[:, None]
    b_m -= row
    col = ln_m.max(axis=0)
    ln_m -= col[None, :]
    mat = from_clog(ln_m, ln_t)
    rhs = from_clog(b_m, b_t)
    return mat, rhs, -col


def solve_inhomogeneous_bethe(
    psi,
    params,
    nodes=None,
    max_rounds=20,
    movement_tol=1e-10,
    cond_cap=1e14,
    node_offset=1e-3,
    root_tol=1e-6,
    lambda_eval=None,
):
    """Bethe roots from sampled eigenvalues via the nodal T-Q system.

    Each round samples Lambda at the current nodes, solves the T-Q
    relation as a linear system for the nodal values of the monic Q
    polynomial, and extracts its roots; the roots seed the next round's
    nodes.  Converged when the (symmetrized) root set moves less than
    `movement_tol` between rounds.

    For tilted fields Q has degree 2N and the default node layout puts
    half the nodes on the central line and half on the positive real
    axis in unit steps; if the linear system for that layout is
    numerically singular, the vertical fallback family is tried before
    giving up.  With parallel fields (xi = 0) the inhomogeneous term is
    absent and the degree-2N system is exactly rank-deficient, because
    the degree-N polynomial of the symmetric sector already closes the
    relation; the solver then pins the monic degree-N form on the
    N-node central family instead, so every returned root is finite.

    `lambda_eval` substitutes a precomputed eigenvalue evaluator (any
    eval_log object or plain callable) for state sampling; `psi` is
    ignored then and may be None.
    """
    _require_homogeneous(params, "the nodal T-Q system")
    eta = params.eta
    n = params.N
    if params.xi == 0.0:
        if nodes is None:
            nodes = make_bethe_nodes(n, eta, variant="homogeneous")
        return _solve_inhomogeneous_at(
            psi, params, nodes, n, "homogeneous-tq",
            max_rounds, movement_tol, cond_cap, node_offset, root_tol,
            lambda_eval,
        )
    if nodes is None:
        try:
            return _solve_inhomogeneous_at(
                psi, params, make_bethe_nodes(n, eta, variant="inhomogeneous"),
                2 * n, "inhomogeneous-tq",
                max_rounds, movement_tol, cond_cap, node_offset, root_tol,
                lambda_eval,
            )
        except SingularSystem:
            nodes = make_bethe_nodes(n, eta, variant="inhomogeneous-vertical")
    return _solve_inhomogeneous_at(
        psi, params, nodes, 2 * n, "inhomogeneous-tq",
        max_rounds, movement_tol, cond_cap, node_offset, root_tol,
        lambda_eval,
    )


def _solve_inhomogeneous_at(
    psi, params, nodes, degree, method,
    max_rounds, movement_tol, cond_cap, node_offset, root_tol,
    lambda_eval=None,
):
    eta = params.eta
    guesses = nodes + node_offset * (1.0 + np.abs(nodes)) * (0.6 + 0.8j)
    prev_full = None
    trail = []
    for round_no in range(1, max_rounds + 1):
        for attempt in (0, 1):
            try:
                if lambda_eval is None:
                    samples = sample_lambda(psi, params, nodes)
                else:
                    lg, ph = eval_log_any(lambda_eval, nodes)
                    samples = SpectralSamples(params, nodes, lg, ph)
                break
            except PoleAt:
                # synthetic evaluators can have poles at the very roots
                # the nodes are converging to; step off and resample
                if attempt:
                    raise
                nodes = nodes + 1e-6 * (1.0 + np.abs(nodes)) * 1j
        mat, rhs, col_log = _assemble_tq_system(samples, eta)
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > cond_cap:
            raise SingularSystem(
                "equilibrated T-Q system has condition %.3e" % cond,
                condition=float(cond),
            )
        lu, piv = sla.lu_factor(mat)
        y = sla.lu_solve((lu, piv), rhs)
        y += sla.lu_solve((lu, piv), rhs - mat @ y)  # one refinement pass
        y_lg, y_ph = clog(y)
        q_poly = NodalPolynomial(
            nodes, log_values=(y_lg + col_log, y_ph), leading=1.0
        )
        search = find_roots(q_poly, degree, guesses)
        try:
            # pairing mid-iteration also filters root-finder noise, but
            # only the converged set has to close under reflection
            reps, full = symmetrize_roots(search.roots, eta, tol=root_tol)
        except UnpairableRoot:
            reps, full = None, np.asarray(search.roots)
        if full.size != degree:
            raise NoConvergence(
                "root pairing lost members (%d of %d)" % (full.size, degree),
                diagnostics={"trail": trail, "roots": search.roots},
            )
        movement = np.inf
        if prev_full is not None:
            movement = matched_movement(prev_full, full)
        trail.append(
            {
                "round": round_no,
                "condition": float(cond),
                "aberth_converged": bool(search.converged),
                "symmetric": reps is not None,
                "movement": float(movement),
            }
        )
        if movement <= movement_tol:
            if reps is None:
                raise NoConvergence(
                    "roots settled without reflection symmetry",
                    diagnostics={"trail": trail, "roots": full},
                )
            return BetheRootSet(
                params=params,
                representatives=reps,
                method=method,
                residual=float(movement),
                rounds=round_no,
                info={"trail": trail, "nodes": nodes, "q_values_log": (y_lg + col_log, y_ph)},
            )
        prev_full = full
        guesses = full
        nodes = full
        gap = np.abs(nodes[:, None] - nodes[None, :]) + np.eye(degree)
        if gap.min() < 1e-8 * (1.0 + np.abs(nodes).max()):
            # nearly coincident roots cannot serve as interpolation nodes
            nodes = full + 1e-6 * (1.0 + np.abs(full)) * 1j
    raise NoConvergence(
        "root set still moving %.3e after %d rounds" % (movement, max_rounds),
        diagnostics={"trail": trail, "roots": prev_full},
    )


# ------------------------------------------------------- verification


def _min_pair_gap(roots):
    d = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def verify_tq_at_roots(lambda_ref, root_set, multiple_tol=1e-12):
    """Relative T-Q residual at each root representative.

    At a simple root of Q the eigenvalue equals F'(l)/Q'(l) with
    F = A Q(u-eta) + D Q(u+eta) + C; the return value is
    |1 - (F'/Q') / Lambda_ref(l)| per representative.  `lambda_ref` is
    any object with eval_log (a nodal reconstruction, a T-Q closed
    form), or a plain callable.
    """
    params = root_set.params
    roots = root_set.all_roots
    if _min_pair_gap(roots) <= multiple_tol * (1.0 + np.abs(roots).max()):
        raise MultipleRoot("coincident Bethe roots; F'/Q' is not the limit")
    q_poly = ProductPolynomial(roots, leading=1.0)
    eta, s = params.eta, params.xi_factor
    k = 2 * params.N + 1
    eps = np.empty(root_set.n_pairs)
    for i, lam in enumerate(root_set.representatives):
        terms = []
        for sign, coef_fn in ((-1, _log_coef_a), (+1, _log_coef_d)):
            v = lam + sign * eta
            c_m, c_t = coef_fn(lam, params)
            q_m, q_t = q_poly.eval_log(np.array([v]))
            qp_m, qp_t = _poly_prime_log(roots, v)
            # coef' * Q(v): log-derivative of the coefficient
            if sign < 0:
                ld = (
                    k / (lam + eta)
                    + 1.0 / (lam + params.p)
                    + s / (s * lam + params.q)
                    - 2.0 / (2 * lam + eta)
                )
            else:
                ld = (
                    k / lam
                    + 1.0 / (lam - params.p + eta)
                    + s / (s * (lam + eta) - params.q)
                    - 2.0 / (2 * lam + eta)
                )
            ld_m, ld_t = clog(np.array([ld]))
            terms.append((c_m + ld_m[0] + q_m[0], c_t + ld_t[0] + q_t[0]))
            terms.append((c_m + qp_m, c_t + qp_t))
        c = _log_coef_c(lam, params)
        if c is not None:
            ld = k * (1.0 / lam + 1.0 / (lam + eta))
            ld_m, ld_t = clog(np.array([ld]))
            terms.append((c[0] + ld_m[0], c[1] + ld_t[0]))
        f_m, f_t = scaled_sum(
            np.array([x[0] for x in terms]), np.array([x[1] for x in terms])
        )
        qp_m, qp_t = _poly_prime_log(roots, lam)
        if not np.isfinite(qp_m):
            raise MultipleRoot("Q' vanishes at root %s" % lam)
        tq_m, tq_t = f_m - qp_m, f_t - qp_t
        r_m, r_t = eval_log_any(lambda_ref, np.array([lam]))
        eps[i] = log_ratio_error(float(r_m[0]), float(r_t[0]), tq_m, tq_t)
    return eps


def verify_bae_ratio(root_set, pole_tol=1e-10):
    """The ratio G = (A + C)/(-B) at each representative; 1 when exact.

    A, B, C are the Bethe-equation building blocks; B compares Q across
    the eta shifts, so a root whose shifted image lands on another root
    makes the ratio undefined and raises PoleInRatio.
    """
    params = root_set.params
    roots = root_set.all_roots
    q_poly = ProductPolynomial(roots, leading=1.0)
    eta, s = params.eta, params.xi_factor
    k = 2 * params.N + 1
    out = np.empty(root_set.n_pairs, dtype=np.complex128)
    for i, lam in enumerate(root_set.representatives):
        shifted = np.array([lam + eta, lam - eta])
        gap = np.min(np.abs(shifted[:, None] - roots[None, :]), axis=1)
        if np.any(gap <= pole_tol * (1.0 + abs(lam))):
            raise PoleInRatio(
                "Q vanishes at %s +- eta; the ratio test is undefined" % lam
            )
        denom = np.array(
            [lam, lam - params.p + eta, s * (lam + eta) - params.q]
        )
        if np.any(np.abs(denom) <= pole_tol * (1.0 + abs(lam))):
            raise PoleInRatio("a Bethe-equation denominator vanishes at %s" % lam)
        num_lg, num_ph = clog(np.array([lam + eta, lam + params.p, s * lam + params.q]))
        den_lg, den_ph = clog(denom)
        a_m = k * (num_lg[0] - den_lg[0]) + num_lg[1] + num_lg[2] - den_lg[1] - den_lg[2]
        a_t = k * (num_ph[0] - den_ph[0]) + num_ph[1] + num_ph[2] - den_ph[1] - den_ph[2]
        q_m, q_t = q_poly.eval_log(shifted)
        b_m = q_m[0] - q_m[1]
        b_t = q_t[0] - q_t[1]
        if s != 1.0:
            c_lg, c_ph = clog(np.array([(1.0 - s) * (2 * lam + eta)]))
            c_m = c_lg[0] + k * num_lg[0] - den_lg[1] - den_lg[2] - q_m[1]
            c_t = c_ph[0] + k * num_ph[0] - den_ph[1] - den_ph[2] - q_t[1]
            top_m, top_t = scaled_sum(np.array([a_m, c_m]), np.array([a_t, c_t]))
        else:
            top_m, top_t = a_m, a_t
        out[i] = -from_clog(top_m - b_m, top_t - b_t)
    return out


def energy_from_bethe(params, root_set, imag_tol=1e-8, infinity=1e8):
    """Ground energy from the Bethe roots.

    Roots beyond `infinity` (in units of eta) are treated as exactly
    infinite and contribute nothing; the parallel-field chain produces
    such roots legitimately for some boundary signs.
    """
    lam = root_set.all_roots
    eta = params.eta
    if np.any(np.abs(lam) <= 1e-10 * abs(eta)) or np.any(
        np.abs(lam + eta) <= 1e-10 * abs(eta)
    ):
        raise RootAtPole("a Bethe root sits on a pole of the energy density")
    finite = np.abs(lam) < infinity * abs(eta)
    lam = lam[finite]
    e = np.sum(eta**2 / (lam * (lam + eta)))
    e = e + eta / params.p + eta * params.xi_factor / params.q + params.N - 1
    if abs(e.imag) > imag_tol * max(1.0, abs(e.real)):
        raise ValueError(
            "energy has imaginary part %.3e; root set is not "
            "reflection-consistent" % e.imag
        )
    return float(e.real)


# ------------------------------------------------------ classification


@dataclass
class BetheClassification:
    tags: list
    counts: dict
    paired_line_pairs: int
    expected_paired_lines: int
    threshold_distance: float
    anchors: dict = field(repr=False, default_factory=dict)


def classify_bethe_roots(params, root_set, tol=None):
    """Geometric census of a Bethe root set.

    Tags per root: `regular_central` (on Re u = -eta/2),
    `regular_boundary_string` (real pair pinned at {-x, x-eta} by a
    boundary parameter x in {p, q_bar}), `line` (other real roots),
    `paired_line` (conjugate pairs replacing line roots), `arc`
    (remaining complex roots, tracing the outer bifurcation curves).

    Off the central line, a conjugate pair counts as paired-line when
    it sits inside the former line-root span, |Re + eta/2| below
    p + q_bar - eta/2; arcs hover at and beyond the span's outer end.
    On the central line the paired pairs are found by bookkeeping
    rather than geometry: the regular roots (central + strings) total
    N, so any central surplus is paired pairs that migrated onto the
    line, and the surplus pairs are the detached largest-|Im| ones.

    The reported count follows the step rule max(1, floor(p + q_bar
    [+1 when q_bar < 0])) away from the crossover windows; callers
    should compare and log rather than assert, since finite N smears
    the thresholds (`threshold_distance` says how close p + q_bar is
    to one).
    """
    eta = params.eta
    if tol is None:
        tol = 1e-2 * abs(eta)
    roots = np.asarray(
        root_set.all_roots if isinstance(root_set, BetheRootSet) else root_set
    )
    n = params.N
    p, qb = params.p, params.q_bar
    anchors = np.array([-p, p - eta, -qb, qb - eta], dtype=np.complex128)
    tags = [None] * roots.size
    for i, r in enumerate(roots):
        if np.min(np.abs(r - anchors)) <= tol:
            tags[i] = "regular_boundary_string"
        elif abs(r.imag) <= 1e-8 * (1.0 + abs(r.real)):
            tags[i] = "line"
        elif abs(r.real + eta / 2.0) <= tol:
            tags[i] = "regular_central"

    # conjugate pairing of the off-line complex roots
    span = max(0.0, p + qb - abs(eta) / 2.0)
    open_idx = [i for i, t in enumerate(tags) if t is None]
    used = set()
    pair_count = 0
    for i in open_idx:
        if i in used:
            continue
        partner = None
        for j in open_idx:
            if j == i or j in used:
                continue
            if abs(roots[j] - np.conj(roots[i])) <= tol:
                partner = j
                break
        if partner is None:
            warnings.warn(
                "root %s has no conjugate partner; tagged arc" % roots[i],
                stacklevel=2,
            )
            tags[i] = "arc"
            used.add(i)
            continue
        used.update((i, partner))
        if abs(roots[i].real + eta / 2.0) < span:
            tags[i] = tags[partner] = "paired_line"
            pair_count += 1
        else:
            tags[i] = tags[partner] = "arc"

    pair_count += _retag_central_surplus(roots, tags, n)

    counts = {}
    for t in tags:
        counts[t] = counts.get(t, 0) + 1
    if params.xi == 0.0:
        expected = 0
    elif qb > 0:
        expected = max(1, int(np.floor((p + qb) / eta)))
    elif p > 0:
        expected = max(1, int(np.floor((p + qb) / eta + 1)))
    else:
        expected = 0
    combo = (p + qb) / eta
    return BetheClassification(
        tags=tags,
        counts=counts,
        paired_line_pairs=pair_count,
        expected_paired_lines=expected,
        threshold_distance=float(abs(combo - np.round(combo))),
        anchors={"p": anchors[:2], "q": anchors[2:]},
    )


def _retag_central_surplus(roots, tags, n):
    """Move surplus central pairs to paired_line, largest |Im| first.

    The regular roots (central plus boundary strings) number N; any
    extra conjugate pairs sitting on the central line are paired-line
    pairs that migrated there.
    """
    central = [i for i, t in enumerate(tags) if t == "regular_central"]
    strings = sum(1 for t in tags if t == "regular_boundary_string")
    surplus = len(central) + strings - n
    if surplus <= 1:
        return 0
    if surplus % 2:
        warnings.warn(
            "odd central surplus %d; flooring to %d pairs"
            % (surplus, surplus // 2),
            stacklevel=3,
        )
    n_pairs = surplus // 2
    central.sort(key=lambda i: -abs(roots[i].imag))
    for i in central[: 2 * n_pairs]:
        tags[i] = "paired_line"
    return n_pairs


# -------------------------------------------------- symmetry crossover


def u1_restoration_check(params, p_values, ground_state_fn, match_tol=0.3):
    """Track central roots against the parallel-field reference as |p| grows.

    For each p the tilted chain is solved with the linear-system route
    and its central roots are matched against those of the parallel
    field chain with boundary parameter q' = q_bar, solved by the same
    route on its own ground state (the logarithmic solver cannot host
    the reference chain's boundary-string pair, which needs imaginary
    mu).  Returns a list of dicts with the worst matched distance per
    p; the distances should shrink as |p| grows and the tilted
    boundary decouples.
    """
    ref_params = ModelParams(
        N=params.N, p=float(max(p_values, key=abs)), q=params.q_bar, xi=0.0,
        eta=params.eta,
    )
    ref = solve_inhomogeneous_bethe(ground_state_fn(ref_params), ref_params)
    ref_central = np.array(
        [
            r
            for r, t in zip(ref.all_roots, classify_bethe_roots(ref_params, ref).tags)
            if t == "regular_central"
        ]
    )
    report = []
    for p in p_values:
        pp = params.replace(p=float(p))
        psi = ground_state_fn(pp)
        tilted = solve_inhomogeneous_bethe(psi, pp)
        cls = classify_bethe_roots(pp, tilted)
        central = np.array(
            [r for r, t in zip(tilted.all_roots, cls.tags) if t == "regular_central"]
        )
        dev = []
        for r in ref_central:
            if central.size == 0:
                dev.append(np.inf)
                continue
            dev.append(float(np.min(np.abs(central - r))))
        worst = float(np.max(dev)) if dev else np.inf
        report.append(
            {
                "p": float(p),
                "worst_central_deviation": worst,
                "n_central": int(central.size),
                "n_reference": int(ref_central.size),
            }
        )
        if worst > match_tol:
            report[-1]["note"] = "central set not yet aligned with reference"
    return report
