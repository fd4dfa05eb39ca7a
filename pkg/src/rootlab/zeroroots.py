"""Zero roots of the transfer eigenvalue.

The ground-state eigenvalue Lambda(u) is a degree-(2N+2) polynomial with
leading coefficient 2, so it is fully described by its 2N+2 zeros, which
close under u -> -u - eta into N+1 representative pairs.  This module
extracts those zeros from sampled eigenvalue data, verifies each one with
two independent complex-analysis probes (a max-modulus valley test and a
five-point argument-principle contour), checks the product and derivative
constraints the eigenvalue must satisfy, evaluates the ground energy, and
sorts the root pattern into the six ground-state regions.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import (
    ProductPolynomial,
    clog,
    eval_log_any,
    find_roots,
    from_clog,
    log_ratio_error,
    matched_movement,
    scaled_sum,
    symmetrize_roots,
    unwrap_phases,
)
from .errors import (
    AmbiguousPattern,
    NeverDetected,
    NoConvergence,
    RootAtPole,
    UnpairableRoot,
    ZeroOnContour,
)
from .model import scalar_a_log
from .spectral import SpectralSamples, make_zero_nodes, reconstruct_lambda, sample_lambda

# |Lambda| below this on a contour point counts as "on a root"
_CONTOUR_FLOOR = np.log(1e-300)


@dataclass
class ZeroRootSet:
    """N+1 representative zeros; each stands for the pair {z, -z-eta}."""

    params: object
    representatives: np.ndarray
    residual: float = np.nan
    rounds: int = 0
    tags: list = None
    region: str = None
    info: dict = field(default_factory=dict, repr=False)

    @property
    def n_pairs(self):
        return self.representatives.size

    @property
    def all_roots(self):
        reps = np.asarray(self.representatives)
        return np.concatenate([reps, -reps - self.params.eta])

    def lambda_polynomial(self):
        """Lambda(u) rebuilt from the roots, leading coefficient pinned to 2."""
        return ProductPolynomial(self.all_roots, leading=2.0)


def _require_homogeneous(params, what):
    if any(t != 0 for t in params.thetas):
        raise ValueError("%s assumes all inhomogeneities are zero" % what)


# ------------------------------------------------------ root extraction


def solve_zero_roots(
    psi,
    params,
    nodes=None,
    max_rounds=20,
    movement_tol=1e-10,
    root_tol=1e-6,
    lambda_eval=None,
):
    """Zero roots of Lambda from eigenvalue samples.

    Each round samples Lambda at the nodes, pins the nodal degree-(2N+2)
    reconstruction with leading coefficient 2, and polishes all 2N+2
    roots simultaneously; the symmetrized roots become the next round's
    nodes, so the grid converges onto the roots themselves (where the
    reconstruction is conditioned best).  The first round's guesses are
    the nodes, which already trace the bulk-string lines.

    `lambda_eval` (an eval_log object or plain callable) replaces state
    sampling for synthetic runs; `psi` may then be None.
    """
    eta = params.eta
    degree = 2 * params.N + 2
    if nodes is None:
        nodes = make_zero_nodes(params.N, eta)
    guesses = np.asarray(nodes, dtype=np.complex128)
    prev_full = None
    trail = []
    for round_no in range(1, max_rounds + 1):
        if lambda_eval is None:
            samples = sample_lambda(psi, params, nodes)
        else:
            lg, ph = eval_log_any(lambda_eval, nodes)
            samples = SpectralSamples(params, np.asarray(nodes, complex), lg, ph)
        lam = reconstruct_lambda(samples)
        search = find_roots(lam, degree, guesses)
        try:
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
            # Newton-style per-root accuracy estimate |Lambda / Lambda'|;
            # a root that lands exactly on a node makes logderiv blow up,
            # so those entries fall back to the last per-root movement.
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.abs(lam.logderiv(reps))
                root_res = np.where(
                    np.isfinite(slope) & (slope > 0), 1.0 / slope, np.nan
                )
            if np.any(np.isnan(root_res)):
                floor = np.finfo(float).eps * (1.0 + np.abs(reps))
                if prev_full is not None:
                    last_move = np.array(
                        [np.min(np.abs(prev_full - v)) for v in reps]
                    )
                else:
                    last_move = floor
                root_res = np.where(
                    np.isnan(root_res), np.maximum(last_move, floor), root_res
                )
            return ZeroRootSet(
                params=params,
                representatives=reps,
                residual=float(movement),
                rounds=round_no,
                info={
                    "trail": trail,
                    "nodes": np.asarray(nodes),
                    "root_residuals": root_res,
                },
            )
        prev_full = full
        guesses = full
        nodes = full
    raise NoConvergence(
        "root set still moving %.3e after %d rounds" % (movement, max_rounds),
        diagnostics={"trail": trail, "roots": prev_full},
    )


# ------------------------------------------- complex-analysis probes


@dataclass(frozen=True)
class ContourProbe:
    """Five-point square contour around a root candidate.

    Points run counterclockwise from the top: u0+i*delta, u0-delta,
    u0-i*delta, u0+delta, and back to the start, so four phase steps of
    about pi/2 each stay unwrappable for a single enclosed zero.
    """

    center: complex
    delta: float

    @property
    def points(self):
        u0, d = complex(self.center), self.delta
        return u0 + d * np.array([1j, -1.0, -1j, 1.0, 1j])


@dataclass(frozen=True)
class MaxModulusReport:
    """Valley test: |Lambda| at the center vs its minimum on a circle.

    Magnitudes are carried as logs so the test survives eigenvalue
    scales far beyond double range; `passed` means a strict valley.
    """

    center: complex
    radius: float
    grid: int
    center_log_abs: float
    circle_min_log_abs: float

    @property
    def passed(self):
        return self.circle_min_log_abs > self.center_log_abs


def verify_max_modulus(evaluator, z, radius, grid=64):
    """Strict-valley probe: a zero within `radius` of z forces a dip.

    Samples |Lambda| at z and on `grid` points of the circle |u-z| =
    radius.  An analytic nonvanishing function cannot have an interior
    minimum, so center < circle everywhere certifies a zero inside.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    z = complex(z)
    angles = 2.0 * np.pi * np.arange(grid) / grid
    circle = z + radius * np.exp(1j * angles)
    lg_c, _ = eval_log_any(evaluator, circle)
    lg_0, _ = eval_log_any(evaluator, np.array([z]))
    return MaxModulusReport(
        center=z,
        radius=float(radius),
        grid=int(grid),
        center_log_abs=float(lg_0[0]),
        circle_min_log_abs=float(lg_c.min()),
    )


def verify_argument_principle(evaluator, z, delta):
    """Winding number of Lambda around the five-point contour at z.

    Returns round(net phase change / 2pi): 1 means exactly one enclosed
    zero, 0 means none.  Phase differences between neighbouring probe
    points are assumed below pi, which holds whenever delta is small
    against the local root spacing.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    probe = ContourProbe(center=complex(z), delta=float(delta))
    lg, ph = eval_log_any(evaluator, probe.points)
    if np.any(lg < _CONTOUR_FLOOR):
        raise ZeroOnContour(
            "|Lambda| below 1e-300 on the contour; probe sits on a root"
        )
    seq = unwrap_phases(ph).unwrapped
    return int(np.rint((seq[-1] - seq[0]) / (2.0 * np.pi)))


def accuracy_ladder(evaluator, z, delta_start=1e-6, factor=10.0):
    """Shrink the contour until the root is lost; the last hit is the
    accuracy estimate.

    The candidate must wind once at `delta_start` (else NeverDetected).
    Stepping onto the root itself (ZeroOnContour) also ends the descent:
    the root is then located at least as well as the last passing delta.
    """
    if verify_argument_principle(evaluator, z, delta_start) != 1:
        raise NeverDetected(
            "no zero enclosed at starting radius %.1e" % delta_start
        )
    last_pass = delta_start
    delta = delta_start / factor
    while True:
        try:
            count = verify_argument_principle(evaluator, z, delta)
        except ZeroOnContour:
            return last_pass
        if count != 1:
            return last_pass
        last_pass = delta
        delta /= factor


# --------------------------------------------------- energy and checks


def energy_from_zero_roots(params, root_set, imag_tol=1e-8):
    """Ground energy from the N+1 zero-root representatives."""
    z = np.asarray(root_set.representatives)
    eta = params.eta
    if np.any(np.abs(z) <= 1e-10 * abs(eta)) or np.any(
        np.abs(z + eta) <= 1e-10 * abs(eta)
    ):
        raise RootAtPole("a zero root sits on a pole of the energy formula")
    e = -np.sum(eta**2 / (z * (z + eta))) - params.N
    if abs(e.imag) > imag_tol * max(1.0, abs(e.real)):
        raise ValueError(
            "energy has imaginary part %.3e; root set is not "
            "reflection-consistent" % e.imag
        )
    return float(e.real)


@dataclass(frozen=True)
class ConstraintReport:
    """Residuals of the eigenvalue constraints at u = 0.

    `product_residual` is the relative error of 2*prod(-z_j)(z_j+eta)
    against a(0).  `derivative_residuals[n]` is the relative mismatch of
    the n-th derivative identity for Lambda(u)Lambda(u-eta); entries are
    inf when a root at 0 or -eta blocks the derivative recursion.
    """

    product_residual: float
    orders: np.ndarray
    derivative_residuals: np.ndarray

    @property
    def worst(self):
        vals = np.append(self.derivative_residuals, self.product_residual)
        return float(np.max(vals))


def _lambda_product_derivative_log(lam_poly, eta, n):
    """log form of d^n/du^n [Lambda(u) Lambda(u-eta)] at u = 0."""
    mags, phs = [], []
    for k in range(n + 1):
        m1, t1 = lam_poly.derivative_at(0.0, k)
        m2, t2 = lam_poly.derivative_at(-eta, n - k)
        mags.append(m1 + m2 + np.log(math.comb(n, k)))
        phs.append(t1 + t2)
    return scaled_sum(np.array(mags), np.array(phs))


def _aa_derivatives(params, n_max):
    """Derivatives of a(u)a(-u) at 0 via the quotient-rule recursion.

    a(u)a(-u) = Num(u)/Den(u) with both sides plain products of linear
    factors, so their exact derivatives come from the Leibniz recursion
    and the quotient values follow by solving Num^(n) = sum C(n,k)
    R^(k) Den^(n-k) for R^(n).
    """
    eta, s = params.eta, params.xi_factor
    n_rep = 2 * params.N + 1
    num = ProductPolynomial(
        np.concatenate(
            [
                np.full(n_rep, -eta),
                np.full(n_rep, eta),
                [-params.p, params.p, -params.q / s, params.q / s],
            ]
        ),
        leading=-4.0 * s * s,
    )
    den = ProductPolynomial(np.array([-eta / 2.0, eta / 2.0]), leading=-4.0)
    num_d = [from_clog(*num.derivative_at(0.0, k)) for k in range(n_max + 1)]
    den_d = [from_clog(*den.derivative_at(0.0, k)) for k in range(n_max + 1)]
    r = []
    for n in range(n_max + 1):
        acc = num_d[n]
        for k in range(n):
            acc -= math.comb(n, k) * r[k] * den_d[n - k]
        r.append(acc / den_d[0])
    return r


def check_constraints(root_set, max_order=6):
    """Product and derivative constraints on the zero roots.

    The product of (-z_j)(z_j+eta) over representatives must equal half
    of a(0) (the other half is the pinned leading coefficient 2), and
    derivatives of Lambda(u)Lambda(u-eta) at u = 0 up to order N-1 must
    match those of a(u)a(-u).  Both products are even in u (crossing
    makes Lambda(-u) = Lambda(u-eta)), so every odd-order identity is
    0 = 0 and carries no information; only even orders are reported.
    All derivatives are computed analytically from the linear factors;
    finite differences at the tolerances involved would drown orders
    n >= 3 in roundoff.
    """
    params = root_set.params
    _require_homogeneous(params, "the zero-root constraints")
    eta = params.eta
    z = np.asarray(root_set.representatives)

    m, t = clog(np.concatenate([-z, z + eta]))
    prod_m, prod_t = m.sum() + np.log(2.0), t.sum()
    a0_m, a0_t = scalar_a_log(0.0, params)
    product_residual = log_ratio_error(a0_m, a0_t, prod_m, prod_t)

    orders = np.arange(0, min(params.N - 1, max_order) + 1, 2)
    blocked = np.any(np.abs(z) < 1e-12) or np.any(np.abs(z + eta) < 1e-12)
    if blocked:
        residuals = np.full(orders.size, np.inf)
    else:
        lam_poly = root_set.lambda_polynomial()
        rhs = _aa_derivatives(params, int(orders[-1]))
        residuals = np.empty(orders.size)
        for i, n in enumerate(orders):
            lhs_m, lhs_t = _lambda_product_derivative_log(lam_poly, eta, int(n))
            rhs_m, rhs_t = clog(np.array([rhs[n]]))
            residuals[i] = log_ratio_error(lhs_m, lhs_t, rhs_m[0], rhs_t[0])
    return ConstraintReport(
        product_residual=product_residual,
        orders=orders,
        derivative_residuals=residuals,
    )


# ------------------------------------------------------ classification

# pattern rows: region -> (needs p string, needs q string, z0, zx)
_REGION_ROWS = {
    "A": (True, True, True, False),
    "B": (None, None, True, True),  # exactly one string, either kind
    "C": (False, False, True, False),
    "D": (True, True, False, True),
    "E": (None, None, False, False),
    "F": (False, False, False, True),
}


def tag_zero_roots(root_set, tol=None, real_tol=1e-8):
    """Per-representative tags, without the region decision.

    Tags: `bulk_string` for members of the two-line bulk towers,
    `p_boundary_string` / `q_boundary_string` for the real pairs pinned
    at |p| and |q_bar|, `additional_z0` for the conjugate pair on the
    central line, `additional_zx` for free real pairs, `unclassified`
    otherwise.
    """
    params = root_set.params
    eta = params.eta
    if tol is None:
        tol = 1e-2 * abs(eta)
    reps = np.asarray(root_set.representatives)
    p_pos = abs(params.p)
    q_pos = abs(params.q_bar)
    tags = []
    for z in reps:
        if abs(z.imag) <= real_tol * (1.0 + abs(z.real)):
            d_p, d_q = abs(z.real - p_pos), abs(z.real - q_pos)
            if d_p <= tol and d_p <= d_q:
                tags.append("p_boundary_string")
            elif d_q <= tol:
                tags.append("q_boundary_string")
            else:
                tags.append("additional_zx")
        elif abs(z.real - eta / 2.0) <= tol:
            tags.append("bulk_string")
        elif abs(z.real + eta / 2.0) <= tol:
            tags.append("additional_z0")
        else:
            tags.append("unclassified")
    return tags


def classify_zero_pattern(root_set, tol=None, real_tol=1e-8):
    """Tag the representatives and name the ground-state region.

    The region follows from which boundary strings are present (their
    positions are known exactly, so presence is a reliable bit) and
    then from the z0/zx census; a census matching no row raises
    AmbiguousPattern naming the nearest rows.
    """
    tags = tag_zero_roots(root_set, tol=tol, real_tol=real_tol)
    has_p = "p_boundary_string" in tags
    has_q = "q_boundary_string" in tags
    has_z0 = "additional_z0" in tags
    has_zx = "additional_zx" in tags

    if has_p and has_q:
        candidates = ("A", "D")
    elif has_p or has_q:
        candidates = ("B", "E")
    else:
        candidates = ("C", "F")
    matches = [
        r
        for r in candidates
        if (has_z0, has_zx) == (_REGION_ROWS[r][2], _REGION_ROWS[r][3])
    ]
    if len(matches) != 1:
        raise AmbiguousPattern(
            "census (strings p=%s q=%s, z0=%s, zx=%s) fits %s"
            % (has_p, has_q, has_z0, has_zx, " and ".join(candidates)),
            candidates=candidates,
        )
    return replace(root_set, tags=tags, region=matches[0])
