"""Polynomial kernels shared by the spectral pipelines.

Everything here works on plain complex numbers. Polynomials are carried in
nodal form (interpolation nodes + values, optionally a pinned leading
coefficient) or product form (known roots); monomial coefficients are never
formed, since they overflow double precision already around degree 80 for
the root scales that occur here. Magnitudes are tracked as
(log-magnitude, phase) pairs so that degree ~200 products stay finite.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGuesses, DuplicateNodes, Overflow, UnpairableRoot

# exp(x) overflows float64 just above this
_MAX_LOG = float(np.log(np.finfo(np.float64).max))

_SEPARATION_FLOOR = 1e-13


def _as_complex_array(z):
    return np.atleast_1d(np.asarray(z, dtype=np.complex128))


def clog(z):
    """Split log: returns (log|z|, arg z), elementwise, with log|0| = -inf."""
    z = np.asarray(z, dtype=np.complex128)
    mag = np.abs(z)
    with np.errstate(divide="ignore"):
        logmag = np.log(mag)
    phase = np.angle(z)
    return logmag, phase


def from_clog(logmag, phase):
    """Inverse of clog. Raises Overflow instead of returning inf."""
    logmag = np.asarray(logmag, dtype=np.float64)
    if np.any(logmag > _MAX_LOG):
        raise Overflow(
            "magnitude exceeds float64 range (log-magnitude %.1f); "
            "keep the value in log form or normalize the samples" % float(np.max(logmag))
        )
    return np.exp(logmag) * np.exp(1j * np.asarray(phase, dtype=np.float64))


def scaled_sum(logmags, phases, axis=-1):
    """Sum of exp(logmag + i*phase) along `axis`, returned as (logmag, phase).

    The largest finite log-magnitude is factored out first, so the result is
    finite whenever the true sum is representable in log form at all.
    """
    logmags = np.asarray(logmags, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    m = np.max(logmags, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    terms = np.exp(logmags - m) * np.exp(1j * phases)
    s = np.sum(terms, axis=axis)
    slog, sphase = clog(s)
    return np.squeeze(m, axis=axis) + slog, sphase


def _check_separated(points, label):
    pts = _as_complex_array(points)
    n = pts.size
    if n < 2:
        return
    d = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(d, np.inf)
    scale = 1.0 + np.abs(pts)
    floor = _SEPARATION_FLOOR * np.minimum(scale[:, None], scale[None, :])
    if np.any(d < floor):
        i, j = np.unravel_index(np.argmin(d / floor), d.shape)
        raise (DuplicateNodes if label == "nodes" else DegenerateGuesses)(
            "%s %d and %d coincide: %s vs %s" % (label, i, j, pts[i], pts[j])
        )


class ProductPolynomial:
    """c * prod_k (u - r_k), held by its roots.

    Used for planted fixtures and for polynomials whose roots are the output
    of a pipeline (Q from Bethe roots, Lambda from zero roots).
    """

    def __init__(self, roots, leading=1.0):
        self.roots = _as_complex_array(roots).copy()
        self.leading = complex(leading)
        if self.leading == 0:
            raise ValueError("leading coefficient must be nonzero")
        self._llog, self._lphase = clog(self.leading)

    @property
    def degree(self):
        return self.roots.size

    def eval_log(self, u):
        u = _as_complex_array(u)
        dlog, dphase = clog(u[:, None] - self.roots[None, :])
        logmag = self._llog + np.sum(dlog, axis=1)
        phase = self._lphase + np.sum(dphase, axis=1)
        return logmag, phase

    def __call__(self, u):
        scalar = np.isscalar(u) or np.ndim(u) == 0
        val = from_clog(*self.eval_log(u))
        return val[0] if scalar else val

    def logderiv(self, u):
        """P'(u)/P(u) = sum_k 1/(u - r_k); a clean inf exactly on a root."""
        u = _as_complex_array(u)
        d = u[:, None] - self.roots[None, :]
        hit = (d == 0).any(axis=1)
        d = np.where(d == 0, 1.0, d)
        out = np.sum(1.0 / d, axis=1)
        out[hit] = np.inf  # 1/(inf+0j) = 0: an iterate on a root stays put
        return out

    def derivative_at(self, u, order):
        """Exact n-th derivative via the Leibniz/log-derivative recursion.

        Needs u away from every root for order >= 1 only in the sense that
        the recursion divides by (u - r_k); at a root use the factored form
        instead. Returned in log form (logmag, phase).
        """
        u = complex(u)
        d = u - self.roots
        if np.any(d == 0) and order >= 0:
            # P itself vanishes; derivatives still fine via full Leibniz on
            # factors, but the recursion below divides by d. Not needed here.
            raise ZeroDivisionError("derivative_at called on a root")
        # L^(m) = d^m/du^m of P'/P
        lders = [np.sum((-1.0) ** m * _factorial(m) / d ** (m + 1)) for m in range(order)]
        plog = np.array([self.eval_log(u)[0][0]])
        pphase = np.array([self.eval_log(u)[1][0]])
        derivs = [(plog[0], pphase[0])]  # log form of P^(0)
        for n in range(1, order + 1):
            # P^(n) = sum_{k=0}^{n-1} C(n-1, k) P^(k) L^(n-1-k)
            logs, phases = [], []
            for k in range(n):
                coeff = _binom(n - 1, k) * lders[n - 1 - k]
                if coeff == 0:
                    continue
                clg, cph = clog(coeff)
                logs.append(derivs[k][0] + clg)
                phases.append(derivs[k][1] + cph)
            if not logs:
                derivs.append((-np.inf, 0.0))
                continue
            lg, ph = scaled_sum(np.array(logs), np.array(phases), axis=0)
            derivs.append((float(lg), float(ph)))
        return derivs[order]


def _factorial(n):
    out = 1.0
    for i in range(2, n + 1):
        out *= i
    return out


def _binom(n, k):
    out = 1.0
    for i in range(1, k + 1):
        out = out * (n - k + i) / i
    return out


class NodalPolynomial:
    """Interpolating polynomial in barycentric form.

    With `leading` supplied the polynomial has degree len(nodes) and reads

        P(u) = leading * omega(u) + sum_j values_j * l_j(u),

    omega the monic node product and l_j the cardinal functions; this is the
    representation used to rebuild Lambda (leading 2) and Q (leading 1) from
    samples. Without `leading` it is the plain degree len(nodes)-1
    interpolant in the second barycentric form.

    Values may be passed as complex numbers or as (logmag, phase) arrays via
    `log_values`; evaluation always happens in log form.
    """

    def __init__(self, nodes, values=None, leading=None, log_values=None):
        self.nodes = _as_complex_array(nodes).copy()
        n = self.nodes.size
        if n < 1:
            raise ValueError("need at least one node")
        _check_separated(self.nodes, "nodes")
        if (values is None) == (log_values is None):
            raise ValueError("pass exactly one of values / log_values")
        if values is not None:
            vals = _as_complex_array(values)
            if vals.size != n:
                raise ValueError("len(values) != len(nodes)")
            self.vlog, self.vphase = clog(vals)
        else:
            self.vlog = np.asarray(log_values[0], dtype=np.float64).copy()
            self.vphase = np.asarray(log_values[1], dtype=np.float64).copy()
            if self.vlog.size != n or self.vphase.size != n:
                raise ValueError("log_values length != len(nodes)")
        self.leading = None if leading is None else complex(leading)
        if self.leading == 0:
            raise ValueError("explicit leading coefficient must be nonzero")
        # log barycentric weights w_k = 1 / prod_{m != k} (u_k - u_m)
        diff = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        dlog, dphase = clog(diff)
        np.fill_diagonal(dlog, 0.0)
        np.fill_diagonal(dphase, 0.0)
        self.wlog = -np.sum(dlog, axis=1)
        self.wphase = -np.sum(dphase, axis=1)

    @property
    def degree(self):
        return self.nodes.size if self.leading is not None else self.nodes.size - 1

    def _diffs(self, u):
        u = _as_complex_array(u)
        d = u[:, None] - self.nodes[None, :]
        return u, d

    def eval_log(self, u):
        scalar_in = np.isscalar(u) or np.ndim(u) == 0
        u, d = self._diffs(u)
        hit = np.abs(d) == 0.0
        anyhit = hit.any(axis=1)
        d_safe = np.where(hit, 1.0, d)
        dlog, dphase = clog(d_safe)
        # t_k(u) = v_k w_k / (u - u_k)
        tlog = self.vlog[None, :] + self.wlog[None, :] - dlog
        tphase = self.vphase[None, :] + self.wphase[None, :] - dphase
        if self.leading is not None:
            olog = np.sum(dlog, axis=1)
            ophase = np.sum(dphase, axis=1)
            llog, lphase = clog(self.leading)
            slog, sphase = scaled_sum(
                np.concatenate([tlog, np.full((u.size, 1), llog)], axis=1),
                np.concatenate([tphase, np.full((u.size, 1), lphase)], axis=1),
            )
            logmag = olog + slog
            phase = ophase + sphase
        else:
            nlog, nphase = scaled_sum(tlog, tphase)
            blog, bphase = scaled_sum(self.wlog[None, :] - dlog, self.wphase[None, :] - dphase)
            logmag = nlog - blog
            phase = nphase - bphase
        if anyhit.any():
            idx = np.argmax(hit, axis=1)
            logmag = np.where(anyhit, self.vlog[idx], logmag)
            phase = np.where(anyhit, self.vphase[idx], phase)
        if scalar_in:
            return logmag[0], phase[0]
        return logmag, phase

    def __call__(self, u):
        scalar_in = np.isscalar(u) or np.ndim(u) == 0
        val = from_clog(*self.eval_log(u))
        return complex(val) if scalar_in else val

    def logderiv(self, u):
        """P'(u)/P(u). Diverges on nodes; callers keep iterates off them."""
        scalar_in = np.isscalar(u) or np.ndim(u) == 0
        u, d = self._diffs(u)
        dlog, dphase = clog(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_d = np.exp(-dlog) * np.exp(-1j * dphase)
            tlog = self.vlog[None, :] + self.wlog[None, :] - dlog
            tphase = self.vphase[None, :] + self.wphase[None, :] - dphase
            m = np.max(tlog, axis=1, keepdims=True)
            m = np.where(np.isfinite(m), m, 0.0)
            t_scaled = np.exp(tlog - m) * np.exp(1j * tphase)
            if self.leading is not None:
                llog, lphase = clog(self.leading)
                s = np.sum(t_scaled, axis=1) + np.exp(llog - m[:, 0]) * np.exp(1j * lphase)
                sp = np.sum(-t_scaled * inv_d, axis=1)
                out = np.sum(inv_d, axis=1) + sp / s
            else:
                blog = self.wlog[None, :] - dlog
                bphase = self.wphase[None, :] - dphase
                mb = np.max(blog, axis=1, keepdims=True)
                b_scaled = np.exp(blog - mb) * np.exp(1j * bphase)
                nsum = np.sum(t_scaled, axis=1)
                npr = np.sum(-t_scaled * inv_d, axis=1)
                bsum = np.sum(b_scaled, axis=1)
                bpr = np.sum(-b_scaled * inv_d, axis=1)
                out = npr / nsum - bpr / bsum
        return out[0] if scalar_in else out


@dataclass
class RootSearchResult:
    roots: np.ndarray
    converged: bool
    sweeps: int
    max_step: float
    residuals: np.ndarray = field(repr=False, default=None)


def _fd_logderiv(evaluate):
    def ld(z):
        z = _as_complex_array(z)
        h = 1e-7 * (1.0 + np.abs(z))
        pz = np.asarray([evaluate(w) for w in z], dtype=np.complex128)
        pp = np.asarray([evaluate(w + hw) for w, hw in zip(z, h)], dtype=np.complex128)
        pm = np.asarray([evaluate(w - hw) for w, hw in zip(z, h)], dtype=np.complex128)
        return (pp - pm) / (2.0 * h * pz)

    return ld


def find_roots(evaluate, degree, guesses, max_sweeps=500, step_tol=1e-13):
    """Simultaneous root iteration with the Aberth correction.

    All roots move once per sweep (Jacobi ordering, deterministic).
    `evaluate` is either a callable u -> P(u) or an object exposing
    logderiv(u) = P'/P, in which case evaluation never leaves log space.
    Returns a RootSearchResult; a hit iteration cap is reported through
    converged=False rather than an exception, so drivers can reseed.
    """
    z = _as_complex_array(guesses).copy()
    if z.size != degree:
        raise ValueError("need exactly `degree` guesses, got %d for degree %d" % (z.size, degree))
    _check_separated(z, "guesses")
    logderiv = evaluate.logderiv if hasattr(evaluate, "logderiv") else _fd_logderiv(evaluate)

    max_step = np.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        ld = np.asarray(logderiv(z), dtype=np.complex128)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = np.sum(1.0 / diff, axis=1)
        denom = ld - repulsion
        with np.errstate(divide="ignore", invalid="ignore"):
            step = 1.0 / denom
        scale = 1.0 + np.abs(z)
        bad = ~np.isfinite(step)
        if bad.any():
            # iterate sitting on a node or a degenerate denominator: kick it
            step = np.where(bad, 1e-8 * scale * (1.0 + 1.0j), step)
        # damp absurd corrections early in the iteration
        cap = 0.3 * scale
        mag = np.abs(step)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(mag > cap, step * (cap / mag), step)
        z = z - step
        max_step = float(np.max(np.abs(step) / (1.0 + np.abs(z))))
        if max_step <= step_tol:
            break
    converged = max_step <= step_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = np.abs(1.0 / np.asarray(logderiv(z), dtype=np.complex128))
    return RootSearchResult(roots=z, converged=converged, sweeps=sweeps, max_step=max_step, residuals=resid)


@dataclass
class PhaseSequence:
    raw: np.ndarray
    unwrapped: np.ndarray


def unwrap_phases(raw):
    """Continuous phase sequence from principal values.

    Each consecutive difference is shifted by a multiple of 2*pi into
    (-pi, pi]; the first entry is kept as given.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1:
        raise ValueError("expected a 1-d phase sequence")
    out = raw.copy()
    two_pi = 2.0 * np.pi
    for i in range(1, raw.size):
        d = raw[i] - raw[i - 1]
        d -= two_pi * np.ceil((d - np.pi) / two_pi)
        out[i] = out[i - 1] + d
    return PhaseSequence(raw=raw, unwrapped=out)


def pair_roots(roots, eta, tol=1e-6):
    """Group roots into reflection pairs (z, -z-eta).

    Deterministic: candidates are scanned in lexicographic (Re, Im) order
    and greedily matched to the nearest unused partner. Each pair is
    reported as (representative, partner) with the representative the
    member of larger real part; real-part ties within tol break toward
    larger imaginary part, so center-line pairs report their upper-half
    member. A root within tol of the fixed point -eta/2 may pair with
    itself. Raises UnpairableRoot when no partner lies within tol.
    """
    roots = _as_complex_array(roots)
    order = np.lexsort((roots.imag, roots.real))
    pts = roots[order]
    used = np.zeros(pts.size, dtype=bool)
    pairs = []
    for i in range(pts.size):
        if used[i]:
            continue
        used[i] = True
        target = -pts[i] - eta
        dist = np.abs(pts - target)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        if np.isfinite(dist[j]) and dist[j] <= tol:
            used[j] = True
            a, b = pts[i], pts[j]
        elif abs(pts[i] - target) <= tol:
            a = b = pts[i]  # self-paired at the symmetry fixed point
        else:
            raise UnpairableRoot(
                "root %s has no reflection partner within %g (closest %g)"
                % (pts[i], tol, float(np.min(np.abs(pts - target))) if pts.size else np.nan)
            )
        dr = a.real - b.real
        if dr > tol or (abs(dr) <= tol and a.imag >= b.imag):
            rep, other = a, b
        else:
            rep, other = b, a
        pairs.append((rep, other))
    pairs.sort(key=lambda p: (p[0].real, p[0].imag))
    return pairs


def symmetrize_roots(roots, eta, tol=1e-6):
    """Project a root set onto exact reflection symmetry.

    Returns (representatives, full_set). Each pair (z, w ~ -z-eta) is
    replaced by (v, -v-eta) with v = (z - w - eta)/2, splitting the
    numerical asymmetry evenly.
    """
    pairs = pair_roots(roots, eta, tol=tol)
    reps = np.array([(z - w - eta) / 2.0 for z, w in pairs], dtype=np.complex128)
    full = []
    for v in reps:
        full.append(v)
        w = -v - eta
        if w != v:  # a self-paired root projects exactly onto -eta/2
            full.append(w)
    return reps, np.asarray(full, dtype=np.complex128)


def eval_log_any(evaluator, points):
    """(logmag, phase) arrays from an eval_log object or plain callable."""
    points = np.asarray(points, dtype=complex)
    if hasattr(evaluator, "eval_log"):
        m, t = evaluator.eval_log(points)
        return np.asarray(m, dtype=float), np.asarray(t, dtype=float)
    vals = np.asarray([evaluator(u) for u in points], dtype=complex)
    return clog(vals)


def log_ratio_error(m1, t1, m2, t2):
    """|1 - v2/v1| from log forms, safe at any magnitude."""
    if np.isinf(m1) and m1 < 0:
        return np.inf
    r = np.exp(np.clip(m2 - m1, -745.0, 709.0)) * np.exp(1j * (t2 - t1))
    return float(np.abs(1.0 - r))


def matched_movement(old, new):
    """Greedy nearest-match distance between two root sets.

    Sorting complex arrays lexicographically scrambles members that
    share a real part to rounding error, so set comparisons go through
    nearest matching instead.
    """
    old = np.asarray(old).copy()
    moved = 0.0
    taken = np.zeros(old.size, dtype=bool)
    for z in new:
        d = np.abs(old - z)
        d[taken] = np.inf
        k = int(np.argmin(d))
        taken[k] = True
        moved = max(moved, float(d[k]))
    return moved
