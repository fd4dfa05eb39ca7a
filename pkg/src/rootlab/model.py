"""Lattice model: R-matrix, boundary matrices, Hamiltonian, transfer operator.

The chain is the open spin-1/2 isotropic chain with a longitudinal field on
the left edge and a tilted field on the right edge,

    H = sum_n (sx sx + sy sy + sz sz)_{n,n+1}
        + (eta/p) sz_1 + (eta/q) (sz_N + xi * sx_N).

The commuting transfer operator t(u) is built from the rational 6-vertex
R-matrix sandwiched between diagonal / non-diagonal boundary matrices. Both
a dense construction (small N, used as the oracle) and an exact bond
dimension 4 matrix product operator (any N) are provided.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import PoleAt, SizeCap

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
ID2 = np.eye(2)

# permutation on C^2 x C^2
PERM = np.array(
    [[1.0, 0, 0, 0], [0, 0, 1.0, 0], [0, 1.0, 0, 0], [0, 0, 0, 1.0]]
)


@dataclass(frozen=True)
class ModelParams:
    """Chain length, crossing parameter and boundary couplings.

    `thetas` are the inhomogeneities entering the transfer operator; all
    physics in the pipelines runs at thetas = 0, but they are kept so the
    scalar identities can be tested in full generality.
    """

    N: int
    p: float
    q: float
    xi: float = 0.0
    eta: float = 1.0
    thetas: tuple = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        for name in ("p", "q", "xi", "eta"):
            v = getattr(self, name)
            if not np.isfinite(v) or (isinstance(v, complex) and v.imag):
                raise ValueError("%s must be a finite real number" % name)
        if self.p == 0 or self.q == 0:
            raise ValueError("boundary parameters p, q must be nonzero")
        if self.eta == 0:
            raise ValueError("eta must be nonzero")
        th = self.thetas
        if th is None:
            th = (0.0,) * self.N
        th = tuple(float(x) for x in th)
        if len(th) != self.N:
            raise ValueError("need exactly N inhomogeneities")
        object.__setattr__(self, "thetas", th)

    @property
    def xi_factor(self):
        """sqrt(1 + xi^2), the tilt rescaling of the right boundary."""
        return float(np.sqrt(1.0 + self.xi**2))

    @property
    def q_bar(self):
        """Effective right boundary parameter q / sqrt(1 + xi^2)."""
        return self.q / self.xi_factor

    @property
    def theta_array(self):
        return np.asarray(self.thetas, dtype=np.float64)

    def replace(self, **kw):
        d = dict(N=self.N, p=self.p, q=self.q, xi=self.xi, eta=self.eta, thetas=self.thetas)
        if "N" in kw and "thetas" not in kw and len(self.thetas) != kw["N"]:
            d["thetas"] = None
        d.update(kw)
        return ModelParams(**d)


def r_matrix(u, eta):
    """Rational R-matrix u*Id + eta*Perm on C^2 x C^2."""
    return u * np.eye(4, dtype=np.complex128) + eta * PERM.astype(np.complex128)


def r_blocks(u, eta):
    """R as a 2x2 matrix of 2x2 site operators, indexed [upper, lower].

    Returns shape (2, 2, 2, 2); blocks[0, 0] is the operator usually called
    a(u) = diag(u+eta, u), blocks[0, 1] the lowering entry, and so on.
    """
    r = r_matrix(u, eta)
    return r.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)


def k_minus(u, params):
    """Left boundary matrix diag(p+u, p-u)."""
    return np.array([[params.p + u, 0.0], [0.0, params.p - u]], dtype=np.complex128)


def k_plus(u, params):
    """Right boundary matrix; off-diagonal entries carry the tilt xi."""
    p = params
    v = u + p.eta
    return np.array(
        [[p.q + v, p.xi * v], [p.xi * v, p.q - v]], dtype=np.complex128
    )


def phi(u, eta):
    """Unitarity scalar: R(u) R(-u) = phi(u) * Id."""
    return eta**2 - u**2


def scalar_a(u, params):
    """The scalar function a(u); d(u) is its reflection a(-u-eta).

    a(u) = (2u+2eta)/(2u+eta) * (u+p) * (sqrt(1+xi^2) u + q)
           * prod_j (u+theta_j+eta)(u-theta_j+eta)

    Simple pole at u = -eta/2.
    """
    u = complex(u)
    eta = params.eta
    if abs(2 * u + eta) < 1e-12 * abs(eta):
        raise PoleAt("a(u) has a pole at u = -eta/2")
    th = params.theta_array
    prod = np.prod((u + th + eta) * (u - th + eta))
    return (
        (2 * u + 2 * eta)
        / (2 * u + eta)
        * (u + params.p)
        * (params.xi_factor * u + params.q)
        * prod
    )


def scalar_a_log(u, params):
    """a(u) as (log-magnitude, phase); finite for any N."""
    from .algebra import clog

    u = complex(u)
    eta = params.eta
    if abs(2 * u + eta) < 1e-12 * abs(eta):
        raise PoleAt("a(u) has a pole at u = -eta/2")
    th = params.theta_array
    factors = np.concatenate(
        [
            np.array(
                [2 * u + 2 * eta, u + params.p, params.xi_factor * u + params.q],
                dtype=np.complex128,
            ),
            u + th + eta,
            u - th + eta,
        ]
    )
    lg, ph = clog(factors)
    dlg, dph = clog(np.array([2 * u + eta]))
    return float(np.sum(lg) - dlg[0]), float(np.sum(ph) - dph[0])


def scalar_d(u, params):
    return scalar_a(-complex(u) - params.eta, params)


def _embed_sparse(op, site, N):
    left = sparse.identity(2**site, format="csr", dtype=np.float64)
    right = sparse.identity(2 ** (N - site - 1), format="csr", dtype=np.float64)
    return sparse.kron(sparse.kron(left, sparse.csr_matrix(op)), right, format="csr")


def hamiltonian_sparse(params):
    """CSR form of the Hamiltonian; real symmetric for real couplings."""
    N, eta = params.N, params.eta
    h2 = np.kron(SX, SX) + np.real(np.kron(SY, SY)) + np.kron(SZ, SZ)
    dim = 2**N
    H = sparse.csr_matrix((dim, dim), dtype=np.float64)
    for n in range(N - 1):
        left = sparse.identity(2**n, format="csr", dtype=np.float64)
        right = sparse.identity(2 ** (N - n - 2), format="csr", dtype=np.float64)
        H = H + sparse.kron(sparse.kron(left, sparse.csr_matrix(h2)), right, format="csr")
    H = H + (eta / params.p) * _embed_sparse(SZ, 0, N)
    H = H + (eta / params.q) * (_embed_sparse(SZ, N - 1, N) + params.xi * _embed_sparse(SX, N - 1, N))
    return H.tocsr()


def build_hamiltonian(params, dense_cap=14):
    """Dense Hamiltonian, 2^N x 2^N float64. Guarded by `dense_cap`."""
    if params.N > dense_cap:
        raise SizeCap("dense Hamiltonian requested for N=%d > cap %d" % (params.N, dense_cap))
    return hamiltonian_sparse(params).toarray()


def _right_apply(X, op, site, N):
    # X @ (I (x) op (x) I) without forming the embedded operator
    dim = X.shape[0]
    left = 2**site
    right = 2 ** (N - site - 1)
    Xr = X.reshape(dim * left, 2, right)
    out = np.einsum("ajb,jk->akb", Xr, op, optimize=True)
    return out.reshape(dim, dim)


def _compose_local(blocks, rb, site, N):
    """Aux-space matrix product of accumulated blocks with a local R factor."""
    out = np.empty_like(blocks)
    for alpha in range(2):
        for beta in range(2):
            acc = _right_apply(blocks[alpha, 0], rb[0, beta], site, N)
            acc += _right_apply(blocks[alpha, 1], rb[1, beta], site, N)
            out[alpha, beta] = acc
    return out


def build_transfer_dense(params, u, dense_cap=14):
    """Dense transfer operator t(u); the brute-force oracle.

    Polynomial of degree 2N+2 in u with leading coefficient 2 (as an
    eigenvalue on each invariant ray). Memory is 4 * 4^N complex entries,
    hence the cap.
    """
    N, eta = params.N, params.eta
    if N > dense_cap:
        raise SizeCap("dense transfer operator requested for N=%d > cap %d" % (N, dense_cap))
    dim = 2**N
    th = params.theta_array
    u = complex(u)

    blocks = np.zeros((2, 2, dim, dim), dtype=np.complex128)
    first = r_blocks(u - th[N - 1], eta)
    for alpha in range(2):
        for beta in range(2):
            blocks[alpha, beta] = _embed_sparse(first[alpha, beta], N - 1, N).toarray()
    for j in range(N - 2, -1, -1):
        blocks = _compose_local(blocks, r_blocks(u - th[j], eta), j, N)
    km = k_minus(u, params)
    blocks = np.einsum("agxy,gb->abxy", blocks, km, optimize=True)
    for j in range(N):
        blocks = _compose_local(blocks, r_blocks(u + th[j], eta), j, N)
    kp = k_plus(u, params)
    return np.einsum("ba,abxy->xy", kp, blocks, optimize=True)


@dataclass
class MPO:
    """Matrix product operator; tensors indexed (left, right, out, in)."""

    tensors: list
    spectral_point: complex = None

    @property
    def n_sites(self):
        return len(self.tensors)

    @property
    def bond_dims(self):
        return [t.shape[0] for t in self.tensors] + [self.tensors[-1].shape[1]]

    def to_dense(self, dense_cap=12):
        if self.n_sites > dense_cap:
            raise SizeCap("dense MPO contraction for N=%d > cap %d" % (self.n_sites, dense_cap))
        acc = self.tensors[0][0]  # (D, 2, 2)
        for W in self.tensors[1:]:
            acc = np.einsum("woi,wvOI->voOiI", acc, W, optimize=True)
            D = W.shape[1]
            d = acc.shape[1] * acc.shape[2]
            acc = acc.reshape(D, d, d)
        return acc[0]


def build_transfer_mpo(params, u):
    """Exact MPO for t(u): edge blocks carry the boundary matrices, interior
    bond dimension is 4 (one aux index per monodromy leg)."""
    N, eta = params.N, params.eta
    th = params.theta_array
    u = complex(u)
    tensors = []
    for j in range(N):
        rm = r_blocks(u - th[j], eta)  # leg from the ordered monodromy
        rp = r_blocks(u + th[j], eta)  # leg from the reversed one
        if N == 1:
            km = np.array([params.p + u, params.p - u], dtype=np.complex128)
            kp = k_plus(u, params)
            W = np.zeros((1, 1, 2, 2), dtype=np.complex128)
            for a in range(2):
                for e in range(2):
                    for y in range(2):
                        W[0, 0] += kp[y, a] * km[e] * (rm[a, e] @ rp[e, y])
        elif j == 0:
            km = np.array([params.p + u, params.p - u], dtype=np.complex128)
            W = np.zeros((1, 4, 2, 2), dtype=np.complex128)
            for c in range(2):
                for f in range(2):
                    W[0, 2 * c + f] = km[0] * (rm[c, 0] @ rp[0, f]) + km[1] * (rm[c, 1] @ rp[1, f])
        elif j == N - 1:
            kp = k_plus(u, params)
            W = np.zeros((4, 1, 2, 2), dtype=np.complex128)
            for b in range(2):
                for g in range(2):
                    acc = np.zeros((2, 2), dtype=np.complex128)
                    for a in range(2):
                        for y in range(2):
                            acc += kp[y, a] * (rm[a, b] @ rp[g, y])
                    W[2 * b + g, 0] = acc
        else:
            W = np.zeros((4, 4, 2, 2), dtype=np.complex128)
            for c in range(2):
                for f in range(2):
                    for b in range(2):
                        for g in range(2):
                            W[2 * c + f, 2 * b + g] = rm[b, c] @ rp[f, g]
        tensors.append(W)
    return MPO(tensors, spectral_point=u)
