"""Ground states: dense diagonalization oracle and a two-site DMRG engine.

The DMRG side is deliberately plain: real float64 tensors, two-site
updates, truncation by the stricter of a bond cap and a discarded-weight
cap, ARPACK for the local eigenproblems. Everything the spectral pipelines
need afterwards is an MPS plus `expectation` against an MPO.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import NoConvergence, NotHermitian, ShapeMismatch, SizeCap
from .model import ID2, MPO, SX, SZ, hamiltonian_sparse

_DENSE_EIGH_DIM = 2048


class MPS:
    """Open-boundary matrix product state; tensors are (left, phys, right).

    `center` tracks the orthogonality center: tensors strictly left of it
    are left isometries, tensors strictly right are right isometries.
    """

    def __init__(self, tensors, center=0):
        self.tensors = [np.asarray(t) for t in tensors]
        for i, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != 2:
                raise ShapeMismatch("site %d tensor has shape %s" % (i, t.shape))
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ShapeMismatch("edge bonds must have dimension 1")
        self.center = int(center)

    @property
    def n_sites(self):
        return len(self.tensors)

    @property
    def bond_dims(self):
        return [t.shape[0] for t in self.tensors] + [1]

    def copy(self):
        return MPS([t.copy() for t in self.tensors], center=self.center)

    @classmethod
    def random_product(cls, n_sites, seed=0):
        """Seeded random product state (bond dimension 1)."""
        rng = np.random.default_rng(seed)
        tensors = []
        for _ in range(n_sites):
            v = rng.normal(size=2)
            v /= np.linalg.norm(v)
            tensors.append(v.reshape(1, 2, 1))
        return cls(tensors, center=0)

    @classmethod
    def from_dense(cls, vec, rank_tol=1e-14):
        """Exact MPS from a state vector by sequential SVD splits."""
        vec = np.asarray(vec).ravel()
        n = int(np.log2(vec.size))
        if 2**n != vec.size:
            raise ShapeMismatch("vector length %d is not a power of two" % vec.size)
        vec = vec / np.linalg.norm(vec)
        tensors = []
        rest = vec.reshape(1, -1)
        for _ in range(n - 1):
            dl = rest.shape[0]
            m = rest.reshape(dl * 2, -1)
            u, s, vh = np.linalg.svd(m, full_matrices=False)
            keep = max(1, int(np.sum(s > rank_tol * s[0])))
            tensors.append(u[:, :keep].reshape(dl, 2, keep))
            rest = (s[:keep, None] * vh[:keep]).reshape(keep, -1)
        tensors.append(rest.reshape(-1, 2, 1))
        return cls(tensors, center=n - 1)

    def to_dense(self, dense_cap=20):
        if self.n_sites > dense_cap:
            raise SizeCap("dense state for N=%d > cap %d" % (self.n_sites, dense_cap))
        acc = self.tensors[0].reshape(2, -1)
        for t in self.tensors[1:]:
            acc = np.tensordot(acc, t, axes=([1], [0]))
            acc = acc.reshape(-1, t.shape[2])
        return acc.ravel()

    def norm(self):
        env = np.ones((1, 1))
        for t in self.tensors:
            tmp = np.tensordot(env, np.conj(t), axes=([0], [0]))
            env = np.tensordot(tmp, t, axes=([0, 1], [0, 1]))
        return float(np.sqrt(np.abs(env[0, 0])))

    def canonicalize(self, center):
        """QR sweeps putting the orthogonality center at `center`."""
        n = self.n_sites
        if not 0 <= center < n:
            raise ValueError("center out of range")
        for i in range(center):
            dl, _, dr = self.tensors[i].shape
            q, r = np.linalg.qr(self.tensors[i].reshape(dl * 2, dr))
            self.tensors[i] = q.reshape(dl, 2, -1)
            self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=([1], [0]))
        for i in range(n - 1, center, -1):
            dl, _, dr = self.tensors[i].shape
            q, r = np.linalg.qr(self.tensors[i].reshape(dl, 2 * dr).T)
            self.tensors[i] = q.T.reshape(-1, 2, dr)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=([2], [0]))
        self.center = center
        nrm = np.linalg.norm(self.tensors[center])
        if nrm > 0:
            self.tensors[center] = self.tensors[center] / nrm
        return self

    def isometry_defects(self):
        """Max deviation from the expected isometry condition per site."""
        out = []
        for i, t in enumerate(self.tensors):
            dl, _, dr = t.shape
            if i < self.center:
                m = t.reshape(dl * 2, dr)
                out.append(float(np.max(np.abs(m.conj().T @ m - np.eye(dr)))))
            elif i > self.center:
                m = t.reshape(dl, 2 * dr)
                out.append(float(np.max(np.abs(m @ m.conj().T - np.eye(dl)))))
            else:
                out.append(abs(np.linalg.norm(t) - 1.0))
        return out


def save_mps(psi, path, metadata=None):
    """Checkpoint an MPS to a .npz container.

    Layout (documented in docs/formats.md): members `tensor_<i>` hold the
    row-major site tensors with their shape headers, `center` the
    orthogonality center, `meta` a JSON string with caller metadata.
    """
    arrays = {"tensor_%05d" % i: t for i, t in enumerate(psi.tensors)}
    arrays["center"] = np.asarray(psi.center)
    arrays["meta"] = np.asarray(json.dumps(metadata or {}))
    np.savez(path, **arrays)


def load_mps(path):
    with np.load(path, allow_pickle=False) as data:
        keys = sorted(k for k in data.files if k.startswith("tensor_"))
        tensors = [data[k] for k in keys]
        center = int(data["center"])
        meta = json.loads(str(data["meta"]))
    return MPS(tensors, center=center), meta


def hamiltonian_mpo(params):
    """Bond dimension 5 MPO for the open chain Hamiltonian (real tensors)."""
    n, eta = params.N, params.eta
    sp = np.array([[0.0, 1.0], [0.0, 0.0]])  # raising
    sm = sp.T.copy()
    onsite = [np.zeros((2, 2)) for _ in range(n)]
    onsite[0] = onsite[0] + (eta / params.p) * SZ
    onsite[n - 1] = onsite[n - 1] + (eta / params.q) * (SZ + params.xi * SX)
    w = np.zeros((5, 5, 2, 2))
    w[0, 0] = ID2
    w[1, 0] = sm
    w[2, 0] = sp
    w[3, 0] = SZ
    w[4, 1] = 2.0 * sp
    w[4, 2] = 2.0 * sm
    w[4, 3] = SZ
    w[4, 4] = ID2
    tensors = []
    for i in range(n):
        wi = w.copy()
        wi[4, 0] = onsite[i]
        if i == 0:
            wi = wi[4:5, :]
        elif i == n - 1:
            wi = wi[:, 0:1]
        tensors.append(wi)
    return MPO(tensors)


@dataclass
class ExactGroundState:
    energy: float
    vector: np.ndarray = field(repr=False)
    gap: float
    degenerate: bool


def exact_ground_state(H, gap_tol=1e-10):
    """Smallest eigenpair of a Hermitian operator, dense or sparse.

    Full eigh below dimension 2048, Lanczos (k=4, smallest algebraic)
    above. Returns the gap so degenerate ground spaces can be flagged.
    """
    dim = H.shape[0]
    if dim > 2**14:
        raise SizeCap("exact diagonalization capped at dimension 2^14")
    if sparse.issparse(H):
        defect = float(np.abs(H - H.conj().T).max()) if H.nnz else 0.0
        scale = float(np.abs(H).max()) if H.nnz else 1.0
    else:
        defect = float(np.max(np.abs(H - np.conj(H.T))))
        scale = float(np.max(np.abs(H)))
    if defect > 1e-10 * max(scale, 1.0):
        raise NotHermitian("Hermiticity defect %.3e" % defect)
    if dim <= _DENSE_EIGH_DIM and not sparse.issparse(H):
        vals, vecs = eigh(H)
        e0, gap = float(vals[0]), float(vals[1] - vals[0])
        vec = vecs[:, 0]
    else:
        Hs = H if sparse.issparse(H) else sparse.csr_matrix(H)
        k = min(4, dim - 2)
        vals, vecs = eigsh(Hs, k=k, which="SA")
        order = np.argsort(vals)
        e0, gap = float(vals[order[0]]), float(vals[order[1]] - vals[order[0]])
        vec = vecs[:, order[0]]
    return ExactGroundState(energy=e0, vector=vec, gap=gap, degenerate=bool(gap < gap_tol))


# ---------------------------------------------------------------------------
# DMRG


@dataclass
class DmrgOptions:
    max_bond: int = 200
    truncation: float = 1e-12
    min_sweeps: int = 30
    max_sweeps: int = 80
    energy_tol: float = 1e-14
    seed: int = 1
    local_iters: int = 100
    local_tol: float = 1e-14
    estimate_gap: bool = True
    gap_sweeps: int = 2
    gap_flag_tol: float = 1e-8
    raise_on_failure: bool = True


@dataclass
class DmrgResult:
    energy: float
    psi: MPS = field(repr=False)
    sweep_energies: list
    converged: bool
    max_truncation: float
    gap: float = None
    degenerate: bool = None


def _env_left(env, t, w):
    tmp = np.tensordot(np.conj(t), env, axes=([0], [0]))  # (p,i,w,c)
    tmp = np.tensordot(tmp, w, axes=([0, 2], [2, 0]))  # (i,c,v,q)
    return np.tensordot(tmp, t, axes=([1, 3], [0, 1]))  # (i,v,j)


def _env_right(env, t, w):
    tmp = np.tensordot(np.conj(t), env, axes=([2], [0]))  # (a,p,w,c)
    tmp = np.tensordot(tmp, w, axes=([1, 2], [2, 1]))  # (a,c,wl,q)
    return np.tensordot(tmp, t, axes=([1, 3], [2, 1]))  # (a,wl,cl)


def _matvec_two_site(env_l, w1, w2, env_r, x):
    tmp = np.tensordot(env_l, x, axes=([2], [0]))  # (a,w,i1,i2,d)
    tmp = np.tensordot(tmp, w1, axes=([1, 2], [0, 3]))  # (a,i2,d,v,o1)
    tmp = np.tensordot(tmp, w2, axes=([1, 3], [3, 0]))  # (a,d,o1,y,o2)
    return np.tensordot(tmp, env_r, axes=([1, 3], [2, 1]))  # (a,o1,o2,b)


def _solve_local(env_l, w1, w2, env_r, v0, opts, penalty=None):
    shape = v0.shape
    dim = v0.size

    def mv(x):
        y = _matvec_two_site(env_l, w1, w2, env_r, x.reshape(shape))
        if penalty is not None:
            weight, o = penalty
            y = y + weight * o * np.vdot(o, x.reshape(shape)).real
        return y.ravel()

    if dim <= 32:
        dense = np.empty((dim, dim))
        eye = np.eye(dim)
        for i in range(dim):
            dense[:, i] = mv(eye[:, i])
        vals, vecs = eigh(dense)
        return float(vals[0]), vecs[:, 0].reshape(shape)
    op = LinearOperator((dim, dim), matvec=mv, dtype=np.float64)
    try:
        vals, vecs = eigsh(
            op, k=1, which="SA", v0=v0.ravel(), maxiter=opts.local_iters, tol=opts.local_tol
        )
    except ArpackNoConvergence as err:
        if len(err.eigenvalues):
            vals, vecs = err.eigenvalues, err.eigenvectors
        else:  # keep the current block; the next sweep retries
            e0 = float(np.vdot(v0.ravel(), mv(v0.ravel())).real)
            return e0, v0
    return float(vals[0]), vecs[:, 0].reshape(shape)


def _truncate_svd(theta, max_bond, trunc_cap):
    u, s, vh = np.linalg.svd(theta, full_matrices=False)
    total = float(np.sum(s**2))
    tail = np.cumsum(s[::-1] ** 2)[::-1]  # tail[k] = sum_{i>=k} s_i^2
    keep = int(np.searchsorted(-tail, -trunc_cap * total))  # first k with tail <= cap
    keep = max(1, min(keep if keep > 0 else 1, max_bond, s.size))
    discarded = float(tail[keep] / total) if keep < s.size else 0.0
    s_kept = s[:keep]
    s_kept = s_kept / np.linalg.norm(s_kept)
    return u[:, :keep], s_kept, vh[:keep], discarded


def dmrg_ground_state(mpo, opts=None, psi0=None, _penalty_state=None):
    """Two-site DMRG minimization of a Hermitian MPO.

    Sweeps (one sweep = a full right-then-left pass) continue until the
    energy change between consecutive sweeps drops below
    energy_tol * max(1, |E|), with at least `min_sweeps` sweeps. The energy
    sequence is recorded; with two-site updates and dual truncation criteria
    it is non-increasing up to roundoff.
    """
    opts = opts or DmrgOptions()
    n = mpo.n_sites
    if psi0 is None:
        psi = MPS.random_product(n, seed=opts.seed)
    else:
        psi = psi0.copy()
    psi.canonicalize(0)

    penalty_envs = None
    if _penalty_state is not None:
        weight, psi_ref = _penalty_state
        psi_ref = psi_ref.copy()
        psi_ref.canonicalize(0)

    env_l = [None] * (n + 1)
    env_r = [None] * (n + 1)
    env_l[0] = np.ones((1, 1, 1))
    env_r[n] = np.ones((1, 1, 1))
    for k in range(n - 1, 1 - 1, -1):
        env_r[k] = _env_right(env_r[k + 1], psi.tensors[k], mpo.tensors[k])

    if _penalty_state is not None:
        ol = [None] * (n + 1)
        og = [None] * (n + 1)
        ol[0] = np.ones((1, 1))
        og[n] = np.ones((1, 1))
        for k in range(n - 1, 1 - 1, -1):
            og[k] = np.einsum(
                "apb,cpd,bd->ac", np.conj(psi.tensors[k]), psi_ref.tensors[k], og[k + 1]
            )
        penalty_envs = (ol, og)

    def local_penalty(k):
        if penalty_envs is None:
            return None
        ol, og = penalty_envs
        o = np.einsum(
            "ac,cpm,mqd,bd->apqb",
            ol[k],
            psi_ref.tensors[k],
            psi_ref.tensors[k + 1],
            og[k + 2],
            optimize=True,
        )
        return (weight, o)

    energies = []
    max_disc = 0.0
    e_prev = np.inf
    converged = False
    sweeps_done = 0
    for sweep in range(1, opts.max_sweeps + 1):
        e_local = np.inf
        for k in range(n - 1):  # rightward pass
            v0 = np.tensordot(psi.tensors[k], psi.tensors[k + 1], axes=([2], [0]))
            e_local, y = _solve_local(
                env_l[k], mpo.tensors[k], mpo.tensors[k + 1], env_r[k + 2], v0, opts, local_penalty(k)
            )
            dl, dr = y.shape[0], y.shape[3]
            u, s, vh, disc = _truncate_svd(y.reshape(dl * 2, 2 * dr), opts.max_bond, opts.truncation)
            max_disc = max(max_disc, disc)
            psi.tensors[k] = u.reshape(dl, 2, -1)
            psi.tensors[k + 1] = (s[:, None] * vh).reshape(-1, 2, dr)
            psi.center = k + 1
            env_l[k + 1] = _env_left(env_l[k], psi.tensors[k], mpo.tensors[k])
            if penalty_envs is not None:
                ol, og = penalty_envs
                ol[k + 1] = np.einsum(
                    "ac,apb,cpd->bd", ol[k], np.conj(psi.tensors[k]), psi_ref.tensors[k]
                )
        for k in range(n - 2, -1, -1):  # leftward pass
            v0 = np.tensordot(psi.tensors[k], psi.tensors[k + 1], axes=([2], [0]))
            e_local, y = _solve_local(
                env_l[k], mpo.tensors[k], mpo.tensors[k + 1], env_r[k + 2], v0, opts, local_penalty(k)
            )
            dl, dr = y.shape[0], y.shape[3]
            u, s, vh, disc = _truncate_svd(y.reshape(dl * 2, 2 * dr), opts.max_bond, opts.truncation)
            max_disc = max(max_disc, disc)
            psi.tensors[k + 1] = vh.reshape(-1, 2, dr)
            psi.tensors[k] = (u * s[None, :]).reshape(dl, 2, -1)
            psi.center = k
            env_r[k + 1] = _env_right(env_r[k + 2], psi.tensors[k + 1], mpo.tensors[k + 1])
            if penalty_envs is not None:
                ol, og = penalty_envs
                og[k + 1] = np.einsum(
                    "apb,cpd,bd->ac", np.conj(psi.tensors[k + 1]), psi_ref.tensors[k + 1], og[k + 2]
                )
        energies.append(e_local)
        sweeps_done = sweep
        if sweep >= opts.min_sweeps and abs(e_local - e_prev) <= opts.energy_tol * max(1.0, abs(e_local)):
            converged = True
            break
        e_prev = e_local

    result = DmrgResult(
        energy=energies[-1],
        psi=psi,
        sweep_energies=energies,
        converged=converged,
        max_truncation=max_disc,
    )
    if not converged and opts.raise_on_failure and _penalty_state is None:
        raise NoConvergence(
            "DMRG energy still moving after %d sweeps (|dE|=%.3e)"
            % (sweeps_done, abs(energies[-1] - e_prev)),
            diagnostics={"result": result},
        )
    if _penalty_state is None and opts.estimate_gap:
        e1 = _excited_energy(mpo, result, opts)
        result.gap = e1 - result.energy
        result.degenerate = bool(result.gap < opts.gap_flag_tol)
    return result


def _excited_energy(mpo, ground, opts):
    """Cheap first-excited estimate: re-run a few sweeps with an
    orthogonality penalty against the converged ground state."""
    weight = 20.0 * max(1.0, abs(ground.energy))
    sub = DmrgOptions(
        max_bond=opts.max_bond,
        truncation=opts.truncation,
        min_sweeps=opts.gap_sweeps,
        max_sweeps=opts.gap_sweeps,
        energy_tol=opts.energy_tol,
        seed=opts.seed + 1,
        local_iters=opts.local_iters,
        local_tol=opts.local_tol,
        estimate_gap=False,
        raise_on_failure=False,
    )
    res = dmrg_ground_state(mpo, sub, _penalty_state=(weight, ground.psi))
    return expectation(res.psi, mpo).real


def expectation(psi, mpo):
    """<psi| MPO |psi> for a normalized MPS; complex in general."""
    if psi.n_sites != mpo.n_sites:
        raise ShapeMismatch("state has %d sites, operator %d" % (psi.n_sites, mpo.n_sites))
    env = np.ones((1, 1, 1))
    for t, w in zip(psi.tensors, mpo.tensors):
        if w.shape[2] != 2 or t.shape[1] != 2:
            raise ShapeMismatch("local dimension must be 2")
        env = _env_left(env, t, w)
    return complex(env[0, 0, 0])


@dataclass
class GroundStateResult:
    energy: float
    psi: MPS = field(repr=False)
    backend: str
    gap: float = None
    degenerate: bool = None
    info: dict = None


def ground_state_mps(params, backend="auto", dmrg_opts=None, exact_cap=12):
    """Ground state as an MPS, by exact diagonalization (N <= exact_cap)
    or DMRG. The exact branch is the oracle the DMRG branch is tested
    against."""
    if backend == "auto":
        backend = "exact" if params.N <= exact_cap else "dmrg"
    if backend == "exact":
        gs = exact_ground_state(hamiltonian_sparse(params))
        psi = MPS.from_dense(gs.vector)
        return GroundStateResult(
            energy=gs.energy, psi=psi, backend="exact", gap=gs.gap, degenerate=gs.degenerate,
            info={"dim": 2**params.N},
        )
    if backend != "dmrg":
        raise ValueError("unknown backend %r" % backend)
    res = dmrg_ground_state(hamiltonian_mpo(params), dmrg_opts or DmrgOptions())
    return GroundStateResult(
        energy=res.energy, psi=res.psi, backend="dmrg", gap=res.gap, degenerate=res.degenerate,
        info={
            "sweeps": len(res.sweep_energies),
            "max_truncation": res.max_truncation,
            "converged": res.converged,
        },
    )
