"""Transfer-operator eigenvalue sampling and nodal reconstruction.

The eigenvalue Lambda(u) attached to a state is a polynomial of degree
2N+2 with leading coefficient 2, so it is pinned down exactly by values
at 2N+2 distinct nodes.  Everything here stays in (log-magnitude, phase)
form: at N = 30 the raw values overflow float64 by a wide margin.

Node sets come in two flavours.  Zero-mode nodes (2N+2 of them) feed the
direct root solver; Bethe-mode nodes (N or 2N) feed the T-Q solvers,
which supply the missing degrees of freedom analytically.  Both sets are
closed under the crossing reflection u -> -u - eta, so a reconstruction
inherits the symmetry of the sampled data instead of fighting it.
"""

import json

import numpy as np

from .algebra import NodalPolynomial, _check_separated, clog, from_clog
from .errors import InvalidVariant, NodeAtPole
from .groundstate import expectation
from .model import ModelParams, build_transfer_mpo

__all__ = [
    "SpectralSamples",
    "make_zero_nodes",
    "make_bethe_nodes",
    "sample_lambda",
    "normalize_samples",
    "denormalize_samples",
    "reconstruct_lambda",
]

RAW = "raw"
DIVIDED = "divided_by_u2N"


class SpectralSamples:
    """Nodes plus sampled eigenvalue data in log form.

    `normalization` is RAW for Lambda(u) itself and DIVIDED for
    Lambda(u) / u^(2N); the division happens on the log data, so the
    container round-trips states whose raw values overflow.
    """

    def __init__(self, params, nodes, log_magnitudes, phases, normalization=RAW):
        nodes = np.asarray(nodes, dtype=np.complex128)
        log_magnitudes = np.asarray(log_magnitudes, dtype=np.float64)
        phases = np.asarray(phases, dtype=np.float64)
        if not (nodes.shape == log_magnitudes.shape == phases.shape):
            raise ValueError("nodes and sample arrays must share one shape")
        if normalization not in (RAW, DIVIDED):
            raise ValueError("unknown normalization %r" % (normalization,))
        self.params = params
        self.nodes = nodes
        self.log_magnitudes = log_magnitudes
        self.phases = phases
        self.normalization = normalization

    def __len__(self):
        return self.nodes.size

    @property
    def values(self):
        """Sampled values as complex numbers; raises Overflow when the
        magnitudes do not fit in float64 (use the log fields instead)."""
        return from_clog(self.log_magnitudes, self.phases)

    def to_json(self):
        p = self.params
        doc = {
            "params": {
                "N": p.N,
                "p": p.p,
                "q": p.q,
                "xi": p.xi,
                "eta": p.eta,
                "thetas": list(p.thetas),
            },
            "normalization": self.normalization,
            "nodes": [[z.real, z.imag] for z in self.nodes],
            "log_values": [
                [m, t] for m, t in zip(self.log_magnitudes, self.phases)
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        params = ModelParams(**doc["params"])
        nodes = np.array([complex(re, im) for re, im in doc["nodes"]])
        logs = np.asarray(doc["log_values"], dtype=np.float64)
        return cls(params, nodes, logs[:, 0], logs[:, 1], doc["normalization"])


def _with_reflections(upper, eta):
    """Append the crossing images -x - eta and check separation."""
    nodes = np.concatenate([upper, -upper - eta])
    _check_separated(nodes, "nodes")
    return nodes


def make_zero_nodes(N, eta, k=1.05):
    """2N+2 nodes on and around the symmetry line Re u = eta/2.

    N+1 representatives sit at eta/2 + i*t_j with t_j an odd power-law
    ramp through zero; the exponent k in [1, 1.1] crowds them toward the
    real axis where the zero roots accumulate.  The last representative
    is nudged off the ramp so no two nodes collide after reflection.
    """
    if N < 2 or N % 2:
        raise ValueError("N must be an even integer >= 2")
    if not 1.0 <= k <= 1.1:
        raise ValueError("k must lie in [1, 1.1]")
    j = np.arange(1, N + 1)
    ramp = np.sign(j - N / 2) * np.abs(j - N / 2) ** k / N
    top = (N / 2 + 1) ** k / N * (1 + 1e-3)
    t = np.concatenate([ramp, [top]])
    upper = eta / 2 + 1j * t
    return _with_reflections(upper, eta)


def make_bethe_nodes(N, eta, k=1.05, t=None, variant="homogeneous"):
    """Sampling nodes for the T-Q solvers.

    homogeneous: N nodes hugging the Bethe line Re u = -eta/2, where the
        ground-state roots of the untilted chain live.
    inhomogeneous: those N plus N real-axis nodes j + t (j > N/2); the
        real family deliberately steps in units of 1 so that eta-shifted
        arguments land on neighbouring nodes when eta = 1, which the T-Q
        linear system resolves exactly instead of interpolating.
    inhomogeneous-vertical: fallback second family on the vertical line
        Re u = t, for parameter points where the real-axis family sits
        too close to a root.
    """
    if N < 2 or N % 2:
        raise ValueError("N must be an even integer >= 2")
    if not 1.0 <= k <= 1.1:
        raise ValueError("k must lie in [1, 1.1]")
    j = np.arange(1, N // 2 + 1)
    central = -eta / 2 + 1j * j**k / N
    if variant == "homogeneous":
        return _with_reflections(central, eta)
    if t is None:
        t = N / 8.0
    jj = np.arange(N // 2 + 1, N + 1)
    if variant == "inhomogeneous":
        if not 0 < t:
            raise ValueError("offset t must be positive")
        second = (jj + t).astype(np.complex128)
    elif variant == "inhomogeneous-vertical":
        second = t + 1j * (jj - N // 2) - 1j * (N / 4.0)
    else:
        raise InvalidVariant("unknown node variant %r" % (variant,))
    return _with_reflections(np.concatenate([central, second]), eta)


def sample_lambda(psi, params, nodes):
    """Evaluate <psi| t(u) |psi> at each node.

    `psi` must be the normalized eigenstate (an MPS); the quadratic form
    then equals the transfer eigenvalue.  One MPO build per node; cost
    is dominated by the N contractions at bond dimension 4.
    """
    nodes = np.asarray(nodes, dtype=np.complex128)
    logmag = np.empty(nodes.shape, dtype=np.float64)
    phase = np.empty(nodes.shape, dtype=np.float64)
    for i, u in enumerate(nodes.ravel()):
        val = expectation(psi, build_transfer_mpo(params, u))
        m, t = clog(val)
        logmag.ravel()[i] = m
        phase.ravel()[i] = t
    return SpectralSamples(params, nodes, logmag, phase, RAW)


def normalize_samples(samples):
    """Divide by u^(2N) in log space; nodes at u = 0 have no image."""
    if samples.normalization == DIVIDED:
        return samples
    return _rescale(samples, -1, DIVIDED)


def denormalize_samples(samples):
    """Undo normalize_samples."""
    if samples.normalization == RAW:
        return samples
    return _rescale(samples, +1, RAW)


def _rescale(samples, sign, tag):
    mag = np.abs(samples.nodes)
    if (mag == 0).any():
        raise NodeAtPole("cannot divide samples by u^(2N) at u = 0")
    two_n = 2 * samples.params.N
    logmag = samples.log_magnitudes + sign * two_n * np.log(mag)
    phase = samples.phases + sign * two_n * np.angle(samples.nodes)
    return SpectralSamples(samples.params, samples.nodes, logmag, phase, tag)


def reconstruct_lambda(samples):
    """Degree-(2N+2) nodal form of Lambda(u) with leading coefficient 2.

    Needs raw samples at exactly 2N+2 nodes; the leading coefficient is
    a model identity, not a fit parameter, so only 2N+2 values are
    required even though the polynomial has 2N+3 coefficients.
    """
    if samples.normalization != RAW:
        samples = denormalize_samples(samples)
    want = 2 * samples.params.N + 2
    if len(samples) != want:
        raise ValueError(
            "need %d nodes to reconstruct Lambda, got %d" % (want, len(samples))
        )
    return NodalPolynomial(
        samples.nodes,
        log_values=(samples.log_magnitudes, samples.phases),
        leading=2.0,
    )
