"""Error types raised across the package.

Most of these carry diagnostic payloads so pipeline drivers can decide
between retrying (different nodes, more sweeps) and giving up.
"""


class RootlabError(Exception):
    """Base class for everything raised deliberately by this package."""


class DuplicateNodes(RootlabError, ValueError):
    """Two interpolation nodes closer than the separation floor."""


class NodeAtPole(RootlabError, ValueError):
    """A sampling node sits on a forbidden point (0, -eta, -eta/2)."""


class PoleAt(RootlabError, ZeroDivisionError):
    """Scalar function evaluated at one of its poles."""


class Overflow(RootlabError, OverflowError):
    """A value left the representable range; use the log-form API instead."""


class DegenerateGuesses(RootlabError, ValueError):
    """Two root-iteration starting guesses coincide."""


class NoConvergence(RootlabError, RuntimeError):
    """Iteration cap reached. Carries the best iterate in .diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnpairableRoot(RootlabError, ValueError):
    """A root has no reflection partner within tolerance."""


class SizeCap(RootlabError, ValueError):
    """Dense construction requested above the configured size cap."""


class NotHermitian(RootlabError, ValueError):
    """Matrix handed to the eigensolver is not Hermitian."""


class ShapeMismatch(RootlabError, ValueError):
    """Tensor network operands disagree on length or local dimension."""


class ZeroOnContour(RootlabError, ArithmeticError):
    """|Lambda| vanishes on an argument-principle probe point."""


class NeverDetected(RootlabError, RuntimeError):
    """Accuracy ladder failed at its starting radius already."""


class MultipleRoot(RootlabError, ArithmeticError):
    """Derivative vanishes at a root; ratio formulas are undefined."""


class RootAtPole(RootlabError, ValueError):
    """A root sits on a pole of the energy formula (0 or -eta)."""


class PoleInRatio(RootlabError, ArithmeticError):
    """Q vanishes at a shifted root, so the ratio check is undefined."""


class AmbiguousPattern(RootlabError, ValueError):
    """Root census fits more than one region. Candidates in .candidates."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class InvalidVariant(RootlabError, ValueError):
    """Unknown node-placement variant name."""


class NonMonotoneQuantumNumbers(RootlabError, ValueError):
    """Bethe quantum numbers must be strictly increasing."""


class SingularSystem(RootlabError, ArithmeticError):
    """T-Q linear system condition estimate beyond the trust threshold."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
