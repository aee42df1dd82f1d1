"""Exception hierarchy shared by all modules."""


class HarmonicError(Exception):
    """Base class for every error raised by this package."""


class InputError(HarmonicError, ValueError):
    """Invalid arguments, descriptors or violated preconditions on inputs."""


class EmptyBallError(InputError):
    """A ball with no mass was requested on a discrete space."""


class BallEscapesDomain(InputError):
    """A ball is not compactly contained in the working domain."""


class PreconditionError(InputError):
    """An operation was called on data that fails its stated precondition."""


class NumericalError(HarmonicError):
    """A numerical procedure failed (non-convergence, singular system)."""


class ConvergenceError(NumericalError):
    """Fixed-point iteration did not converge; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DegenerateProblem(NumericalError):
    """Linear system is singular or some interior node never reaches the data."""


class EvaluationError(NumericalError):
    """A function produced non-finite values where an integral was requested."""
