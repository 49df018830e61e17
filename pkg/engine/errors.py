class MosqDynError(Exception):
    """Base class for every error raised by the engine."""


class DomainError(MosqDynError, ValueError):
    """A state lies outside the closed positive quadrant or off the simplex."""


class PreconditionError(MosqDynError, ValueError):
    """Parameters or inputs do not meet an operation's precondition."""


class VerificationError(MosqDynError, RuntimeError):
    """A numerical certificate contradicts the expected mathematical result."""


class IntegrationError(MosqDynError, RuntimeError):
    """An ODE iterate became non-finite or drifted towards x = -1."""
