"""Exception hierarchy shared by all solvers."""


class TournamentError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TournamentError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class QuadratureError(TournamentError):
    """A numerical integral failed to converge to the requested tolerance."""


class InvalidReward(TournamentError, ValueError):
    """A reward candidate violates the structural requirements (monotonicity, bounds)."""


class UnboundedValue(TournamentError):
    """The optimisation problem has infinite value (normaliser or welfare diverges)."""


class SolverError(TournamentError):
    """A root finder or optimiser could not bracket or converge."""


class NotAttainable(TournamentError):
    """The target distribution cannot arise as an equilibrium of a rank-based reward."""


class NotFeasible(TournamentError):
    """No reward meets the reservation-utility and budget constraints.

    Attributes
    ----------
    entropy : float
        Relative entropy of the target with respect to the zero-effort law.
    bound : float
        Largest admissible entropy, ``(K - V0) / (2 c sigma^2)``.
    """

    def __init__(self, message, entropy, bound):
        super().__init__(message)
        self.entropy = entropy
        self.bound = bound


class TrivialPoA(TournamentError):
    """Price of anarchy requested for a purely rank-based reward."""


class ConfigError(TournamentError, ValueError):
    """A run configuration is missing a field or has an invalid value."""
