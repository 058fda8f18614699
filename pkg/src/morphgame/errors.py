"""Exception hierarchy.

Every error carries the CLI exit code it maps to.
"""


class MorphGameError(Exception):
    exit_code = 1


class SolverError(MorphGameError):
    exit_code = 2


class NotHurwitz(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class NotStabilizable(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class LostStability(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class SingularGram(SolverError):
    pass


class DivergedTrajectory(MorphGameError):
    exit_code = 3


class NonFiniteState(DivergedTrajectory):
    pass


class ConfigError(MorphGameError):
    exit_code = 4


class OutOfEnvelope(MorphGameError, ValueError):
    pass


class DegenerateState(MorphGameError, ValueError):
    pass


class OutOfRange(MorphGameError, ValueError):
    pass


class NotSimplex(MorphGameError, ValueError):
    pass


class InsufficientData(MorphGameError):
    pass


class MismatchedGrids(MorphGameError, ValueError):
    pass
