"""Exception hierarchy shared by the solver modules."""


class MA2ScaleError(Exception):
    """Base class for all errors raised by ma2scale."""


class InvalidArgument(MA2ScaleError, ValueError):
    pass


class InvalidData(MA2ScaleError, ValueError):
    pass


class OutOfDomainError(MA2ScaleError, ValueError):
    """A query point lies outside the closure of the computational domain."""


class GeometryError(MA2ScaleError, RuntimeError):
    pass


class AssemblyError(MA2ScaleError, RuntimeError):
    pass


class LinearSolverError(MA2ScaleError, RuntimeError):
    pass


class ConstructionError(MA2ScaleError, RuntimeError):
    pass


class NonConvergenceError(MA2ScaleError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance.

    ``report`` carries whatever the solver produced before giving up (a
    :class:`~ma2scale.solvers.NewtonReport` or a partial field).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
