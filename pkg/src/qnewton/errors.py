"""Exception hierarchy shared by all modules."""


class WorkbenchError(Exception):
    """Base class for every error raised by qnewton."""


# linear algebra
class NonHermitianError(WorkbenchError, ValueError):
    pass


class NoConvergenceError(WorkbenchError, RuntimeError):
    pass


class SingularMatrixError(WorkbenchError, ValueError):
    pass


class NonFiniteError(WorkbenchError, ValueError):
    pass


# simulator
class ZeroVectorError(WorkbenchError, ValueError):
    pass


class IndexOutOfRangeError(WorkbenchError, IndexError):
    pass


class DuplicateIndexError(WorkbenchError, ValueError):
    pass


class NonUnitaryError(WorkbenchError, ValueError):
    pass


class DimensionMismatchError(WorkbenchError, ValueError):
    pass


class ZeroProbabilityError(WorkbenchError, RuntimeError):
    """Post-selection projected onto a (numerically) empty subspace."""


class WidthExceededError(WorkbenchError, MemoryError):
    pass


# arithmetic
class ProductRegisterNotZeroError(WorkbenchError, ValueError):
    pass


# QLSS
class NotPositiveDefiniteError(WorkbenchError, ValueError):
    pass


class RangeViolationError(WorkbenchError, ValueError):
    """An eigenvalue does not fit the fixed-point clock register."""


class OutOfRangeError(WorkbenchError, ValueError):
    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


class DegenerateDirectionError(WorkbenchError, ValueError):
    pass


# Newton / iterative solvers
class ZeroDiagonalError(WorkbenchError, ValueError):
    pass


class LinearSolveFailedError(WorkbenchError, RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DivergedError(WorkbenchError, RuntimeError):
    pass
