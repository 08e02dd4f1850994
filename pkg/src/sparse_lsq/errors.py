"""Exception types shared across the package."""


class SparseLsqError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(SparseLsqError, ValueError):
    """Operand shapes are inconsistent."""


class NonFiniteError(SparseLsqError, ValueError):
    """An input contains NaN or infinite entries."""


class RankRangeError(SparseLsqError, ValueError):
    """Rank parameter k outside the admissible range 1 <= k < rank."""


class BudgetError(SparseLsqError, ValueError):
    """Sparsity budget r outside the admissible range."""


class OrthonormalityError(SparseLsqError, ValueError):
    """A matrix required to have orthonormal rows or columns does not."""


class IterationFailureError(SparseLsqError, RuntimeError):
    """The iterative eigensolver backing the SVD failed to converge."""


class BarrierViolationError(SparseLsqError, ArithmeticError):
    """Barrier shift is not strictly below the spectrum it must track."""


class DivisionDegeneracyError(SparseLsqError, ArithmeticError):
    """Potential difference in the lower barrier is not positive."""


class InfeasibleStepError(SparseLsqError, RuntimeError):
    """No column satisfies the dual-set selection rule at some step.

    Theory guarantees a feasible column always exists for valid inputs, so
    this signals an implementation or input-conditioning bug.  Carries the
    failing step and the best (largest) lower-minus-upper gap observed.
    """

    def __init__(self, step, best_gap):
        self.step = int(step)
        self.best_gap = float(best_gap)
        super().__init__(
            f"no feasible column at step {self.step} "
            f"(max lower-upper gap {self.best_gap:.3e})"
        )


class SamplingContractError(SparseLsqError, RuntimeError):
    """A sampler's output violated its own guarantee; indicates a bug."""


class ParseError(SparseLsqError, ValueError):
    """A problem file could not be parsed; carries path and line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = int(line_no)
        super().__init__(f"{self.path}:{self.line_no}: {message}")
