'''Exception types shared across the package.

Every error raised on purpose derives from PicardkitError, so callers can
catch one base class at the boundary (the CLI does exactly that).
'''


class PicardkitError(Exception):
    '''Base class for all errors raised by this package.'''


class DimensionError(PicardkitError, ValueError):
    '''An array has the wrong shape, or a size limit was exceeded.'''


class ContractError(PicardkitError, ValueError):
    '''An input violates a documented precondition (asymmetry, non-white data, ...).'''


class NotSpdError(PicardkitError):
    '''A matrix required to be symmetric positive definite is not.'''


class SingularityError(PicardkitError):
    '''A matrix that must be invertible is singular to working precision.'''


class DegenerateDataError(PicardkitError):
    '''Data is rank deficient or otherwise unusable (zero variance, dead channel).'''


class LineSearchFailure(PicardkitError):
    '''No step length satisfied the acceptance test within the backtrack budget.'''


class NumericalFailure(PicardkitError):
    '''Non-finite values appeared during iteration.

    Carries the partial iteration trace so callers can persist what was
    computed before the failure.
    '''

    def __init__(self, message, trace=None, iteration=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
        self.iteration = iteration


class UndefinedRateError(PicardkitError):
    '''A convergence-rate estimate was requested from a trace that cannot support one.'''


class FormatError(PicardkitError, ValueError):
    '''A file does not conform to the format it was declared to be in.'''
