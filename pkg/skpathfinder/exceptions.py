################################################################################
#                          skpathfinder.exceptions                             #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8


class PathfinderError(Exception):
    '''
    Base class of every error raised by skpathfinder.
    '''


class DomainError(PathfinderError, ValueError):
    '''
    An argument is outside the domain of the quantity it represents
    (probability outside [0, 1], negative rate...).
    '''


class ConfigError(PathfinderError):
    '''
    Invalid or incomplete simulator configuration.
    '''


class ScheduleFormatError(PathfinderError):
    '''
    A schedule row does not match the expected schema.

    Parameters
    ----------
    message : str
        Description of the problem.

    line : int
        Line number (1-based, header is line 1) of the offending row.

    '''

    def __init__(self, message: str, line: int) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


class DegenerateModelError(PathfinderError):
    '''
    The model has no well defined answer for the given parameters.
    '''


class NoRootError(PathfinderError):
    '''
    No tipping point inside [0, 1]: `W(alpha, theta) - delta` does not change
    sign on the interval.

    Parameters
    ----------
    w_low : float
        Worst-case probability at `alpha = 0`.

    w_high : float
        Worst-case probability at `alpha = 1`.

    '''

    def __init__(self, w_low: float, w_high: float, delta: float) -> None:
        self.w_low  = w_low
        self.w_high = w_high
        self.delta  = delta
        super().__init__(
            f"`delta` = {delta} is not bracketed by W(0) = {w_low:.12g} and "
            f"W(1) = {w_high:.12g}."
        )


class InfeasibleSequenceError(PathfinderError):
    '''
    Offer sequence violates uniqueness, prefix or budget constraints.
    '''
