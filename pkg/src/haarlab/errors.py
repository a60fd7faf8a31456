"""Exception types raised across haarlab."""


class HaarlabError(Exception):
    """Base class for all library errors."""


class NotAGroup(HaarlabError):
    def __init__(self, reason, triple=None):
        self.reason = reason
        self.triple = triple
        msg = reason if triple is None else f"{reason} at {triple}"
        super().__init__(msg)


class UnsupportedSize(HaarlabError):
    pass


class GroupMismatch(HaarlabError):
    pass


class InfiniteTerm(HaarlabError):
    pass


class NotADensity(HaarlabError):
    def __init__(self, min_value, argmin):
        self.min_value = min_value
        self.argmin = argmin
        super().__init__(f"density minimum {min_value:.3e} at x={argmin:.6f}")


class GridTooCoarse(HaarlabError):
    pass


class QuadratureFailure(HaarlabError):
    pass


class ProfileInvalid(HaarlabError):
    pass


class SizeLimit(HaarlabError):
    pass


class RangeError(HaarlabError):
    pass


class NoConvergence(HaarlabError):
    def __init__(self, last_delta, beta=None):
        self.last_delta = last_delta
        self.beta = beta
        where = "" if beta is None else f" (beta={beta})"
        super().__init__(f"Blahut-Arimoto did not converge{where}; last change {last_delta:.3e}")


class InsufficientData(HaarlabError):
    pass


class PreconditionFailed(HaarlabError):
    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
