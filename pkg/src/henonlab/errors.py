"""Exception types shared across the package."""


class HenonLabError(Exception):
    """Base class for all package errors."""


class NotRenormalizable(HenonLabError):
    pass


class NoConvergence(HenonLabError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DepthUnreachable(HenonLabError):
    def __init__(self, level, reason=""):
        super().__init__(f"renormalization fails at level {level}: {reason}")
        self.level = level


class OutOfDomain(HenonLabError):
    pass


class ThicknessTooLarge(HenonLabError):
    def __init__(self, eps_bound, limit):
        super().__init__(f"thickness {eps_bound:.3g} exceeds the admissible bound {limit:.3g}")
        self.eps_bound = eps_bound


class NotContracted(HenonLabError):
    pass


class JacobianVanished(HenonLabError):
    pass


class InsufficientDepth(HenonLabError):
    pass


class EmptyIntersection(HenonLabError):
    def __init__(self, word):
        super().__init__(f"piece {word} misses its canonical parent")
        self.word = word


class DegenerateVerticalPair(HenonLabError):
    pass


class NoConcavityWindow(HenonLabError):
    pass


class DepthExhausted(HenonLabError):
    pass


class AddressUnavailable(HenonLabError):
    pass


class NoVerticalAlignment(HenonLabError):
    pass


class OverlapAbsent(HenonLabError):
    pass


class NotDisjoint(HenonLabError):
    pass


class WrongOrder(HenonLabError):
    pass


class EmptyRange(HenonLabError):
    pass


class ThresholdNotFound(HenonLabError):
    pass


class ConfigError(HenonLabError):
    pass
