"""Exception hierarchy shared by all hotspot modules."""


class HotspotError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(HotspotError, ValueError):
    """A ModelParams / config invariant is violated.

    ``problems`` holds every violation found, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class PositivityError(HotspotError):
    """A field value that must stay positive is not."""


class SeparationError(HotspotError, ValueError):
    """Spike positions are not strictly separated inside the domain."""


class SingularSystemError(HotspotError):
    """A linear or Newton system could not be solved."""


class ConsistencyError(HotspotError):
    """Two independent evaluations of the same identity disagree."""


class DivergenceError(HotspotError):
    """Time stepping blew up or the step size underflowed."""
