"""Exception types shared across the package."""


class ScarTowerError(Exception):
    """Base class for all package errors."""


class SiteOutOfGraph(ScarTowerError, IndexError):
    pass


class DimensionCapExceeded(ScarTowerError, ValueError):
    pass


class Unreachable(ScarTowerError, ValueError):
    pass


class DisconnectedSupport(ScarTowerError, ValueError):
    pass


class DisconnectedGraph(ScarTowerError, ValueError):
    pass


class DepthExceeded(ScarTowerError, RuntimeError):
    """Iterated commutator still nonzero at ``max_depth``."""

    def __init__(self, max_depth):
        super().__init__(f"iterated commutator nonzero up to depth {max_depth}")
        self.max_depth = max_depth


class InvalidParticleNumber(ScarTowerError, ValueError):
    pass


class SubsetTooLarge(ScarTowerError, ValueError):
    pass


class TowerTruncated(ScarTowerError, ValueError):
    """``(Q^dag)^p |0>`` vanished; ``last_valid`` is the top of the tower."""

    def __init__(self, last_valid, requested, report=None):
        super().__init__(
            f"tower ends at p={last_valid}; requested p={requested}")
        self.last_valid = last_valid
        self.requested = requested
        self.report = report


class NotParentOfW(ScarTowerError, ValueError):
    """The operator does not have the W state as an eigenstate.

    ``violations`` maps a table-row label to the offending monomials.
    """

    def __init__(self, violations):
        rows = ", ".join(sorted(violations))
        super().__init__(f"W state is not an eigenstate; violated rows: {rows}")
        self.violations = violations


class PackingInsufficient(ScarTowerError, ValueError):
    def __init__(self, achieved, requested):
        super().__init__(
            f"only {achieved} separated sites available, {requested} requested")
        self.achieved = achieved
        self.requested = requested


class ClassConditionViolated(ScarTowerError, ValueError):
    pass


class DimensionMismatch(ScarTowerError, ValueError):
    pass


class ConeTooLarge(ScarTowerError, ValueError):
    pass


class NonRealEnergies(ScarTowerError, ValueError):
    pass
