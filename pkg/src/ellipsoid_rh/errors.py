"""Exception types raised by the solvers.

Every error derives from :class:`RHError` so callers (notably the CLI) can
separate numerical failures from programming mistakes.
"""


class RHError(Exception):
    """Base class for all library errors."""


class PoleSingularity(RHError):
    """A quantity that diverges at a pole was evaluated exactly there."""


class GridTooCoarse(RHError):
    """The latitude grid cannot resolve the requested operation."""


class GridMismatch(RHError):
    """Two fields live on incompatible grids."""


class InvalidMode(RHError):
    pass


class InsufficientSamples(RHError):
    pass


class QuadratureBreakdown(RHError):
    """The triangular Volterra system is numerically singular."""


class ResolventVanishing(RHError):
    """S(0, -pi/2) vanished, so the free constant cannot pin g(0) = 0."""


class NonvanishingAtOrigin(RHError):
    pass


class AdmissibilityFailure(RHError):
    def __init__(self, message, row=None, cell=None):
        super().__init__(message)
        self.row = row
        self.cell = cell


class ModeMismatch(RHError):
    """A zonal profile was solved for a different eigenvalue."""


class ResonantMode(RHError):
    """The zonal equation is singular for this eigenvalue (e.g. l = 1 on the sphere)."""


class NonzeroMean(RHError):
    """Vorticity with nonzero surface mean has no stream function on a closed surface."""


class CFLViolation(RHError):
    pass


class BlowUp(RHError):
    pass


class ModeAbsent(RHError):
    pass


class PeriodNotCovered(RHError):
    pass


class DegeneratePerturbation(RHError):
    pass


class ConfigError(RHError):
    pass
