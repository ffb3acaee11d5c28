"""Exceptions raised by the precoder toolkit."""


class PrecoderError(Exception):
    """Base class for every failure the toolkit reports on purpose."""


class InvalidInput(PrecoderError, ValueError):
    pass


class NotPSD(PrecoderError):
    pass


class NumericalInstability(PrecoderError):
    pass


class AlphaOutOfRange(PrecoderError):
    pass


class RankDeficient(PrecoderError):
    pass


class NotContractive(PrecoderError):
    pass


class UnstableLattice(PrecoderError):
    pass


class UnstableInput(PrecoderError):
    pass


class BranchCut(PrecoderError):
    pass


class ConfigError(PrecoderError):
    pass


class DesignNotConverged(PrecoderError):
    """Interpolation residual stayed above tolerance; `params` holds the best fit found."""

    def __init__(self, residual: float, tol: float, params=None):
        super().__init__(
            f"Lattice design residual {residual:.3e} exceeds tolerance {tol:.1e}. "
            "Try a higher filter order."
        )
        self.residual = residual
        self.tol = tol
        self.params = params

    def __reduce__(self):
        return (DesignNotConverged, (self.residual, self.tol, self.params))


class ReplayMismatch(PrecoderError):
    """A replayed feedback transcript diverged from the recorded decoder digests."""
