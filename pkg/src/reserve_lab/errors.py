"""Exception types shared across the toolkit."""


class ReserveLabError(Exception):
    """Base class for all toolkit errors."""


class RaggedInput(ReserveLabError):
    """Input matrix is not a valid upper-left run-off triangle."""


class NonMonotone(ReserveLabError):
    """Cumulative claims decrease somewhere (negative increment) in strict mode."""


class ZeroExposure(ReserveLabError):
    """A hazard is requested at a cell with zero exposure (strict mode)."""

    def __init__(self, cohort: int, dev: int):
        self.cohort = cohort
        self.dev = dev
        super().__init__(f"zero exposure at cell (k={cohort}, j={dev})")


class EmptyColumn(ReserveLabError):
    """A development column has no observed cells."""

    def __init__(self, dev: int):
        self.dev = dev
        super().__init__(f"no observed cells in development column j={dev}")


class NotIdentifiable(ReserveLabError):
    """Model design is rank-deficient beyond its identification constraints."""


class NoConvergence(ReserveLabError):
    """Iterative fit hit the iteration cap without meeting the tolerance."""


class SeriesTooShort(ReserveLabError):
    """Effect series is too short for the requested time-series fit."""


class DegenerateHazard(ReserveLabError):
    """Claim development rate at or past the pole of the factor transform."""

    def __init__(self, mu: float, eta: float, cell=None):
        self.mu = mu
        self.eta = eta
        self.cell = cell
        where = f" at cell (k={cell[0]}, j={cell[1]})" if cell is not None else ""
        super().__init__(f"eta*mu = {eta * mu:.6g} >= 1{where}; no finite development factor")


class MissingForecast(ReserveLabError):
    """A lower-triangle cell needs an effect value that was not forecast."""


class ZeroDenominator(ReserveLabError):
    """A ratio (development factor, error incidence) has a zero denominator."""


class SaturatedModel(ReserveLabError):
    """Residual scaling is undefined when parameters equal observations."""


class NonPositiveFitted(ReserveLabError):
    """Deviance residuals require strictly positive fitted values."""


class TooFewDiagonals(ReserveLabError):
    """Holdout split would leave too small a triangle to fit on."""
