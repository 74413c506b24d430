"""Exception hierarchy.

Numerical failures (degeneracy, convergence, gauge corruption) derive from
:class:`NumericalFailure`; the CLI maps them to exit code 3.
"""


class DitrotterError(Exception):
    pass


class ConfigError(DitrotterError, ValueError):
    pass


class InvalidParameter(DitrotterError, ValueError):
    pass


class DimensionMismatch(DitrotterError, ValueError):
    pass


class NotNormalized(DitrotterError, ValueError):
    pass


class NotHermitian(DitrotterError, ValueError):
    def __init__(self, defect, tol):
        super().__init__(f"matrix is not Hermitian: max|H - H^dag| = {defect:.3e} > {tol:.3e}")
        self.defect = defect
        self.tol = tol


class SumMismatch(DitrotterError, ValueError):
    def __init__(self, max_deviation, time):
        super().__init__(
            f"split terms do not sum to the whole schedule: "
            f"max deviation {max_deviation:.3e} at t = {time:.6g}"
        )
        self.max_deviation = max_deviation
        self.time = time


class GridMismatch(DitrotterError, ValueError):
    pass


class BoundaryPoint(DitrotterError, ValueError):
    pass


class LengthMismatch(DitrotterError, ValueError):
    pass


class InvalidBound(DitrotterError, ValueError):
    pass


class NonPositiveValue(DitrotterError, ValueError):
    pass


class TooFewPoints(DitrotterError, ValueError):
    pass


class NumericalFailure(DitrotterError, ArithmeticError):
    pass


class DegenerateSpectrum(NumericalFailure):
    def __init__(self, time, gap):
        super().__init__(f"degenerate spectrum at t = {time:.6g} (gap {gap:.3e})")
        self.time = time
        self.gap = gap


class LevelCrossing(NumericalFailure):
    def __init__(self, time, overlap, reason=None):
        super().__init__(
            f"level tracking lost at t = {time:.6g}: "
            + (reason or f"best overlap {overlap:.3f} < 0.5")
        )
        self.time = time
        self.overlap = overlap


class NonRealIntegrand(NumericalFailure):
    pass


class NonImaginaryBerryTerm(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass
