"""Exception types raised across the package."""


class HybridSpinError(Exception):
    """Base class for all package errors."""


class NotHermitian(HybridSpinError, ValueError):
    pass


class AmbiguousLabeling(HybridSpinError):
    """Two eigenstates carry (nearly) the same |0>_z weight, so the
    ms = 0 branch cannot be identified. Use raw energies instead."""


class FitDiverged(HybridSpinError):
    pass


class DegenerateData(HybridSpinError, ValueError):
    pass


class NonFiniteInput(HybridSpinError, ValueError):
    pass


class ZeroShape(HybridSpinError, ValueError):
    pass


class ParseError(HybridSpinError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NonMonotoneDepth(HybridSpinError, ValueError):
    pass


class NegativeDensity(HybridSpinError, ValueError):
    pass


class NoDecay(HybridSpinError):
    pass


class GridMismatch(HybridSpinError, ValueError):
    pass


class ConfigError(HybridSpinError):
    pass
