"""Exception hierarchy shared by all warplab services."""

from typing import Optional, Sequence


class WarpLabError(Exception):
    """Base class for every error raised by the services package"""


class OutOfDomain(WarpLabError, ValueError):
    def __init__(self, manifold: str, point: Sequence[float]):
        self.manifold = manifold
        self.point = [float(x) for x in point]
        super().__init__(f"Point {self.point} lies outside the chart box of {manifold}")


class SingularMetric(WarpLabError, ValueError):
    def __init__(self, manifold: str, point: Sequence[float], eigenvalue: float):
        self.manifold = manifold
        self.point = [float(x) for x in point]
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            f"Metric of {manifold} is not positive definite at {self.point} "
            f"(eigenvalue {self.eigenvalue:.3e})"
        )


class ParseError(WarpLabError, ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


class UnknownSymbol(WarpLabError, ValueError):
    def __init__(self, symbol: str, offset: int):
        self.symbol = symbol
        self.offset = offset
        super().__init__(f"Unknown symbol '{symbol}' at byte offset {offset}")


class ArityError(WarpLabError, ValueError):
    pass


class DomainError(WarpLabError, ValueError):
    """Evaluation left the real domain of a primitive (ln, sqrt, division)."""

    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message}: {subexpression}")


class NonPositiveWarp(WarpLabError, ValueError):
    def __init__(self, warp: str, witness: Sequence[float], value: float):
        self.witness = [float(x) for x in witness]
        self.value = float(value)
        super().__init__(f"Warping function {warp} is not positive at {self.witness} (value {self.value:.3e})")


class MixedField(WarpLabError, ValueError):
    pass


class RankDrop(WarpLabError, ValueError):
    def __init__(self, point: Sequence[float], singular_values: Sequence[float]):
        self.point = [float(x) for x in point]
        self.singular_values = [float(s) for s in singular_values]
        super().__init__(f"Numerical rank of the differential is ambiguous at {self.point}: {self.singular_values}")


class NoFibers(WarpLabError, ValueError):
    pass


class DomainExit(WarpLabError, RuntimeError):
    def __init__(self, time: float, point: Sequence[float]):
        self.time = float(time)
        self.point = [float(x) for x in point]
        super().__init__(f"Curve left the chart box at t={self.time:.6f}, point {self.point}")


class StepTooLarge(WarpLabError, RuntimeError):
    def __init__(self, drift: float, dt: float):
        self.drift = float(drift)
        self.dt = float(dt)
        super().__init__(f"Relative energy drift {self.drift:.3e} exceeds 1e-3 with dt={dt}; reduce the step")


class CaseMismatch(WarpLabError, ValueError):
    pass


class DegeneratePlane(WarpLabError, ValueError):
    pass


class NotComputable(WarpLabError, ValueError):
    pass


class InvalidLaunch(WarpLabError, ValueError):
    pass


class ConfigError(WarpLabError):
    """Scenario configuration problem; maps to exit code 2."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        prefix = f"[{location}] " if location else ""
        super().__init__(f"{prefix}{message}")


class UnknownCheck(WarpLabError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"Unknown check: {self.name}"
