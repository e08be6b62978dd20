"""Exception types shared across the package."""


class PolyPuzzleError(Exception):
    """Base class for all package errors."""


class UnsupportedMap(PolyPuzzleError):
    """Operation not available for this polynomial (e.g. rays on non-monic maps)."""


class MultipleFixedPoint(PolyPuzzleError):
    """The two fixed points of the quadratic coincide (parabolic c = 1/4)."""


class RayNearCriticalValue(PolyPuzzleError):
    """Ray descent passed near a critical point of the potential (gradient saddle)."""

    def __init__(self, angle, potential):
        super().__init__(f"ray {angle} stalled near a potential saddle at G~{potential:.3g}")
        self.angle = angle
        self.potential = potential


class TraceDiverged(PolyPuzzleError):
    """Newton correction failed while tracing an external ray."""


class CycleNotFound(PolyPuzzleError):
    """No ray cycle landing at alpha was found up to the period bound."""

    def __init__(self, max_period):
        super().__init__(f"no ray cycle landing at alpha with period <= {max_period}")
        self.max_period = max_period


class LabelAmbiguity(PolyPuzzleError):
    """A post-critical point lies on a cutting ray within tolerance."""


class PullbackBranchClash(PolyPuzzleError):
    """The two inverse branches could not be separated at polyline resolution."""


class OnBoundary(PolyPuzzleError):
    """Query point lies within tolerance of a piece boundary."""


class CautionViolated(PolyPuzzleError):
    """A thickened piece captured the critical point although its base does not."""

    def __init__(self, depth):
        super().__init__(f"thickened piece at depth {depth} captured the critical point")
        self.depth = depth


class OrbitHitsAlpha(PolyPuzzleError):
    """Forward orbit reaches the alpha fixed point; pieces undefined past the hit."""

    def __init__(self, column, steps):
        super().__init__(f"orbit point {column} hits alpha after {steps} steps")
        self.column = column
        self.steps = steps


class BadLevel(PolyPuzzleError):
    """Chosen potential level violates its admissibility conditions."""


class GridTooCoarse(PolyPuzzleError):
    """Level-set component extraction is ambiguous at the resolution cap."""


class EmptyInterior(PolyPuzzleError):
    """Puzzle piece has no deeper piece inside; area ratio undefined."""


class ContainmentFails(PolyPuzzleError):
    """f^p(P_r) does not compactly contain P_r at the available depths."""

    def __init__(self, depth):
        super().__init__(f"no compact containment up to depth {depth}")
        self.depth = depth


class CriticalInPiece(PolyPuzzleError):
    """A piece that must map conformally contains a critical point."""


class CodingCollision(PolyPuzzleError):
    """Two distinct pieces received the same itinerary at grid resolution."""


class BadRadii(PolyPuzzleError):
    """Round annulus radii must satisfy 0 < r < R."""


class ResolutionCap(PolyPuzzleError):
    """Modulus estimate failed to converge before the resolution cap.

    Carries the widest interval obtained so far in ``interval``.
    """

    def __init__(self, interval):
        super().__init__(f"resolution cap reached; widest interval {interval}")
        self.interval = interval


class NoVisitFound(PolyPuzzleError):
    """Critical orbit never visits a piece at the pre-fixed point within budget."""

    def __init__(self, budget):
        super().__init__(f"no visit to a -alpha piece within {budget} orbit points")
        self.budget = budget


class InconclusiveAtBudget(PolyPuzzleError):
    """Certification did not reach its threshold within the depth budget."""

    def __init__(self, ledger):
        super().__init__("divergence not certified within budget")
        self.ledger = ledger
