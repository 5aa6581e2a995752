"""Exception types shared across the package."""


class BranchflowError(Exception):
    """Base class for all package-specific errors."""


class RuleError(BranchflowError):
    """A branching rule violates a structural requirement."""


class NegativeWeight(RuleError):
    def __init__(self, index, weight):
        self.index = index
        self.weight = weight
        super().__init__(f"transition {index} has negative weight {weight}")


class WeightSumMismatch(RuleError):
    def __init__(self, total):
        self.total = total
        super().__init__(f"transition weights sum to {total}, expected exactly 1")


class AlphaOutOfRange(RuleError):
    """Requested exponent alpha lies outside (1, 2]."""


class UnsupportedCombination(BranchflowError):
    """Scaling mode cannot represent a transition's symbolic action exactly."""


class DivergentLimit(BranchflowError):
    """A monomial keeps a negative power of beta as beta -> 0."""

    def __init__(self, monomial, exponent, coefficient):
        self.monomial = monomial
        self.exponent = exponent
        self.coefficient = coefficient
        super().__init__(
            f"beta -> 0 limit diverges: monomial {monomial} carries "
            f"coefficient {coefficient} at beta^{exponent}"
        )


class PopulationExceeded(BranchflowError):
    """A tree's live population passed the configured cap."""

    def __init__(self, cap, time):
        self.cap = cap
        self.time = time
        super().__init__(f"live population exceeded cap {cap} at t={time:.6g}")


class DerivOrderUnsupported(BranchflowError):
    """A transition pushed a particle's derivative order past the configured maximum."""

    def __init__(self, order, maximum):
        self.order = order
        self.maximum = maximum
        super().__init__(
            f"derivative order {order} exceeds configured maximum {maximum}"
        )


class DerivAtSpaceBoundary(BranchflowError):
    """A derivative-marked particle hit the lateral boundary.

    Boundary data is defined for order-0 atoms only, so such trees cannot be
    scored and the run is rejected."""


class CapExceeded(BranchflowError):
    """At least one tree hit the population cap; the estimate is withheld."""

    def __init__(self, count, n_trees):
        self.count = count
        self.n_trees = n_trees
        super().__init__(
            f"{count} of {n_trees} trees hit the population cap; estimate withheld"
        )


class BlowUpDetected(BranchflowError):
    """The finite-difference solution left the configured amplitude bound."""

    def __init__(self, time, amplitude, bound):
        self.time = time
        self.amplitude = amplitude
        self.bound = bound
        super().__init__(
            f"|u| reached {amplitude:.6g} > bound {bound:.6g} at t={time:.6g}"
        )


class StabilityViolation(BranchflowError):
    """Grid spacing violates the configured dt/h^2 stability ratio."""


class ConfigError(BranchflowError):
    """An experiment configuration file is malformed; message names the field."""

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"config field '{field}': {message}")
