"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(ToolkitError):
    """Invalid scenario, grid, or run configuration."""


class NumericalFailureError(ToolkitError):
    """A solver produced non-finite values.

    Carries the first offending time when known.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SynthesisRefusedError(ToolkitError):
    """The sender pulse never empties the sender to the acceptance cutoff."""


class InconsistentScenarioError(ToolkitError):
    """Synthesis produced a receiver population decreasing at early times."""


class IntegratorFailureError(ToolkitError):
    """The trajectory integrator violated its conservation contract."""


class UnresolvedRegionError(ToolkitError):
    """Root counting could not isolate roots inside a sub-box."""

    def __init__(self, message, box=None):
        super().__init__(message)
        self.box = box
