"""Exception hierarchy shared by all fleetlift modules."""


class FleetLiftError(Exception):
    """Base class. ``module`` names the subsystem that raised."""

    module = "fleetlift"

    def __init__(self, message, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module


class DomainError(FleetLiftError, ValueError):
    """An argument lies outside the domain of an operation."""


class InfeasibleError(FleetLiftError):
    """No feasible (finite-cost) solution exists."""

    def __init__(self, message, module=None, stage=None):
        super().__init__(message, module)
        self.stage = stage


class CapacityError(FleetLiftError):
    """A table or enumeration would exceed its configured cap."""


class ModeError(FleetLiftError):
    """The requested solver mode does not apply to the given input."""


class SolverError(FleetLiftError):
    """A numerical routine failed (cycling, singular system, ...)."""


class SchemaError(FleetLiftError, ValueError):
    """A scenario document violates the schema.

    ``pointer`` is the JSON pointer of the offending value.
    """

    module = "scenario"

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
