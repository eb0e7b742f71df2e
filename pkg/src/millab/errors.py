"""Exception types shared across the package."""


class MillabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(MillabError, ValueError):
    """A config, spec, or argument violates a documented invariant."""


class ConsistencyError(MillabError, ValueError):
    """Structurally inconsistent data (e.g. bag label contradicts its instances)."""


class ShapeError(MillabError, ValueError):
    """Array arguments have incompatible shapes."""


class UndefinedMetricError(MillabError, ValueError):
    """A metric is undefined for the given input (e.g. AP with no positives)."""


class TrainingError(MillabError, RuntimeError):
    """All training runs diverged or training could not proceed."""
