"""Exception hierarchy shared across the package."""


class GaitbacError(Exception):
    """Base class for all gaitbac errors."""


# --- ingest -------------------------------------------------------------

class MalformedRow(GaitbacError):
    """A sensor-log row failed to parse (bad column count, non-numeric or
    non-finite cell). The message names the file and line."""


class NonMonotonicTime(GaitbacError):
    """Timestamps in a sensor log are not strictly increasing."""


class EmptyRecording(GaitbacError):
    """A sensor log contained no data rows."""


class SchemaViolation(GaitbacError):
    """An EMA document (or file name) does not match the expected schema."""


class DuplicateHourSlot(GaitbacError):
    """Two drink reports landed on the same hour of the same session."""


class InvalidGenderConstant(GaitbacError):
    """Gender string or constant outside the supported set."""


# --- numeric core -------------------------------------------------------

class NonFiniteInput(GaitbacError):
    """A numeric argument was NaN or infinite."""


class TooShort(GaitbacError):
    """Recording shorter than one feature window."""


class DimensionMismatch(GaitbacError):
    """Input vector length does not match the model."""


# --- training -----------------------------------------------------------

class SingularNormalEquations(GaitbacError):
    """Damped normal equations stayed unsolvable after exhausting retries."""


class NonFiniteLoss(GaitbacError):
    """Training objective became NaN or infinite."""


class HessianNotInvertible(GaitbacError):
    """Gauss-Newton Hessian could not be factorized, even with jitter."""


class NonFiniteHyperparameter(GaitbacError):
    """An evidence update produced a non-finite alpha or beta."""


class TooFewGroups(GaitbacError):
    """Episode-wise split requested with fewer than two episode groups."""


# --- baselines ----------------------------------------------------------

class SingularDesign(GaitbacError):
    """Unridged linear regression on a rank-deficient design."""


class NoConvergence(GaitbacError):
    """SVR dual optimization exceeded its pass budget before reaching the
    KKT tolerance."""


# --- evaluation ---------------------------------------------------------

class ZeroVarianceTarget(GaitbacError):
    """Relative error metrics are undefined for a constant target vector."""
