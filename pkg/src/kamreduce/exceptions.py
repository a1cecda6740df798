"""Exception hierarchy for the reduction engine.

Every error that the command line maps to a dedicated exit code carries a
``reason()`` string made of ``key=value`` tokens so it can be parsed by
scripts.
"""


class KAMError(Exception):
    """Base class for all engine errors."""

    kind = "KAMError"

    def fields(self):
        return {}

    def reason(self):
        parts = [f"error={self.kind}"]
        for key, value in self.fields().items():
            parts.append(f"{key}={_fmt(value)}")
        parts.append(f"message={str(self)!r}")
        return " ".join(parts)


def _fmt(value):
    if isinstance(value, (tuple, list)):
        return "(" + ",".join(_fmt(v) for v in value) + ")"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ConfigError(KAMError, ValueError):
    kind = "ConfigError"


class UnderResolvedPotential(KAMError, ValueError):
    kind = "UnderResolvedPotential"


class ScheduleError(KAMError):
    kind = "ScheduleError"


class ResonanceViolation(KAMError):
    """A small divisor fell below its admissible threshold."""

    kind = "ResonanceViolation"

    def __init__(self, k, i, j, divisor, threshold, message=None):
        self.k = tuple(int(x) for x in k)
        self.i = int(i)
        self.j = int(j)
        self.divisor = float(divisor)
        self.threshold = float(threshold)
        super().__init__(
            message
            or f"|d|={abs(self.divisor):.3e} below threshold {self.threshold:.3e}"
        )

    def fields(self):
        return {"k": self.k, "i": self.i, "j": self.j, "d": self.divisor,
                "threshold": self.threshold}


class NoConvergence(KAMError):
    kind = "NoConvergence"


class BoundViolation(KAMError):
    kind = "BoundViolation"

    def __init__(self, what, actual, budget, step=None):
        self.what = what
        self.actual = float(actual)
        self.budget = float(budget)
        self.step = step
        super().__init__(f"{what}: {self.actual:.3e} exceeds {self.budget:.3e}")

    def fields(self):
        return {"what": self.what, "step": self.step, "actual": self.actual,
                "budget": self.budget}


class HermiticityError(KAMError):
    kind = "HermiticityError"


class EmptyRetainedSet(KAMError):
    kind = "EmptyRetainedSet"


class InversionError(KAMError):
    kind = "InversionError"


class IntegratorError(KAMError):
    kind = "IntegratorError"


class ArtifactError(KAMError, ValueError):
    """A stored artifact (transform dump, report) is malformed."""

    kind = "ArtifactError"


class VerificationFailed(KAMError):
    kind = "VerificationFailed"
