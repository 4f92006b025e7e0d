"""Exception types shared across the toolkit."""


class IsoPrnuError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(IsoPrnuError, ValueError):
    """An argument violates a documented precondition."""


class InvalidSpecError(IsoPrnuError, ValueError):
    """A forgery spec is geometrically inconsistent (e.g. donor overlaps target)."""


class SingularFitError(IsoPrnuError, ValueError):
    """Least-squares design is rank deficient or too ill-conditioned to solve."""


class EmptyResultError(IsoPrnuError, ValueError):
    """An estimator produced no qualifying data (e.g. no flat blocks survived)."""


class DegenerateInputError(IsoPrnuError, ValueError):
    """Input has no usable variation (e.g. standardizing a constant plane)."""


class NoMatchingPredictorError(IsoPrnuError, LookupError):
    """No registered predictor satisfies the one-stop ISO matching rule."""

    def __init__(self, test_iso: float, nearest_iso: float | None):
        self.test_iso = test_iso
        self.nearest_iso = nearest_iso
        if nearest_iso is None:
            msg = f"no predictor registered (test ISO {test_iso:g})"
        else:
            msg = (
                f"no predictor within one stop of ISO {test_iso:g}; "
                f"nearest available is ISO {nearest_iso:g}"
            )
        super().__init__(msg)


class InferenceFailedError(IsoPrnuError, RuntimeError):
    """ISO inference could not produce a vote (e.g. no qualified query patches)."""
