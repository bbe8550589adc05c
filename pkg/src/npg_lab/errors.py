"""Exception types raised across the package."""


class NumericalFailure(FloatingPointError):
    """A logit or probability became non-finite, or a probability underflowed to 0.

    Carries the iteration ``t``, the sampled action and the step size in effect so
    that a failed run can be reported instead of silently clamped.
    """

    def __init__(self, message, t=None, action=None, eta=None, state=None):
        super().__init__(message)
        self.t = t
        self.action = action
        self.eta = eta
        self.state = state

    def as_dict(self):
        return {
            "message": str(self),
            "t": self.t,
            "action": self.action,
            "eta": self.eta,
            "state": self.state,
        }


class SolveFailure(ArithmeticError):
    """Policy-evaluation linear system is too ill-conditioned to trust."""


class DegenerateInstance(ValueError):
    """Reward vector has a tied argmax where a unique optimal action is required."""


class EmptyWindow(ValueError):
    """No usable samples fall inside the requested fitting window."""


class SaturatedTrace(ValueError):
    """A committal trace hit exact zero before enough samples were collected."""
