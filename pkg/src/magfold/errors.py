"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant (bad field, bad shape, bad range)."""


class SingularityError(ValueError):
    """A field/energy evaluation was requested closer than the minimum separation guard."""


class DivergenceError(RuntimeError):
    """Integration produced non-finite coordinates; a smaller timestep is advised."""


class ConvergenceError(RuntimeError):
    """An iterative solve (calibration, servo, root bracketing) failed to converge."""
