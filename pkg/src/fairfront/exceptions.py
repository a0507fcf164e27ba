"""Exception types shared across the package."""


class DivergenceError(RuntimeError):
    """An iterate became non-finite or left the trust region.

    ``variable`` names the offending iterate ("w", "v" or "lambda").
    Solvers attach the partial trajectory when one exists.
    """

    def __init__(self, variable, message=None, trajectory=None):
        super().__init__(message or f"divergence detected in variable '{variable}'")
        self.variable = variable
        self.trajectory = trajectory


class ConvergenceError(RuntimeError):
    """An iterative solve hit its iteration cap before reaching tolerance."""

    def __init__(self, message, grad_norm=None):
        super().__init__(message)
        self.grad_norm = grad_norm
