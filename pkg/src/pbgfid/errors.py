"""Exception types raised by pbgfid."""


class ModelError(ValueError):
    """Invalid physical or discrete model parameters.

    ``problems`` lists each violated constraint separately.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SolverError(RuntimeError):
    """A stationary-distribution solve failed (singular system, no convergence)."""
