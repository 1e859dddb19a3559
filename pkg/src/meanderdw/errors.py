"""Exception types raised across the package."""


class GeometryError(ValueError):
    """Invalid or unrealizable channel geometry."""


class DefectError(RuntimeError):
    """Defect injection failed (e.g. roughness severed the channel)."""

    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed


class ConfigError(ValueError):
    """Configuration file error with source location."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class SolverDivergenceError(RuntimeError):
    """Time integration diverged (step size underflow)."""

    def __init__(self, message, time=None, dt=None, max_torque=None):
        super().__init__(message)
        self.time = time
        self.dt = dt
        self.max_torque = max_torque


class RelaxationError(RuntimeError):
    """Energy minimization did not converge within the iteration cap."""

    def __init__(self, message, max_torque=None):
        super().__init__(message)
        self.max_torque = max_torque
