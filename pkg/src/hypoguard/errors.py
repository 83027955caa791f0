"""Semantic exception hierarchy."""


class HypoguardError(Exception):
    """Base class for all package errors."""


class DataError(HypoguardError):
    """Bad or missing input data (CSV rows, patient profiles, configs)."""


class DegenerateDataError(DataError):
    """Data with zero spread where a nondegenerate range is required."""


class ConvergenceError(HypoguardError):
    """Iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SimulationDivergedError(HypoguardError):
    """ODE state became non-finite; carries the divergence time (min)."""

    def __init__(self, message, t_min=None):
        super().__init__(message)
        self.t_min = t_min


class NoEliteMassError(HypoguardError):
    """Every elite sample carried zero likelihood-ratio weight."""


class TrainingFailedError(HypoguardError):
    """Cross-entropy training stalled on every iteration."""
