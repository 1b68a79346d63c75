"""Exception types shared across the package.

The CLI maps these onto process exit codes: parameter problems (including
admissibility and degenerate schedules) exit 2, calibration failures exit 3,
and detected invariant violations exit 4.
"""


class ParameterError(ValueError):
    """A caller-supplied parameter is out of range or inconsistent."""


class AdmissibilityError(ParameterError):
    """A control value escapes [0, q_cap]."""


class DegenerateScheduleError(ParameterError):
    """Schedule parameters produce no usable phases for the given horizon."""


class CalibrationError(RuntimeError):
    """A calibration search exhausted its budget without a witness."""


class InvariantError(RuntimeError):
    """An internal invariant (mass conservation, certificate replay) failed."""
